#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "overlay/types.hpp"

namespace overlay {

/// One detected (or ground-truth) text fragment with pixel geometry.
struct OcrToken {
    std::string text;
    double x = 0, y = 0, w = 0, h = 0;
    double image_w = 0, image_h = 0;

    bool operator==(const OcrToken&) const = default;
};

struct Manifest {
    std::vector<ImageSample> samples;

    /// Per-split, per-category tallies.
    std::array<std::array<int, kCategoryCount>, 2> counts{};

    void retally();
    int count(Split s, Category c) const {
        return counts[static_cast<int>(s)][static_cast<int>(c)];
    }
    bool operator==(const Manifest& other) const { return samples == other.samples; }
};

struct OverlayStyle {
    int font_scale = 2;
    bool solid_fill = true;
    int margin_px = 8;
};

struct NaturalStyle {
    double warp = 0.35;       // horizontal shear per glyph row
    double alpha_blend = 0.7; // ink opacity against the background
};

/// Seed fully determines the corpus: same spec, same bytes (one platform).
struct SyntheticSpec {
    uint64_t seed = 0;
    int count_per_category = 1;
    int width = 128;
    int height = 128;
    OverlayStyle overlay_style;
    NaturalStyle natural_style;
    Split split = Split::train;
};

/// Line-delimited manifest, one sample per line.
Manifest load_manifest(const std::filesystem::path& path);
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// Draws a balanced manifest from per-category pools. Per-category counts
/// differ by at most 1; the remainder goes to categories in enum order
/// (overlay, natural, none). Selection is deterministic given the seed.
Manifest build_balanced_manifest(
    const std::array<std::vector<ImageSample>, kCategoryCount>& pools,
    int total, Split split, uint64_t seed);

/// Writes count_per_category images per category into out_dir plus a
/// ground-truth token sidecar per image, and returns their manifest.
Manifest generate_synthetic_corpus(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir);

/// Sidecar path for an image: same stem, ".tokens" extension.
std::filesystem::path sidecar_path(const std::filesystem::path& image_path);
std::vector<OcrToken> load_sidecar(const std::filesystem::path& path);
void save_sidecar(const std::vector<OcrToken>& tokens,
                  const std::filesystem::path& path);

}  // namespace overlay
