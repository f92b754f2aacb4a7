#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <utility>
#include <vector>

#include "overlay/dataset.hpp"
#include "overlay/image.hpp"
#include "overlay/verdict.hpp"

namespace overlay {

// Fused classifier: a character-level recurrent encoder over OCR text, a
// recurrent encoder over per-token box geometry, a small convolutional image
// encoder, concatenation, and an affine head with a logistic output.

inline constexpr int kCharTableSize = 97;  // printable ASCII 32..127 + unknown
inline constexpr int kPosFeatureDim = 8;

struct FusionConfig {
    int char_embed_dim = 16;
    int text_hidden = 32;
    int pos_hidden = 16;
    int image_feature = 32;
    std::array<int, 3> conv_channels{8, 16, 32};
    int encoder_input = 32;  // images are area-resized to this square
    int max_tokens = 32;
    int max_chars = 256;

    bool operator==(const FusionConfig&) const = default;
};

/// All weights live in one flat array; offsets are derived from the config.
struct FusionParams {
    FusionConfig config;
    std::vector<double> flat;
};

size_t param_count(const FusionConfig& config);
FusionParams init_params(const FusionConfig& config, uint64_t seed);

/// Versioned checkpoint; loading rejects shape-mismatched files.
void save_checkpoint(const FusionParams& params, const std::filesystem::path& path);
FusionParams load_checkpoint(const std::filesystem::path& path);

struct TrainRecord {
    std::vector<OcrToken> tokens;
    Image image;
    BinaryLabel label = BinaryLabel::negative;
};

/// Reads the sample's image and token sidecar; label via category_to_binary.
TrainRecord load_record(const ImageSample& sample);

using PositionalFeature = std::array<double, kPosFeatureDim>;

/// Normalized box geometry per token: x/W, y/H, w/W, h/H, center-x/W,
/// center-y/H, aspect w/h clamped to [0.05, 20], area (w*h)/(W*H).
std::vector<PositionalFeature> encode_positions(const std::vector<OcrToken>& tokens);

/// Overlay probability, strictly inside (0,1). All-zero params give 0.5.
double forward(const FusionParams& params, const TrainRecord& record);

/// Mean binary cross-entropy over the batch (probabilities clamped to
/// [1e-7, 1-1e-7]) and its gradient, same shape as params.flat.
std::pair<double, std::vector<double>> loss_and_grad(
    const FusionParams& params, const std::vector<TrainRecord>& batch);

struct TrainConfig {
    int epochs = 200;
    double learning_rate = 0.05;
    uint64_t seed = 1;
    int batch_size = 8;
};

struct EpochStats {
    double loss = 0.0;
    double accuracy = 0.0;
};

struct TrainResult {
    FusionParams params;
    std::vector<EpochStats> trace;
};

/// Plain SGD with seeded shuffling; deterministic, single-threaded.
TrainResult train(const std::vector<TrainRecord>& records,
                  const FusionConfig& model_config, const TrainConfig& config);

/// Positive iff probability >= 0.5 (ties positive); confidence is the
/// probability or its complement.
OverlayVerdict detect_fusion(const FusionParams& params, const TrainRecord& record);

}  // namespace overlay
