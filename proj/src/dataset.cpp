#include "overlay/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include <json.hpp>

#include "overlay/image.hpp"

namespace overlay {

using ojson = nlohmann::ordered_json;

void Manifest::retally() {
    counts = {};
    for (const auto& s : samples)
        ++counts[static_cast<int>(s.split)][static_cast<int>(s.category)];
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest: " + path.string());
    Manifest m;
    std::set<std::string> seen;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError("manifest line " + std::to_string(lineno) +
                              ": invalid record: " + e.what());
        }
        for (const char* field : {"id", "image_path", "category", "split"}) {
            if (!j.contains(field) || !j[field].is_string())
                throw SchemaError("manifest line " + std::to_string(lineno) +
                                  ": missing field \"" + field + "\"");
        }
        ImageSample s;
        s.id = j["id"].get<std::string>();
        s.image_path = j["image_path"].get<std::string>();
        try {
            s.category = category_from_string(j["category"].get<std::string>());
            s.split = split_from_string(j["split"].get<std::string>());
        } catch (const SchemaError& e) {
            throw SchemaError("manifest line " + std::to_string(lineno) + ": " + e.what());
        }
        if (!seen.insert(s.id).second)
            throw SchemaError("manifest line " + std::to_string(lineno) +
                              ": duplicate id \"" + s.id + "\"");
        m.samples.push_back(std::move(s));
    }
    m.retally();
    return m;
}

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& s : manifest.samples) {
        ojson j;
        j["id"] = s.id;
        j["image_path"] = s.image_path;
        j["category"] = to_string(s.category);
        j["split"] = to_string(s.split);
        out << j.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Manifest build_balanced_manifest(
    const std::array<std::vector<ImageSample>, kCategoryCount>& pools,
    int total, Split split, uint64_t seed) {
    if (total < 1) throw ContractError("build_balanced_manifest: total must be >= 1");
    std::array<int, kCategoryCount> want{};
    const int base = total / kCategoryCount;
    const int rem = total % kCategoryCount;
    for (int c = 0; c < kCategoryCount; ++c)
        want[c] = base + (c < rem ? 1 : 0);  // remainder in enum order
    for (int c = 0; c < kCategoryCount; ++c) {
        if (static_cast<int>(pools[c].size()) < want[c])
            throw CapacityError("category \"" + to_string(static_cast<Category>(c)) +
                                "\" has " + std::to_string(pools[c].size()) +
                                " samples, need " + std::to_string(want[c]));
    }
    std::mt19937_64 rng(seed);
    Manifest m;
    for (int c = 0; c < kCategoryCount; ++c) {
        std::vector<size_t> idx(pools[c].size());
        std::iota(idx.begin(), idx.end(), size_t{0});
        // partial Fisher-Yates: the first want[c] slots are the selection
        for (int i = 0; i < want[c]; ++i) {
            size_t j = i + rng() % (idx.size() - i);
            std::swap(idx[i], idx[j]);
        }
        for (int i = 0; i < want[c]; ++i) {
            ImageSample s = pools[c][idx[i]];
            s.split = split;
            m.samples.push_back(std::move(s));
        }
    }
    m.retally();
    return m;
}

std::filesystem::path sidecar_path(const std::filesystem::path& image_path) {
    auto p = image_path;
    p.replace_extension(".tokens");
    return p;
}

std::vector<OcrToken> load_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open sidecar: " + path.string());
    std::vector<OcrToken> tokens;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        ojson j;
        try {
            j = ojson::parse(line);
        } catch (const nlohmann::json::parse_error& e) {
            throw SchemaError("sidecar line " + std::to_string(lineno) + ": " + e.what());
        }
        OcrToken t;
        t.text = j.at("text").get<std::string>();
        t.x = j.at("x").get<double>();
        t.y = j.at("y").get<double>();
        t.w = j.at("w").get<double>();
        t.h = j.at("h").get<double>();
        if (j.contains("image_w")) t.image_w = j["image_w"].get<double>();
        if (j.contains("image_h")) t.image_h = j["image_h"].get<double>();
        tokens.push_back(std::move(t));
    }
    return tokens;
}

void save_sidecar(const std::vector<OcrToken>& tokens,
                  const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    for (const auto& t : tokens) {
        ojson j;
        j["text"] = t.text;
        j["x"] = t.x;
        j["y"] = t.y;
        j["w"] = t.w;
        j["h"] = t.h;
        j["image_w"] = t.image_w;
        j["image_h"] = t.image_h;
        out << j.dump() << "\n";
    }
}

// ---------------------------------------------------------------------------
// Synthetic corpus generation
// ---------------------------------------------------------------------------

namespace {

// 5x7 bitmap glyphs, 5 bits per row, MSB is the left column.
struct Glyph {
    char ch;
    uint8_t rows[7];
};

constexpr Glyph kFont[] = {
    {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
    {'B', {0x1E, 0x11, 0x1E, 0x11, 0x11, 0x11, 0x1E}},
    {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
    {'D', {0x1E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x1E}},
    {'E', {0x1F, 0x10, 0x1E, 0x10, 0x10, 0x10, 0x1F}},
    {'F', {0x1F, 0x10, 0x1E, 0x10, 0x10, 0x10, 0x10}},
    {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0E}},
    {'H', {0x11, 0x11, 0x1F, 0x11, 0x11, 0x11, 0x11}},
    {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
    {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
    {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
    {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
    {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
    {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
    {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
    {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
    {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
    {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
    {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
    {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
    {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x1B, 0x11}},
    {'X', {0x11, 0x0A, 0x04, 0x04, 0x04, 0x0A, 0x11}},
    {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
    {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
    {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
    {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
    {'2', {0x0E, 0x11, 0x01, 0x06, 0x08, 0x10, 0x1F}},
    {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
    {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
    {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
    {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
    {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
    {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
    {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
    {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
};

const uint8_t* glyph_rows(char ch) {
    for (const auto& g : kFont)
        if (g.ch == ch) return g.rows;
    return nullptr;
}

constexpr int kGlyphW = 5;
constexpr int kGlyphH = 7;

const char* const kOverlayWords[] = {"SALE", "50% OFF", "BUY NOW", "FREE",
                                     "SUBSCRIBE", "LIVE", "BREAKING", "WIN BIG",
                                     "LIMITED", "TODAY ONLY"};
const char* const kNaturalWords[] = {"EXIT", "OPEN", "CAFE", "STOP", "MENU",
                                     "HOTEL", "BOOKS", "MARKET", "STATION"};

class Rng {
public:
    explicit Rng(uint64_t seed) : gen_(seed) {}
    double uniform() { return (gen_() >> 11) * (1.0 / 9007199254740992.0); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    int below(int n) { return static_cast<int>(gen_() % static_cast<uint64_t>(n)); }

private:
    std::mt19937_64 gen_;
};

Image make_background(int w, int h, Rng& rng) {
    Image img(w, h);
    const double base = rng.uniform(0.25, 0.6);
    const double gx = rng.uniform(-0.2, 0.2);
    const double gy = rng.uniform(-0.2, 0.2);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            img.at(x, y) = base + gx * x / w + gy * y / h;
    // a few soft blobs to keep the texture non-flat
    const int blobs = 3 + rng.below(4);
    for (int b = 0; b < blobs; ++b) {
        const double cx = rng.uniform(0, w);
        const double cy = rng.uniform(0, h);
        const double r = rng.uniform(0.1, 0.3) * std::min(w, h);
        const double v = rng.uniform(-0.25, 0.25);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                img.at(x, y) += v * std::exp(-d2 / (2 * r * r));
            }
    }
    // per-pixel noise
    for (double& p : img.pixels) p = std::clamp(p + rng.uniform(-0.04, 0.04), 0.0, 1.0);
    return img;
}

struct DrawnBox {
    int min_x = 1 << 30, min_y = 1 << 30, max_x = -1, max_y = -1;
    bool any() const { return max_x >= min_x; }
};

/// Draws one word. shear skews x by row; alpha blends against the background.
DrawnBox draw_word(Image& img, const std::string& word, int x0, int y0, int scale,
                   double ink, double alpha, double shear) {
    DrawnBox box;
    int pen_x = x0;
    for (char ch : word) {
        const uint8_t* rows = ch == ' ' ? nullptr : glyph_rows(ch);
        if (ch != ' ' && rows) {
            for (int gy = 0; gy < kGlyphH; ++gy)
                for (int gx = 0; gx < kGlyphW; ++gx) {
                    if (!(rows[gy] & (0x10 >> gx))) continue;
                    for (int sy = 0; sy < scale; ++sy)
                        for (int sx = 0; sx < scale; ++sx) {
                            const int py = y0 + gy * scale + sy;
                            const int px = pen_x + gx * scale + sx +
                                           static_cast<int>(std::lround(shear * (gy * scale + sy)));
                            if (!img.in_bounds(px, py)) continue;
                            img.at(px, py) = (1.0 - alpha) * img.at(px, py) + alpha * ink;
                            box.min_x = std::min(box.min_x, px);
                            box.min_y = std::min(box.min_y, py);
                            box.max_x = std::max(box.max_x, px);
                            box.max_y = std::max(box.max_y, py);
                        }
                }
        }
        pen_x += (kGlyphW + 1) * scale;
    }
    return box;
}

OcrToken token_from_box(const std::string& text, const DrawnBox& b, const Image& img) {
    OcrToken t;
    t.text = text;
    t.x = b.min_x;
    t.y = b.min_y;
    t.w = b.max_x - b.min_x + 1;
    t.h = b.max_y - b.min_y + 1;
    t.image_w = img.width;
    t.image_h = img.height;
    return t;
}

}  // namespace

Manifest generate_synthetic_corpus(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir) {
    if (spec.count_per_category < 1)
        throw ContractError("count_per_category must be >= 1");
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (!std::filesystem::is_directory(out_dir))
        throw IoError("cannot create output directory: " + out_dir.string());

    Manifest m;
    Rng rng(spec.seed);
    const int W = spec.width, H = spec.height;
    const auto& ov = spec.overlay_style;
    const auto& nat = spec.natural_style;

    for (int c = 0; c < kCategoryCount; ++c) {
        const auto category = static_cast<Category>(c);
        for (int i = 0; i < spec.count_per_category; ++i) {
            Image img = make_background(W, H, rng);
            std::vector<OcrToken> tokens;

            if (category == Category::overlay) {
                // uniform font, solid fill, stacked lines at a fixed left margin
                const int lines = 2 + rng.below(3);
                const double ink = rng.uniform() < 0.5 ? 1.0 : 0.0;
                const double alpha = ov.solid_fill ? 1.0 : 0.85;
                int y = ov.margin_px;
                for (int l = 0; l < lines && y + kGlyphH * ov.font_scale < H; ++l) {
                    const std::string word =
                        kOverlayWords[rng.below(static_cast<int>(std::size(kOverlayWords)))];
                    DrawnBox b = draw_word(img, word, ov.margin_px, y, ov.font_scale,
                                           ink, alpha, 0.0);
                    if (b.any()) {
                        // layout box, not ink extents: all lines share the margin x
                        OcrToken tok;
                        tok.text = word;
                        tok.x = ov.margin_px;
                        tok.y = y;
                        tok.w = std::min<double>(
                            static_cast<int>(word.size()) * (kGlyphW + 1) * ov.font_scale -
                                ov.font_scale,
                            W - ov.margin_px - 1);
                        tok.h = kGlyphH * ov.font_scale;
                        tok.image_w = W;
                        tok.image_h = H;
                        tokens.push_back(std::move(tok));
                    }
                    y += kGlyphH * ov.font_scale + 2 * ov.font_scale + 2;
                }
            } else if (category == Category::natural) {
                // text lives on a rendered object, warped and blended in
                const int nwords = 1 + rng.below(2);
                for (int t = 0; t < nwords; ++t) {
                    const std::string word =
                        kNaturalWords[rng.below(static_cast<int>(std::size(kNaturalWords)))];
                    const int scale = std::max(1, ov.font_scale - rng.below(2));
                    const int tw = static_cast<int>(word.size()) * (kGlyphW + 1) * scale;
                    const int th = kGlyphH * scale;
                    const int sign_w = tw + 8, sign_h = th + 8;
                    const int sx = 4 + rng.below(std::max(1, W - sign_w - 8));
                    const int sy = H / 4 + rng.below(std::max(1, H / 2 - sign_h));
                    const double sign_v = rng.uniform(0.15, 0.85);
                    for (int y = sy; y < std::min(H, sy + sign_h); ++y)
                        for (int x = sx; x < std::min(W, sx + sign_w); ++x)
                            img.at(x, y) = 0.6 * img.at(x, y) + 0.4 * sign_v;
                    const double ink = sign_v > 0.5 ? 0.05 : 0.95;
                    const double shear = nat.warp * rng.uniform(-1.0, 1.0);
                    DrawnBox b = draw_word(img, word, sx + 4, sy + 4, scale, ink,
                                           nat.alpha_blend, shear);
                    if (b.any()) tokens.push_back(token_from_box(word, b, img));
                }
            }
            // Category::none: background only, empty sidecar

            std::ostringstream name;
            name << to_string(spec.split) << "_" << to_string(category) << "_";
            name.fill('0');
            name.width(4);
            name << i;
            const auto img_path = out_dir / (name.str() + ".pgm");
            write_pgm(img, img_path);
            save_sidecar(tokens, sidecar_path(img_path));

            ImageSample s;
            s.id = name.str();
            s.image_path = img_path.string();
            s.category = category;
            s.split = spec.split;
            m.samples.push_back(std::move(s));
        }
    }
    m.retally();
    return m;
}

}  // namespace overlay
