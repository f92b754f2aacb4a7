#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

namespace overlay {

/// Grayscale raster, pixel values in [0,1], row-major.
struct Image {
    int width = 0;
    int height = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int w, int h, double fill = 0.0)
        : width(w), height(h), pixels(static_cast<size_t>(w) * h, fill) {}

    double& at(int x, int y) { return pixels[static_cast<size_t>(y) * width + x]; }
    double at(int x, int y) const { return pixels[static_cast<size_t>(y) * width + x]; }
    bool in_bounds(int x, int y) const {
        return x >= 0 && x < width && y >= 0 && y < height;
    }
};

/// Binary PGM (P5, 8-bit). Deterministic bytes for a given Image.
void write_pgm(const Image& img, const std::filesystem::path& path);
Image read_pgm(const std::filesystem::path& path);

/// Area-average resize to a fixed square, used as the fusion encoder input.
Image resize_area(const Image& img, int out_w, int out_h);

/// Raw file bytes, for passing an image by value across the client boundary.
std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace overlay
