#include "overlay/image.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "overlay/errors.hpp"

namespace overlay {

void write_pgm(const Image& img, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open for writing: " + path.string());
    out << "P5\n" << img.width << " " << img.height << "\n255\n";
    std::vector<uint8_t> row(static_cast<size_t>(img.width));
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            double v = std::clamp(img.at(x, y), 0.0, 1.0);
            row[static_cast<size_t>(x)] = static_cast<uint8_t>(std::lround(v * 255.0));
        }
        out.write(reinterpret_cast<const char*>(row.data()), img.width);
    }
    if (!out) throw IoError("write failed: " + path.string());
}

namespace {

int next_pnm_int(std::istream& in) {
    // Skips whitespace and '#' comment lines.
    for (;;) {
        int c = in.peek();
        if (c == '#') {
            std::string line;
            std::getline(in, line);
        } else if (std::isspace(c)) {
            in.get();
        } else {
            break;
        }
    }
    int v = 0;
    if (!(in >> v)) throw SchemaError("malformed PGM header");
    return v;
}

}  // namespace

Image read_pgm(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::string magic(2, '\0');
    in.read(magic.data(), 2);
    if (magic != "P5") throw SchemaError("not a binary PGM: " + path.string());
    int w = next_pnm_int(in);
    int h = next_pnm_int(in);
    int maxval = next_pnm_int(in);
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        throw SchemaError("unsupported PGM dimensions in " + path.string());
    in.get();  // single whitespace after maxval
    Image img(w, h);
    std::vector<uint8_t> raw(static_cast<size_t>(w) * h);
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
    if (in.gcount() != static_cast<std::streamsize>(raw.size()))
        throw SchemaError("truncated PGM: " + path.string());
    for (size_t i = 0; i < raw.size(); ++i)
        img.pixels[i] = static_cast<double>(raw[i]) / maxval;
    return img;
}

Image resize_area(const Image& img, int out_w, int out_h) {
    Image out(out_w, out_h);
    const double sx = static_cast<double>(img.width) / out_w;
    const double sy = static_cast<double>(img.height) / out_h;
    for (int oy = 0; oy < out_h; ++oy) {
        int y0 = static_cast<int>(std::floor(oy * sy));
        int y1 = std::max(y0 + 1, static_cast<int>(std::ceil((oy + 1) * sy)));
        y1 = std::min(y1, img.height);
        for (int ox = 0; ox < out_w; ++ox) {
            int x0 = static_cast<int>(std::floor(ox * sx));
            int x1 = std::max(x0 + 1, static_cast<int>(std::ceil((ox + 1) * sx)));
            x1 = std::min(x1, img.width);
            double sum = 0.0;
            int n = 0;
            for (int y = y0; y < y1; ++y)
                for (int x = x0; x < x1; ++x) {
                    sum += img.at(x, y);
                    ++n;
                }
            out.at(ox, oy) = n > 0 ? sum / n : 0.0;
        }
    }
    return out;
}

std::vector<uint8_t> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path.string());
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    return bytes;
}

}  // namespace overlay
