#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace uwno {

// Decoded 8-bit image, row-major interleaved; channels is 1 (gray) or 3 (rgb).
struct ImageU8 {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<uint8_t> pixels;
};

// Reads an 8-bit non-interlaced PNG (gray, gray+alpha, rgb or rgba; alpha is
// dropped). Throws std::runtime_error naming the path on any problem.
ImageU8 read_png(const std::string& path);

void write_png_gray(const std::string& path, int width, int height, const uint8_t* pixels);
void write_png_rgb(const std::string& path, int width, int height, const uint8_t* pixels);

} // namespace uwno
