#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cdm/palette.hpp"

namespace cdm {

// Row-major RGB raster, white background.
struct RasterImage {
    int width = 0;
    int height = 0;
    int dpi = 0;
    std::vector<std::uint8_t> pixels;  // width*height*3

    static RasterImage blank(int w, int h, int dpi);

    Rgb at(int x, int y) const {
        auto i = static_cast<std::size_t>(y * width + x) * 3;
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    void set(int x, int y, Rgb c) {
        auto i = static_cast<std::size_t>(y * width + x) * 3;
        pixels[i] = c[0];
        pixels[i + 1] = c[1];
        pixels[i + 2] = c[2];
    }
};

// File IO. Readers dispatch on magic bytes (PNG or binary/ASCII PPM);
// both throw RenderFailure{RasterError} on malformed input.
RasterImage read_image(const std::string& path);
void write_png(const RasterImage& img, const std::string& path);
void write_ppm(const RasterImage& img, const std::string& path);

}  // namespace cdm
