#pragma once

// Element extraction: scan a rendered image for each assigned color and
// produce one bounding box per glyph token.

#include <array>
#include <vector>

#include "cdm/render.hpp"

namespace cdm {

struct BBox {
    int x1 = 0, y1 = 0, x2 = 0, y2 = 0;  // inclusive, origin top-left
};

struct Element {
    Token token;
    BBox bbox;
    std::array<double, 4> norm_bbox{};  // divided by image width/height
    double norm_order = 0.0;            // order_index / max(1, N-1)
    Rgb color{};
};

struct ElementSet {
    std::vector<Element> elements;
    int image_width = 0;
    int image_height = 0;
    // assigned colors that produced fewer than min_pixels matching pixels
    int missing_colors = 0;
};

struct LocalizeOptions {
    int tolerance = 7;   // per-channel quantization slack, in [0,7]
    int min_pixels = 2;  // below this a region is treated as speckle
};

ElementSet localize(const RasterImage& img, const ColoredSource& src,
                    const LocalizeOptions& opts = {});

}  // namespace cdm
