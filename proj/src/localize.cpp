#include "cdm/localize.hpp"

#include <algorithm>
#include <map>

namespace cdm {

namespace {

struct Extent {
    int x1, y1, x2, y2;
    long pixels = 0;
};

}  // namespace

ElementSet localize(const RasterImage& img, const ColoredSource& src,
                    const LocalizeOptions& opts) {
    ElementSet out;
    out.image_width = img.width;
    out.image_height = img.height;

    std::map<Rgb, Extent> extents;
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            Rgb px = img.at(x, y);
            if (px[0] == 255 && px[1] == 255 && px[2] == 255) continue;
            Rgb q;
            if (!Palette::quantize(px, opts.tolerance, q)) continue;
            auto it = src.assignment.find(q);
            if (it == src.assignment.end()) continue;  // uncolored ink
            auto [ext, inserted] = extents.try_emplace(q, Extent{x, y, x, y});
            if (!inserted) {
                ext->second.x1 = std::min(ext->second.x1, x);
                ext->second.y1 = std::min(ext->second.y1, y);
                ext->second.x2 = std::max(ext->second.x2, x);
                ext->second.y2 = std::max(ext->second.y2, y);
            }
            ++ext->second.pixels;
        }
    }

    int seq_len = static_cast<int>(src.tokens.tokens.size());
    for (const auto& [rgb, info] : src.assignment) {
        auto it = extents.find(rgb);
        if (it == extents.end() || it->second.pixels < opts.min_pixels) {
            ++out.missing_colors;  // zero-extent glyph or speckle, dropped
            continue;
        }
        const Extent& e = it->second;
        Element el;
        el.token = src.tokens.tokens[info.order_index];
        el.bbox = {e.x1, e.y1, e.x2, e.y2};
        el.norm_bbox = {
            static_cast<double>(e.x1) / img.width,
            static_cast<double>(e.y1) / img.height,
            static_cast<double>(e.x2) / img.width,
            static_cast<double>(e.y2) / img.height,
        };
        el.norm_order =
            static_cast<double>(info.order_index) / std::max(1, seq_len - 1);
        el.color = rgb;
        out.elements.push_back(std::move(el));
    }
    std::sort(out.elements.begin(), out.elements.end(),
              [](const Element& a, const Element& b) {
                  return a.token.order_index < b.token.order_index;
              });
    return out;
}

}  // namespace cdm
