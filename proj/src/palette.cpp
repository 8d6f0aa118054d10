#include "cdm/palette.hpp"

#include <cmath>

namespace cdm {

Palette::Palette() {
    colors_.reserve(kCapacity);
    for (int r = 0; r <= 255; r += kStep)
        for (int g = 0; g <= 255; g += kStep)
            for (int b = 0; b <= 255; b += kStep) {
                if (r == 0 && g == 0 && b == 0) continue;       // appended last
                if (r == 255 && g == 255 && b == 255) continue; // background
                colors_.push_back({static_cast<std::uint8_t>(r),
                                   static_cast<std::uint8_t>(g),
                                   static_cast<std::uint8_t>(b)});
            }
    colors_.push_back({0, 0, 0});
}

bool Palette::quantize(Rgb in, int tolerance, Rgb& out) {
    for (int c = 0; c < 3; ++c) {
        int v = in[c];
        int q = ((v + kStep / 2) / kStep) * kStep;
        if (q > 255) q = 255;
        if (std::abs(q - v) > tolerance) return false;
        out[c] = static_cast<std::uint8_t>(q);
    }
    return true;
}

}  // namespace cdm
