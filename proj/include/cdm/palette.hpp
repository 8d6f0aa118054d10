#pragma once

#include <array>
#include <cstdint>
#include <vector>

namespace cdm {

using Rgb = std::array<std::uint8_t, 3>;

// Token colors live on the lattice {0,15,30,...,255}^3. White is reserved
// for the page background and never assigned. Pure black is kept as the
// very last entry so ordinary formulas never collide with uncolored ink.
class Palette {
public:
    static constexpr int kStep = 15;
    static constexpr int kCapacity = 5831;

    Palette();

    int capacity() const { return kCapacity; }
    Rgb color(int index) const { return colors_[index]; }
    const std::vector<Rgb>& colors() const { return colors_; }

    // nearest lattice color within the per-channel tolerance, or nullopt-ish
    // failure reported through the bool
    static bool quantize(Rgb in, int tolerance, Rgb& out);

private:
    std::vector<Rgb> colors_;
};

}  // namespace cdm
