#include <doctest.h>

#include <random>

#include "cdm/localize.hpp"

using namespace cdm;

namespace {

const Palette& palette() {
    static Palette p;
    return p;
}

}  // namespace

TEST_CASE("stub-rendered a+b localizes to three disjoint elements") {
    auto src = assign_colors(tokenize("a + b"), palette());
    auto img = stub_render(src, RenderConfig{});
    auto set = localize(img, src);

    REQUIRE(set.elements.size() == 3);
    CHECK(set.missing_colors == 0);
    CHECK(set.elements[0].token.text == "a");
    CHECK(set.elements[1].token.text == "+");
    CHECK(set.elements[2].token.text == "b");

    for (std::size_t i = 0; i < 3; ++i) {
        const auto& e = set.elements[i];
        CHECK(e.bbox.x2 - e.bbox.x1 + 1 == 8);
        CHECK(e.bbox.y2 - e.bbox.y1 + 1 == 12);
        if (i > 0) CHECK(e.bbox.x1 > set.elements[i - 1].bbox.x2);
    }
    // blocks at relative offsets 0, 12, 24
    CHECK(set.elements[1].bbox.x1 - set.elements[0].bbox.x1 == 12);
    CHECK(set.elements[2].bbox.x1 - set.elements[0].bbox.x1 == 24);

    // normalized order over the 3-token sequence
    CHECK(set.elements[0].norm_order == doctest::Approx(0.0));
    CHECK(set.elements[1].norm_order == doctest::Approx(0.5));
    CHECK(set.elements[2].norm_order == doctest::Approx(1.0));
}

TEST_CASE("all-white image from an empty source gives an empty set") {
    auto src = assign_colors(tokenize(""), palette());
    auto img = stub_render(src, RenderConfig{});
    auto set = localize(img, src);
    CHECK(set.elements.empty());
    CHECK(set.missing_colors == 0);
}

TEST_CASE("single-pixel regions are dropped as speckle") {
    auto src = assign_colors(tokenize("a"), palette());
    auto img = RasterImage::blank(10, 10, 0);
    img.set(5, 5, Rgb{0, 0, 15});

    LocalizeOptions opts;
    opts.min_pixels = 2;
    auto set = localize(img, src, opts);
    CHECK(set.elements.empty());
    CHECK(set.missing_colors == 1);

    opts.min_pixels = 1;
    auto kept = localize(img, src, opts);
    REQUIRE(kept.elements.size() == 1);
    CHECK(kept.elements[0].bbox.x1 == 5);
    CHECK(kept.elements[0].bbox.x2 == 5);
}

TEST_CASE("quantization round-trips lattice colors within tolerance") {
    std::mt19937 rng(3);
    for (int iter = 0; iter < 500; ++iter) {
        Rgb lattice = palette().color(static_cast<int>(rng() % 5831));
        Rgb noisy;
        for (int c = 0; c < 3; ++c) {
            int delta = static_cast<int>(rng() % 15) - 7;
            int v = std::clamp(int(lattice[c]) + delta, 0, 255);
            // stay within the tolerance band around the lattice value
            if (std::abs(v - int(lattice[c])) > 7) v = lattice[c];
            noisy[c] = static_cast<std::uint8_t>(v);
        }
        Rgb q;
        REQUIRE(Palette::quantize(noisy, 7, q));
        CHECK(q == lattice);
    }
}

TEST_CASE("colors outside the tolerance band are rejected") {
    Rgb q;
    // with the maximum tolerance of 7 every value resolves to its nearest
    // lattice point; tighter tolerances reject in-between blends
    CHECK(Palette::quantize(Rgb{8, 8, 8}, 7, q));
    CHECK(q == Rgb{15, 15, 15});
    CHECK(!Palette::quantize(Rgb{8, 8, 8}, 3, q));
    CHECK(Palette::quantize(Rgb{22, 0, 0}, 7, q));
    CHECK(q == Rgb{15, 0, 0});
}

TEST_CASE("bboxes stay inside the image and element count matches") {
    std::mt19937 rng(5);
    const std::vector<std::string> atoms = {"a", "y", "7", "+", "\\beta", "("};
    for (int iter = 0; iter < 50; ++iter) {
        std::string s;
        int n = 1 + static_cast<int>(rng() % 6);
        for (int i = 0; i < n; ++i) {
            if (rng() % 4 == 0)
                s += "\\frac{" + atoms[rng() % atoms.size()] + "}{" +
                     atoms[rng() % atoms.size()] + "} ";
            else if (rng() % 4 == 1)
                s += atoms[rng() % atoms.size()] + "^{" +
                     atoms[rng() % atoms.size()] + "} ";
            else
                s += atoms[rng() % atoms.size()] + " ";
        }
        auto seq = tokenize(s);
        auto src = assign_colors(seq, palette());
        auto img = stub_render(src, RenderConfig{});
        auto set = localize(img, src);

        CHECK(static_cast<int>(set.elements.size()) == seq.colorable_count);
        for (const auto& e : set.elements) {
            CHECK(e.bbox.x1 >= 0);
            CHECK(e.bbox.y1 >= 0);
            CHECK(e.bbox.x2 < img.width);
            CHECK(e.bbox.y2 < img.height);
            CHECK(e.bbox.x1 <= e.bbox.x2);
            CHECK(e.bbox.y1 <= e.bbox.y2);
            for (double v : e.norm_bbox) {
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
            }
            CHECK(e.norm_order >= 0.0);
            CHECK(e.norm_order <= 1.0);
        }
    }
}
