#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "cdm/errors.hpp"
#include "cdm/render.hpp"

using namespace cdm;

namespace {

const Palette& palette() {
    static Palette p;
    return p;
}

std::set<Rgb> distinct_nonwhite(const RasterImage& img) {
    std::set<Rgb> out;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            Rgb c = img.at(x, y);
            if (c != Rgb{255, 255, 255}) out.insert(c);
        }
    return out;
}

}  // namespace

TEST_CASE("palette invariants") {
    const auto& colors = palette().colors();
    REQUIRE(static_cast<int>(colors.size()) == Palette::kCapacity);
    CHECK(colors.size() == 5831);

    std::set<Rgb> seen;
    for (const auto& c : colors) {
        CHECK(c[0] % 15 == 0);
        CHECK(c[1] % 15 == 0);
        CHECK(c[2] % 15 == 0);
        CHECK(c != Rgb{255, 255, 255});
        seen.insert(c);
    }
    CHECK(seen.size() == colors.size());

    // deterministic ordering, starting at (0,0,15)
    CHECK(colors[0] == Rgb{0, 0, 15});
    CHECK(colors[1] == Rgb{0, 0, 30});
    Palette again;
    CHECK(again.colors() == colors);
}

TEST_CASE("assign_colors walks the palette in token order") {
    auto src = assign_colors(tokenize("a + b"), palette());
    REQUIRE(src.assignment.size() == 3);
    CHECK(src.assignment.at(Rgb{0, 0, 15}).token_text == "a");
    CHECK(src.assignment.at(Rgb{0, 0, 30}).token_text == "+");
    CHECK(src.assignment.at(Rgb{0, 0, 45}).token_text == "b");
    CHECK(src.latex.find("\\mathcolor[RGB]{0,0,15}{a}") != std::string::npos);
}

TEST_CASE("assign_colors on an empty sequence") {
    auto src = assign_colors(tokenize(""), palette());
    CHECK(src.assignment.empty());
    CHECK(src.latex.empty());
}

TEST_CASE("palette exhaustion is reported") {
    TokenSequence seq;
    for (int i = 0; i < 5832; ++i) {
        Token t;
        t.text = "x";
        t.kind = TokenKind::Char;
        t.order_index = i;
        seq.tokens.push_back(t);
    }
    seq.colorable_count = 5832;
    CHECK_THROWS_AS(assign_colors(seq, palette()), PaletteExhausted);
}

TEST_CASE("structural tokens stay uncolored in the emitted latex") {
    auto src = assign_colors(tokenize("x ^ { 2 }"), palette());
    CHECK(src.assignment.size() == 2);
    // the script marker and braces are outside any color group
    CHECK(src.latex.find("^") != std::string::npos);
    CHECK(src.latex.find("\\mathcolor[RGB]{0,0,15}{x}") != std::string::npos);
    CHECK(src.latex.find("\\mathcolor[RGB]{0,0,30}{2}") != std::string::npos);
}

TEST_CASE("nested colors for commands with arguments") {
    auto src = assign_colors(tokenize("\\frac{a}{b}"), palette());
    // \frac carries the first color, its arguments override inside
    auto frac_pos = src.latex.find("\\mathcolor[RGB]{0,0,15}{\\frac");
    REQUIRE(frac_pos != std::string::npos);
    CHECK(src.latex.find("\\mathcolor[RGB]{0,0,30}{a}") != std::string::npos);
    CHECK(src.latex.find("\\mathcolor[RGB]{0,0,45}{b}") != std::string::npos);
}

TEST_CASE("sized delimiters are rendered bare so color groups stay balanced") {
    auto src = assign_colors(tokenize("\\left( x \\right)"), palette());
    CHECK(src.latex.find("\\left") == std::string::npos);
    CHECK(src.latex.find("{(}") != std::string::npos);
    CHECK(src.latex.find("{)}") != std::string::npos);
    // token identity is preserved in the assignment
    CHECK(src.assignment.at(Rgb{0, 0, 15}).token_text == "\\left(");
}

TEST_CASE("stub layout: blocks advance 12px with a common baseline") {
    RenderConfig cfg;
    auto src = assign_colors(tokenize("a + b"), palette());
    auto img = stub_render(src, cfg);

    auto colors = distinct_nonwhite(img);
    REQUIRE(colors.size() == 3);

    // recover each block extent
    struct Box {
        int x1 = 1 << 30, y1 = 1 << 30, x2 = -1, y2 = -1;
    };
    std::map<Rgb, Box> boxes;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            Rgb c = img.at(x, y);
            if (c == Rgb{255, 255, 255}) continue;
            auto& b = boxes[c];
            b.x1 = std::min(b.x1, x);
            b.y1 = std::min(b.y1, y);
            b.x2 = std::max(b.x2, x);
            b.y2 = std::max(b.y2, y);
        }
    Box a = boxes.at(Rgb{0, 0, 15});
    Box plus = boxes.at(Rgb{0, 0, 30});
    Box b = boxes.at(Rgb{0, 0, 45});
    CHECK(a.x2 - a.x1 + 1 == 8);
    CHECK(a.y2 - a.y1 + 1 == 12);
    CHECK(plus.x1 - a.x1 == 12);
    CHECK(b.x1 - a.x1 == 24);
    CHECK(a.y1 == plus.y1);
    CHECK(a.y2 == b.y2);
}

TEST_CASE("stub layout: superscript is raised 6px at 60% scale") {
    RenderConfig cfg;
    auto src = assign_colors(tokenize("x ^ { 2 }"), palette());
    auto img = stub_render(src, cfg);

    struct Box {
        int x1 = 1 << 30, y1 = 1 << 30, x2 = -1, y2 = -1;
    };
    std::map<Rgb, Box> boxes;
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            Rgb c = img.at(x, y);
            if (c == Rgb{255, 255, 255}) continue;
            auto& box = boxes[c];
            box.x1 = std::min(box.x1, x);
            box.y1 = std::min(box.y1, y);
            box.x2 = std::max(box.x2, x);
            box.y2 = std::max(box.y2, y);
        }
    REQUIRE(boxes.size() == 2);
    Box base = boxes.at(Rgb{0, 0, 15});
    Box sup = boxes.at(Rgb{0, 0, 30});
    CHECK(sup.x2 - sup.x1 + 1 == 5);  // lround(8 * 0.6)
    CHECK(sup.y2 - sup.y1 + 1 == 7);  // lround(12 * 0.6)
    CHECK(base.y2 - sup.y2 == 6);     // raised by the script offset
}

TEST_CASE("stub render of nothing is all white") {
    RenderConfig cfg;
    auto src = assign_colors(tokenize(""), palette());
    auto img = stub_render(src, cfg);
    CHECK(img.width > 0);
    CHECK(img.height > 0);
    CHECK(distinct_nonwhite(img).empty());
}

TEST_CASE("stub render is byte-identical across runs") {
    RenderConfig cfg;
    auto src = assign_colors(tokenize("\\frac{a+1}{b} + \\sqrt{x^2}"), palette());
    auto img1 = stub_render(src, cfg);
    auto img2 = stub_render(src, cfg);
    CHECK(img1.width == img2.width);
    CHECK(img1.height == img2.height);
    CHECK(img1.pixels == img2.pixels);
}

TEST_CASE("truncated environment fails to compile under the stub engine") {
    RenderConfig cfg;
    auto seq = tokenize("z = \\left( \\begin{array}{cc} x \\\\ y");
    auto src = assign_colors(seq, palette());
    try {
        stub_render(src, cfg);
        FAIL("expected RenderFailure");
    } catch (const RenderFailure& e) {
        CHECK(e.kind == RenderErrorKind::CompileError);
    }
}

TEST_CASE("color count in the raster equals the colorable count") {
    RenderConfig cfg;
    std::mt19937 rng(11);
    const std::vector<std::string> atoms = {"a", "b", "x", "2", "+", "=",
                                            "\\alpha", "\\sin", "(", ")"};
    for (int iter = 0; iter < 60; ++iter) {
        std::string s;
        int n = 1 + static_cast<int>(rng() % 7);
        for (int i = 0; i < n; ++i) {
            switch (rng() % 6) {
                case 0: s += "\\frac{" + atoms[rng() % atoms.size()] + "}{" +
                             atoms[rng() % atoms.size()] + "} "; break;
                case 1: s += atoms[rng() % atoms.size()] + "^{" +
                             atoms[rng() % atoms.size()] + "} "; break;
                case 2: s += atoms[rng() % atoms.size()] + "_" +
                             atoms[rng() % atoms.size()] + " "; break;
                case 3: s += "\\sqrt{" + atoms[rng() % atoms.size()] + "} "; break;
                default: s += atoms[rng() % atoms.size()] + " "; break;
            }
        }
        auto seq = tokenize(s);
        auto src = assign_colors(seq, palette());
        auto img = stub_render(src, cfg);
        CHECK(distinct_nonwhite(img).size() ==
              static_cast<std::size_t>(seq.colorable_count));
    }
}

TEST_CASE("subprocess templates drive the tex path") {
    namespace fs = std::filesystem;
    auto work = fs::temp_directory_path() / "cdm_render_test";
    fs::remove_all(work);
    fs::create_directories(work);

    auto src = assign_colors(tokenize("a"), palette());
    RenderConfig cfg;
    cfg.engine = RenderEngine::Tex;
    cfg.timeout_s = 5.0;

    SUBCASE("fake toolchain produces a readable raster") {
        cfg.engine_command = "cp {tex} {dir}/formula.pdf";
        cfg.raster_command =
            "printf 'P6\\n2 1\\n255\\n\\377\\377\\377\\000\\000\\017' > {out}.ppm";
        auto img = render(src, cfg);
        CHECK(img.width == 2);
        CHECK(img.height == 1);
        CHECK(img.at(0, 0) == Rgb{255, 255, 255});
        CHECK(img.at(1, 0) == Rgb{0, 0, 15});
    }

    SUBCASE("compiler failure maps to CompileError") {
        cfg.engine_command = "false";
        try {
            render(src, cfg);
            FAIL("expected RenderFailure");
        } catch (const RenderFailure& e) {
            CHECK(e.kind == RenderErrorKind::CompileError);
        }
    }

    SUBCASE("engine timeout maps to Timeout") {
        cfg.engine_command = "sleep 30";
        cfg.timeout_s = 0.2;
        try {
            render(src, cfg);
            FAIL("expected RenderFailure");
        } catch (const RenderFailure& e) {
            CHECK(e.kind == RenderErrorKind::Timeout);
        }
    }

    SUBCASE("rasterizer failure maps to RasterError") {
        cfg.engine_command = "cp {tex} {dir}/formula.pdf";
        cfg.raster_command = "false";
        try {
            render(src, cfg);
            FAIL("expected RenderFailure");
        } catch (const RenderFailure& e) {
            CHECK(e.kind == RenderErrorKind::RasterError);
        }
    }

    SUBCASE("cache serves repeat renders without re-running the engine") {
        auto calls = (work / "calls.log").string();
        cfg.engine_command = "echo x >> " + calls + " && cp {tex} {dir}/formula.pdf";
        cfg.raster_command =
            "printf 'P6\\n1 1\\n255\\n\\000\\000\\017' > {out}.ppm";
        cfg.cache_dir = (work / "cache").string();

        auto img1 = render(src, cfg);
        auto img2 = render(src, cfg);
        CHECK(img1.pixels == img2.pixels);
        std::ifstream log(calls);
        std::string line;
        int n = 0;
        while (std::getline(log, line)) ++n;
        CHECK(n == 1);

        // cache layout: <dir>/<first2>/<hash>.png with a json sidecar
        bool found_png = false, found_sidecar = false;
        for (const auto& sub : fs::recursive_directory_iterator(cfg.cache_dir)) {
            if (sub.path().extension() == ".png") found_png = true;
            if (sub.path().extension() == ".json") found_sidecar = true;
        }
        CHECK(found_png);
        CHECK(found_sidecar);
    }

    fs::remove_all(work);
}

TEST_CASE("png round trip preserves pixels") {
    namespace fs = std::filesystem;
    auto path = (fs::temp_directory_path() / "cdm_png_test.png").string();
    auto src = assign_colors(tokenize("\\frac{a}{b} + c"), palette());
    auto img = stub_render(src, RenderConfig{});
    write_png(img, path);
    auto back = read_image(path);
    CHECK(back.width == img.width);
    CHECK(back.height == img.height);
    CHECK(back.pixels == img.pixels);
    fs::remove(path);
}

TEST_CASE("CDM_CACHE_DIR overrides the configured cache location") {
    RenderConfig cfg;
    cfg.cache_dir = "/configured/path";
    CHECK(effective_cache_dir(cfg) == "/configured/path");
    setenv("CDM_CACHE_DIR", "/env/wins", 1);
    CHECK(effective_cache_dir(cfg) == "/env/wins");
    unsetenv("CDM_CACHE_DIR");
    CHECK(effective_cache_dir(cfg) == "/configured/path");
}

TEST_CASE("document template substitution reaches the compiled file") {
    namespace fs = std::filesystem;
    auto work = fs::temp_directory_path() / "cdm_template_test";
    fs::remove_all(work);
    fs::create_directories(work);

    auto src = assign_colors(tokenize("a"), palette());
    RenderConfig cfg;
    cfg.engine = RenderEngine::Tex;
    cfg.document_template = "WIDTH={page_width_in}\nBODY={formula}\n";
    cfg.page_width_in = 77;
    auto copied = (work / "doc.txt").string();
    cfg.engine_command = "cp {tex} " + copied + " && cp {tex} {dir}/formula.pdf";
    cfg.raster_command = "printf 'P6\\n1 1\\n255\\n\\000\\000\\017' > {out}.ppm";
    render(src, cfg);

    std::ifstream in(copied);
    std::string doc((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
    CHECK(doc.find("WIDTH=77") != std::string::npos);
    CHECK(doc.find("\\mathcolor[RGB]{0,0,15}{a}") != std::string::npos);
    CHECK(doc.find("{formula}") == std::string::npos);

    // the built-in wrapper crops to the formula box
    CHECK(default_document_template().find("tightpage") != std::string::npos);
    fs::remove_all(work);
}
