#include "cdm/render.hpp"

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <vector>

#include "cdm/errors.hpp"
#include "cdm/subprocess.hpp"

namespace fs = std::filesystem;

namespace cdm {

namespace {

// ---------------------------------------------------------------------------
// canonical token sequence -> light item tree
// ---------------------------------------------------------------------------

struct TokItem {
    const Token* tok = nullptr;                 // null for a bare group
    std::vector<std::vector<TokItem>> groups;   // owned brace groups
    std::vector<TokItem> opt;                   // \sqrt [..] content
    bool has_opt = false;
};

std::vector<TokItem> build_items(const std::vector<Token>& toks, std::size_t& i,
                                 std::size_t end);

std::vector<TokItem> take_group(const std::vector<Token>& toks, std::size_t& i,
                                std::size_t end) {
    // i points at GroupOpen
    ++i;
    std::size_t depth = 1;
    std::size_t start = i;
    while (i < end && depth > 0) {
        if (toks[i].kind == TokenKind::GroupOpen) ++depth;
        if (toks[i].kind == TokenKind::GroupClose) --depth;
        ++i;
    }
    std::size_t stop = (depth == 0) ? i - 1 : i;
    std::size_t j = start;
    return build_items(toks, j, stop);
}

std::vector<TokItem> build_items(const std::vector<Token>& toks, std::size_t& i,
                                 std::size_t end) {
    std::vector<TokItem> items;
    while (i < end) {
        const Token& t = toks[i];
        if (t.kind == TokenKind::GroupClose) {  // defensive, balanced input
            ++i;
            continue;
        }
        TokItem item;
        item.tok = &t;
        if (t.kind == TokenKind::GroupOpen) {
            item.tok = nullptr;
            item.groups.push_back(take_group(toks, i, end));
            items.push_back(std::move(item));
            continue;
        }
        ++i;
        if (t.kind == TokenKind::ScriptMarker) {
            if (i < end && toks[i].kind == TokenKind::GroupOpen)
                item.groups.push_back(take_group(toks, i, end));
        } else if (t.kind == TokenKind::Structural && is_style_wrapper(t.text)) {
            if (i < end && toks[i].kind == TokenKind::GroupOpen)
                item.groups.push_back(take_group(toks, i, end));
        } else if (t.kind == TokenKind::Command) {
            int argc = glyph_arg_count(t.text);
            if (argc > 0) {
                if (has_optional_arg_slot(t.text) && i < end &&
                    toks[i].kind == TokenKind::Structural && toks[i].text == "[") {
                    ++i;
                    std::size_t start = i;
                    std::size_t depth = 0;
                    while (i < end) {
                        if (toks[i].kind == TokenKind::GroupOpen) ++depth;
                        if (toks[i].kind == TokenKind::GroupClose) --depth;
                        if (depth == 0 && toks[i].kind == TokenKind::Structural &&
                            toks[i].text == "]")
                            break;
                        ++i;
                    }
                    std::size_t stop = i;
                    if (i < end) ++i;  // past "]"
                    std::size_t j = start;
                    item.opt = build_items(toks, j, stop);
                    item.has_opt = true;
                }
                for (int k = 0; k < argc && i < end &&
                                toks[i].kind == TokenKind::GroupOpen;
                     ++k)
                    item.groups.push_back(take_group(toks, i, end));
            }
        }
        items.push_back(std::move(item));
    }
    return items;
}

std::vector<TokItem> build_items(const TokenSequence& seq) {
    std::size_t i = 0;
    return build_items(seq.tokens, i, seq.tokens.size());
}

// ---------------------------------------------------------------------------
// colored LaTeX emission
// ---------------------------------------------------------------------------

std::string color_wrap_open(Rgb c) {
    std::ostringstream os;
    os << "\\mathcolor[RGB]{" << int(c[0]) << "," << int(c[1]) << ","
       << int(c[2]) << "}{";
    return os.str();
}

// delimiters lose their size prefix for rendering so each one can be
// wrapped in its own color group without breaking \left/\right pairing
std::string render_text(const Token& t) {
    if (t.kind == TokenKind::Command)
        return std::string(strip_size_prefix(t.text));
    return t.text;
}

class LatexEmitter {
public:
    LatexEmitter(const std::vector<Rgb>& by_order) : color_by_order_(by_order) {}

    std::string emit(const std::vector<TokItem>& items) {
        emit_items(items);
        return std::move(out_);
    }

private:
    const std::vector<Rgb>& color_by_order_;
    std::string out_;

    void put(const std::string& s) {
        if (!out_.empty() && out_.back() != '{' && !s.empty() && s[0] != '}')
            out_ += ' ';
        out_ += s;
    }

    void emit_group(const std::vector<TokItem>& items) {
        put("{");
        emit_items(items);
        put("}");
    }

    void emit_items(const std::vector<TokItem>& items) {
        for (const auto& it : items) emit_item(it);
    }

    void emit_item(const TokItem& item) {
        if (!item.tok) {
            emit_group(item.groups.empty() ? std::vector<TokItem>{} : item.groups[0]);
            return;
        }
        const Token& t = *item.tok;
        switch (t.kind) {
            case TokenKind::ScriptMarker:
                put(t.text);
                emit_group(item.groups.empty() ? std::vector<TokItem>{}
                                               : item.groups[0]);
                break;
            case TokenKind::Structural:
                put(t.text);
                if (!item.groups.empty()) emit_group(item.groups[0]);
                break;
            case TokenKind::Char:
            case TokenKind::Command: {
                put(color_wrap_open(color_by_order_[t.order_index]) +
                    render_text(t));
                if (item.has_opt) {
                    put("[");
                    emit_items(item.opt);
                    put("]");
                }
                for (const auto& g : item.groups) emit_group(g);
                put("}");
                break;
            }
            default:
                put(t.text);
                break;
        }
    }
};

// ---------------------------------------------------------------------------
// stub layout engine
// ---------------------------------------------------------------------------

struct LocalBox {
    int x1, y1, x2, y2;  // y relative to the baseline, negative above
    int order_index;     // -1 when nothing is drawn
};

int block_w(double s) { return std::max(2L, std::lround(8.0 * s)); }
int block_h(double s) { return std::max(2L, std::lround(12.0 * s)); }
int gap_w(double s) { return static_cast<int>(std::lround(4.0 * s)); }

constexpr int kScriptOffset = 6;
constexpr double kScriptScale = 0.6;

struct Layout {
    std::vector<LocalBox> boxes;
    int width = 0;
};

void translate(std::vector<LocalBox>& boxes, int dx, int dy) {
    for (auto& b : boxes) {
        b.x1 += dx;
        b.x2 += dx;
        b.y1 += dy;
        b.y2 += dy;
    }
}

void append_at(Layout& dst, Layout src, int dx, int dy) {
    translate(src.boxes, dx, dy);
    dst.boxes.insert(dst.boxes.end(), src.boxes.begin(), src.boxes.end());
}

bool is_frac_like(const std::string& text) {
    return text == "\\frac" || text == "\\dfrac" || text == "\\tfrac" ||
           text == "\\cfrac" || text == "\\binom" || text == "\\dbinom" ||
           text == "\\tbinom";
}

Layout lay_items(const std::vector<TokItem>& items, double scale);

Layout lay_group_or_empty(const std::vector<std::vector<TokItem>>& groups,
                          std::size_t idx, double scale) {
    if (idx < groups.size()) return lay_items(groups[idx], scale);
    return {};
}

Layout lay_items(const std::vector<TokItem>& items, double scale) {
    Layout out;
    int x = 0;
    for (const auto& item : items) {
        if (!item.tok) {  // bare group: inline
            Layout g = lay_items(item.groups.empty() ? std::vector<TokItem>{}
                                                     : item.groups[0],
                                 scale);
            int w = g.width;
            append_at(out, std::move(g), x, 0);
            x += w;
            continue;
        }
        const Token& t = *item.tok;
        switch (t.kind) {
            case TokenKind::ScriptMarker: {
                double s = scale * kScriptScale;
                Layout g = lay_group_or_empty(item.groups, 0, s);
                int dy = (t.text == "^") ? -kScriptOffset : kScriptOffset;
                int w = g.width;
                append_at(out, std::move(g), x, dy);
                if (w > 0) x += w + gap_w(s);
                break;
            }
            case TokenKind::Structural: {
                if (is_style_wrapper(t.text)) {
                    Layout g = lay_group_or_empty(item.groups, 0, scale);
                    int w = g.width;
                    append_at(out, std::move(g), x, 0);
                    x += w;
                } else if (t.text == "\\\\" || t.text == "&" ||
                           t.text.rfind("\\\\[", 0) == 0) {
                    x += gap_w(scale) * 2;  // cell/row separator, no glyph
                }
                break;
            }
            case TokenKind::Char:
            case TokenKind::Command: {
                if (is_frac_like(t.text) && !item.groups.empty()) {
                    Layout num = lay_group_or_empty(item.groups, 0, scale);
                    Layout den = lay_group_or_empty(item.groups, 1, scale);
                    int bar_w = std::max({num.width, den.width, block_w(scale)});
                    int bar_h = std::max(1L, std::lround(2.0 * scale));
                    int axis = static_cast<int>(std::lround(4.0 * scale));
                    int vgap = std::max(1L, std::lround(2.0 * scale));
                    int bar_y2 = -axis;
                    int bar_y1 = bar_y2 - (bar_h - 1);
                    out.boxes.push_back(
                        {x, bar_y1, x + bar_w - 1, bar_y2, t.order_index});
                    if (!num.boxes.empty()) {
                        int bottom = 0;
                        for (const auto& b : num.boxes)
                            bottom = std::max(bottom, b.y2);
                        append_at(out, std::move(num), x,
                                  bar_y1 - 1 - vgap - bottom);
                    }
                    if (!den.boxes.empty()) {
                        int top = 0;
                        for (const auto& b : den.boxes) top = std::min(top, b.y1);
                        append_at(out, std::move(den), x,
                                  bar_y2 + 1 + vgap - top);
                    }
                    x += bar_w + gap_w(scale);
                    break;
                }
                // plain glyph block, then any argument groups inline
                int w = block_w(scale), h = block_h(scale);
                out.boxes.push_back({x, -h, x + w - 1, -1, t.order_index});
                x += w + gap_w(scale);
                if (item.has_opt) {
                    Layout g = lay_items(item.opt, scale * kScriptScale);
                    int gw = g.width;
                    append_at(out, std::move(g), x, -kScriptOffset);
                    if (gw > 0) x += gw + gap_w(scale * kScriptScale);
                }
                for (const auto& grp : item.groups) {
                    Layout g = lay_items(grp, scale);
                    int gw = g.width;
                    append_at(out, std::move(g), x, 0);
                    if (gw > 0) x += gw + gap_w(scale);
                }
                break;
            }
            default:
                break;
        }
    }
    out.width = x;
    return out;
}

// balanced environments and \left/\right pairs; the stub engine's stand-in
// for a compiler syntax check
void check_compilable(const TokenSequence& seq) {
    std::vector<std::string> envs;
    int delim_depth = 0;
    for (const auto& t : seq.tokens) {
        if (t.text.rfind("\\begin{", 0) == 0) {
            auto close = t.text.find('}');
            envs.push_back(t.text.substr(7, close - 7));
        } else if (t.text.rfind("\\end{", 0) == 0) {
            auto close = t.text.find('}');
            std::string name = t.text.substr(5, close - 5);
            if (envs.empty() || envs.back() != name)
                throw RenderFailure(RenderErrorKind::CompileError,
                                    "\\end{" + name + "} without matching \\begin");
            envs.pop_back();
        } else {
            bool sized = strip_size_prefix(t.text) != t.text;
            if (t.text == "\\left" || (sized && t.text.rfind("\\left", 0) == 0)) {
                ++delim_depth;
            } else if (t.text == "\\right" ||
                       (sized && t.text.rfind("\\right", 0) == 0)) {
                if (--delim_depth < 0)
                    throw RenderFailure(RenderErrorKind::CompileError,
                                        "\\right without matching \\left");
            }
        }
    }
    if (!envs.empty())
        throw RenderFailure(RenderErrorKind::CompileError,
                            "missing \\end{" + envs.back() + "}");
    if (delim_depth != 0)
        throw RenderFailure(RenderErrorKind::CompileError,
                            "unbalanced \\left/\\right");
}

// ---------------------------------------------------------------------------
// cache + subprocess plumbing
// ---------------------------------------------------------------------------

std::uint64_t fnv1a64(std::string_view data) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : data) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    return h;
}

std::string hex16(std::uint64_t v) {
    static const char* digits = "0123456789abcdef";
    std::string s(16, '0');
    for (int i = 15; i >= 0; --i) {
        s[i] = digits[v & 0xF];
        v >>= 4;
    }
    return s;
}

std::string substitute(std::string templ,
                       const std::vector<std::pair<std::string, std::string>>& kv) {
    for (const auto& [key, value] : kv) {
        std::string tag = "{" + key + "}";
        std::size_t pos = 0;
        while ((pos = templ.find(tag, pos)) != std::string::npos) {
            templ.replace(pos, tag.size(), value);
            pos += value.size();
        }
    }
    return templ;
}

struct TempDir {
    fs::path path;
    TempDir() {
        auto base = fs::temp_directory_path();
        for (int attempt = 0; attempt < 64; ++attempt) {
            auto candidate =
                base / ("cdm-" + hex16(fnv1a64(std::to_string(::getpid()) + "-" +
                                               std::to_string(rand()) + "-" +
                                               std::to_string(attempt))));
            std::error_code ec;
            if (fs::create_directory(candidate, ec)) {
                path = candidate;
                return;
            }
        }
        throw RenderFailure(RenderErrorKind::RasterError,
                            "cannot create temp directory");
    }
    ~TempDir() {
        std::error_code ec;
        fs::remove_all(path, ec);
    }
};

std::mutex g_cache_mutex;

void write_sidecar(const ColoredSource& src, const std::string& path) {
    std::ofstream out(path);
    out << "{\n  \"colors\": [\n";
    bool first = true;
    for (const auto& [rgb, info] : src.assignment) {
        if (!first) out << ",\n";
        first = false;
        out << "    {\"rgb\": [" << int(rgb[0]) << ", " << int(rgb[1]) << ", "
            << int(rgb[2]) << "], \"token\": \"";
        for (char c : info.token_text) {
            if (c == '\\' || c == '"') out << '\\';
            out << c;
        }
        out << "\", \"order\": " << info.order_index << "}";
    }
    out << "\n  ]\n}\n";
}

RasterImage render_tex(const ColoredSource& src, const RenderConfig& cfg) {
    std::string templ = cfg.document_template.empty()
                            ? default_document_template()
                            : cfg.document_template;
    std::string document = substitute(
        templ, {{"formula", src.latex},
                {"page_width_in", std::to_string(cfg.page_width_in)}});

    std::string cache_dir = effective_cache_dir(cfg);
    std::string key, cache_file;
    if (!cache_dir.empty()) {
        key = hex16(fnv1a64(document + "|" + std::to_string(cfg.dpi) + "|" +
                            cfg.engine_command + "|" + cfg.raster_command));
        cache_file = cache_dir + "/" + key.substr(0, 2) + "/" + key + ".png";
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        if (fs::exists(cache_file)) {
            auto img = read_image(cache_file);
            img.dpi = cfg.dpi;
            return img;
        }
    }

    TempDir tmp;
    fs::path tex = tmp.path / "formula.tex";
    {
        std::ofstream out(tex);
        out << document;
    }

    auto compile = run_command(
        substitute(cfg.engine_command, {{"tex", tex.string()},
                                        {"dir", tmp.path.string()}}),
        cfg.timeout_s);
    if (compile.timed_out)
        throw RenderFailure(RenderErrorKind::Timeout, "engine timed out");
    fs::path pdf = tmp.path / "formula.pdf";
    if (compile.exit_code != 0 || !fs::exists(pdf))
        throw RenderFailure(RenderErrorKind::CompileError,
                            "engine exited with " +
                                std::to_string(compile.exit_code));

    fs::path out_base = tmp.path / "page";
    auto raster = run_command(
        substitute(cfg.raster_command, {{"pdf", pdf.string()},
                                        {"dpi", std::to_string(cfg.dpi)},
                                        {"out", out_base.string()},
                                        {"dir", tmp.path.string()}}),
        cfg.timeout_s);
    if (raster.timed_out)
        throw RenderFailure(RenderErrorKind::Timeout, "rasterizer timed out");
    if (raster.exit_code != 0)
        throw RenderFailure(RenderErrorKind::RasterError,
                            "rasterizer exited with " +
                                std::to_string(raster.exit_code));

    fs::path img_path;
    for (const char* ext : {".ppm", ".png", ".pgm", ".pbm"}) {
        fs::path candidate = out_base.string() + ext;
        if (fs::exists(candidate)) {
            img_path = candidate;
            break;
        }
    }
    if (img_path.empty())
        throw RenderFailure(RenderErrorKind::RasterError,
                            "rasterizer produced no image");
    auto img = read_image(img_path.string());
    img.dpi = cfg.dpi;

    if (!cache_file.empty()) {
        std::lock_guard<std::mutex> lock(g_cache_mutex);
        if (!fs::exists(cache_file)) {
            fs::create_directories(fs::path(cache_file).parent_path());
            std::string staged = cache_file + ".tmp" + key.substr(0, 6);
            write_png(img, staged);
            write_sidecar(src, cache_file.substr(0, cache_file.size() - 4) +
                                   ".json");
            fs::rename(staged, cache_file);
        }
    }
    return img;
}

}  // namespace

ColoredSource assign_colors(const TokenSequence& seq, const Palette& palette) {
    if (seq.colorable_count > palette.capacity())
        throw PaletteExhausted("formula needs " +
                               std::to_string(seq.colorable_count) +
                               " colors, palette holds " +
                               std::to_string(palette.capacity()));

    ColoredSource src;
    src.tokens = seq;

    std::vector<Rgb> by_order(seq.tokens.size(), Rgb{255, 255, 255});
    int next = 0;
    for (const auto& t : seq.tokens) {
        if (!t.colorable()) continue;
        Rgb c = palette.color(next++);
        by_order[t.order_index] = c;
        src.assignment[c] = {t.text, t.order_index};
    }

    auto items = build_items(seq);
    LatexEmitter emitter(by_order);
    src.latex = emitter.emit(items);
    return src;
}

RasterImage stub_render(const ColoredSource& src, const RenderConfig& cfg) {
    check_compilable(src.tokens);

    std::vector<Rgb> by_order(src.tokens.tokens.size(), Rgb{255, 255, 255});
    std::vector<bool> colored(src.tokens.tokens.size(), false);
    for (const auto& [rgb, info] : src.assignment) {
        by_order[info.order_index] = rgb;
        colored[info.order_index] = true;
    }

    auto items = build_items(src.tokens);
    Layout layout = lay_items(items, 1.0);

    constexpr int kMargin = 4;
    if (layout.boxes.empty()) return RasterImage::blank(16, 16, cfg.dpi);

    int min_x = layout.boxes[0].x1, max_x = layout.boxes[0].x2;
    int min_y = layout.boxes[0].y1, max_y = layout.boxes[0].y2;
    for (const auto& b : layout.boxes) {
        min_x = std::min(min_x, b.x1);
        max_x = std::max(max_x, b.x2);
        min_y = std::min(min_y, b.y1);
        max_y = std::max(max_y, b.y2);
    }
    auto img = RasterImage::blank(max_x - min_x + 1 + 2 * kMargin,
                                  max_y - min_y + 1 + 2 * kMargin, cfg.dpi);
    for (const auto& b : layout.boxes) {
        if (b.order_index < 0 || !colored[b.order_index]) continue;
        Rgb c = by_order[b.order_index];
        for (int y = b.y1; y <= b.y2; ++y)
            for (int x = b.x1; x <= b.x2; ++x)
                img.set(x - min_x + kMargin, y - min_y + kMargin, c);
    }
    return img;
}

RasterImage render(const ColoredSource& src, const RenderConfig& cfg) {
    if (cfg.engine == RenderEngine::Stub) return stub_render(src, cfg);
    return render_tex(src, cfg);
}

std::string effective_cache_dir(const RenderConfig& cfg) {
    if (const char* env = std::getenv("CDM_CACHE_DIR"); env && *env)
        return env;
    return cfg.cache_dir;
}

std::string default_document_template() {
    return "\\documentclass{article}\n"
           "\\usepackage[paperwidth={page_width_in}in,paperheight=20in,"
           "margin=1in]{geometry}\n"
           "\\usepackage{amsmath,amssymb,amsfonts,xcolor}\n"
           "\\makeatletter\n"
           "\\providecommand{\\mathcolor}[3][]{"
           "\\begingroup\\color[#1]{#2}#3\\endgroup}\n"
           "\\makeatother\n"
           "\\usepackage[active,tightpage]{preview}\n"
           "\\pagestyle{empty}\n"
           "\\begin{document}\n"
           "\\begin{preview}\n"
           "\\(\\displaystyle {formula} \\)\n"
           "\\end{preview}\n"
           "\\end{document}\n";
}

}  // namespace cdm
