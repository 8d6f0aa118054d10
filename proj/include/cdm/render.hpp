#pragma once

// Unique-color assignment and rendering.
//
// Every glyph token gets its own RGB color via \mathcolor wrappers; the
// rendered page is then scanned for those colors to locate each glyph.
// Two engines are provided: an external TeX toolchain driven through
// subprocess command templates, and a hermetic stub layout engine that
// draws tokens as solid blocks with deterministic geometry.

#include <map>
#include <optional>
#include <string>

#include "cdm/palette.hpp"
#include "cdm/raster.hpp"
#include "cdm/token.hpp"

namespace cdm {

enum class RenderEngine { Stub, Tex };

struct RenderConfig {
    RenderEngine engine = RenderEngine::Stub;
    // {tex} and {dir} expand to the .tex file and its directory; the command
    // must leave {dir}/formula.pdf behind
    std::string engine_command =
        "pdflatex -interaction=nonstopmode -halt-on-error "
        "-output-directory {dir} {tex} >/dev/null 2>&1";
    // {pdf}, {dpi} and {out} expand to the input document, the resolution
    // and the output image path without extension; a {out}.ppm or {out}.png
    // must be produced
    std::string raster_command =
        "pdftoppm -r {dpi} -aa no -aaVector no -singlefile {pdf} {out}";
    int dpi = 300;
    double timeout_s = 30.0;
    int page_width_in = 200;  // wide page so nothing ever line-breaks
    // {formula} and {page_width_in} expand into the compiled document. The
    // default requires preview.sty (standard in TeX Live) and crops the
    // page to the formula box, keeping normalized coordinates meaningful;
    // override it for installations without preview.
    std::string document_template;  // empty selects the built-in template
    std::string cache_dir;  // empty disables caching; CDM_CACHE_DIR overrides
};

// the built-in preview/tightpage document wrapper
std::string default_document_template();

struct ColorAssignment {
    std::string token_text;
    int order_index = 0;
};

struct ColoredSource {
    std::string latex;                       // \mathcolor-wrapped formula
    std::map<Rgb, ColorAssignment> assignment;
    TokenSequence tokens;                    // normalized sequence it came from
};

// Wrap each colorable token of seq in \mathcolor[RGB]{r,g,b}{...}, colors
// taken from the palette in order. Throws PaletteExhausted when the
// formula has more glyph tokens than the palette holds.
ColoredSource assign_colors(const TokenSequence& seq, const Palette& palette);

// Render through the engine selected in cfg. Throws RenderFailure with
// CompileError / Timeout / RasterError.
RasterImage render(const ColoredSource& src, const RenderConfig& cfg);

// The deterministic block-layout engine: glyph tokens become solid
// 8x12-pixel blocks advancing left to right with 4-pixel gaps, scripts
// shift the following group 6 pixels up or down at 60% scale, \frac stacks
// its two argument groups around a bar. Byte-identical output for
// identical input.
RasterImage stub_render(const ColoredSource& src, const RenderConfig& cfg);

// Effective cache directory for cfg (CDM_CACHE_DIR wins), empty if caching
// is off.
std::string effective_cache_dir(const RenderConfig& cfg);

}  // namespace cdm
