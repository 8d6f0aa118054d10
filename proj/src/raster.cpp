#include "cdm/raster.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>

#include "cdm/errors.hpp"

namespace cdm {

namespace {

[[noreturn]] void raster_fail(const std::string& msg) {
    throw RenderFailure(RenderErrorKind::RasterError, msg);
}

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

RasterImage read_ppm(std::istream& in, const std::string& path) {
    std::string magic;
    in >> magic;
    if (magic != "P6" && magic != "P3") raster_fail("not a PPM file: " + path);

    auto next_int = [&in, &path]() {
        // skip whitespace and # comments between header fields
        while (true) {
            int c = in.peek();
            if (c == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(c)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in || v < 0) raster_fail("bad PPM header: " + path);
        return static_cast<int>(v);
    };

    int w = next_int();
    int h = next_int();
    int maxval = next_int();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        raster_fail("unsupported PPM geometry: " + path);

    RasterImage img = RasterImage::blank(w, h, 0);
    if (magic == "P6") {
        in.get();  // single whitespace after maxval
        in.read(reinterpret_cast<char*>(img.pixels.data()),
                static_cast<std::streamsize>(img.pixels.size()));
        if (in.gcount() != static_cast<std::streamsize>(img.pixels.size()))
            raster_fail("truncated PPM data: " + path);
    } else {
        for (auto& px : img.pixels) {
            long v;
            in >> v;
            if (!in) raster_fail("truncated PPM data: " + path);
            px = static_cast<std::uint8_t>(v);
        }
    }
    return img;
}

RasterImage read_png_file(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) raster_fail("cannot open " + path);

    png_structp png =
        png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        raster_fail("libpng init failed");
    }
    RasterImage img;
    std::vector<png_bytep> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        raster_fail("libpng error reading " + path);
    }
    png_init_io(png, fp.get());
    png_read_info(png, info);

    png_uint_32 w = png_get_image_width(png, info);
    png_uint_32 h = png_get_image_height(png, info);
    int color = png_get_color_type(png, info);
    int depth = png_get_bit_depth(png, info);

    if (depth == 16) png_set_strip_16(png);
    if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
    if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
    if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
    if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
        png_set_gray_to_rgb(png);
    png_set_strip_alpha(png);
    png_read_update_info(png, info);

    img = RasterImage::blank(static_cast<int>(w), static_cast<int>(h), 0);
    rows.resize(h);
    for (png_uint_32 y = 0; y < h; ++y)
        rows[y] = img.pixels.data() + static_cast<std::size_t>(y) * w * 3;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return img;
}

}  // namespace

RasterImage RasterImage::blank(int w, int h, int dpi) {
    RasterImage img;
    img.width = w;
    img.height = h;
    img.dpi = dpi;
    img.pixels.assign(static_cast<std::size_t>(w) * h * 3, 0xFF);
    return img;
}

RasterImage read_image(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raster_fail("cannot open " + path);
    char magic[2] = {0, 0};
    in.read(magic, 2);
    in.seekg(0);
    if (magic[0] == 'P' && (magic[1] == '6' || magic[1] == '3'))
        return read_ppm(in, path);
    in.close();
    return read_png_file(path);
}

void write_png(const RasterImage& img, const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "wb"));
    if (!fp) raster_fail("cannot write " + path);

    png_structp png =
        png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        raster_fail("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        raster_fail("libpng error writing " + path);
    }
    png_init_io(png, fp.get());
    png_set_IHDR(png, info, img.width, img.height, 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                 PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    for (int y = 0; y < img.height; ++y)
        png_write_row(png, const_cast<png_bytep>(
                               img.pixels.data() +
                               static_cast<std::size_t>(y) * img.width * 3));
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

void write_ppm(const RasterImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raster_fail("cannot write " + path);
    out << "P6\n" << img.width << " " << img.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(img.pixels.data()),
              static_cast<std::streamsize>(img.pixels.size()));
}

}  // namespace cdm
