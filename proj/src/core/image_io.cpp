#include "lesiongen/core/image_io.hpp"

#include <jpeglib.h>
#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <csetjmp>
#include <memory>
#include <vector>

#include "lesiongen/core/error.hpp"

namespace lesiongen {

namespace {

struct FileCloser {
    void operator()(FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<FILE, FileCloser>;

// Interleaved 8-bit rows -> planar float [0,1].
ImageF rows_to_imagef(const std::vector<std::vector<uint8_t>>& rows, int h, int w, int ch) {
    ImageF img(ch, h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            for (int c = 0; c < ch; ++c) img.at(c, y, x) = rows[y][x * ch + c] / 255.f;
    return img;
}

std::vector<std::vector<uint8_t>> read_png_rows(const std::filesystem::path& path, int& h, int& w,
                                                int& ch) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path.string());
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("libpng init failed");
    }
    std::vector<std::vector<uint8_t>> rows;
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw IoError("failed to decode PNG " + path.string());
    }
    png_init_io(png, f.get());
    png_read_info(png, info);
    // Normalize everything to 8-bit gray or RGB.
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_palette_to_rgb(png);
    if (png_get_bit_depth(png, info) < 8) png_set_expand_gray_1_2_4_to_8(png);
    png_read_update_info(png, info);
    h = static_cast<int>(png_get_image_height(png, info));
    w = static_cast<int>(png_get_image_width(png, info));
    ch = static_cast<int>(png_get_channels(png, info));
    rows.assign(h, std::vector<uint8_t>(png_get_rowbytes(png, info)));
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y) ptrs[y] = rows[y].data();
    png_read_image(png, ptrs.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    return rows;
}

ImageF read_jpeg(const std::filesystem::path& path) {
    FilePtr f(std::fopen(path.c_str(), "rb"));
    if (!f) throw IoError("cannot open " + path.string());
    jpeg_decompress_struct cinfo{};
    jpeg_error_mgr jerr{};
    cinfo.err = jpeg_std_error(&jerr);
    jerr.error_exit = [](j_common_ptr c) {
        char msg[JMSG_LENGTH_MAX];
        (*c->err->format_message)(c, msg);
        jpeg_destroy(c);
        throw IoError(std::string("JPEG decode error: ") + msg);
    };
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, f.get());
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);
    const int h = static_cast<int>(cinfo.output_height);
    const int w = static_cast<int>(cinfo.output_width);
    std::vector<std::vector<uint8_t>> rows(h, std::vector<uint8_t>(static_cast<size_t>(w) * 3));
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = rows[cinfo.output_scanline].data();
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    return rows_to_imagef(rows, h, w, 3);
}

bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
    return tail == suf;
}

void write_png(const std::filesystem::path& path, int h, int w, int ch,
               const std::vector<uint8_t>& interleaved) {
    FilePtr f(std::fopen(path.c_str(), "wb"));
    if (!f) throw IoError("cannot write " + path.string());
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    png_infop info = png ? png_create_info_struct(png) : nullptr;
    if (!png || !info) {
        png_destroy_write_struct(&png, &info);
        throw IoError("libpng init failed");
    }
    if (setjmp(png_jmpbuf(png))) {
        png_destroy_write_struct(&png, &info);
        throw IoError("failed to encode PNG " + path.string());
    }
    png_init_io(png, f.get());
    // Fixed settings: byte-identical output for identical pixels.
    png_set_compression_level(png, 6);
    png_set_filter(png, 0, PNG_FILTER_SUB);
    png_set_IHDR(png, info, w, h, 8, ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<png_bytep> ptrs(h);
    for (int y = 0; y < h; ++y)
        ptrs[y] = const_cast<png_bytep>(interleaved.data() + static_cast<size_t>(y) * w * ch);
    png_write_image(png, ptrs.data());
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
}

}  // namespace

ImageF read_image(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("image file missing: " + path.string());
    if (has_suffix(path.string(), ".jpg") || has_suffix(path.string(), ".jpeg"))
        return read_jpeg(path);
    int h = 0, w = 0, ch = 0;
    auto rows = read_png_rows(path, h, w, ch);
    if (ch == 1) {
        // Promote grayscale to RGB for a uniform sample layout.
        ImageF gray = rows_to_imagef(rows, h, w, 1);
        ImageF rgb(3, h, w);
        for (int c = 0; c < 3; ++c)
            std::copy(gray.px.begin(), gray.px.end(), rgb.px.begin() + c * gray.plane());
        return rgb;
    }
    if (ch != 3) throw ValidationError("expected 8-bit RGB or gray PNG: " + path.string());
    return rows_to_imagef(rows, h, w, ch);
}

Mask read_mask_png(const std::filesystem::path& path) {
    if (!std::filesystem::exists(path)) throw IoError("mask file missing: " + path.string());
    int h = 0, w = 0, ch = 0;
    auto rows = read_png_rows(path, h, w, ch);
    Mask m(h, w);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            // Average channels if a mask was saved as RGB.
            int v = 0;
            for (int c = 0; c < ch; ++c) v += rows[y][x * ch + c];
            v /= ch;
            if (v != 0 && v != 255)
                throw ValidationError("mask is not binary {0,255}: " + path.string());
            m.at(y, x) = v == 255 ? 1 : 0;
        }
    return m;
}

void write_rgb_png(const std::filesystem::path& path, const ImageF& rgb) {
    if (rgb.channels != 3) throw ArgumentError("write_rgb_png: expects 3 channels");
    std::vector<uint8_t> rows(static_cast<size_t>(rgb.height) * rgb.width * 3);
    for (int y = 0; y < rgb.height; ++y)
        for (int x = 0; x < rgb.width; ++x)
            for (int c = 0; c < 3; ++c) {
                float v = std::clamp(rgb.at(c, y, x), 0.f, 1.f);
                rows[(static_cast<size_t>(y) * rgb.width + x) * 3 + c] =
                    static_cast<uint8_t>(std::lround(v * 255.f));
            }
    write_png(path, rgb.height, rgb.width, 3, rows);
}

void write_mask_png(const std::filesystem::path& path, const Mask& mask) {
    std::vector<uint8_t> rows(static_cast<size_t>(mask.height) * mask.width);
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = mask.px[i] ? 255 : 0;
    write_png(path, mask.height, mask.width, 1, rows);
}

}  // namespace lesiongen
