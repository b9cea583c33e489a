#include <png.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <vector>

#include "dreamif/dataio.hpp"
#include "dreamif/errors.hpp"

namespace dreamif {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const {
        if (f) std::fclose(f);
    }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

[[noreturn]] void png_error_to_exception(png_structp, png_const_charp msg) {
    throw FormatError(std::string("png: ") + msg);
}

void png_warning_silencer(png_structp, png_const_charp) {}

}  // namespace

Image load_png(const std::string& path) {
    FilePtr fp(std::fopen(path.c_str(), "rb"));
    if (!fp) throw IoError("cannot open " + path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
        throw FormatError("not a PNG file: " + path);

    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                             png_error_to_exception, png_warning_silencer);
    if (!png) throw IoError("png reader allocation failed");
    png_infop info = png_create_info_struct(png);
    if (!info) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png info allocation failed");
    }

    Image out;
    try {
        png_init_io(png, fp.get());
        png_set_sig_bytes(png, 8);
        png_read_info(png, info);

        const png_byte color = png_get_color_type(png, info);
        const png_byte depth = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        png_set_strip_alpha(png);  // covers native and tRNS-expanded alpha
        png_set_interlace_handling(png);
        png_read_update_info(png, info);

        const int w = static_cast<int>(png_get_image_width(png, info));
        const int h = static_cast<int>(png_get_image_height(png, info));
        const int ch = png_get_channels(png, info);
        const int bd = png_get_bit_depth(png, info);
        if (ch != 1 && ch != 3) throw FormatError("unsupported channel count in " + path);
        if (bd != 8 && bd != 16) throw FormatError("unsupported bit depth in " + path);

        const std::size_t stride = png_get_rowbytes(png, info);
        std::vector<unsigned char> raster(stride * h);
        std::vector<png_bytep> rows(h);
        for (int y = 0; y < h; ++y) rows[y] = raster.data() + static_cast<std::size_t>(y) * stride;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);

        Image img(h, w, ch);
        if (bd == 8) {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < ch; ++c)
                        img.at(c, y, x) = rows[y][static_cast<std::size_t>(x) * ch + c] / 255.0;
        } else {
            for (int y = 0; y < h; ++y)
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < ch; ++c) {
                        const unsigned char* p = rows[y] + (static_cast<std::size_t>(x) * ch + c) * 2;
                        img.at(c, y, x) = ((p[0] << 8) | p[1]) / 65535.0;  // network byte order
                    }
        }
        out = img.to_rgb();
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
    png_destroy_read_struct(&png, &info, nullptr);
    return out;
}

void save_png(const Image& img, const std::string& path) {
    if (img.empty()) throw std::invalid_argument("save_png: empty image");
    namespace fs = std::filesystem;
    const fs::path target(path);
    if (target.has_parent_path()) {
        std::error_code ec;
        fs::create_directories(target.parent_path(), ec);
    }
    const fs::path tmp = target.string() + ".tmp";

    {
        FilePtr fp(std::fopen(tmp.c_str(), "wb"));
        if (!fp) throw IoError("cannot write " + tmp.string());

        png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr,
                                                  png_error_to_exception, png_warning_silencer);
        if (!png) throw IoError("png writer allocation failed");
        png_infop info = png_create_info_struct(png);
        if (!info) {
            png_destroy_write_struct(&png, nullptr);
            throw IoError("png info allocation failed");
        }

        try {
            const int h = img.height(), w = img.width(), ch = img.channels();
            png_init_io(png, fp.get());
            png_set_IHDR(png, info, w, h, 8,
                         ch == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
                         PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
                         PNG_FILTER_TYPE_DEFAULT);
            png_write_info(png, info);

            std::vector<unsigned char> row(static_cast<std::size_t>(w) * ch);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x)
                    for (int c = 0; c < ch; ++c) {
                        const double v = std::clamp(img.at(c, y, x), 0.0, 1.0);
                        row[static_cast<std::size_t>(x) * ch + c] =
                            static_cast<unsigned char>(std::lround(v * 255.0));
                    }
                png_write_row(png, row.data());
            }
            png_write_end(png, nullptr);
        } catch (...) {
            png_destroy_write_struct(&png, &info);
            throw;
        }
        png_destroy_write_struct(&png, &info);
        std::fflush(fp.get());
        // FilePtr closes on scope exit; fsync needs the descriptor first.
        if (fsync(fileno(fp.get())) != 0) throw IoError("fsync failed for " + tmp.string());
    }

    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) throw IoError("rename to " + path + " failed: " + ec.message());
}

}  // namespace dreamif
