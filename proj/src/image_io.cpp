#include "fcenet/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <vector>

namespace fcenet {

namespace {

struct ReadCursor {
    const std::string* bytes;
    std::size_t pos;
};

void read_cb(png_structp png, png_bytep out, png_size_t n) {
    auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
    if (cur->bytes->size() - cur->pos < n) png_error(png, "unexpected end of data");
    std::memcpy(out, cur->bytes->data() + cur->pos, n);
    cur->pos += n;
}

void write_cb(png_structp png, png_bytep data, png_size_t n) {
    auto* out = static_cast<std::string*>(png_get_io_ptr(png));
    out->append(reinterpret_cast<const char*>(data), n);
}

void flush_cb(png_structp) {}

[[noreturn]] void error_cb(png_structp, png_const_charp msg) { throw IoError(std::string("png: ") + msg); }

void warning_cb(png_structp, png_const_charp) {}

}  // namespace

Tensor decode_png(const std::string& bytes) {
    if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
        throw IoError("png: not a PNG file");
    }
    png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
    if (png == nullptr) throw IoError("png: cannot allocate reader");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_read_struct(&png, nullptr, nullptr);
        throw IoError("png: cannot allocate info");
    }
    ReadCursor cursor{&bytes, 0};
    try {
        png_set_read_fn(png, &cursor, read_cb);
        png_read_info(png, info);
        const int color = png_get_color_type(png, info);
        const int depth = png_get_bit_depth(png, info);
        if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
        if (color == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
        if (png_get_valid(png, info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(png);
        if (depth == 16) png_set_swap(png);  // little-endian samples
        png_read_update_info(png, info);

        const int W = static_cast<int>(png_get_image_width(png, info));
        const int H = static_cast<int>(png_get_image_height(png, info));
        const int channels = png_get_channels(png, info);
        const int out_depth = png_get_bit_depth(png, info);
        const std::size_t rowbytes = png_get_rowbytes(png, info);
        std::vector<unsigned char> buf(rowbytes * static_cast<std::size_t>(H));
        std::vector<png_bytep> rows(H);
        for (int y = 0; y < H; ++y) rows[y] = buf.data() + rowbytes * y;
        png_read_image(png, rows.data());
        png_read_end(png, nullptr);
        png_destroy_read_struct(&png, &info, nullptr);

        const int color_channels = channels >= 3 ? 3 : 1;
        const double maxval = out_depth == 16 ? 65535.0 : 255.0;
        Tensor out(color_channels, H, W);
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) {
                for (int c = 0; c < color_channels; ++c) {
                    const std::size_t idx = static_cast<std::size_t>(x) * channels + c;
                    double v;
                    if (out_depth == 16) {
                        std::uint16_t s;
                        std::memcpy(&s, rows[y] + 2 * idx, 2);
                        v = s;
                    } else {
                        v = rows[y][idx];
                    }
                    out(c, y, x) = v / maxval;
                }
            }
        }
        return out;
    } catch (...) {
        png_destroy_read_struct(&png, &info, nullptr);
        throw;
    }
}

Tensor read_png(const std::string& path) {
    try {
        return decode_png(read_file(path));
    } catch (const IoError& e) {
        throw IoError(path + ": " + e.what());
    }
}

std::string encode_png(const Tensor& image, int bit_depth) {
    if (image.channels() != 1 && image.channels() != 3) throw ShapeError("png: need 1 or 3 channels");
    if (bit_depth != 8 && bit_depth != 16) throw std::invalid_argument("png: bit depth must be 8 or 16");
    if (image.height() < 1 || image.width() < 1) throw ShapeError("png: empty image");
    const int H = image.height();
    const int W = image.width();
    const int C = image.channels();
    const int bytes_per = bit_depth / 8;
    const double maxval = bit_depth == 16 ? 65535.0 : 255.0;

    std::vector<unsigned char> buf(static_cast<std::size_t>(H) * W * C * bytes_per);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            for (int c = 0; c < C; ++c) {
                const double v = std::clamp(image(c, y, x), 0.0, 1.0);
                const auto q = static_cast<unsigned>(std::lround(v * maxval));
                const std::size_t idx = ((static_cast<std::size_t>(y) * W + x) * C + c) * bytes_per;
                if (bit_depth == 16) {
                    buf[idx] = static_cast<unsigned char>(q >> 8);  // PNG stores big-endian
                    buf[idx + 1] = static_cast<unsigned char>(q & 0xff);
                } else {
                    buf[idx] = static_cast<unsigned char>(q);
                }
            }
        }
    }

    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, error_cb, warning_cb);
    if (png == nullptr) throw IoError("png: cannot allocate writer");
    png_infop info = png_create_info_struct(png);
    if (info == nullptr) {
        png_destroy_write_struct(&png, nullptr);
        throw IoError("png: cannot allocate info");
    }
    try {
        png_set_write_fn(png, &out, write_cb, flush_cb);
        png_set_IHDR(png, info, W, H, bit_depth, C == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
                     PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
        png_write_info(png, info);
        const std::size_t stride = static_cast<std::size_t>(W) * C * bytes_per;
        for (int y = 0; y < H; ++y) png_write_row(png, buf.data() + stride * y);
        png_write_end(png, nullptr);
        png_destroy_write_struct(&png, &info);
    } catch (...) {
        png_destroy_write_struct(&png, &info);
        throw;
    }
    return out;
}

void write_png(const std::string& path, const Tensor& image, int bit_depth) {
    write_file_atomic(path, encode_png(image, bit_depth));
}

Tensor to_gray(const Tensor& image) {
    if (image.channels() == 1) return image;
    Tensor out(1, image.height(), image.width());
    for (int c = 0; c < image.channels(); ++c) {
        auto src = image.channel(c);
        auto dst = out.channel(0);
        for (std::size_t i = 0; i < src.size(); ++i) dst[i] += src[i] / image.channels();
    }
    return out;
}

}  // namespace fcenet
