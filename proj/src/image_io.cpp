#include "hemocnn/image_io.hpp"

#include <png.h>

#include <algorithm>
#include <array>
#include <csetjmp>
#include <cstdio>
#include <cmath>
#include <fstream>
#include <memory>

// jpeglib.h needs FILE and size_t declared first.
#include <jpeglib.h>

#include "hemocnn/errors.hpp"

namespace hemocnn {

namespace {

struct FileCloser {
    void operator()(std::FILE* f) const { std::fclose(f); }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct JpegErrorMgr {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorMgr*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

void jpeg_silent(j_common_ptr, int) {}

void read_jpeg_body(jpeg_decompress_struct& cinfo, Image8& image) {
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = JCS_RGB;
    jpeg_start_decompress(&cinfo);

    image.width = cinfo.output_width;
    image.height = cinfo.output_height;
    image.rgb.resize(image.width * image.height * 3);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = &image.rgb[cinfo.output_scanline * image.width * 3];
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
}

Image8 decode_jpeg(const std::filesystem::path& path) {
    FilePtr file(std::fopen(path.c_str(), "rb"));
    if (!file) throw DecodeError(path.string(), "cannot open file");

    jpeg_decompress_struct cinfo{};
    JpegErrorMgr err{};
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_silent;

    // The raster is filled through a reference so nothing the error path
    // touches is held in registers across setjmp.
    Image8 image;
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw DecodeError(path.string(), err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_stdio_src(&cinfo, file.get());
    read_jpeg_body(cinfo, image);
    jpeg_destroy_decompress(&cinfo);
    return image;
}

Image8 decode_png(const std::filesystem::path& path) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&png, path.c_str())) {
        const std::string why = png.message;
        png_image_free(&png);
        throw DecodeError(path.string(), why);
    }
    png.format = PNG_FORMAT_RGB;
    Image8 image;
    image.width = png.width;
    image.height = png.height;
    image.rgb.resize(PNG_IMAGE_SIZE(png));
    if (!png_image_finish_read(&png, nullptr, image.rgb.data(), 0, nullptr)) {
        const std::string why = png.message;
        png_image_free(&png);
        throw DecodeError(path.string(), why);
    }
    return image;
}

}  // namespace

Image8 decode_image(const std::filesystem::path& path) {
    std::array<unsigned char, 8> sig{};
    {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw DecodeError(path.string(), "cannot open file");
        in.read(reinterpret_cast<char*>(sig.data()), sig.size());
        if (in.gcount() < 4) throw DecodeError(path.string(), "file too short");
    }
    Image8 image;
    if (sig[0] == 0xFF && sig[1] == 0xD8) {
        image = decode_jpeg(path);
    } else if (png_sig_cmp(sig.data(), 0, sig.size()) == 0) {
        image = decode_png(path);
    } else {
        throw DecodeError(path.string(), "not a JPEG or PNG file");
    }
    if (image.width == 0 || image.height == 0) throw DecodeError(path.string(), "empty image");
    return image;
}

void write_png(const std::filesystem::path& path, const Image8& image) {
    png_image png{};
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(image.width);
    png.height = static_cast<png_uint_32>(image.height);
    png.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&png, path.c_str(), 0, image.rgb.data(), 0, nullptr)) {
        const std::string why = png.message;
        png_image_free(&png);
        throw DataError(DataError::Kind::Io, "cannot write '" + path.string() + "': " + why);
    }
}

namespace {

// Source sample positions for each output index along one axis.
struct Taps {
    std::size_t lo, hi;
    double frac;
};

std::vector<Taps> bilinear_taps(std::size_t in, std::size_t out) {
    std::vector<Taps> taps(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    const double max_pos = static_cast<double>(in - 1);
    for (std::size_t i = 0; i < out; ++i) {
        const double src = std::clamp((static_cast<double>(i) + 0.5) * scale - 0.5, 0.0, max_pos);
        const auto lo = static_cast<std::size_t>(std::floor(src));
        const std::size_t hi = std::min(lo + 1, in - 1);
        taps[i] = {lo, hi, src - static_cast<double>(lo)};
    }
    return taps;
}

// a + f*(b-a) returns a exactly when a == b, so constant images stay constant.
double lerp(double a, double b, double f) { return a + f * (b - a); }

}  // namespace

Tensor resize_to_tensor(const Image8& image, std::size_t out_h, std::size_t out_w) {
    if (image.width == 0 || image.height == 0 || out_h == 0 || out_w == 0) {
        throw ShapeError("resize_to_tensor: empty source or target");
    }
    const auto ty = bilinear_taps(image.height, out_h);
    const auto tx = bilinear_taps(image.width, out_w);
    Tensor out({3, out_h, out_w});
    for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < out_h; ++y) {
            for (std::size_t x = 0; x < out_w; ++x) {
                const double top = lerp(image.px(ty[y].lo, tx[x].lo, c), image.px(ty[y].lo, tx[x].hi, c), tx[x].frac);
                const double bottom =
                    lerp(image.px(ty[y].hi, tx[x].lo, c), image.px(ty[y].hi, tx[x].hi, c), tx[x].frac);
                out[(c * out_h + y) * out_w + x] = static_cast<Scalar>(lerp(top, bottom, ty[y].frac) / 255.0);
            }
        }
    }
    return out;
}

Tensor load_image(const std::filesystem::path& path, std::size_t out_h, std::size_t out_w) {
    return resize_to_tensor(decode_image(path), out_h, out_w);
}

}  // namespace hemocnn
