#include "ppdeid/data/image.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "ppdeid/core/error.hpp"

namespace ppdeid {

namespace {

constexpr const char* kModule = "data_pipeline";

bool has_suffix(const std::string& s, const std::string& suf) {
    if (s.size() < suf.size()) return false;
    std::string tail = s.substr(s.size() - suf.size());
    std::transform(tail.begin(), tail.end(), tail.begin(), ::tolower);
    return tail == suf;
}

GrayImage read_pgm(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) raise(kModule, "MissingFile", path);
    std::string magic;
    in >> magic;
    if (magic != "P5" && magic != "P2") raise(kModule, "DecodeError", "not a PGM: " + path);
    auto next_token = [&in, &path]() -> long {
        // Skips whitespace and '#' comments.
        for (;;) {
            int ch = in.peek();
            if (ch == '#') {
                std::string line;
                std::getline(in, line);
            } else if (std::isspace(ch)) {
                in.get();
            } else {
                break;
            }
        }
        long v = -1;
        in >> v;
        if (!in) raise(kModule, "DecodeError", "truncated PGM header: " + path);
        return v;
    };
    long w = next_token(), h = next_token(), maxval = next_token();
    if (w <= 0 || h <= 0 || maxval <= 0 || maxval > 255)
        raise(kModule, "DecodeError", "unsupported PGM header in " + path);
    GrayImage img(static_cast<int>(h), static_cast<int>(w));
    if (magic == "P5") {
        in.get(); // single whitespace after maxval
        std::vector<unsigned char> raw(img.v.size());
        in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
        if (!in) raise(kModule, "DecodeError", "truncated PGM payload: " + path);
        for (size_t i = 0; i < raw.size(); ++i)
            img.v[i] = static_cast<float>(raw[i]) / static_cast<float>(maxval);
    } else {
        for (auto& p : img.v) {
            long v = 0;
            in >> v;
            if (!in) raise(kModule, "DecodeError", "truncated PGM payload: " + path);
            p = static_cast<float>(v) / static_cast<float>(maxval);
        }
    }
    return img;
}

void write_pgm(const GrayImage& img, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) raise("evaluation", "IoError", "cannot open for write: " + path);
    out << "P5\n" << img.w << " " << img.h << "\n255\n";
    std::vector<unsigned char> raw(img.v.size());
    for (size_t i = 0; i < raw.size(); ++i) {
        float p = std::clamp(img.v[i], 0.f, 1.f);
        raw[i] = static_cast<unsigned char>(std::lround(p * 255.f));
    }
    out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
}

struct PngReadCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngReadCloser() {
        if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
        if (fp) std::fclose(fp);
    }
};

GrayImage read_png(const std::string& path, bool* warned_color) {
    PngReadCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "rb");
    if (!ctx.fp) raise(kModule, "MissingFile", path);

    unsigned char sig[8];
    if (std::fread(sig, 1, 8, ctx.fp) != 8 || png_sig_cmp(sig, 0, 8))
        raise(kModule, "DecodeError", "not a PNG: " + path);

    ctx.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) raise(kModule, "DecodeError", "libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) raise(kModule, "DecodeError", "corrupt PNG: " + path);

    png_init_io(ctx.png, ctx.fp);
    png_set_sig_bytes(ctx.png, 8);
    png_read_info(ctx.png, ctx.info);

    png_uint_32 w = 0, h = 0;
    int bit_depth = 0, color_type = 0;
    png_get_IHDR(ctx.png, ctx.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

    if (bit_depth == 16) png_set_strip_16(ctx.png);
    if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(ctx.png);
    if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(ctx.png);
    png_set_strip_alpha(ctx.png);
    png_read_update_info(ctx.png, ctx.info);

    const int channels = png_get_channels(ctx.png, ctx.info);
    std::vector<unsigned char> row(static_cast<size_t>(w) * channels);
    GrayImage img(static_cast<int>(h), static_cast<int>(w));
    const bool color = channels >= 3;
    if (color && warned_color) *warned_color = true;
    for (png_uint_32 y = 0; y < h; ++y) {
        png_read_row(ctx.png, row.data(), nullptr);
        for (png_uint_32 x = 0; x < w; ++x) {
            float g;
            if (color) {
                // ITU-R BT.601 luminance
                g = 0.299f * row[x * channels] + 0.587f * row[x * channels + 1] +
                    0.114f * row[x * channels + 2];
            } else {
                g = row[x * channels];
            }
            img.at(static_cast<int>(y), static_cast<int>(x)) = g / 255.f;
        }
    }
    return img;
}

struct PngWriteCloser {
    png_structp png = nullptr;
    png_infop info = nullptr;
    FILE* fp = nullptr;
    ~PngWriteCloser() {
        if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
        if (fp) std::fclose(fp);
    }
};

void write_png(const GrayImage& img, const std::string& path) {
    PngWriteCloser ctx;
    ctx.fp = std::fopen(path.c_str(), "wb");
    if (!ctx.fp) raise("evaluation", "IoError", "cannot open for write: " + path);
    ctx.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    ctx.info = png_create_info_struct(ctx.png);
    if (!ctx.png || !ctx.info) raise("evaluation", "IoError", "libpng init failed");
    if (setjmp(png_jmpbuf(ctx.png))) raise("evaluation", "IoError", "PNG write failed: " + path);

    png_init_io(ctx.png, ctx.fp);
    png_set_IHDR(ctx.png, ctx.info, static_cast<png_uint_32>(img.w),
                 static_cast<png_uint_32>(img.h), 8, PNG_COLOR_TYPE_GRAY,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(ctx.png, ctx.info);

    std::vector<unsigned char> row(static_cast<size_t>(img.w));
    for (int y = 0; y < img.h; ++y) {
        for (int x = 0; x < img.w; ++x) {
            float p = std::clamp(img.at(y, x), 0.f, 1.f);
            row[static_cast<size_t>(x)] = static_cast<unsigned char>(std::lround(p * 255.f));
        }
        png_write_row(ctx.png, row.data());
    }
    png_write_end(ctx.png, nullptr);
}

} // namespace

GrayImage read_gray_image(const std::string& path, bool* warned_color) {
    if (!std::filesystem::exists(path)) raise(kModule, "MissingFile", path);
    if (has_suffix(path, ".pgm")) return read_pgm(path);
    return read_png(path, warned_color);
}

void write_gray_image(const GrayImage& img, const std::string& path) {
    if (has_suffix(path, ".pgm"))
        write_pgm(img, path);
    else
        write_png(img, path);
}

GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w) {
    GrayImage out(out_h, out_w);
    const double sy = static_cast<double>(img.h) / out_h;
    const double sx = static_cast<double>(img.w) / out_w;
    for (int y = 0; y < out_h; ++y) {
        double fy = (y + 0.5) * sy - 0.5;
        int y0 = static_cast<int>(std::floor(fy));
        double wy = fy - y0;
        int y1 = std::min(y0 + 1, img.h - 1);
        y0 = std::clamp(y0, 0, img.h - 1);
        for (int x = 0; x < out_w; ++x) {
            double fx = (x + 0.5) * sx - 0.5;
            int x0 = static_cast<int>(std::floor(fx));
            double wx = fx - x0;
            int x1 = std::min(x0 + 1, img.w - 1);
            x0 = std::clamp(x0, 0, img.w - 1);
            double top = (1.0 - wx) * img.at(y0, x0) + wx * img.at(y0, x1);
            double bot = (1.0 - wx) * img.at(y1, x0) + wx * img.at(y1, x1);
            out.at(y, x) = static_cast<float>((1.0 - wy) * top + wy * bot);
        }
    }
    return out;
}

GrayImage fit_to_face_size(const GrayImage& img) {
    if (img.h == kFaceSize && img.w == kFaceSize) return img;
    const double scale = static_cast<double>(kFaceSize) / std::min(img.h, img.w);
    int rh = std::max(kFaceSize, static_cast<int>(std::lround(img.h * scale)));
    int rw = std::max(kFaceSize, static_cast<int>(std::lround(img.w * scale)));
    GrayImage resized = resize_bilinear(img, rh, rw);
    GrayImage out(kFaceSize, kFaceSize);
    const int oy = (rh - kFaceSize) / 2;
    const int ox = (rw - kFaceSize) / 2;
    for (int y = 0; y < kFaceSize; ++y)
        for (int x = 0; x < kFaceSize; ++x) out.at(y, x) = resized.at(y + oy, x + ox);
    return out;
}

GrayImage pad_image(const GrayImage& img, int pad) {
    if (pad == 0) return img;
    GrayImage out(img.h + 2 * pad, img.w + 2 * pad);
    for (int y = 0; y < img.h; ++y)
        for (int x = 0; x < img.w; ++x) out.at(y + pad, x + pad) = img.at(y, x);
    return out;
}

FaceImage load_image(const std::string& path, const std::string& subject_id) {
    bool warned_color = false;
    GrayImage raw = read_gray_image(path, &warned_color);
    if (warned_color)
        std::fprintf(stderr, "warning: %s is not grayscale; converted with BT.601 weights\n",
                     path.c_str());
    FaceImage face;
    face.pixels = fit_to_face_size(raw);
    face.source_path = path;
    face.subject_id = subject_id;
    return face;
}

Tensor<float> to_tensor(const std::vector<const GrayImage*>& batch) {
    if (batch.empty()) return {};
    const int h = batch[0]->h, w = batch[0]->w;
    Tensor<float> t(static_cast<int>(batch.size()), 1, h, w);
    for (size_t i = 0; i < batch.size(); ++i) {
        assert(batch[i]->h == h && batch[i]->w == w);
        std::copy(batch[i]->v.begin(), batch[i]->v.end(), t.image(static_cast<int>(i)));
    }
    return t;
}

GrayImage tensor_slice_to_image(const Tensor<float>& t, int index) {
    GrayImage img(t.h, t.w);
    std::copy(t.image(index), t.image(index) + t.plane(), img.v.begin());
    return img;
}

} // namespace ppdeid
