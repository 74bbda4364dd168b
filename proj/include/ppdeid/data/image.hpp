#pragma once

#include <string>
#include <vector>

#include "ppdeid/core/tensor.hpp"

namespace ppdeid {

constexpr int kFaceSize = 128;

/// Single-channel raster, values in [0,1], row-major.
struct GrayImage {
    int h = 0, w = 0;
    std::vector<float> v;

    GrayImage() = default;
    GrayImage(int h_, int w_) : h(h_), w(w_), v(static_cast<size_t>(h_) * w_, 0.f) {}

    float& at(int y, int x) { return v[static_cast<size_t>(y) * w + x]; }
    float at(int y, int x) const { return v[static_cast<size_t>(y) * w + x]; }
};

/// Aligned 128x128 face crop plus provenance.
struct FaceImage {
    GrayImage pixels;
    std::string source_path;
    std::string subject_id;
};

/// Decode an 8-bit PNG or PGM. Color inputs are converted with ITU-R
/// BT.601 luminance weights; `warned_color` is set so callers can log it.
GrayImage read_gray_image(const std::string& path, bool* warned_color = nullptr);

/// 8-bit grayscale PNG (or PGM when the path ends in .pgm). Deterministic
/// byte output for identical pixel content.
void write_gray_image(const GrayImage& img, const std::string& path);

/// Bilinear resample to exactly (out_h, out_w); pixel-center alignment.
GrayImage resize_bilinear(const GrayImage& img, int out_h, int out_w);

/// Scale so the short side hits 128, then center-crop to 128x128.
GrayImage fit_to_face_size(const GrayImage& img);

/// Zero-pad by `pad` pixels on every side.
GrayImage pad_image(const GrayImage& img, int pad);

/// Ingest a face image file per the data-pipeline contract: decode,
/// scale to [0,1], resize/crop to 128x128.
FaceImage load_image(const std::string& path, const std::string& subject_id = "");

Tensor<float> to_tensor(const std::vector<const GrayImage*>& batch);
GrayImage tensor_slice_to_image(const Tensor<float>& t, int index);

} // namespace ppdeid
