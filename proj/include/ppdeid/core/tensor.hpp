#pragma once

#include <cassert>
#include <cstddef>
#include <vector>

#include "ppdeid/core/error.hpp"

namespace ppdeid {

/// Dense NCHW tensor. Everything network-facing moves through this type;
/// batch size N leads so per-image slices are contiguous.
template <typename T>
struct Tensor {
    int n = 0, c = 0, h = 0, w = 0;
    std::vector<T> data;

    Tensor() = default;
    Tensor(int n_, int c_, int h_, int w_)
        : n(n_), c(c_), h(h_), w(w_),
          data(static_cast<size_t>(n_) * c_ * h_ * w_, T(0)) {}

    size_t size() const { return data.size(); }
    int plane() const { return h * w; }
    int per_image() const { return c * h * w; }

    T* ptr() { return data.data(); }
    const T* ptr() const { return data.data(); }
    T* image(int i) { return data.data() + static_cast<size_t>(i) * per_image(); }
    const T* image(int i) const { return data.data() + static_cast<size_t>(i) * per_image(); }

    T& at(int in, int ic, int iy, int ix) {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }
    T at(int in, int ic, int iy, int ix) const {
        return data[((static_cast<size_t>(in) * c + ic) * h + iy) * w + ix];
    }

    bool same_shape(const Tensor& o) const {
        return n == o.n && c == o.c && h == o.h && w == o.w;
    }

    void fill(T v) { std::fill(data.begin(), data.end(), v); }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(n, c, h, w);
        for (size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
        return out;
    }
};

template <typename T>
void require_shape(const Tensor<T>& t, int c, int h, int w, const char* module) {
    if (t.c != c || t.h != h || t.w != w)
        raise(module, "ShapeMismatch",
              "expected " + std::to_string(c) + "x" + std::to_string(h) + "x" +
                  std::to_string(w) + ", got " + std::to_string(t.c) + "x" +
                  std::to_string(t.h) + "x" + std::to_string(t.w));
}

/// Concatenate along channels; shapes must agree elsewhere.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
    assert(a.n == b.n && a.h == b.h && a.w == b.w);
    Tensor<T> out(a.n, a.c + b.c, a.h, a.w);
    for (int i = 0; i < a.n; ++i) {
        std::copy(a.image(i), a.image(i) + a.per_image(), out.image(i));
        std::copy(b.image(i), b.image(i) + b.per_image(), out.image(i) + a.per_image());
    }
    return out;
}

/// Inverse of concat_channels for gradients.
template <typename T>
void split_channels(const Tensor<T>& src, Tensor<T>& a, Tensor<T>& b) {
    assert(src.c == a.c + b.c && src.n == a.n);
    for (int i = 0; i < src.n; ++i) {
        std::copy(src.image(i), src.image(i) + a.per_image(), a.image(i));
        std::copy(src.image(i) + a.per_image(), src.image(i) + src.per_image(), b.image(i));
    }
}

} // namespace ppdeid
