#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "ppdeid/core/blas.hpp"
#include "ppdeid/core/rng.hpp"
#include "ppdeid/core/tensor.hpp"

namespace ppdeid::nn {

using ppdeid::Rng;
using ppdeid::Tensor;

enum class Phase { train, eval };

/// Named view of one trainable array and its gradient buffer.
template <typename T>
struct ParamRef {
    std::vector<T>* value;
    std::vector<T>* grad;
    std::string name;
};

inline int conv_out_size(int in, int k, int stride, int pad) {
    return (in + 2 * pad - k) / stride + 1;
}

inline int deconv_out_size(int in, int k, int stride, int pad) {
    return (in - 1) * stride - 2 * pad + k;
}

/// col layout: rows = in_ch*k*k, cols = out_h*out_w (row-major).
template <typename T>
void im2col(const T* img, int channels, int h, int w, int k, int stride, int pad, T* col) {
    const int out_h = conv_out_size(h, k, stride, pad);
    const int out_w = conv_out_size(w, k, stride, pad);
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                T* dst = col + (static_cast<size_t>((c * k + ky) * k + kx)) * out_h * out_w;
                const T* src = img + static_cast<size_t>(c) * h * w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        std::fill(dst, dst + out_w, T(0));
                        dst += out_w;
                        continue;
                    }
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        *dst++ = (ix >= 0 && ix < w) ? src[static_cast<size_t>(iy) * w + ix] : T(0);
                    }
                }
            }
        }
    }
}

/// Scatter-add inverse of im2col.
template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int stride, int pad, T* img) {
    const int out_h = conv_out_size(h, k, stride, pad);
    const int out_w = conv_out_size(w, k, stride, pad);
    for (int c = 0; c < channels; ++c) {
        for (int ky = 0; ky < k; ++ky) {
            for (int kx = 0; kx < k; ++kx) {
                const T* src = col + (static_cast<size_t>((c * k + ky) * k + kx)) * out_h * out_w;
                T* dst = img + static_cast<size_t>(c) * h * w;
                for (int oy = 0; oy < out_h; ++oy) {
                    const int iy = oy * stride - pad + ky;
                    if (iy < 0 || iy >= h) {
                        src += out_w;
                        continue;
                    }
                    for (int ox = 0; ox < out_w; ++ox) {
                        const int ix = ox * stride - pad + kx;
                        if (ix >= 0 && ix < w) dst[static_cast<size_t>(iy) * w + ix] += src[ox];
                    }
                    src += out_w;
                }
            }
        }
    }
}

template <typename T>
class Conv2d {
public:
    Conv2d() = default;
    Conv2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
          weight_(static_cast<size_t>(out_ch) * in_ch * k * k),
          bias_(out_ch),
          dweight_(weight_.size(), T(0)),
          dbias_(out_ch, T(0)) {}

    void init_gaussian(Rng& rng, T stddev) {
        for (auto& v : weight_) v = static_cast<T>(rng.normal(0.0, stddev));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    /// He-style fan-in scaling; used by networks the spec leaves uninitialized.
    void init_he(Rng& rng) {
        const double stddev = std::sqrt(2.0 / (static_cast<double>(in_ch_) * k_ * k_));
        init_gaussian(rng, static_cast<T>(stddev));
    }

    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        input_ = x;
        const int oh = conv_out_size(x.h, k_, stride_, pad_);
        const int ow = conv_out_size(x.w, k_, stride_, pad_);
        Tensor<T> y(x.n, out_ch_, oh, ow);
        const int cols = oh * ow;
        const int rows = in_ch_ * k_ * k_;
        col_.resize(static_cast<size_t>(rows) * cols);
        for (int i = 0; i < x.n; ++i) {
            im2col(x.image(i), in_ch_, x.h, x.w, k_, stride_, pad_, col_.data());
            gemm(false, false, out_ch_, cols, rows, T(1), weight_.data(), rows, col_.data(), cols,
                 T(0), y.image(i));
            T* out = y.image(i);
            for (int oc = 0; oc < out_ch_; ++oc)
                for (int j = 0; j < cols; ++j) out[static_cast<size_t>(oc) * cols + j] += bias_[oc];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = input_;
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        const int cols = dy.h * dy.w;
        const int rows = in_ch_ * k_ * k_;
        col_.resize(static_cast<size_t>(rows) * cols);
        dcol_.resize(static_cast<size_t>(rows) * cols);
        for (int i = 0; i < x.n; ++i) {
            const T* g = dy.image(i);
            for (int oc = 0; oc < out_ch_; ++oc) {
                T s = T(0);
                for (int j = 0; j < cols; ++j) s += g[static_cast<size_t>(oc) * cols + j];
                dbias_[oc] += s;
            }
            im2col(x.image(i), in_ch_, x.h, x.w, k_, stride_, pad_, col_.data());
            // dW += dy * col^T
            gemm(false, true, out_ch_, rows, cols, T(1), g, cols, col_.data(), cols, T(1),
                 dweight_.data());
            // dcol = W^T * dy
            gemm(true, false, rows, cols, out_ch_, T(1), weight_.data(), rows, g, cols, T(0),
                 dcol_.data());
            col2im_add(dcol_.data(), in_ch_, x.h, x.w, k_, stride_, pad_, dx.image(i));
        }
        return dx;
    }

    void zero_grads() {
        std::fill(dweight_.begin(), dweight_.end(), T(0));
        std::fill(dbias_.begin(), dbias_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&weight_, &dweight_, name_ + ".weight"});
        out.push_back({&bias_, &dbias_, name_ + ".bias"});
    }

    std::vector<T>& weight() { return weight_; }
    std::vector<T>& bias() { return bias_; }
    int out_channels() const { return out_ch_; }

private:
    std::string name_;
    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 1, pad_ = 0;
    std::vector<T> weight_, bias_, dweight_, dbias_;
    std::vector<T> col_, dcol_;
    Tensor<T> input_;
};

template <typename T>
class ConvTranspose2d {
public:
    ConvTranspose2d() = default;
    ConvTranspose2d(std::string name, int in_ch, int out_ch, int k, int stride, int pad)
        : name_(std::move(name)), in_ch_(in_ch), out_ch_(out_ch), k_(k), stride_(stride), pad_(pad),
          weight_(static_cast<size_t>(in_ch) * out_ch * k * k),
          bias_(out_ch),
          dweight_(weight_.size(), T(0)),
          dbias_(out_ch, T(0)) {}

    void init_gaussian(Rng& rng, T stddev) {
        for (auto& v : weight_) v = static_cast<T>(rng.normal(0.0, stddev));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        input_ = x;
        const int oh = deconv_out_size(x.h, k_, stride_, pad_);
        const int ow = deconv_out_size(x.w, k_, stride_, pad_);
        Tensor<T> y(x.n, out_ch_, oh, ow);
        const int rows = out_ch_ * k_ * k_;
        const int cols = x.h * x.w;
        col_.resize(static_cast<size_t>(rows) * cols);
        for (int i = 0; i < x.n; ++i) {
            // col = W^T * x, then scatter into the (larger) output grid.
            gemm(true, false, rows, cols, in_ch_, T(1), weight_.data(), rows, x.image(i), cols,
                 T(0), col_.data());
            col2im_add(col_.data(), out_ch_, oh, ow, k_, stride_, pad_, y.image(i));
            T* out = y.image(i);
            const int plane = oh * ow;
            for (int oc = 0; oc < out_ch_; ++oc)
                for (int j = 0; j < plane; ++j) out[static_cast<size_t>(oc) * plane + j] += bias_[oc];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        const Tensor<T>& x = input_;
        Tensor<T> dx(x.n, x.c, x.h, x.w);
        const int rows = out_ch_ * k_ * k_;
        const int cols = x.h * x.w;
        col_.resize(static_cast<size_t>(rows) * cols);
        const int plane = dy.h * dy.w;
        for (int i = 0; i < x.n; ++i) {
            const T* g = dy.image(i);
            for (int oc = 0; oc < out_ch_; ++oc) {
                T s = T(0);
                for (int j = 0; j < plane; ++j) s += g[static_cast<size_t>(oc) * plane + j];
                dbias_[oc] += s;
            }
            // Gathering dy windows turns deconv-backward into a conv forward.
            im2col(g, out_ch_, dy.h, dy.w, k_, stride_, pad_, col_.data());
            // dx = W * col
            gemm(false, false, in_ch_, cols, rows, T(1), weight_.data(), rows, col_.data(), cols,
                 T(0), dx.image(i));
            // dW += x * col^T
            gemm(false, true, in_ch_, rows, cols, T(1), x.image(i), cols, col_.data(), cols, T(1),
                 dweight_.data());
        }
        return dx;
    }

    void zero_grads() {
        std::fill(dweight_.begin(), dweight_.end(), T(0));
        std::fill(dbias_.begin(), dbias_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&weight_, &dweight_, name_ + ".weight"});
        out.push_back({&bias_, &dbias_, name_ + ".bias"});
    }

private:
    std::string name_;
    int in_ch_ = 0, out_ch_ = 0, k_ = 0, stride_ = 2, pad_ = 1;
    std::vector<T> weight_, bias_, dweight_, dbias_;
    std::vector<T> col_;
    Tensor<T> input_;
};

template <typename T>
class BatchNorm2d {
public:
    BatchNorm2d() = default;
    explicit BatchNorm2d(std::string name, int channels)
        : name_(std::move(name)), channels_(channels),
          gamma_(channels, T(1)), beta_(channels, T(0)),
          dgamma_(channels, T(0)), dbeta_(channels, T(0)),
          running_mean_(channels, T(0)), running_var_(channels, T(1)) {}

    Tensor<T> forward(const Tensor<T>& x, Phase phase, Rng*) {
        Tensor<T> y(x.n, x.c, x.h, x.w);
        const int m = x.n * x.h * x.w;
        const int plane = x.plane();
        train_mode_ = (phase == Phase::train);
        if (train_mode_) {
            xhat_ = Tensor<T>(x.n, x.c, x.h, x.w);
            invstd_.assign(channels_, T(0));
            for (int c = 0; c < channels_; ++c) {
                double mean = 0;
                for (int i = 0; i < x.n; ++i) {
                    const T* p = x.image(i) + static_cast<size_t>(c) * plane;
                    for (int j = 0; j < plane; ++j) mean += p[j];
                }
                mean /= m;
                double var = 0;
                for (int i = 0; i < x.n; ++i) {
                    const T* p = x.image(i) + static_cast<size_t>(c) * plane;
                    for (int j = 0; j < plane; ++j) {
                        double d = p[j] - mean;
                        var += d * d;
                    }
                }
                var /= m;
                const T inv = static_cast<T>(1.0 / std::sqrt(var + kEps));
                invstd_[c] = inv;
                running_mean_[c] = static_cast<T>((1.0 - kMomentum) * running_mean_[c] + kMomentum * mean);
                running_var_[c] = static_cast<T>((1.0 - kMomentum) * running_var_[c] + kMomentum * var);
                for (int i = 0; i < x.n; ++i) {
                    const T* p = x.image(i) + static_cast<size_t>(c) * plane;
                    T* xh = xhat_.image(i) + static_cast<size_t>(c) * plane;
                    T* out = y.image(i) + static_cast<size_t>(c) * plane;
                    for (int j = 0; j < plane; ++j) {
                        xh[j] = static_cast<T>((p[j] - mean) * inv);
                        out[j] = gamma_[c] * xh[j] + beta_[c];
                    }
                }
            }
        } else {
            for (int c = 0; c < channels_; ++c) {
                const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[c]) + kEps));
                const T mean = running_mean_[c];
                for (int i = 0; i < x.n; ++i) {
                    const T* p = x.image(i) + static_cast<size_t>(c) * plane;
                    T* out = y.image(i) + static_cast<size_t>(c) * plane;
                    for (int j = 0; j < plane; ++j) out[j] = gamma_[c] * (p[j] - mean) * inv + beta_[c];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.c, dy.h, dy.w);
        const int plane = dy.plane();
        if (!train_mode_) {
            for (int c = 0; c < channels_; ++c) {
                const T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(running_var_[c]) + kEps));
                for (int i = 0; i < dy.n; ++i) {
                    const T* g = dy.image(i) + static_cast<size_t>(c) * plane;
                    T* out = dx.image(i) + static_cast<size_t>(c) * plane;
                    for (int j = 0; j < plane; ++j) out[j] = g[j] * gamma_[c] * inv;
                }
            }
            return dx;
        }
        const int m = dy.n * dy.h * dy.w;
        for (int c = 0; c < channels_; ++c) {
            double sum_dy = 0, sum_dy_xhat = 0;
            for (int i = 0; i < dy.n; ++i) {
                const T* g = dy.image(i) + static_cast<size_t>(c) * plane;
                const T* xh = xhat_.image(i) + static_cast<size_t>(c) * plane;
                for (int j = 0; j < plane; ++j) {
                    sum_dy += g[j];
                    sum_dy_xhat += static_cast<double>(g[j]) * xh[j];
                }
            }
            dbeta_[c] += static_cast<T>(sum_dy);
            dgamma_[c] += static_cast<T>(sum_dy_xhat);
            const double mean_dy = sum_dy / m;
            const double mean_dy_xhat = sum_dy_xhat / m;
            const double scale = static_cast<double>(gamma_[c]) * invstd_[c];
            for (int i = 0; i < dy.n; ++i) {
                const T* g = dy.image(i) + static_cast<size_t>(c) * plane;
                const T* xh = xhat_.image(i) + static_cast<size_t>(c) * plane;
                T* out = dx.image(i) + static_cast<size_t>(c) * plane;
                for (int j = 0; j < plane; ++j)
                    out[j] = static_cast<T>(scale * (g[j] - mean_dy - xh[j] * mean_dy_xhat));
            }
        }
        return dx;
    }

    void zero_grads() {
        std::fill(dgamma_.begin(), dgamma_.end(), T(0));
        std::fill(dbeta_.begin(), dbeta_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&gamma_, &dgamma_, name_ + ".gamma"});
        out.push_back({&beta_, &dbeta_, name_ + ".beta"});
    }

    /// Running statistics: serialized state, not optimized parameters.
    void collect_state(std::vector<std::vector<T>*>& out) {
        out.push_back(&running_mean_);
        out.push_back(&running_var_);
    }

private:
    static constexpr double kEps = 1e-5;
    static constexpr double kMomentum = 0.1;
    std::string name_;
    int channels_ = 0;
    std::vector<T> gamma_, beta_, dgamma_, dbeta_;
    std::vector<T> running_mean_, running_var_;
    std::vector<T> invstd_;
    Tensor<T> xhat_;
    bool train_mode_ = true;
};

template <typename T>
class LeakyReLU {
public:
    explicit LeakyReLU(T slope = T(0.2)) : slope_(slope) {}

    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        input_ = x;
        Tensor<T> y = x;
        for (auto& v : y.data) v = v > T(0) ? v : slope_ * v;
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i)
            if (input_.data[i] <= T(0)) dx.data[i] *= slope_;
        return dx;
    }

private:
    T slope_;
    Tensor<T> input_;
};

template <typename T>
class Sigmoid {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        output_ = x;
        for (auto& v : output_.data) v = T(1) / (T(1) + std::exp(-v));
        return output_;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) {
            const T s = output_.data[i];
            dx.data[i] *= s * (T(1) - s);
        }
        return dx;
    }

private:
    Tensor<T> output_;
};

/// 0.5*(tanh(x)+1): squashes the generator head into [0,1].
template <typename T>
class TanhZeroOne {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        tanh_ = x;
        for (auto& v : tanh_.data) v = std::tanh(v);
        Tensor<T> y = tanh_;
        for (auto& v : y.data) v = T(0.5) * (v + T(1));
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i)
            dx.data[i] *= T(0.5) * (T(1) - tanh_.data[i] * tanh_.data[i]);
        return dx;
    }

private:
    Tensor<T> tanh_;
};

/// Inverted elementwise dropout; identity in deterministic passes.
template <typename T>
class Dropout {
public:
    explicit Dropout(double p = 0.5) : p_(p) {}

    Tensor<T> forward(const Tensor<T>& x, Phase, Rng* rng, bool stochastic) {
        active_ = stochastic;
        if (!stochastic) return x;
        mask_.resize(x.size());
        const T scale = static_cast<T>(1.0 / (1.0 - p_));
        Tensor<T> y = x;
        for (size_t i = 0; i < y.data.size(); ++i) {
            mask_[i] = rng->bernoulli(1.0 - p_) ? scale : T(0);
            y.data[i] *= mask_[i];
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        if (!active_) return dy;
        Tensor<T> dx = dy;
        for (size_t i = 0; i < dx.data.size(); ++i) dx.data[i] *= mask_[i];
        return dx;
    }

private:
    double p_;
    bool active_ = false;
    std::vector<T> mask_;
};

/// 2x2 stride-2 max pooling.
template <typename T>
class MaxPool2d {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        const int oh = x.h / 2, ow = x.w / 2;
        in_h_ = x.h;
        in_w_ = x.w;
        Tensor<T> y(x.n, x.c, oh, ow);
        argmax_.assign(y.size(), 0);
        size_t oi = 0;
        for (int i = 0; i < x.n; ++i) {
            for (int c = 0; c < x.c; ++c) {
                const T* src = x.image(i) + static_cast<size_t>(c) * x.plane();
                for (int oy = 0; oy < oh; ++oy) {
                    for (int ox = 0; ox < ow; ++ox, ++oi) {
                        T best = src[(2 * oy) * x.w + 2 * ox];
                        int arg = (2 * oy) * x.w + 2 * ox;
                        for (int dy = 0; dy < 2; ++dy)
                            for (int dx = 0; dx < 2; ++dx) {
                                int idx = (2 * oy + dy) * x.w + (2 * ox + dx);
                                if (src[idx] > best) {
                                    best = src[idx];
                                    arg = idx;
                                }
                            }
                        y.data[oi] = best;
                        argmax_[oi] = arg;
                    }
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.c, in_h_, in_w_);
        size_t oi = 0;
        for (int i = 0; i < dy.n; ++i)
            for (int c = 0; c < dy.c; ++c) {
                T* dst = dx.image(i) + static_cast<size_t>(c) * dx.plane();
                const size_t base = oi;
                for (int j = 0; j < dy.plane(); ++j)
                    dst[argmax_[base + j]] += dy.data[base + j];
                oi += dy.plane();
            }
        return dx;
    }

private:
    int in_h_ = 0, in_w_ = 0;
    std::vector<int> argmax_;
};

/// Max-Feature-Map: splits channels in half, keeps the elementwise max.
template <typename T>
class MaxFeatureMap {
public:
    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        const int half = x.c / 2;
        Tensor<T> y(x.n, half, x.h, x.w);
        winner_hi_.assign(y.size(), 0);
        const int plane = x.plane();
        size_t oi = 0;
        for (int i = 0; i < x.n; ++i) {
            const T* lo = x.image(i);
            const T* hi = x.image(i) + static_cast<size_t>(half) * plane;
            for (size_t j = 0; j < static_cast<size_t>(half) * plane; ++j, ++oi) {
                if (hi[j] > lo[j]) {
                    y.data[oi] = hi[j];
                    winner_hi_[oi] = 1;
                } else {
                    y.data[oi] = lo[j];
                }
            }
        }
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(dy.n, dy.c * 2, dy.h, dy.w);
        const int plane = dy.plane();
        const size_t half_sz = static_cast<size_t>(dy.c) * plane;
        size_t oi = 0;
        for (int i = 0; i < dy.n; ++i) {
            T* lo = dx.image(i);
            T* hi = dx.image(i) + half_sz;
            for (size_t j = 0; j < half_sz; ++j, ++oi) {
                if (winner_hi_[oi])
                    hi[j] = dy.data[oi];
                else
                    lo[j] = dy.data[oi];
            }
        }
        return dx;
    }

private:
    std::vector<uint8_t> winner_hi_;
};

template <typename T>
class Linear {
public:
    Linear() = default;
    Linear(std::string name, int in_dim, int out_dim)
        : name_(std::move(name)), in_(in_dim), out_(out_dim),
          weight_(static_cast<size_t>(in_dim) * out_dim),
          bias_(out_dim),
          dweight_(weight_.size(), T(0)),
          dbias_(out_dim, T(0)) {}

    void init_gaussian(Rng& rng, T stddev) {
        for (auto& v : weight_) v = static_cast<T>(rng.normal(0.0, stddev));
        std::fill(bias_.begin(), bias_.end(), T(0));
    }

    void init_he(Rng& rng) {
        init_gaussian(rng, static_cast<T>(std::sqrt(2.0 / in_)));
    }

    /// Input flattened per image; output (n, out, 1, 1).
    Tensor<T> forward(const Tensor<T>& x, Phase, Rng*) {
        input_ = x;
        Tensor<T> y(x.n, out_, 1, 1);
        // y = x_flat * W^T
        gemm(false, true, x.n, out_, in_, T(1), x.ptr(), in_, weight_.data(), in_, T(0), y.ptr());
        for (int i = 0; i < x.n; ++i)
            for (int o = 0; o < out_; ++o) y.image(i)[o] += bias_[o];
        return y;
    }

    Tensor<T> backward(const Tensor<T>& dy) {
        Tensor<T> dx(input_.n, input_.c, input_.h, input_.w);
        // dW += dy^T * x
        gemm(true, false, out_, in_, dy.n, T(1), dy.ptr(), out_, input_.ptr(), in_, T(1),
             dweight_.data());
        for (int i = 0; i < dy.n; ++i)
            for (int o = 0; o < out_; ++o) dbias_[o] += dy.image(i)[o];
        // dx = dy * W
        gemm(false, false, dy.n, in_, out_, T(1), dy.ptr(), out_, weight_.data(), in_, T(0),
             dx.ptr());
        return dx;
    }

    void zero_grads() {
        std::fill(dweight_.begin(), dweight_.end(), T(0));
        std::fill(dbias_.begin(), dbias_.end(), T(0));
    }

    void collect(std::vector<ParamRef<T>>& out) {
        out.push_back({&weight_, &dweight_, name_ + ".weight"});
        out.push_back({&bias_, &dbias_, name_ + ".bias"});
    }

private:
    std::string name_;
    int in_ = 0, out_ = 0;
    std::vector<T> weight_, bias_, dweight_, dbias_;
    Tensor<T> input_;
};

} // namespace ppdeid::nn
