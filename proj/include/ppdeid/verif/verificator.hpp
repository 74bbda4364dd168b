#pragma once

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "ppdeid/core/error.hpp"
#include "ppdeid/core/hash.hpp"
#include "ppdeid/data/image.hpp"
#include "ppdeid/nn/layers.hpp"

namespace ppdeid {

constexpr int kEmbeddingDim = 256;

/// Identity embedding f(x): 256-vector, optionally L2-normalized.
template <typename T>
struct Embedding {
    std::vector<T> values;
    bool normalized = false;

    T distance(const Embedding& o) const {
        if (values.size() != o.values.size())
            raise("verificator", "DimensionMismatch",
                  std::to_string(values.size()) + " vs " + std::to_string(o.values.size()));
        double s = 0;
        for (size_t i = 0; i < values.size(); ++i) {
            double d = values[i] - o.values[i];
            s += d * d;
        }
        return static_cast<T>(std::sqrt(s));
    }
};

/// Filter counts after each MFM through the conv stack.
struct VerificatorSchedule {
    std::array<int, 5> mfm_out = {48, 96, 192, 128, 128};

    static VerificatorSchedule scaled(double width) {
        VerificatorSchedule s;
        for (auto& c : s.mfm_out) c = std::max(4, static_cast<int>(c * width + 0.5) / 2 * 2);
        return s;
    }
};

/// Light-CNN-9-style Siamese embedding network: 5 convolution layers,
/// 4 network-in-network (1x1) layers, Max-Feature-Map activations,
/// 4 max-pooling layers and a fully connected head onto 256 dimensions
/// (MFM over a 512-wide FC).
template <typename T>
class LightCnn9 {
public:
    explicit LightCnn9(uint64_t seed, VerificatorSchedule schedule = {})
        : schedule_(schedule) {
        const auto& f = schedule_.mfm_out;
        conv_[0] = nn::Conv2d<T>("conv1", 1, 2 * f[0], 5, 1, 2);
        nin_[0] = nn::Conv2d<T>("conv2a", f[0], 2 * f[0], 1, 1, 0);
        conv_[1] = nn::Conv2d<T>("conv2", f[0], 2 * f[1], 3, 1, 1);
        nin_[1] = nn::Conv2d<T>("conv3a", f[1], 2 * f[1], 1, 1, 0);
        conv_[2] = nn::Conv2d<T>("conv3", f[1], 2 * f[2], 3, 1, 1);
        nin_[2] = nn::Conv2d<T>("conv4a", f[2], 2 * f[2], 1, 1, 0);
        conv_[3] = nn::Conv2d<T>("conv4", f[2], 2 * f[3], 3, 1, 1);
        nin_[3] = nn::Conv2d<T>("conv5a", f[3], 2 * f[3], 1, 1, 0);
        conv_[4] = nn::Conv2d<T>("conv5", f[3], 2 * f[4], 3, 1, 1);
        fc_ = nn::Linear<T>("fc1", f[4] * 8 * 8, 2 * kEmbeddingDim);

        Rng rng(derive_seed(seed, 0x76657269ULL));
        for (auto& c : conv_) c.init_he(rng);
        for (auto& c : nin_) c.init_he(rng);
        fc_.init_he(rng);
    }

    const VerificatorSchedule& schedule() const { return schedule_; }

    bool frozen() const { return frozen_; }
    void freeze() { frozen_ = true; }

    /// Raw (unnormalized) embeddings as an (n, 256, 1, 1) tensor.
    Tensor<T> forward_embeddings(const Tensor<T>& x) {
        if (x.c != 1 || x.h != kFaceSize || x.w != kFaceSize)
            require_shape(x, 1, kFaceSize, kFaceSize, "verificator");
        const auto phase = nn::Phase::eval;
        Tensor<T> a = conv_[0].forward(x, phase, nullptr);
        a = mfm_[0].forward(a, phase, nullptr);
        a = pool_[0].forward(a, phase, nullptr);

        a = nin_[0].forward(a, phase, nullptr);
        a = mfm_[1].forward(a, phase, nullptr);
        a = conv_[1].forward(a, phase, nullptr);
        a = mfm_[2].forward(a, phase, nullptr);
        a = pool_[1].forward(a, phase, nullptr);

        a = nin_[1].forward(a, phase, nullptr);
        a = mfm_[3].forward(a, phase, nullptr);
        a = conv_[2].forward(a, phase, nullptr);
        a = mfm_[4].forward(a, phase, nullptr);
        a = pool_[2].forward(a, phase, nullptr);

        a = nin_[2].forward(a, phase, nullptr);
        a = mfm_[5].forward(a, phase, nullptr);
        a = conv_[3].forward(a, phase, nullptr);
        a = mfm_[6].forward(a, phase, nullptr);

        a = nin_[3].forward(a, phase, nullptr);
        a = mfm_[7].forward(a, phase, nullptr);
        a = conv_[4].forward(a, phase, nullptr);
        a = mfm_[8].forward(a, phase, nullptr);
        a = pool_[3].forward(a, phase, nullptr);

        a = fc_.forward(a, phase, nullptr);
        return mfm_[9].forward(a, phase, nullptr);
    }

    /// Backpropagates d(loss)/d(embeddings). Gradient buffers are filled
    /// even when frozen (weights themselves are never touched); the
    /// return value carries d(loss)/d(input) for upstream modules.
    Tensor<T> backward(const Tensor<T>& dembed) {
        Tensor<T> d = mfm_[9].backward(dembed);
        d = fc_.backward(d);
        d = pool_[3].backward(d);
        d = mfm_[8].backward(d);
        d = conv_[4].backward(d);
        d = mfm_[7].backward(d);
        d = nin_[3].backward(d);

        d = mfm_[6].backward(d);
        d = conv_[3].backward(d);
        d = mfm_[5].backward(d);
        d = nin_[2].backward(d);
        d = pool_[2].backward(d);

        d = mfm_[4].backward(d);
        d = conv_[2].backward(d);
        d = mfm_[3].backward(d);
        d = nin_[1].backward(d);
        d = pool_[1].backward(d);

        d = mfm_[2].backward(d);
        d = conv_[1].backward(d);
        d = mfm_[1].backward(d);
        d = nin_[0].backward(d);
        d = pool_[0].backward(d);

        d = mfm_[0].backward(d);
        return conv_[0].backward(d);
    }

    void zero_grads() {
        for (auto& c : conv_) c.zero_grads();
        for (auto& c : nin_) c.zero_grads();
        fc_.zero_grads();
    }

    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        conv_[0].collect(out);
        nin_[0].collect(out);
        conv_[1].collect(out);
        nin_[1].collect(out);
        conv_[2].collect(out);
        nin_[2].collect(out);
        conv_[3].collect(out);
        nin_[3].collect(out);
        conv_[4].collect(out);
        fc_.collect(out);
        return out;
    }

    uint64_t weight_checksum() {
        std::vector<std::vector<T>*> arrays;
        for (auto& p : params()) arrays.push_back(p.value);
        return checksum_arrays(arrays);
    }

    Embedding<T> embed(const Tensor<T>& single_image, bool normalize) {
        Tensor<T> e = forward_embeddings(single_image);
        Embedding<T> out;
        out.values.assign(e.ptr(), e.ptr() + kEmbeddingDim);
        if (normalize) {
            double r = 0;
            for (T v : out.values) r += static_cast<double>(v) * v;
            r = std::max(std::sqrt(r), 1e-12);
            for (T& v : out.values) v = static_cast<T>(v / r);
            out.normalized = true;
        }
        return out;
    }

private:
    VerificatorSchedule schedule_;
    std::array<nn::Conv2d<T>, 5> conv_;
    std::array<nn::Conv2d<T>, 4> nin_;
    nn::Linear<T> fc_;
    std::array<nn::MaxFeatureMap<T>, 10> mfm_;
    std::array<nn::MaxPool2d<T>, 4> pool_;
    bool frozen_ = false;
};

template <typename T = float>
LightCnn9<T> build_verificator(uint64_t seed) {
    return LightCnn9<T>(seed);
}

/// Eq.-style contrastive loss on a pair of embeddings:
///   eta = 0 (same subject):      1/2 * ||e_i - e_j||^2
///   eta = 1 (different subjects): 1/2 * max(0, alpha - ||e_i - e_j||)^2
template <typename T>
T contrastive_loss(const std::vector<T>& e_i, const std::vector<T>& e_j, int eta, T alpha) {
    if (e_i.size() != e_j.size())
        raise("verificator", "DimensionMismatch",
              std::to_string(e_i.size()) + " vs " + std::to_string(e_j.size()));
    if (alpha <= T(0)) raise("verificator", "InvalidArgument", "margin must be positive");
    double d2 = 0;
    for (size_t k = 0; k < e_i.size(); ++k) {
        double d = static_cast<double>(e_i[k]) - e_j[k];
        d2 += d * d;
    }
    if (eta == 0) return static_cast<T>(0.5 * d2);
    double gap = alpha - std::sqrt(d2);
    return gap > 0 ? static_cast<T>(0.5 * gap * gap) : T(0);
}

/// In-place row L2 normalization of an (n, d, 1, 1) tensor; returns the
/// pre-normalization norms for gradient chaining.
template <typename T>
std::vector<double> normalize_rows(Tensor<T>& e) {
    std::vector<double> norms(e.n);
    for (int i = 0; i < e.n; ++i) {
        T* row = e.image(i);
        double r = 0;
        for (int k = 0; k < e.c; ++k) r += static_cast<double>(row[k]) * row[k];
        r = std::max(std::sqrt(r), 1e-12);
        norms[i] = r;
        for (int k = 0; k < e.c; ++k) row[k] = static_cast<T>(row[k] / r);
    }
    return norms;
}

/// Chain rule through row normalization: given u = e/||e|| (already in
/// `normalized`) and dL/du, produces dL/de.
template <typename T>
Tensor<T> normalize_rows_backward(const Tensor<T>& normalized, const std::vector<double>& norms,
                                  const Tensor<T>& dupstream) {
    Tensor<T> de(dupstream.n, dupstream.c, 1, 1);
    for (int i = 0; i < dupstream.n; ++i) {
        const T* u = normalized.image(i);
        const T* du = dupstream.image(i);
        T* out = de.image(i);
        double dot = 0;
        for (int k = 0; k < dupstream.c; ++k) dot += static_cast<double>(u[k]) * du[k];
        for (int k = 0; k < dupstream.c; ++k)
            out[k] = static_cast<T>((du[k] - u[k] * dot) / norms[i]);
    }
    return de;
}

/// Decision rule: same identity iff embedding distance is strictly below
/// the threshold.
struct VerifyResult {
    bool same = false;
    double distance = 0;
};

template <typename T>
VerifyResult verify(LightCnn9<T>& net, const Tensor<T>& x_a, const Tensor<T>& x_b,
                    double threshold) {
    if (threshold <= 0) raise("verificator", "InvalidArgument", "threshold must be positive");
    Embedding<T> ea = net.embed(x_a, true);
    Embedding<T> eb = net.embed(x_b, true);
    VerifyResult r;
    r.distance = ea.distance(eb);
    r.same = r.distance < threshold;
    return r;
}

} // namespace ppdeid
