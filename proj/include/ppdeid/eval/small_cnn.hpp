#pragma once

#include <cmath>
#include <vector>

#include "ppdeid/data/image.hpp"
#include "ppdeid/nn/adam.hpp"
#include "ppdeid/nn/layers.hpp"

namespace ppdeid {

/// Compact softmax classifier used for the built-in face detector and
/// the attribute-preservation probes: three stride-2 conv+ReLU stages on
/// a 64x64 resample, global average pooling, linear head.
class SmallCnn {
public:
    static constexpr int kInputSize = 64;

    SmallCnn() = default;
    SmallCnn(int classes, uint64_t seed)
        : classes_(classes),
          conv1_("c1", 1, 8, 3, 2, 1),
          conv2_("c2", 8, 16, 3, 2, 1),
          conv3_("c3", 16, 32, 3, 2, 1),
          head_("head", 32, classes) {
        Rng rng(derive_seed(seed, 0x736d6cULL));
        conv1_.init_he(rng);
        conv2_.init_he(rng);
        conv3_.init_he(rng);
        head_.init_he(rng);
    }

    int classes() const { return classes_; }

    std::vector<double> predict_probs(const GrayImage& img) {
        Tensor<float> logits = forward(prepare(img));
        return softmax(logits.ptr());
    }

    int predict(const GrayImage& img) {
        auto p = predict_probs(img);
        int best = 0;
        for (int k = 1; k < classes_; ++k)
            if (p[k] > p[best]) best = k;
        return best;
    }

    /// Minibatch Adam training with softmax cross-entropy.
    void fit(const std::vector<const GrayImage*>& images, const std::vector<int>& labels,
             int steps, int batch_size, double lr, uint64_t seed) {
        nn::Adam<float> adam(lr);
        adam.ensure_buffers(params());
        Rng rng(derive_seed(seed, 0x666974ULL));
        for (int s = 0; s < steps; ++s) {
            Tensor<float> x(batch_size, 1, kInputSize, kInputSize);
            std::vector<int> y(batch_size);
            for (int b = 0; b < batch_size; ++b) {
                int i = rng.range_int(0, static_cast<int>(images.size()));
                Tensor<float> one = prepare(*images[i]);
                std::copy(one.ptr(), one.ptr() + one.size(), x.image(b));
                y[b] = labels[i];
            }
            Tensor<float> logits = forward(x);
            Tensor<float> dlogits(batch_size, classes_, 1, 1);
            for (int b = 0; b < batch_size; ++b) {
                auto p = softmax(logits.image(b));
                for (int k = 0; k < classes_; ++k)
                    dlogits.image(b)[k] =
                        static_cast<float>((p[k] - (k == y[b] ? 1.0 : 0.0)) / batch_size);
            }
            zero_grads();
            backward(dlogits);
            adam.step(params());
        }
    }

private:
    Tensor<float> prepare(const GrayImage& img) {
        GrayImage scaled =
            (img.h == kInputSize && img.w == kInputSize) ? img : resize_bilinear(img, kInputSize, kInputSize);
        std::vector<const GrayImage*> one{&scaled};
        return to_tensor(one);
    }

    Tensor<float> forward(const Tensor<float>& x) {
        auto a = act1_.forward(conv1_.forward(x, nn::Phase::eval, nullptr), nn::Phase::eval, nullptr);
        a = act2_.forward(conv2_.forward(a, nn::Phase::eval, nullptr), nn::Phase::eval, nullptr);
        a = act3_.forward(conv3_.forward(a, nn::Phase::eval, nullptr), nn::Phase::eval, nullptr);
        pooled_in_ = a;
        Tensor<float> pooled(a.n, a.c, 1, 1);
        for (int i = 0; i < a.n; ++i)
            for (int c = 0; c < a.c; ++c) {
                const float* p = a.image(i) + static_cast<size_t>(c) * a.plane();
                double s = 0;
                for (int j = 0; j < a.plane(); ++j) s += p[j];
                pooled.image(i)[c] = static_cast<float>(s / a.plane());
            }
        return head_.forward(pooled, nn::Phase::eval, nullptr);
    }

    void backward(const Tensor<float>& dlogits) {
        Tensor<float> dpooled = head_.backward(dlogits);
        Tensor<float> da(pooled_in_.n, pooled_in_.c, pooled_in_.h, pooled_in_.w);
        const float inv = 1.f / pooled_in_.plane();
        for (int i = 0; i < da.n; ++i)
            for (int c = 0; c < da.c; ++c) {
                float g = dpooled.image(i)[c] * inv;
                float* p = da.image(i) + static_cast<size_t>(c) * da.plane();
                for (int j = 0; j < da.plane(); ++j) p[j] = g;
            }
        auto d = conv3_.backward(act3_.backward(da));
        d = conv2_.backward(act2_.backward(d));
        conv1_.backward(act1_.backward(d));
    }

    std::vector<nn::ParamRef<float>> params() {
        std::vector<nn::ParamRef<float>> out;
        conv1_.collect(out);
        conv2_.collect(out);
        conv3_.collect(out);
        head_.collect(out);
        return out;
    }

    void zero_grads() {
        conv1_.zero_grads();
        conv2_.zero_grads();
        conv3_.zero_grads();
        head_.zero_grads();
    }

    std::vector<double> softmax(const float* logits) {
        std::vector<double> p(classes_);
        double m = logits[0];
        for (int k = 1; k < classes_; ++k) m = std::max(m, static_cast<double>(logits[k]));
        double z = 0;
        for (int k = 0; k < classes_; ++k) {
            p[k] = std::exp(static_cast<double>(logits[k]) - m);
            z += p[k];
        }
        for (auto& v : p) v /= z;
        return p;
    }

    int classes_ = 2;
    nn::Conv2d<float> conv1_, conv2_, conv3_;
    nn::Linear<float> head_;
    nn::LeakyReLU<float> act1_{0.f}, act2_{0.f}, act3_{0.f};
    Tensor<float> pooled_in_;
};

} // namespace ppdeid
