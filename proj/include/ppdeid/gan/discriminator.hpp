#pragma once

#include <array>
#include <vector>

#include "ppdeid/core/error.hpp"
#include "ppdeid/data/image.hpp"
#include "ppdeid/nn/layers.hpp"

namespace ppdeid {

struct DiscriminatorSchedule {
    std::array<int, 4> ch = {64, 128, 256, 512};

    static DiscriminatorSchedule scaled(double width) {
        DiscriminatorSchedule s;
        for (auto& c : s.ch) c = std::max(2, static_cast<int>(c * width + 0.5) / 2 * 2);
        return s;
    }
};

/// Patch discriminator over 1x128x128 inputs: a 30x30 grid of scores,
/// each covering a 34x34 receptive field. Two stride-2 and two stride-1
/// k4 convolutions plus a 1x1 projection realize exactly N=30, RF=34
/// (128 -> 64 -> 32 -> 31 -> 30 -> 30).
template <typename T>
class PatchDiscriminator {
public:
    static constexpr int kPatchGrid = 30;
    static constexpr int kReceptiveField = 34;

    explicit PatchDiscriminator(uint64_t seed, DiscriminatorSchedule schedule = {})
        : schedule_(schedule) {
        const auto& c = schedule_.ch;
        conv_[0] = nn::Conv2d<T>("disc1", 1, c[0], 4, 2, 1);
        conv_[1] = nn::Conv2d<T>("disc2", c[0], c[1], 4, 2, 1);
        conv_[2] = nn::Conv2d<T>("disc3", c[1], c[2], 4, 1, 1);
        conv_[3] = nn::Conv2d<T>("disc4", c[2], c[3], 4, 1, 1);
        proj_ = nn::Conv2d<T>("disc5", c[3], 1, 1, 1, 0);
        bn_[0] = nn::BatchNorm2d<T>("disc2.bn", c[1]);
        bn_[1] = nn::BatchNorm2d<T>("disc3.bn", c[2]);
        bn_[2] = nn::BatchNorm2d<T>("disc4.bn", c[3]);

        Rng rng(derive_seed(seed, 0x64697363ULL));
        for (auto& cv : conv_) cv.init_gaussian(rng, T(0.02));
        proj_.init_gaussian(rng, T(0.02));
    }

    const DiscriminatorSchedule& schedule() const { return schedule_; }

    /// Raw (pre-sigmoid) 1x30x30 score map.
    Tensor<T> forward_logits(const Tensor<T>& x, nn::Phase phase) {
        if (x.c != 1 || x.h != kFaceSize || x.w != kFaceSize)
            require_shape(x, 1, kFaceSize, kFaceSize, "discriminator");
        Tensor<T> a = x;
        for (int i = 0; i < 4; ++i) {
            a = conv_[i].forward(a, phase, nullptr);
            if (i >= 1) a = bn_[i - 1].forward(a, phase, nullptr);
            a = act_[i].forward(a, phase, nullptr);
        }
        return proj_.forward(a, phase, nullptr);
    }

    /// Sigmoid-bounded patch scores in (0,1).
    Tensor<T> discriminate(const Tensor<T>& x, nn::Phase phase) {
        Tensor<T> logits = forward_logits(x, phase);
        for (auto& v : logits.data) v = T(1) / (T(1) + std::exp(-v));
        return logits;
    }

    /// Backpropagates d(loss)/d(logits); returns d(loss)/d(input).
    Tensor<T> backward(const Tensor<T>& dlogits) {
        Tensor<T> d = proj_.backward(dlogits);
        for (int i = 3; i >= 0; --i) {
            d = act_[i].backward(d);
            if (i >= 1) d = bn_[i - 1].backward(d);
            d = conv_[i].backward(d);
        }
        return d;
    }

    void zero_grads() {
        for (auto& c : conv_) c.zero_grads();
        for (auto& b : bn_) b.zero_grads();
        proj_.zero_grads();
    }

    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        for (auto& c : conv_) c.collect(out);
        proj_.collect(out);
        for (auto& b : bn_) b.collect(out);
        return out;
    }

    std::vector<std::vector<T>*> state_arrays() {
        std::vector<std::vector<T>*> out;
        for (auto& b : bn_) b.collect_state(out);
        return out;
    }

private:
    DiscriminatorSchedule schedule_;
    std::array<nn::Conv2d<T>, 4> conv_;
    nn::Conv2d<T> proj_;
    std::array<nn::BatchNorm2d<T>, 3> bn_;
    std::array<nn::LeakyReLU<T>, 4> act_{nn::LeakyReLU<T>(T(0.2)), nn::LeakyReLU<T>(T(0.2)),
                                         nn::LeakyReLU<T>(T(0.2)), nn::LeakyReLU<T>(T(0.2))};
};

template <typename T = float>
PatchDiscriminator<T> build_discriminator(uint64_t seed) {
    return PatchDiscriminator<T>(seed);
}

} // namespace ppdeid
