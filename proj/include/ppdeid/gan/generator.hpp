#pragma once

#include <array>
#include <memory>
#include <string>
#include <vector>

#include "ppdeid/core/error.hpp"
#include "ppdeid/data/image.hpp"
#include "ppdeid/nn/layers.hpp"

namespace ppdeid {

enum class NoiseMode { stochastic, deterministic };

/// Encoder channel widths, outermost first; the last entry is the
/// bottleneck and stays 256 (its activation is the 256x1x1 embedding).
/// Decoder widths mirror the encoder with skip concatenation.
struct GeneratorSchedule {
    std::array<int, 7> enc = {64, 128, 256, 512, 512, 512, 256};

    static GeneratorSchedule scaled(double width) {
        GeneratorSchedule s;
        for (int i = 0; i < 6; ++i)
            s.enc[i] = std::max(2, static_cast<int>(s.enc[i] * width + 0.5) / 2 * 2);
        return s;
    }
};

/// "U-Net" auto-encoder G: 7 stride-2 conv blocks down to a 256x1x1
/// bottleneck, mirrored stride-2 deconv blocks with skip concatenation,
/// two dropout layers in the decoder middle as the noise source, and a
/// [0,1] tanh head. Blocks are Conv-BatchNorm-ReLU; batch norm is
/// dropped where its statistics degenerate (first layer, 1x1 bottleneck,
/// output head).
template <typename T>
class UNetGenerator {
public:
    explicit UNetGenerator(uint64_t seed, GeneratorSchedule schedule = {})
        : schedule_(schedule) {
        const auto& e = schedule_.enc;
        enc_[0] = nn::Conv2d<T>("enc1", 1, e[0], 4, 2, 1);
        for (int i = 1; i < 7; ++i)
            enc_[i] = nn::Conv2d<T>("enc" + std::to_string(i + 1), e[i - 1], e[i], 4, 2, 1);
        for (int i = 1; i < 6; ++i) enc_bn_[i] = nn::BatchNorm2d<T>("enc" + std::to_string(i + 1) + ".bn", e[i]);

        const std::array<int, 7> dout = {e[5], e[4], e[3], e[2], e[1], e[0], 1};
        std::array<int, 7> din;
        din[0] = e[6];
        for (int i = 1; i < 7; ++i) din[i] = dout[i - 1] + e[6 - i];
        for (int i = 0; i < 7; ++i)
            dec_[i] = nn::ConvTranspose2d<T>("dec" + std::to_string(i + 1), din[i], dout[i], 4, 2, 1);
        for (int i = 0; i < 6; ++i) dec_bn_[i] = nn::BatchNorm2d<T>("dec" + std::to_string(i + 1) + ".bn", dout[i]);

        Rng rng(derive_seed(seed, 0x6e6e7247ULL));
        for (auto& c : enc_) c.init_gaussian(rng, T(0.02));
        for (auto& d : dec_) d.init_gaussian(rng, T(0.02));
    }

    const GeneratorSchedule& schedule() const { return schedule_; }

    /// Diagnostic hook: zero the outermost skip (enc1 activation) at the
    /// final concatenation.
    void set_ablate_outer_skip(bool v) { ablate_outer_skip_ = v; }

    /// Spatial sizes of the encoder activations from the last forward,
    /// outermost to bottleneck.
    const std::array<int, 7>& encoder_spatial_trace() const { return spatial_trace_; }

    /// Channel counts of the encoder activations from the last forward.
    const std::array<int, 7>& encoder_channel_trace() const { return channel_trace_; }

    /// phase controls batch-norm statistics; noise controls the two
    /// decoder dropout layers (the realization of z). rng must be
    /// non-null when noise is stochastic.
    Tensor<T> forward(const Tensor<T>& x, nn::Phase phase, NoiseMode noise, Rng* rng = nullptr) {
        if (x.c != 1 || x.h != kFaceSize || x.w != kFaceSize)
            require_shape(x, 1, kFaceSize, kFaceSize, "generator");
        const bool stochastic = noise == NoiseMode::stochastic;
        if (stochastic && rng == nullptr)
            raise("generator", "InvalidArgument", "stochastic noise requires an RNG");

        Tensor<T> a = x;
        for (int i = 0; i < 7; ++i) {
            a = enc_[i].forward(a, phase, rng);
            if (i >= 1 && i <= 5) a = enc_bn_[i].forward(a, phase, rng);
            a = enc_act_[i].forward(a, phase, rng);
            skips_[i] = a;
            spatial_trace_[i] = a.h;
            channel_trace_[i] = a.c;
        }

        Tensor<T> d = a; // bottleneck activation, 256x1x1
        for (int i = 0; i < 7; ++i) {
            if (i > 0) {
                Tensor<T> skip = skips_[6 - i];
                if (i == 6 && ablate_outer_skip_) skip.fill(T(0));
                d = concat_channels(d, skip);
                concat_main_ch_[i] = d.c - skip.c;
            }
            d = dec_[i].forward(d, phase, rng);
            if (i < 6) {
                d = dec_bn_[i].forward(d, phase, rng);
                d = dec_act_[i].forward(d, phase, rng);
                if (i == 1) d = drop_[0].forward(d, phase, rng, stochastic);
                if (i == 2) d = drop_[1].forward(d, phase, rng, stochastic);
            }
        }
        return head_.forward(d, phase, rng);
    }

    /// Backpropagates d(loss)/d(output); accumulates parameter gradients
    /// and returns d(loss)/d(input).
    Tensor<T> backward(const Tensor<T>& dout) {
        Tensor<T> d = head_.backward(dout);
        std::array<Tensor<T>, 7> skip_grads;
        for (int i = 6; i >= 0; --i) {
            if (i < 6) {
                if (i == 1) d = drop_[0].backward(d);
                if (i == 2) d = drop_[1].backward(d);
                d = dec_act_[i].backward(d);
                d = dec_bn_[i].backward(d);
            }
            d = dec_[i].backward(d);
            if (i > 0) {
                Tensor<T> main(d.n, concat_main_ch_[i], d.h, d.w);
                Tensor<T> skip(d.n, d.c - concat_main_ch_[i], d.h, d.w);
                split_channels(d, main, skip);
                if (i == 6 && ablate_outer_skip_) skip.fill(T(0));
                skip_grads[6 - i] = std::move(skip);
                d = std::move(main);
            }
        }
        // d now holds the gradient on the bottleneck activation.
        for (int i = 6; i >= 0; --i) {
            if (i < 6 && skip_grads[i].size() > 0)
                for (size_t j = 0; j < d.data.size(); ++j) d.data[j] += skip_grads[i].data[j];
            d = enc_act_[i].backward(d);
            if (i >= 1 && i <= 5) d = enc_bn_[i].backward(d);
            d = enc_[i].backward(d);
        }
        return d;
    }

    void zero_grads() {
        for (auto& c : enc_) c.zero_grads();
        for (int i = 1; i < 6; ++i) enc_bn_[i].zero_grads();
        for (auto& c : dec_) c.zero_grads();
        for (auto& b : dec_bn_) b.zero_grads();
    }

    std::vector<nn::ParamRef<T>> params() {
        std::vector<nn::ParamRef<T>> out;
        for (auto& c : enc_) c.collect(out);
        for (int i = 1; i < 6; ++i) enc_bn_[i].collect(out);
        for (auto& c : dec_) c.collect(out);
        for (auto& b : dec_bn_) b.collect(out);
        return out;
    }

    std::vector<std::vector<T>*> state_arrays() {
        std::vector<std::vector<T>*> out;
        for (int i = 1; i < 6; ++i) enc_bn_[i].collect_state(out);
        for (auto& b : dec_bn_) b.collect_state(out);
        return out;
    }

private:
    GeneratorSchedule schedule_;
    std::array<nn::Conv2d<T>, 7> enc_;
    std::array<nn::BatchNorm2d<T>, 6> enc_bn_; // index 1..5 used
    std::array<nn::LeakyReLU<T>, 7> enc_act_{nn::LeakyReLU<T>(T(0.2)), nn::LeakyReLU<T>(T(0.2)),
                                             nn::LeakyReLU<T>(T(0.2)), nn::LeakyReLU<T>(T(0.2)),
                                             nn::LeakyReLU<T>(T(0.2)), nn::LeakyReLU<T>(T(0.2)),
                                             nn::LeakyReLU<T>(T(0.2))};
    std::array<nn::ConvTranspose2d<T>, 7> dec_;
    std::array<nn::BatchNorm2d<T>, 6> dec_bn_;
    std::array<nn::LeakyReLU<T>, 6> dec_act_{nn::LeakyReLU<T>(T(0)), nn::LeakyReLU<T>(T(0)),
                                             nn::LeakyReLU<T>(T(0)), nn::LeakyReLU<T>(T(0)),
                                             nn::LeakyReLU<T>(T(0)), nn::LeakyReLU<T>(T(0))};
    std::array<nn::Dropout<T>, 2> drop_{nn::Dropout<T>(0.5), nn::Dropout<T>(0.5)};
    nn::TanhZeroOne<T> head_;
    std::array<Tensor<T>, 7> skips_;
    std::array<int, 7> concat_main_ch_{};
    std::array<int, 7> spatial_trace_{};
    std::array<int, 7> channel_trace_{};
    bool ablate_outer_skip_ = false;
};

/// Spec entry point: the default generator for a seed.
template <typename T = float>
UNetGenerator<T> build_generator(uint64_t seed) {
    return UNetGenerator<T>(seed);
}

} // namespace ppdeid
