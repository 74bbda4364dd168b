#include <doctest.h>

#include <cmath>

#include "ppdeid/core/error.hpp"
#include "ppdeid/gan/discriminator.hpp"

using namespace ppdeid;
using nn::Phase;

namespace {

Tensor<float> random_face(uint64_t seed) {
    Tensor<float> t(1, 1, kFaceSize, kFaceSize);
    Rng rng(seed);
    for (auto& v : t.data) v = static_cast<float>(rng.uniform());
    return t;
}

/// Interior patch cells whose 34x34 window lies fully inside the image:
/// cell r covers input rows [4r-11, 4r+22], valid for r in [3, 26].
constexpr int kInteriorLo = 3;
constexpr int kInteriorHi = 26;

int window_start(int cell) { return 4 * cell - 11; }

} // namespace

TEST_CASE("discriminator: 1x30x30 output and (0,1) scores") {
    PatchDiscriminator<float> disc(9);
    Tensor<float> zeros(1, 1, kFaceSize, kFaceSize);
    Tensor<float> scores = disc.discriminate(zeros, Phase::eval);
    CHECK(scores.n == 1);
    CHECK(scores.c == 1);
    CHECK(scores.h == PatchDiscriminator<float>::kPatchGrid);
    CHECK(scores.w == PatchDiscriminator<float>::kPatchGrid);
    REQUIRE(scores.size() == 900);
    bool bounded = true;
    for (float v : scores.data) bounded = bounded && v > 0.f && v < 1.f;
    CHECK(bounded);
}

TEST_CASE("discriminator: seed 7 builds are bit-identical") {
    PatchDiscriminator<float> a(7), b(7);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(*pa[i].value == *pb[i].value);
}

TEST_CASE("discriminator: constant input gives a constant interior score map") {
    PatchDiscriminator<float> disc(13, DiscriminatorSchedule::scaled(0.25));
    Tensor<float> flat(1, 1, kFaceSize, kFaceSize);
    flat.fill(0.37f);
    Tensor<float> logits = disc.forward_logits(flat, Phase::eval);
    float lo = 1e30f, hi = -1e30f;
    for (int r = kInteriorLo; r <= kInteriorHi; ++r)
        for (int c = kInteriorLo; c <= kInteriorHi; ++c) {
            const float v = logits.at(0, 0, r, c);
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    CHECK(hi - lo < 1e-4f);
}

TEST_CASE("discriminator: receptive field of an interior cell is exactly 34x34") {
    PatchDiscriminator<float> disc(5, DiscriminatorSchedule::scaled(0.25));
    Tensor<float> x = random_face(555);
    disc.forward_logits(x, Phase::eval);

    Tensor<float> dcell(1, 1, 30, 30);
    const int cell = 15;
    dcell.at(0, 0, cell, cell) = 1.f;
    disc.zero_grads();
    Tensor<float> dx = disc.backward(dcell);

    int min_y = kFaceSize, max_y = -1, min_x = kFaceSize, max_x = -1;
    for (int y = 0; y < kFaceSize; ++y)
        for (int xx = 0; xx < kFaceSize; ++xx)
            if (dx.at(0, 0, y, xx) != 0.f) {
                min_y = std::min(min_y, y);
                max_y = std::max(max_y, y);
                min_x = std::min(min_x, xx);
                max_x = std::max(max_x, xx);
            }
    CHECK(min_y == window_start(cell));
    CHECK(max_y == window_start(cell) + 33);
    CHECK(min_x == window_start(cell));
    CHECK(max_x == window_start(cell) + 33);
    CHECK(max_y - min_y + 1 == PatchDiscriminator<float>::kReceptiveField);
}

TEST_CASE("discriminator: locality, a pixel only moves cells whose window covers it") {
    PatchDiscriminator<float> disc(6, DiscriminatorSchedule::scaled(0.25));
    Tensor<float> x = random_face(666);
    Tensor<float> base = disc.forward_logits(x, Phase::eval);

    const int py = 64, px = 64;
    Tensor<float> bumped = x;
    bumped.at(0, 0, py, px) += 0.5f;
    Tensor<float> after = disc.forward_logits(bumped, Phase::eval);

    for (int r = 0; r < 30; ++r)
        for (int c = 0; c < 30; ++c) {
            const bool covers = window_start(r) <= py && py <= window_start(r) + 33 &&
                                window_start(c) <= px && px <= window_start(c) + 33;
            const bool changed = base.at(0, 0, r, c) != after.at(0, 0, r, c);
            if (!covers) CHECK_FALSE(changed);
        }
}

TEST_CASE("discriminator: rejects wrong input shape") {
    PatchDiscriminator<float> disc(2, DiscriminatorSchedule::scaled(0.125));
    Tensor<float> bad(1, 1, 100, 100);
    CHECK_THROWS_WITH_AS(disc.forward_logits(bad, Phase::eval),
                         doctest::Contains("ShapeMismatch"), Error);
}
