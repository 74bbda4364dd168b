#include <doctest.h>

#include <cmath>
#include <functional>

#include "ppdeid/nn/adam.hpp"
#include "ppdeid/nn/layers.hpp"

using namespace ppdeid;
using nn::Phase;

namespace {

Tensor<double> random_tensor(int n, int c, int h, int w, uint64_t seed, double scale = 1.0) {
    Tensor<double> t(n, c, h, w);
    Rng rng(seed);
    for (auto& v : t.data) v = scale * rng.normal();
    return t;
}

/// Scalar probe loss: fixed random projection of the output.
struct Probe {
    std::vector<double> r;
    explicit Probe(size_t n, uint64_t seed) : r(n) {
        Rng rng(seed);
        for (auto& v : r) v = rng.normal();
    }
    double operator()(const Tensor<double>& y) const {
        double s = 0;
        for (size_t i = 0; i < y.data.size(); ++i) s += r[i] * y.data[i];
        return s;
    }
    Tensor<double> grad(const Tensor<double>& y) const {
        Tensor<double> g(y.n, y.c, y.h, y.w);
        g.data.assign(r.begin(), r.begin() + y.data.size());
        return g;
    }
};

double rel_err(double a, double b) {
    double denom = std::max({std::abs(a), std::abs(b), 1e-8});
    return std::abs(a - b) / denom;
}

/// Central-difference check of d(probe)/d(coord) against backprop for a
/// sample of coordinates in `target`.
template <typename Forward>
void check_grad(std::vector<double>& target, const std::vector<double>& analytic,
                Forward forward, const Probe& probe, int samples, uint64_t seed,
                double tol = 1e-6) {
    Rng rng(seed);
    const double eps = 1e-5;
    for (int s = 0; s < samples; ++s) {
        size_t i = static_cast<size_t>(rng.below(target.size()));
        const double orig = target[i];
        target[i] = orig + eps;
        const double lp = probe(forward());
        target[i] = orig - eps;
        const double lm = probe(forward());
        target[i] = orig;
        const double numeric = (lp - lm) / (2 * eps);
        CHECK(rel_err(numeric, analytic[i]) < tol);
    }
}

} // namespace

TEST_CASE("conv2d: hand-computed 3x3 identity-corner kernel") {
    nn::Conv2d<double> conv("c", 1, 1, 2, 1, 0);
    conv.weight() = {1, 0, 0, 1};
    conv.bias() = {0};
    Tensor<double> x(1, 1, 3, 3);
    for (int i = 0; i < 9; ++i) x.data[i] = i + 1;
    Tensor<double> y = conv.forward(x, Phase::eval, nullptr);
    REQUIRE(y.h == 2);
    REQUIRE(y.w == 2);
    CHECK(y.data[0] == doctest::Approx(6));
    CHECK(y.data[1] == doctest::Approx(8));
    CHECK(y.data[2] == doctest::Approx(12));
    CHECK(y.data[3] == doctest::Approx(14));
}

TEST_CASE("conv2d: gradients match finite differences") {
    nn::Conv2d<double> conv("c", 2, 3, 3, 2, 1);
    Rng rng(1);
    conv.init_gaussian(rng, 0.5);
    Tensor<double> x = random_tensor(2, 2, 8, 8, 2);
    Probe probe(static_cast<size_t>(2) * 3 * 4 * 4, 3);

    auto forward = [&]() { return conv.forward(x, Phase::eval, nullptr); };
    Tensor<double> y = forward();
    conv.zero_grads();
    Tensor<double> dx = conv.backward(probe.grad(y));

    auto params = std::vector<nn::ParamRef<double>>{};
    conv.collect(params);
    check_grad(*params[0].value, *params[0].grad, forward, probe, 12, 10);
    check_grad(*params[1].value, *params[1].grad, forward, probe, 3, 11);
    check_grad(x.data, dx.data, forward, probe, 12, 12);
}

TEST_CASE("conv_transpose2d: output size and gradients") {
    nn::ConvTranspose2d<double> deconv("d", 3, 2, 4, 2, 1);
    Rng rng(4);
    deconv.init_gaussian(rng, 0.5);
    Tensor<double> x = random_tensor(2, 3, 4, 4, 5);
    Tensor<double> y = deconv.forward(x, Phase::eval, nullptr);
    CHECK(y.h == 8);
    CHECK(y.w == 8);
    CHECK(y.c == 2);

    Probe probe(y.data.size(), 6);
    auto forward = [&]() { return deconv.forward(x, Phase::eval, nullptr); };
    deconv.zero_grads();
    Tensor<double> dx = deconv.backward(probe.grad(y));

    auto params = std::vector<nn::ParamRef<double>>{};
    deconv.collect(params);
    check_grad(*params[0].value, *params[0].grad, forward, probe, 12, 7);
    check_grad(*params[1].value, *params[1].grad, forward, probe, 2, 8);
    check_grad(x.data, dx.data, forward, probe, 12, 9);
}

TEST_CASE("batchnorm: normalizes in train mode and gradients match") {
    nn::BatchNorm2d<double> bn("b", 3);
    Tensor<double> x = random_tensor(4, 3, 5, 5, 20, 2.0);
    for (auto& v : x.data) v += 1.5;

    Tensor<double> y = bn.forward(x, Phase::train, nullptr);
    const int plane = y.plane();
    for (int c = 0; c < 3; ++c) {
        double mean = 0, var = 0;
        for (int i = 0; i < y.n; ++i) {
            const double* p = y.image(i) + static_cast<size_t>(c) * plane;
            for (int j = 0; j < plane; ++j) mean += p[j];
        }
        mean /= y.n * plane;
        for (int i = 0; i < y.n; ++i) {
            const double* p = y.image(i) + static_cast<size_t>(c) * plane;
            for (int j = 0; j < plane; ++j) var += (p[j] - mean) * (p[j] - mean);
        }
        var /= y.n * plane;
        CHECK(std::abs(mean) < 1e-9);
        CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
    }

    Probe probe(y.data.size(), 21);
    auto forward = [&]() { return bn.forward(x, Phase::train, nullptr); };
    bn.zero_grads();
    Tensor<double> dx = bn.backward(probe.grad(forward()));
    auto params = std::vector<nn::ParamRef<double>>{};
    bn.collect(params);
    check_grad(*params[0].value, *params[0].grad, forward, probe, 3, 22, 1e-5);
    check_grad(*params[1].value, *params[1].grad, forward, probe, 3, 23, 1e-5);
    check_grad(x.data, dx.data, forward, probe, 12, 24, 1e-4);
}

TEST_CASE("batchnorm: eval mode uses running statistics") {
    nn::BatchNorm2d<double> bn("b", 1);
    Tensor<double> x = random_tensor(2, 1, 4, 4, 30);
    for (int i = 0; i < 50; ++i) bn.forward(x, Phase::train, nullptr);
    Tensor<double> y1 = bn.forward(x, Phase::eval, nullptr);
    Tensor<double> y2 = bn.forward(x, Phase::eval, nullptr);
    CHECK(y1.data == y2.data);
}

TEST_CASE("maxpool: values and routing") {
    nn::MaxPool2d<double> pool;
    Tensor<double> x = random_tensor(2, 2, 6, 6, 40);
    Tensor<double> y = pool.forward(x, Phase::eval, nullptr);
    CHECK(y.h == 3);
    CHECK(y.w == 3);
    Probe probe(y.data.size(), 41);
    auto forward = [&]() { return pool.forward(x, Phase::eval, nullptr); };
    Tensor<double> dx = pool.backward(probe.grad(y));
    check_grad(x.data, dx.data, forward, probe, 20, 42);
}

TEST_CASE("mfm: equals the scalar max over channel pairs; gradients route to the winner") {
    nn::MaxFeatureMap<double> mfm;
    Tensor<double> x = random_tensor(2, 6, 4, 4, 50);
    Tensor<double> y = mfm.forward(x, Phase::eval, nullptr);
    REQUIRE(y.c == 3);
    for (int n = 0; n < 2; ++n)
        for (int c = 0; c < 3; ++c)
            for (int i = 0; i < 16; ++i) {
                const double a = x.image(n)[c * 16 + i];
                const double b = x.image(n)[(c + 3) * 16 + i];
                CHECK(y.image(n)[c * 16 + i] == doctest::Approx(std::max(a, b)));
            }
    Probe probe(y.data.size(), 51);
    auto forward = [&]() { return mfm.forward(x, Phase::eval, nullptr); };
    Tensor<double> dx = mfm.backward(probe.grad(y));
    check_grad(x.data, dx.data, forward, probe, 20, 52);
}

TEST_CASE("linear: gradients match finite differences") {
    nn::Linear<double> fc("f", 12, 5);
    Rng rng(60);
    fc.init_gaussian(rng, 0.4);
    Tensor<double> x = random_tensor(3, 12, 1, 1, 61);
    Probe probe(15, 62);
    auto forward = [&]() { return fc.forward(x, Phase::eval, nullptr); };
    fc.zero_grads();
    Tensor<double> dx = fc.backward(probe.grad(forward()));
    auto params = std::vector<nn::ParamRef<double>>{};
    fc.collect(params);
    check_grad(*params[0].value, *params[0].grad, forward, probe, 12, 63);
    check_grad(*params[1].value, *params[1].grad, forward, probe, 5, 64);
    check_grad(x.data, dx.data, forward, probe, 12, 65);
}

TEST_CASE("activations: gradients match finite differences") {
    Tensor<double> x = random_tensor(1, 2, 4, 4, 70);

    nn::LeakyReLU<double> leaky(0.2);
    Probe probe(x.data.size(), 71);
    auto fwd_leaky = [&]() { return leaky.forward(x, Phase::eval, nullptr); };
    Tensor<double> dx = leaky.backward(probe.grad(fwd_leaky()));
    check_grad(x.data, dx.data, fwd_leaky, probe, 16, 72);

    nn::TanhZeroOne<double> tanh01;
    auto fwd_tanh = [&]() { return tanh01.forward(x, Phase::eval, nullptr); };
    Tensor<double> y = fwd_tanh();
    for (double v : y.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    dx = tanh01.backward(probe.grad(y));
    check_grad(x.data, dx.data, fwd_tanh, probe, 16, 73);

    nn::Sigmoid<double> sig;
    auto fwd_sig = [&]() { return sig.forward(x, Phase::eval, nullptr); };
    dx = sig.backward(probe.grad(fwd_sig()));
    check_grad(x.data, dx.data, fwd_sig, probe, 16, 74);
}

TEST_CASE("dropout: identity when off, inverted scaling when on") {
    nn::Dropout<double> drop(0.5);
    Tensor<double> x = random_tensor(1, 4, 16, 16, 80);

    Tensor<double> y_off = drop.forward(x, Phase::eval, nullptr, false);
    CHECK(y_off.data == x.data);

    Rng rng(81);
    Tensor<double> y_on = drop.forward(x, Phase::train, &rng, true);
    int zeros = 0, scaled = 0;
    for (size_t i = 0; i < x.data.size(); ++i) {
        if (y_on.data[i] == 0.0)
            ++zeros;
        else {
            CHECK(y_on.data[i] == doctest::Approx(2.0 * x.data[i]));
            ++scaled;
        }
    }
    const double frac = static_cast<double>(zeros) / x.data.size();
    CHECK(frac > 0.4);
    CHECK(frac < 0.6);
    CHECK(scaled + zeros == static_cast<int>(x.data.size()));

    // masks differ across calls
    Tensor<double> y_on2 = drop.forward(x, Phase::train, &rng, true);
    CHECK(y_on.data != y_on2.data);
}

TEST_CASE("adam: converges on a quadratic and is deterministic") {
    std::vector<double> value = {0.0};
    std::vector<double> grad = {0.0};
    std::vector<nn::ParamRef<double>> params{{&value, &grad, "x"}};
    nn::Adam<double> adam(0.1);
    for (int i = 0; i < 800; ++i) {
        grad[0] = 2.0 * (value[0] - 3.0);
        adam.step(params);
    }
    CHECK(value[0] == doctest::Approx(3.0).epsilon(1e-4));

    auto run = []() {
        std::vector<double> v = {0.0}, g = {0.0};
        std::vector<nn::ParamRef<double>> p{{&v, &g, "x"}};
        nn::Adam<double> a(0.05);
        for (int i = 0; i < 100; ++i) {
            g[0] = std::sin(v[0]) + 2.0 * (v[0] - 1.0);
            a.step(p);
        }
        return v[0];
    };
    CHECK(run() == run());
}
