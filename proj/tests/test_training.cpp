#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ppdeid/core/error.hpp"
#include "ppdeid/data/synthetic.hpp"
#include "ppdeid/ssim/ssim.hpp"
#include "ppdeid/train/trainer.hpp"

using namespace ppdeid;
using nn::Phase;

namespace {

TrainConfig tiny_config(Ablation ablation, uint64_t seed = 1) {
    TrainConfig cfg;
    cfg.ablation = ablation;
    cfg.seed = seed;
    cfg.batch_size = 2;
    cfg.epochs = 1;
    cfg.gen_width = 0.125;
    cfg.disc_width = 0.125;
    cfg.verif_width = 0.125;
    cfg.lr_system = 2e-4;
    return cfg;
}

std::vector<GrayImage> tiny_dataset(int n, uint64_t seed) {
    std::vector<GrayImage> images;
    for (int i = 0; i < n; ++i) {
        SyntheticFaceSpec spec{"u" + std::to_string(i % 3),
                               (i % 2) ? Race::white : Race::black, AgeBand::middle};
        images.push_back(render_synthetic_face(spec, seed, i));
    }
    return images;
}

std::shared_ptr<LightCnn9<float>> frozen_verificator(double width, uint64_t seed) {
    auto v = std::make_shared<LightCnn9<float>>(seed, VerificatorSchedule::scaled(width));
    v->freeze();
    return v;
}

Tensor<float> batch_of(const std::vector<GrayImage>& images, int from, int count) {
    std::vector<const GrayImage*> ptrs;
    for (int i = from; i < from + count; ++i) ptrs.push_back(&images[i]);
    return to_tensor(ptrs);
}

uint64_t params_checksum(std::vector<nn::ParamRef<float>> params) {
    std::vector<std::vector<float>*> arrays;
    for (auto& p : params) arrays.push_back(p.value);
    return checksum_arrays(arrays);
}

double sim_loss_of_slice(const Tensor<float>& x, const Tensor<float>& y, int i,
                         const SsimConfig& cfg) {
    Tensor<float> xi(1, 1, kFaceSize, kFaceSize);
    std::copy(x.image(i), x.image(i) + x.per_image(), xi.ptr());
    Tensor<float> yi(1, 1, kFaceSize, kFaceSize);
    std::copy(y.image(i), y.image(i) + y.per_image(), yi.ptr());
    return sim_loss(xi, yi, cfg);
}

} // namespace

TEST_CASE("adversarial losses: constant-score and perfect-discriminator arithmetic") {
    Tensor<float> half(2, 1, 30, 30);
    half.fill(0.5f);
    AdversarialLosses l = adversarial_losses(half, half);
    CHECK(l.d_loss == doctest::Approx(2.0 * std::log(2.0)).epsilon(1e-9));
    CHECK(l.g_adv == doctest::Approx(std::log(2.0)).epsilon(1e-9));

    Tensor<float> ones(2, 1, 30, 30);
    ones.fill(1.0f);
    Tensor<float> zeros(2, 1, 30, 30);
    zeros.fill(0.0f);
    AdversarialLosses perfect = adversarial_losses(ones, zeros);
    CHECK(perfect.d_loss == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("adversarial losses: patch average equals an explicit cell loop") {
    Rng rng(2);
    Tensor<float> real(3, 1, 30, 30), fake(3, 1, 30, 30);
    for (auto& v : real.data) v = static_cast<float>(rng.uniform(0.01, 0.99));
    for (auto& v : fake.data) v = static_cast<float>(rng.uniform(0.01, 0.99));
    AdversarialLosses l = adversarial_losses(real, fake);

    double d = 0, g = 0;
    for (size_t i = 0; i < real.data.size(); ++i) {
        d -= std::log(static_cast<double>(real.data[i]) + 1e-12) / real.size();
        d -= std::log(1.0 - static_cast<double>(fake.data[i]) + 1e-12) / fake.size();
        g -= std::log(static_cast<double>(fake.data[i]) + 1e-12) / fake.size();
    }
    CHECK(l.d_loss == doctest::Approx(d).epsilon(1e-9));
    CHECK(l.g_adv == doctest::Approx(g).epsilon(1e-9));
}

TEST_CASE("generator total loss: ablation gating and arithmetic") {
    TrainConfig cfg;
    cfg.lambda1 = 1.0;
    cfg.lambda2 = 1.0;

    cfg.ablation = Ablation::cgan_only;
    CHECK(generator_total_loss(0.7, 123.0, 456.0, cfg) == doctest::Approx(0.7));

    cfg.ablation = Ablation::cgan_sim_verif;
    CHECK(generator_total_loss(0.7, 2.0, 0.3, cfg) == doctest::Approx(3.0));

    cfg.lambda1 = 0.5;
    cfg.lambda2 = 2.0;
    CHECK(generator_total_loss(1.0, 2.0, 0.25, cfg) == doctest::Approx(2.5));

    cfg.ablation = Ablation::cgan_sim;
    CHECK(generator_total_loss(1.0, 2.0, 0.25, cfg) == doctest::Approx(1.5));

    cfg.ablation = Ablation::cgan_verif;
    CHECK(generator_total_loss(1.0, 2.0, 0.25, cfg) == doctest::Approx(2.0));

    CHECK_THROWS_WITH_AS(generator_total_loss(std::nan(""), 0, 0, cfg),
                         doctest::Contains("NonFiniteLoss"), Error);
}

TEST_CASE("verification term: identity generator scores half margin squared; mean equals loop") {
    LightCnn9<float> verif(9, VerificatorSchedule::scaled(0.125));
    verif.freeze();
    auto images = tiny_dataset(3, 4);
    Tensor<float> x = batch_of(images, 0, 3);

    const double loss = verif_loss_term(verif, x, x, 2.0f);
    CHECK(loss == doctest::Approx(2.0).epsilon(1e-6));

    auto other = tiny_dataset(3, 5);
    Tensor<float> xh = batch_of(other, 0, 3);
    const double batch_loss = verif_loss_term(verif, x, xh, 2.0f);
    double sum = 0;
    for (int i = 0; i < 3; ++i) {
        Tensor<float> xi(1, 1, kFaceSize, kFaceSize);
        std::copy(x.image(i), x.image(i) + x.per_image(), xi.ptr());
        Tensor<float> hi(1, 1, kFaceSize, kFaceSize);
        std::copy(xh.image(i), xh.image(i) + xh.per_image(), hi.ptr());
        sum += verif_loss_term(verif, xi, hi, 2.0f);
    }
    CHECK(batch_loss == doctest::Approx(sum / 3.0).epsilon(1e-6));

    Tensor<float> dxhat;
    verif_loss_term(verif, x, xh, 2.0f, &dxhat);
    double grad_norm = 0;
    for (float v : dxhat.data) grad_norm += static_cast<double>(v) * v;
    CHECK(grad_norm > 0.0);
}

TEST_CASE("train_step: zero learning rate leaves parameters unchanged, advances the counter") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim_verif);
    cfg.lr_system = 0.0;
    auto verif = frozen_verificator(cfg.verif_width, 5);
    TrainState state = make_train_state(cfg, verif);
    auto images = tiny_dataset(2, 6);

    const uint64_t g_before = params_checksum(state.gen.params());
    const uint64_t d_before = params_checksum(state.disc.params());
    CHECK(train_step(state, batch_of(images, 0, 2)) == StepStatus::ok);
    CHECK(state.step == 1);
    CHECK(params_checksum(state.gen.params()) == g_before);
    CHECK(params_checksum(state.disc.params()) == d_before);
    REQUIRE(state.history.size() == 1);
    CHECK(std::isfinite(state.history[0].total));
}

TEST_CASE("train_step: frozen verificator checksum is invariant over 60 steps") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim_verif, 7);
    auto verif = frozen_verificator(cfg.verif_width, 8);
    const uint64_t checksum = verif->weight_checksum();
    TrainState state = make_train_state(cfg, verif);
    auto images = tiny_dataset(4, 9);
    for (int s = 0; s < 60; ++s) train_step(state, batch_of(images, (s % 2) * 2, 2));
    CHECK(verif->weight_checksum() == checksum);
    CHECK(state.step == 60);
}

TEST_CASE("train_step: ablation gating never evaluates the gated modules") {
    auto images = tiny_dataset(2, 10);

    TrainConfig cfg = tiny_config(Ablation::cgan_only);
    TrainState state = make_train_state(cfg, nullptr);
    for (int s = 0; s < 3; ++s) train_step(state, batch_of(images, 0, 2));
    CHECK(state.verif_evals == 0);
    CHECK(state.ssim_evals == 0);
    for (const auto& r : state.history) {
        CHECK(r.l_verif == 0.0);
        CHECK(r.l_sim == 0.0);
    }

    TrainConfig sim_cfg = tiny_config(Ablation::cgan_sim);
    TrainState sim_state = make_train_state(sim_cfg, nullptr);
    for (int s = 0; s < 3; ++s) train_step(sim_state, batch_of(images, 0, 2));
    CHECK(sim_state.verif_evals == 0);
    CHECK(sim_state.ssim_evals == 3);

    TrainConfig verif_cfg = tiny_config(Ablation::cgan_verif);
    auto verif = frozen_verificator(verif_cfg.verif_width, 11);
    TrainState verif_state = make_train_state(verif_cfg, verif);
    for (int s = 0; s < 3; ++s) train_step(verif_state, batch_of(images, 0, 2));
    CHECK(verif_state.verif_evals == 3);
    CHECK(verif_state.ssim_evals == 0);
}

TEST_CASE("train_step: missing or unfrozen verificator is rejected") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim_verif);
    CHECK_THROWS_WITH_AS(make_train_state(cfg, nullptr),
                         doctest::Contains("MissingVerificator"), Error);
    auto loose = std::make_shared<LightCnn9<float>>(1, VerificatorSchedule::scaled(0.125));
    CHECK_THROWS_WITH_AS(make_train_state(cfg, loose),
                         doctest::Contains("MissingVerificator"), Error);
}

TEST_CASE("train_step: non-finite input aborts atomically") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim);
    TrainState state = make_train_state(cfg, nullptr);
    auto images = tiny_dataset(2, 12);

    Tensor<float> poisoned = batch_of(images, 0, 2);
    poisoned.data[11] = std::numeric_limits<float>::quiet_NaN();
    const uint64_t g_before = params_checksum(state.gen.params());
    const uint64_t d_before = params_checksum(state.disc.params());

    CHECK(train_step(state, poisoned) == StepStatus::aborted);
    CHECK(state.step == 0);
    CHECK(state.history.empty());
    CHECK(params_checksum(state.gen.params()) == g_before);
    CHECK(params_checksum(state.disc.params()) == d_before);
    REQUIRE(!state.diagnostics.empty());

    CHECK(train_step(state, batch_of(images, 0, 2)) == StepStatus::ok);
}

TEST_CASE("generator update direction: a single small step does not increase the objective") {
    // fixed discriminator and verificator, deterministic noise, eval-mode
    // statistics: the objective is a pure function of generator weights
    auto images = tiny_dataset(2, 13);
    Tensor<float> batch = batch_of(images, 0, 2);
    SsimConfig scfg;

    int non_increasing = 0;
    const int trials = 20;
    for (int t = 0; t < trials; ++t) {
        TrainConfig cfg = tiny_config(Ablation::cgan_sim_verif, 100 + t);
        cfg.lr_system = 1e-5;
        auto verif = frozen_verificator(cfg.verif_width, 200 + t);
        TrainState state = make_train_state(cfg, verif);

        auto objective = [&]() {
            Tensor<float> xhat = state.gen.forward(batch, Phase::eval, NoiseMode::deterministic);
            Tensor<float> p = state.disc.discriminate(xhat, Phase::eval);
            double g_adv = 0;
            for (float v : p.data) g_adv -= std::log(static_cast<double>(v) + kLogEps);
            g_adv /= static_cast<double>(p.size());
            const double l_verif = verif_loss_term(*verif, batch, xhat, 2.0f);
            double l_sim = 0;
            for (int i = 0; i < batch.n; ++i) l_sim += sim_loss_of_slice(batch, xhat, i, scfg);
            l_sim /= batch.n;
            return generator_total_loss(g_adv, l_verif, l_sim, cfg);
        };

        const double before = objective();

        Tensor<float> xhat = state.gen.forward(batch, Phase::eval, NoiseMode::deterministic);
        Tensor<float> logits = state.disc.forward_logits(xhat, Phase::eval);
        Tensor<float> p = logits;
        for (auto& v : p.data) v = 1.f / (1.f + std::exp(-v));
        Tensor<float> dlogits = p;
        const float scale = 1.f / static_cast<float>(p.size());
        for (auto& v : dlogits.data) v = (v - 1.f) * scale;
        state.disc.zero_grads();
        Tensor<float> dxhat = state.disc.backward(dlogits);

        Tensor<float> dxhat_verif;
        verif_loss_term(*verif, batch, xhat, 2.0f, &dxhat_verif);
        for (size_t i = 0; i < dxhat.data.size(); ++i)
            dxhat.data[i] += static_cast<float>(cfg.lambda1) * dxhat_verif.data[i];

        std::vector<float> grad(static_cast<size_t>(batch.h) * batch.w);
        for (int i = 0; i < batch.n; ++i) {
            sim_loss_grad(batch.image(i), xhat.image(i), batch.h, batch.w, scfg, grad.data(),
                          1.0 / batch.n);
            float* dst = dxhat.image(i);
            for (size_t j = 0; j < grad.size(); ++j)
                dst[j] += static_cast<float>(cfg.lambda2) * grad[j];
        }

        state.gen.zero_grads();
        state.gen.backward(dxhat);
        nn::Adam<float> opt(cfg.lr_system);
        opt.step(state.gen.params());

        const double after = objective();
        if (after <= before + 1e-9) ++non_increasing;
    }
    CHECK(non_increasing >= 18);
}

TEST_CASE("training history records every component and the csv header is stable") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim_verif, 3);
    auto verif = frozen_verificator(cfg.verif_width, 4);
    TrainState state = make_train_state(cfg, verif);
    auto images = tiny_dataset(2, 14);
    for (int s = 0; s < 3; ++s) train_step(state, batch_of(images, 0, 2));
    REQUIRE(state.history.size() == 3);
    for (size_t i = 0; i < state.history.size(); ++i) {
        CHECK(state.history[i].step == i);
        CHECK(std::isfinite(state.history[i].d_loss));
        CHECK(std::isfinite(state.history[i].g_adv));
        CHECK(std::isfinite(state.history[i].l_verif));
        CHECK(std::isfinite(state.history[i].l_sim));
        CHECK(std::isfinite(state.history[i].total));
    }

    const std::string path = "/tmp/ppdeid_history_test.csv";
    write_history_csv(path, state.history);
    std::ifstream in(path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,d_loss,g_adv,l_verif,l_sim,total");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == 3);
    std::filesystem::remove(path);
}

TEST_CASE("train: zero epochs emits the initial parameters") {
    TrainConfig cfg = tiny_config(Ablation::cgan_only, 21);
    cfg.epochs = 0;
    auto images = tiny_dataset(2, 15);
    TrainRunResult result = train(images, cfg, nullptr);
    CHECK(result.history.empty());
    CHECK(result.checkpoint.step == 0);

    TrainState fresh = make_train_state(cfg, nullptr);
    CheckpointBlob expected = make_checkpoint(fresh);
    REQUIRE(result.checkpoint.arrays.size() == expected.arrays.size());
    bool equal = true;
    for (size_t i = 0; i < expected.arrays.size(); ++i)
        equal = equal && result.checkpoint.arrays[i] == expected.arrays[i];
    CHECK(equal);
}

TEST_CASE("checkpoint: save/load round-trip reproduces forward outputs bit-exactly") {
    TrainConfig cfg = tiny_config(Ablation::cgan_sim, 31);
    TrainState state = make_train_state(cfg, nullptr);
    auto images = tiny_dataset(4, 16);
    for (int s = 0; s < 4; ++s) train_step(state, batch_of(images, (s % 2) * 2, 2));

    const std::string path = "/tmp/ppdeid_ckpt_test.ppgn";
    save_checkpoint(path, make_checkpoint(state));
    CheckpointBlob blob = load_checkpoint(path);
    std::filesystem::remove(path);
    CHECK(blob.step == 4);
    CHECK(blob.module_name == "training");

    TrainState restored = restore_train_state(blob, nullptr);
    Tensor<float> probe = batch_of(images, 0, 1);
    Tensor<float> y0 = state.gen.forward(probe, Phase::eval, NoiseMode::deterministic);
    Tensor<float> y1 = restored.gen.forward(probe, Phase::eval, NoiseMode::deterministic);
    CHECK(y0.data == y1.data);
}

TEST_CASE("train: five steps plus resumed five equals ten straight steps") {
    auto images = tiny_dataset(10, 17);

    TrainConfig full_cfg = tiny_config(Ablation::cgan_sim, 41);
    full_cfg.batch_size = 2;
    full_cfg.epochs = 2; // 10 images / batch 2 = 5 steps per epoch
    TrainRunResult straight = train(images, full_cfg, nullptr);

    TrainConfig half_cfg = full_cfg;
    half_cfg.epochs = 1;
    TrainRunResult half = train(images, half_cfg, nullptr);
    CHECK(half.checkpoint.step == 5);
    TrainRunResult resumed = train(images, full_cfg, nullptr, "", &half.checkpoint);

    CHECK(resumed.checkpoint.step == straight.checkpoint.step);
    REQUIRE(resumed.checkpoint.arrays.size() == straight.checkpoint.arrays.size());
    bool equal = true;
    for (size_t i = 0; i < straight.checkpoint.arrays.size(); ++i)
        equal = equal && resumed.checkpoint.arrays[i] == straight.checkpoint.arrays[i];
    CHECK(equal);
}

TEST_CASE("config: parse, serialize, hash and precedence of values") {
    TrainConfig cfg;
    cfg.lambda1 = 0.25;
    cfg.ablation = Ablation::cgan_verif;
    cfg.seed = 99;
    TrainConfig back = TrainConfig::parse(cfg.serialize());
    CHECK(back.lambda1 == cfg.lambda1);
    CHECK(back.ablation == cfg.ablation);
    CHECK(back.seed == cfg.seed);
    CHECK(back.hash() == cfg.hash());

    TrainConfig other = TrainConfig::parse("lambda1 = 3.5\nablation = cgan_sim # comment\n");
    CHECK(other.lambda1 == 3.5);
    CHECK(other.ablation == Ablation::cgan_sim);
    CHECK(other.hash() != cfg.hash());

    CHECK_THROWS_WITH_AS(TrainConfig::parse("bogus_key = 1\n"),
                         doctest::Contains("InvalidConfig"), Error);
    CHECK_THROWS_WITH_AS(TrainConfig::parse("margin = -1\n"),
                         doctest::Contains("InvalidConfig"), Error);
}
