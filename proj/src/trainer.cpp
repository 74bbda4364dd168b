#include "ppdeid/train/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "ppdeid/core/hash.hpp"
#include "ppdeid/ssim/ssim.hpp"

namespace ppdeid {

namespace {

constexpr const char* kModule = "training";
constexpr uint64_t kStepStream = 0x73746570ULL;
constexpr uint64_t kShuffleStream = 0x73687566ULL;

template <typename Net>
std::vector<std::vector<float>> export_net(Net& net) {
    std::vector<std::vector<float>> arrays;
    for (auto& p : net.params()) arrays.push_back(*p.value);
    for (auto* s : net.state_arrays()) arrays.push_back(*s);
    return arrays;
}

template <typename Net>
size_t import_net(Net& net, const std::vector<std::vector<float>>& arrays, size_t cursor) {
    for (auto& p : net.params()) {
        if (cursor >= arrays.size() || arrays[cursor].size() != p.value->size())
            raise(kModule, "CorruptCheckpoint", "parameter array mismatch at " + p.name);
        *p.value = arrays[cursor++];
    }
    for (auto* s : net.state_arrays()) {
        if (cursor >= arrays.size() || arrays[cursor].size() != s->size())
            raise(kModule, "CorruptCheckpoint", "state array size mismatch");
        *s = arrays[cursor++];
    }
    return cursor;
}

std::vector<std::vector<float>> copy_arrays(const std::vector<std::vector<float>*>& ptrs) {
    std::vector<std::vector<float>> out;
    out.reserve(ptrs.size());
    for (auto* p : ptrs) out.push_back(*p);
    return out;
}

void restore_arrays(const std::vector<std::vector<float>*>& ptrs,
                    const std::vector<std::vector<float>>& saved) {
    for (size_t i = 0; i < ptrs.size(); ++i) *ptrs[i] = saved[i];
}

/// Everything train_step may mutate before the final generator update.
struct StepSnapshot {
    std::vector<std::vector<float>> d_params, d_states, d_moments, g_states;
    long long adam_d_t = 0;

    static StepSnapshot capture(TrainState& s) {
        StepSnapshot snap;
        std::vector<std::vector<float>*> dp;
        for (auto& p : s.disc.params()) dp.push_back(p.value);
        snap.d_params = copy_arrays(dp);
        snap.d_states = copy_arrays(s.disc.state_arrays());
        snap.d_moments = copy_arrays(s.adam_d.state_arrays());
        snap.g_states = copy_arrays(s.gen.state_arrays());
        snap.adam_d_t = s.adam_d.steps();
        return snap;
    }

    void restore(TrainState& s) const {
        std::vector<std::vector<float>*> dp;
        for (auto& p : s.disc.params()) dp.push_back(p.value);
        restore_arrays(dp, d_params);
        restore_arrays(s.disc.state_arrays(), d_states);
        restore_arrays(s.adam_d.state_arrays(), d_moments);
        restore_arrays(s.gen.state_arrays(), g_states);
        s.adam_d.set_step_count(adam_d_t);
    }
};

void sigmoid_inplace(Tensor<float>& t) {
    for (auto& v : t.data) v = 1.f / (1.f + std::exp(-v));
}

} // namespace

TrainState::TrainState(const TrainConfig& cfg_, std::shared_ptr<LightCnn9<float>> verificator_)
    : cfg(cfg_),
      gen(derive_seed(cfg_.seed, 0x67656eULL), GeneratorSchedule::scaled(cfg_.gen_width)),
      disc(derive_seed(cfg_.seed, 0x646973ULL), DiscriminatorSchedule::scaled(cfg_.disc_width)),
      verificator(std::move(verificator_)),
      adam_g(cfg_.lr_system, cfg_.adam_beta1, cfg_.adam_beta2),
      adam_d(cfg_.lr_system, cfg_.adam_beta1, cfg_.adam_beta2) {
    if (cfg.needs_verificator()) {
        if (!verificator)
            raise(kModule, "MissingVerificator",
                  "ablation " + std::string(to_string(cfg.ablation)) + " requires a verificator");
        if (!verificator->frozen())
            raise(kModule, "MissingVerificator", "verificator must be frozen before system training");
    }
    if (verificator) verif_checksum = verificator->weight_checksum();
    adam_g.ensure_buffers(gen.params());
    adam_d.ensure_buffers(disc.params());
}

TrainState make_train_state(const TrainConfig& cfg,
                            std::shared_ptr<LightCnn9<float>> verificator) {
    return TrainState(cfg, std::move(verificator));
}

StepStatus train_step(TrainState& state, const Tensor<float>& batch) {
    const TrainConfig& cfg = state.cfg;
    const double lambda1 = cfg.effective_lambda1();
    const double lambda2 = cfg.effective_lambda2();
    Rng step_rng(derive_seed(cfg.seed, kStepStream, state.step));

    StepSnapshot snapshot = StepSnapshot::capture(state);
    auto abort_step = [&](const std::string& why) {
        snapshot.restore(state);
        state.diagnostics.push_back("step " + std::to_string(state.step) + " aborted: " + why);
        return StepStatus::aborted;
    };

    try {
        state.gen.zero_grads();
        Tensor<float> xhat =
            state.gen.forward(batch, nn::Phase::train, NoiseMode::stochastic, &step_rng);

        // --- discriminator update (x_hat detached) ---
        state.disc.zero_grads();
        Tensor<float> logits_real = state.disc.forward_logits(batch, nn::Phase::train);
        Tensor<float> p_real = logits_real;
        sigmoid_inplace(p_real);
        {
            Tensor<float> dlogits = p_real;
            const float scale = 1.f / static_cast<float>(p_real.size());
            for (auto& v : dlogits.data) v = (v - 1.f) * scale;
            state.disc.backward(dlogits);
        }
        Tensor<float> logits_fake = state.disc.forward_logits(xhat, nn::Phase::train);
        Tensor<float> p_fake = logits_fake;
        sigmoid_inplace(p_fake);
        {
            Tensor<float> dlogits = p_fake;
            const float scale = 1.f / static_cast<float>(p_fake.size());
            for (auto& v : dlogits.data) v *= scale;
            state.disc.backward(dlogits);
        }
        const AdversarialLosses pre_update = adversarial_losses(p_real, p_fake);
        if (!std::isfinite(pre_update.d_loss)) return abort_step("d_loss not finite");
        state.adam_d.step(state.disc.params());

        // --- generator update against the refreshed discriminator ---
        state.disc.zero_grads();
        Tensor<float> logits_g = state.disc.forward_logits(xhat, nn::Phase::train);
        Tensor<float> p_g = logits_g;
        sigmoid_inplace(p_g);
        double g_adv = 0;
        for (float v : p_g.data) g_adv -= std::log(static_cast<double>(v) + kLogEps);
        g_adv /= static_cast<double>(p_g.size());

        Tensor<float> dlogits_g = p_g;
        const float gscale = 1.f / static_cast<float>(p_g.size());
        for (auto& v : dlogits_g.data) v = (v - 1.f) * gscale;
        Tensor<float> dxhat = state.disc.backward(dlogits_g);

        double l_verif = 0;
        if (lambda1 > 0) {
            ++state.verif_evals;
            Tensor<float> dxhat_verif;
            l_verif = verif_loss_term(*state.verificator, batch, xhat,
                                      static_cast<float>(cfg.margin), &dxhat_verif);
            const float w = static_cast<float>(lambda1);
            for (size_t i = 0; i < dxhat.data.size(); ++i) dxhat.data[i] += w * dxhat_verif.data[i];
        }

        double l_sim = 0;
        if (lambda2 > 0) {
            ++state.ssim_evals;
            SsimConfig scfg;
            const double upstream = 1.0 / batch.n;
            std::vector<float> grad(static_cast<size_t>(batch.h) * batch.w);
            const float w = static_cast<float>(lambda2);
            for (int i = 0; i < batch.n; ++i) {
                l_sim += sim_loss_grad(batch.image(i), xhat.image(i), batch.h, batch.w, scfg,
                                       grad.data(), upstream);
                float* dst = dxhat.image(i);
                for (size_t j = 0; j < grad.size(); ++j) dst[j] += w * grad[j];
            }
            l_sim /= batch.n;
        }

        const double total = generator_total_loss(g_adv, l_verif, l_sim, cfg);
        if (!std::isfinite(total)) return abort_step("generator loss not finite");

        state.gen.backward(dxhat);
        state.adam_g.step(state.gen.params());

        state.history.push_back({state.step, pre_update.d_loss, g_adv, l_verif, l_sim, total});
        ++state.step;
        return StepStatus::ok;
    } catch (const Error& e) {
        if (e.kind() == "NonFiniteLoss") return abort_step(e.detail());
        throw;
    }
}

CheckpointBlob make_checkpoint(TrainState& state) {
    CheckpointBlob blob;
    blob.module_name = "training";
    blob.config_hash = state.cfg.hash();
    blob.step = state.step;

    nlohmann::json meta;
    meta["config"] = state.cfg.serialize();
    meta["gen_schedule"] = state.gen.schedule().enc;
    meta["disc_schedule"] = state.disc.schedule().ch;
    meta["adam_g_t"] = state.adam_g.steps();
    meta["adam_d_t"] = state.adam_d.steps();
    meta["verif_checksum"] = state.verif_checksum;
    blob.meta_json = meta.dump();

    blob.arrays = export_net(state.gen);
    for (auto& a : export_net(state.disc)) blob.arrays.push_back(std::move(a));
    for (auto* a : state.adam_g.state_arrays()) blob.arrays.push_back(*a);
    for (auto* a : state.adam_d.state_arrays()) blob.arrays.push_back(*a);
    return blob;
}

TrainState restore_train_state(const CheckpointBlob& blob,
                               std::shared_ptr<LightCnn9<float>> verificator) {
    if (blob.module_name != "training")
        raise(kModule, "CorruptCheckpoint", "expected a training checkpoint, got '" +
                                                blob.module_name + "'");
    nlohmann::json meta = nlohmann::json::parse(blob.meta_json);
    TrainConfig cfg = TrainConfig::parse(meta.at("config").get<std::string>());
    TrainState state(cfg, std::move(verificator));
    size_t cursor = import_net(state.gen, blob.arrays, 0);
    cursor = import_net(state.disc, blob.arrays, cursor);
    for (auto* a : state.adam_g.state_arrays()) {
        if (cursor >= blob.arrays.size() || blob.arrays[cursor].size() != a->size())
            raise(kModule, "CorruptCheckpoint", "optimizer array mismatch");
        *a = blob.arrays[cursor++];
    }
    for (auto* a : state.adam_d.state_arrays()) {
        if (cursor >= blob.arrays.size() || blob.arrays[cursor].size() != a->size())
            raise(kModule, "CorruptCheckpoint", "optimizer array mismatch");
        *a = blob.arrays[cursor++];
    }
    state.adam_g.set_step_count(meta.at("adam_g_t").get<long long>());
    state.adam_d.set_step_count(meta.at("adam_d_t").get<long long>());
    state.step = blob.step;
    return state;
}

std::vector<std::vector<int>> epoch_batches(int n_images, int batch_size, uint64_t seed,
                                            int epoch) {
    std::vector<int> order(n_images);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(seed, kShuffleStream, static_cast<uint64_t>(epoch)));
    rng.shuffle(order);
    std::vector<std::vector<int>> batches;
    for (int i = 0; i < n_images; i += batch_size) {
        std::vector<int> b(order.begin() + i,
                           order.begin() + std::min(n_images, i + batch_size));
        batches.push_back(std::move(b));
    }
    return batches;
}

TrainRunResult train(const std::vector<GrayImage>& images, const TrainConfig& cfg,
                     std::shared_ptr<LightCnn9<float>> verificator,
                     const std::string& checkpoint_dir, const CheckpointBlob* resume) {
    if (images.empty()) raise(kModule, "EmptyDataset", "no training images");
    TrainState state = resume ? restore_train_state(*resume, verificator)
                              : make_train_state(cfg, verificator);
    if (resume) {
        // The caller's config governs the run length; everything that
        // shapes the optimization stream must match the checkpoint.
        TrainConfig a = cfg, b = state.cfg;
        a.epochs = b.epochs = 0;
        a.checkpoint_interval = b.checkpoint_interval = 0;
        if (a.hash() != b.hash())
            raise(kModule, "ConfigMismatch",
                  "resume config differs from the checkpoint in more than run length");
        state.cfg = cfg;
    }

    const int batch_size = state.cfg.batch_size;
    const int steps_per_epoch = (static_cast<int>(images.size()) + batch_size - 1) / batch_size;
    const uint64_t total_steps =
        static_cast<uint64_t>(state.cfg.epochs) * static_cast<uint64_t>(steps_per_epoch);

    while (state.step < total_steps) {
        const int epoch = static_cast<int>(state.step / steps_per_epoch);
        const int slot = static_cast<int>(state.step % steps_per_epoch);
        const auto batches =
            epoch_batches(static_cast<int>(images.size()), batch_size, state.cfg.seed, epoch);
        std::vector<const GrayImage*> batch_images;
        for (int idx : batches[slot]) batch_images.push_back(&images[idx]);
        Tensor<float> batch = to_tensor(batch_images);

        if (train_step(state, batch) == StepStatus::aborted) {
            if (!checkpoint_dir.empty()) {
                std::filesystem::create_directories(checkpoint_dir);
                save_checkpoint(
                    (std::filesystem::path(checkpoint_dir) / "last_good.ppgn").string(),
                    make_checkpoint(state));
            }
            raise(kModule, "NonFiniteLoss",
                  state.diagnostics.empty() ? "training diverged" : state.diagnostics.back());
        }
        if (state.cfg.checkpoint_interval > 0 && !checkpoint_dir.empty() &&
            state.step % static_cast<uint64_t>(state.cfg.checkpoint_interval) == 0) {
            std::filesystem::create_directories(checkpoint_dir);
            save_checkpoint((std::filesystem::path(checkpoint_dir) /
                             ("step_" + std::to_string(state.step) + ".ppgn"))
                                .string(),
                            make_checkpoint(state));
        }
    }

    if (state.verificator && state.verificator->weight_checksum() != state.verif_checksum)
        raise(kModule, "FrozenViolation", "verificator weights changed during training");

    TrainRunResult result{make_checkpoint(state), state.history};
    return result;
}

void write_history_csv(const std::string& path, const std::vector<StepRecord>& history) {
    std::ofstream out(path);
    if (!out) raise(kModule, "IoError", "cannot write " + path);
    out << "step,d_loss,g_adv,l_verif,l_sim,total\n";
    char line[256];
    for (const auto& r : history) {
        std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g,%.9g,%.9g,%.9g\n",
                      static_cast<unsigned long long>(r.step), r.d_loss, r.g_adv, r.l_verif,
                      r.l_sim, r.total);
        out << line;
    }
}

PretrainResult pretrain_verificator(LightCnn9<float>& net, const std::vector<PairSample>& pairs,
                                    const TrainConfig& cfg) {
    PretrainResult result;
    nn::Adam<float> adam(cfg.lr_pretrain, cfg.adam_beta1, cfg.adam_beta2);
    adam.ensure_buffers(net.params());
    const float margin = static_cast<float>(cfg.margin);

    for (int epoch = 0; epoch < cfg.pretrain_epochs && !pairs.empty(); ++epoch) {
        std::vector<int> order(pairs.size());
        std::iota(order.begin(), order.end(), 0);
        Rng rng(derive_seed(cfg.seed, 0x70726574ULL, static_cast<uint64_t>(epoch)));
        rng.shuffle(order);

        double epoch_loss = 0;
        int batches = 0;
        for (size_t start = 0; start < order.size(); start += cfg.batch_size) {
            const size_t stop = std::min(order.size(), start + cfg.batch_size);
            const int b = static_cast<int>(stop - start);
            std::vector<const GrayImage*> imgs;
            imgs.reserve(2 * b);
            for (size_t i = start; i < stop; ++i) imgs.push_back(&pairs[order[i]].a.pixels);
            for (size_t i = start; i < stop; ++i) imgs.push_back(&pairs[order[i]].b.pixels);
            Tensor<float> stacked = to_tensor(imgs);

            Tensor<float> e = net.forward_embeddings(stacked);
            Tensor<float> u = e;
            std::vector<double> norms = normalize_rows(u);

            Tensor<float> du(u.n, kEmbeddingDim, 1, 1);
            double loss = 0;
            for (int i = 0; i < b; ++i) {
                const float* ua = u.image(i);
                const float* ub = u.image(b + i);
                float* ga = du.image(i);
                float* gb = du.image(b + i);
                double d2 = 0;
                for (int k = 0; k < kEmbeddingDim; ++k) {
                    double d = static_cast<double>(ua[k]) - ub[k];
                    d2 += d * d;
                }
                const int eta = pairs[order[start + i]].indicator;
                if (eta == 0) {
                    loss += 0.5 * d2;
                    for (int k = 0; k < kEmbeddingDim; ++k) {
                        float diff = (ua[k] - ub[k]) / b;
                        ga[k] = diff;
                        gb[k] = -diff;
                    }
                } else {
                    const double dist = std::sqrt(d2);
                    const double gap = margin - dist;
                    if (gap > 0) {
                        loss += 0.5 * gap * gap;
                        const double scale = -gap / std::max(dist, 1e-12) / b;
                        for (int k = 0; k < kEmbeddingDim; ++k) {
                            float g = static_cast<float>(scale * (ua[k] - ub[k]));
                            ga[k] = g;
                            gb[k] = -g;
                        }
                    }
                }
            }
            loss /= b;
            if (!std::isfinite(loss)) raise("verificator", "Diverged", "non-finite pretraining loss");

            Tensor<float> de = normalize_rows_backward(u, norms, du);
            net.zero_grads();
            net.backward(de);
            adam.step(net.params());
            epoch_loss += loss;
            ++batches;
        }
        result.epoch_losses.push_back(batches ? epoch_loss / batches : 0.0);
    }
    net.freeze();
    return result;
}

CheckpointBlob verificator_checkpoint(LightCnn9<float>& net, const TrainConfig& cfg) {
    CheckpointBlob blob;
    blob.module_name = "verificator";
    blob.config_hash = cfg.hash();
    blob.frozen = net.frozen();
    nlohmann::json meta;
    meta["schedule"] = net.schedule().mfm_out;
    meta["config"] = cfg.serialize();
    blob.meta_json = meta.dump();
    for (auto& p : net.params()) blob.arrays.push_back(*p.value);
    return blob;
}

LightCnn9<float> verificator_from_checkpoint(const CheckpointBlob& blob) {
    if (blob.module_name != "verificator")
        raise("verificator", "CorruptCheckpoint",
              "expected a verificator checkpoint, got '" + blob.module_name + "'");
    nlohmann::json meta = nlohmann::json::parse(blob.meta_json);
    VerificatorSchedule schedule;
    auto sched = meta.at("schedule");
    for (size_t i = 0; i < schedule.mfm_out.size(); ++i) schedule.mfm_out[i] = sched.at(i);
    LightCnn9<float> net(0, schedule);
    size_t cursor = 0;
    for (auto& p : net.params()) {
        if (cursor >= blob.arrays.size() || blob.arrays[cursor].size() != p.value->size())
            raise("verificator", "CorruptCheckpoint", "array mismatch at " + p.name);
        *p.value = blob.arrays[cursor++];
    }
    if (blob.frozen) net.freeze();
    return net;
}

std::vector<GrayImage> deidentify_batch(UNetGenerator<float>& gen,
                                        const std::vector<GrayImage>& images, NoiseMode noise,
                                        uint64_t seed) {
    std::vector<GrayImage> out;
    out.reserve(images.size());
    Rng rng(derive_seed(seed, 0x64656964ULL));
    for (size_t i = 0; i < images.size(); ++i) {
        std::vector<const GrayImage*> one{&images[i]};
        Tensor<float> x = to_tensor(one);
        Tensor<float> y = gen.forward(x, nn::Phase::eval, noise, &rng);
        out.push_back(tensor_slice_to_image(y, 0));
    }
    return out;
}

} // namespace ppdeid
