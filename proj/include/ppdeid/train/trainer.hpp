#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "ppdeid/data/manifest.hpp"
#include "ppdeid/gan/discriminator.hpp"
#include "ppdeid/gan/generator.hpp"
#include "ppdeid/nn/adam.hpp"
#include "ppdeid/nn/checkpoint.hpp"
#include "ppdeid/train/config.hpp"
#include "ppdeid/train/losses.hpp"
#include "ppdeid/verif/verificator.hpp"

namespace ppdeid {

struct StepRecord {
    uint64_t step = 0;
    double d_loss = 0, g_adv = 0, l_verif = 0, l_sim = 0, total = 0;
};

/// Mutable optimization state of the PP-GAN min-max loop. The
/// verificator reference is frozen: its checksum is recorded at
/// construction and must never change.
struct TrainState {
    TrainConfig cfg;
    UNetGenerator<float> gen;
    PatchDiscriminator<float> disc;
    std::shared_ptr<LightCnn9<float>> verificator;
    nn::Adam<float> adam_g, adam_d;
    uint64_t step = 0;
    std::vector<StepRecord> history;
    uint64_t verif_evals = 0;
    uint64_t ssim_evals = 0;
    uint64_t verif_checksum = 0;
    std::vector<std::string> diagnostics;

    TrainState(const TrainConfig& cfg_, std::shared_ptr<LightCnn9<float>> verificator_);
};

TrainState make_train_state(const TrainConfig& cfg,
                            std::shared_ptr<LightCnn9<float>> verificator);

enum class StepStatus { ok, aborted };

/// One discriminator Adam update on d_loss, then one generator Adam
/// update on the combined objective. Aborts atomically (state restored,
/// diagnostics appended) when any loss goes non-finite.
StepStatus train_step(TrainState& state, const Tensor<float>& batch);

CheckpointBlob make_checkpoint(TrainState& state);
TrainState restore_train_state(const CheckpointBlob& blob,
                               std::shared_ptr<LightCnn9<float>> verificator);

struct TrainRunResult {
    CheckpointBlob checkpoint;
    std::vector<StepRecord> history;
};

/// Runs cfg.epochs over deterministically shuffled minibatches. With
/// `resume`, continues from the checkpointed step with a bit-identical
/// stream. On a non-finite loss the last good checkpoint is written to
/// `checkpoint_dir` (when given) before the error propagates.
TrainRunResult train(const std::vector<GrayImage>& images, const TrainConfig& cfg,
                     std::shared_ptr<LightCnn9<float>> verificator,
                     const std::string& checkpoint_dir = "",
                     const CheckpointBlob* resume = nullptr);

void write_history_csv(const std::string& path, const std::vector<StepRecord>& history);

/// Deterministic minibatch index plan for (seed, epoch).
std::vector<std::vector<int>> epoch_batches(int n_images, int batch_size, uint64_t seed,
                                            int epoch);

struct PretrainResult {
    std::vector<double> epoch_losses;
};

/// Contrastive Siamese pretraining (Adam, lr_pretrain, margin from cfg);
/// freezes the network when done. Zero epochs freezes the initial
/// weights unchanged.
PretrainResult pretrain_verificator(LightCnn9<float>& net, const std::vector<PairSample>& pairs,
                                    const TrainConfig& cfg);

CheckpointBlob verificator_checkpoint(LightCnn9<float>& net, const TrainConfig& cfg);
LightCnn9<float> verificator_from_checkpoint(const CheckpointBlob& blob);

/// Deterministic-mode batch de-identification on a frozen generator.
std::vector<GrayImage> deidentify_batch(UNetGenerator<float>& gen,
                                        const std::vector<GrayImage>& images,
                                        NoiseMode noise = NoiseMode::deterministic,
                                        uint64_t seed = 0);

} // namespace ppdeid
