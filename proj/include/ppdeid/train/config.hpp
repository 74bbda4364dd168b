#pragma once

#include <cstdint>
#include <string>

namespace ppdeid {

/// The four objective set-ups.
enum class Ablation { cgan_only, cgan_sim, cgan_verif, cgan_sim_verif };

const char* to_string(Ablation a);
Ablation parse_ablation(const std::string& s);

/// All training hyperparameters. `gen_width`/`disc_width`/`verif_width`
/// scale channel counts (1.0 = published widths) so small studies fit a
/// CPU budget; architectural invariants (bottleneck 256x1x1, 30x30 patch
/// grid, 256-d embedding) hold at every width.
struct TrainConfig {
    double lambda1 = 1.0;       // verification weight
    double lambda2 = 1.0;       // similarity weight
    double margin = 2.0;        // contrastive margin on normalized embeddings
    double lr_system = 1e-5;    // whole-system learning rate
    double lr_pretrain = 1e-4;  // verificator pretraining learning rate
    int batch_size = 4;
    int epochs = 1;
    int pretrain_epochs = 1;
    uint64_t seed = 0;
    Ablation ablation = Ablation::cgan_sim_verif;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.999;
    double gen_width = 1.0;
    double disc_width = 1.0;
    double verif_width = 1.0;
    int checkpoint_interval = 0; // steps between periodic checkpoints; 0 = final only

    /// lambda1 with the ablation gate applied.
    double effective_lambda1() const {
        return (ablation == Ablation::cgan_verif || ablation == Ablation::cgan_sim_verif)
                   ? lambda1
                   : 0.0;
    }
    /// lambda2 with the ablation gate applied.
    double effective_lambda2() const {
        return (ablation == Ablation::cgan_sim || ablation == Ablation::cgan_sim_verif)
                   ? lambda2
                   : 0.0;
    }

    bool needs_verificator() const { return effective_lambda1() > 0.0; }

    /// Canonical `key = value` form; also the config-hash input.
    std::string serialize() const;
    uint64_t hash() const;

    /// Parses the flat `key = value` format ('#' comments allowed).
    static TrainConfig parse(const std::string& text);
    static TrainConfig load_file(const std::string& path);
};

} // namespace ppdeid
