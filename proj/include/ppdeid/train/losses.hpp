#pragma once

#include <cmath>

#include "ppdeid/core/tensor.hpp"
#include "ppdeid/train/config.hpp"
#include "ppdeid/verif/verificator.hpp"

namespace ppdeid {

inline constexpr double kLogEps = 1e-12;

struct AdversarialLosses {
    double d_loss = 0;
    double g_adv = 0;
};

/// Score-level GAN losses over patch-probability grids, averaged over
/// the batch and all patch cells. The generator term is the
/// non-saturating form -mean(log D(fake)).
template <typename T>
AdversarialLosses adversarial_losses(const Tensor<T>& scores_real,
                                     const Tensor<T>& scores_fake) {
    if (scores_real.size() == 0 || scores_fake.size() == 0)
        raise("training", "NonFiniteLoss", "empty score grid");
    double sum_real = 0;
    for (T v : scores_real.data) sum_real += std::log(static_cast<double>(v) + kLogEps);
    double sum_fake_neg = 0, sum_fake = 0;
    for (T v : scores_fake.data) {
        sum_fake_neg += std::log(1.0 - static_cast<double>(v) + kLogEps);
        sum_fake += std::log(static_cast<double>(v) + kLogEps);
    }
    AdversarialLosses out;
    out.d_loss = -sum_real / static_cast<double>(scores_real.size()) -
                 sum_fake_neg / static_cast<double>(scores_fake.size());
    out.g_adv = -sum_fake / static_cast<double>(scores_fake.size());
    if (!std::isfinite(out.d_loss) || !std::isfinite(out.g_adv))
        raise("training", "NonFiniteLoss", "adversarial loss is not finite");
    return out;
}

/// Eq.-(1) combination with ablation gating applied to the lambdas.
inline double generator_total_loss(double g_adv, double l_verif, double l_sim,
                                   const TrainConfig& cfg) {
    if (!std::isfinite(g_adv) || !std::isfinite(l_verif) || !std::isfinite(l_sim))
        raise("training", "NonFiniteLoss", "loss component is not finite");
    return g_adv + cfg.effective_lambda1() * l_verif + cfg.effective_lambda2() * l_sim;
}

/// Verification term of the system objective: mean over the batch of the
/// contrastive loss between f(x) and f(x_hat) with the always-false
/// indicator (eta = 1), on L2-normalized embeddings. When `dxhat` is
/// given, fills it with the gradient with respect to x_hat (the x branch
/// carries no gradient).
template <typename T>
double verif_loss_term(LightCnn9<T>& verificator, const Tensor<T>& x_batch,
                       const Tensor<T>& xhat_batch, T margin, Tensor<T>* dxhat = nullptr) {
    if (!x_batch.same_shape(xhat_batch))
        raise("training", "ShapeMismatch", "x and x_hat batches differ in shape");
    const int n = x_batch.n;

    Tensor<T> e_x = verificator.forward_embeddings(x_batch);
    normalize_rows(e_x);
    // The x_hat pass runs second so layer caches hold the branch we
    // differentiate.
    Tensor<T> e_h = verificator.forward_embeddings(xhat_batch);
    Tensor<T> u_h = e_h;
    std::vector<double> norms = normalize_rows(u_h);

    double total = 0;
    Tensor<T> du(n, kEmbeddingDim, 1, 1);
    for (int i = 0; i < n; ++i) {
        const T* ux = e_x.image(i);
        const T* uh = u_h.image(i);
        double d2 = 0;
        for (int k = 0; k < kEmbeddingDim; ++k) {
            double d = static_cast<double>(uh[k]) - ux[k];
            d2 += d * d;
        }
        double dist = std::sqrt(d2);
        double gap = static_cast<double>(margin) - dist;
        if (gap > 0) {
            total += 0.5 * gap * gap;
            if (dxhat) {
                const double scale = -gap / std::max(dist, 1e-12) / n;
                T* g = du.image(i);
                for (int k = 0; k < kEmbeddingDim; ++k)
                    g[k] = static_cast<T>(scale * (uh[k] - ux[k]));
            }
        }
    }
    total /= n;
    if (!std::isfinite(total)) raise("training", "NonFiniteLoss", "verification loss is not finite");
    if (dxhat) {
        Tensor<T> de = normalize_rows_backward(u_h, norms, du);
        verificator.zero_grads();
        *dxhat = verificator.backward(de);
    }
    return total;
}

} // namespace ppdeid
