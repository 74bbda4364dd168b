#pragma once

#include <cmath>
#include <vector>

#include "ppdeid/nn/layers.hpp"

namespace ppdeid::nn {

/// Adam over a fixed parameter list. Moment buffers are keyed by list
/// position, so the parameter order must not change between steps (it is
/// also the checkpoint serialization order).
template <typename T>
class Adam {
public:
    Adam() = default;
    Adam(double lr, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].value->size(), T(0));
                v_[i].assign(params[i].value->size(), T(0));
            }
        }
        ++t_;
        const double bc1 = 1.0 - std::pow(beta1_, t_);
        const double bc2 = 1.0 - std::pow(beta2_, t_);
        for (size_t i = 0; i < params.size(); ++i) {
            auto& value = *params[i].value;
            const auto& grad = *params[i].grad;
            auto& m = m_[i];
            auto& v = v_[i];
            for (size_t j = 0; j < value.size(); ++j) {
                const double g = grad[j];
                m[j] = static_cast<T>(beta1_ * m[j] + (1.0 - beta1_) * g);
                v[j] = static_cast<T>(beta2_ * v[j] + (1.0 - beta2_) * g * g);
                const double mhat = m[j] / bc1;
                const double vhat = v[j] / bc2;
                value[j] -= static_cast<T>(lr_ * mhat / (std::sqrt(vhat) + eps_));
            }
        }
    }

    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long long steps() const { return t_; }

    /// Serialized alongside parameters so training resumes bit-identically.
    std::vector<std::vector<T>*> state_arrays() {
        std::vector<std::vector<T>*> out;
        for (auto& m : m_) out.push_back(&m);
        for (auto& v : v_) out.push_back(&v);
        return out;
    }

    void ensure_buffers(const std::vector<ParamRef<T>>& params) {
        if (m_.empty()) {
            m_.resize(params.size());
            v_.resize(params.size());
            for (size_t i = 0; i < params.size(); ++i) {
                m_[i].assign(params[i].value->size(), T(0));
                v_[i].assign(params[i].value->size(), T(0));
            }
        }
    }

    void set_step_count(long long t) { t_ = t; }

private:
    double lr_ = 1e-4, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    long long t_ = 0;
    std::vector<std::vector<T>> m_, v_;
};

} // namespace ppdeid::nn
