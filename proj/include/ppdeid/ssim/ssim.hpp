#pragma once

#include <cmath>
#include <vector>

#include "ppdeid/core/error.hpp"
#include "ppdeid/data/image.hpp"

namespace ppdeid {

/// Windowed SSIM configuration. Defaults follow the standard reference:
/// 11x11 Gaussian window (sigma 1.5), K1=0.01, K2=0.03, unit exponents,
/// dynamic range 1 (images live in [0,1]), C3 = C2/2.
struct SsimConfig {
    int window = 11;
    double sigma = 1.5;
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
    double k1 = 0.01, k2 = 0.03;
    double dynamic_range = 1.0;

    double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
    double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
    double c3() const { return c2() / 2.0; }

    void validate() const {
        if (window < 2 || window % 2 == 0)
            raise("ssim_regulator", "InvalidConfig", "window must be odd and >= 3");
        if (sigma <= 0 || k1 <= 0 || k2 <= 0 || dynamic_range <= 0)
            raise("ssim_regulator", "InvalidConfig", "sigma, K1, K2 and L must be positive");
        if (alpha <= 0 || beta <= 0 || gamma <= 0)
            raise("ssim_regulator", "InvalidConfig", "exponents must be positive");
    }

    bool default_exponents() const { return alpha == 1.0 && beta == 1.0 && gamma == 1.0; }

    /// Normalized 2-D Gaussian taps, row-major window x window.
    std::vector<double> weights() const {
        std::vector<double> w(static_cast<size_t>(window) * window);
        const int c = window / 2;
        double sum = 0;
        for (int y = 0; y < window; ++y)
            for (int x = 0; x < window; ++x) {
                double d2 = (y - c) * double(y - c) + (x - c) * double(x - c);
                double v = std::exp(-d2 / (2.0 * sigma * sigma));
                w[static_cast<size_t>(y) * window + x] = v;
                sum += v;
            }
        for (auto& v : w) v /= sum;
        return w;
    }
};

namespace detail {

/// Windowed first and second moments over all valid window positions.
template <typename T>
struct SsimMoments {
    int map_h = 0, map_w = 0;
    std::vector<double> mu_x, mu_y, ex2, ey2, exy;

    void compute(const T* x, const T* y, int h, int w, const SsimConfig& cfg) {
        const int k = cfg.window;
        map_h = h - k + 1;
        map_w = w - k + 1;
        if (map_h <= 0 || map_w <= 0)
            raise("ssim_regulator", "ShapeMismatch", "image smaller than the SSIM window");
        const auto taps = cfg.weights();
        const size_t n = static_cast<size_t>(map_h) * map_w;
        mu_x.assign(n, 0.0);
        mu_y.assign(n, 0.0);
        ex2.assign(n, 0.0);
        ey2.assign(n, 0.0);
        exy.assign(n, 0.0);
        for (int py = 0; py < map_h; ++py) {
            for (int px = 0; px < map_w; ++px) {
                double mx = 0, my = 0, sxx = 0, syy = 0, sxy = 0;
                const double* tap = taps.data();
                for (int ky = 0; ky < k; ++ky) {
                    const T* xr = x + static_cast<size_t>(py + ky) * w + px;
                    const T* yr = y + static_cast<size_t>(py + ky) * w + px;
                    for (int kx = 0; kx < k; ++kx, ++tap) {
                        const double xv = xr[kx], yv = yr[kx], wt = *tap;
                        mx += wt * xv;
                        my += wt * yv;
                        sxx += wt * xv * xv;
                        syy += wt * yv * yv;
                        sxy += wt * xv * yv;
                    }
                }
                const size_t i = static_cast<size_t>(py) * map_w + px;
                mu_x[i] = mx;
                mu_y[i] = my;
                ex2[i] = sxx;
                ey2[i] = syy;
                exy[i] = sxy;
            }
        }
    }
};

} // namespace detail

/// Mean of l^alpha * c^beta * s^gamma over all valid window positions.
/// With unit exponents (the default) the contrast and structure terms
/// are combined through the C3 = C2/2 identity, which keeps the value
/// smooth in the variances; general exponents use the explicit three-term
/// product.
template <typename T>
double ssim(const T* x, const T* y, int h, int w, const SsimConfig& cfg) {
    cfg.validate();
    detail::SsimMoments<T> m;
    m.compute(x, y, h, w, cfg);
    const double c1 = cfg.c1(), c2 = cfg.c2(), c3 = cfg.c3();
    double total = 0;
    const size_t n = m.mu_x.size();
    for (size_t i = 0; i < n; ++i) {
        const double mx = m.mu_x[i], my = m.mu_y[i];
        const double vx = m.ex2[i] - mx * mx;
        const double vy = m.ey2[i] - my * my;
        const double cov = m.exy[i] - mx * my;
        const double l = (2 * mx * my + c1) / (mx * mx + my * my + c1);
        if (cfg.default_exponents()) {
            total += l * (2 * cov + c2) / (vx + vy + c2);
        } else {
            const double sx = std::sqrt(std::max(vx, 0.0));
            const double sy = std::sqrt(std::max(vy, 0.0));
            const double c = (2 * sx * sy + c2) / (vx + vy + c2);
            const double s = (cov + c3) / (sx * sy + c3);
            total += std::pow(l, cfg.alpha) * std::pow(c, cfg.beta) * std::pow(s, cfg.gamma);
        }
    }
    return total / static_cast<double>(n);
}

template <typename T>
double ssim(const Tensor<T>& x, const Tensor<T>& y, const SsimConfig& cfg = {}) {
    if (!x.same_shape(y) || x.n != 1 || x.c != 1)
        raise("ssim_regulator", "ShapeMismatch", "expected matching single-channel images");
    return ssim(x.ptr(), y.ptr(), x.h, x.w, cfg);
}

inline double ssim(const GrayImage& x, const GrayImage& y, const SsimConfig& cfg = {}) {
    if (x.h != y.h || x.w != y.w)
        raise("ssim_regulator", "ShapeMismatch", "image sizes differ");
    return ssim(x.v.data(), y.v.data(), x.h, x.w, cfg);
}

/// Diagnostic decomposition: per-window luminance, contrast and
/// structure maps (valid positions, row-major).
struct SsimComponents {
    int map_h = 0, map_w = 0;
    std::vector<double> luminance, contrast, structure;
};

template <typename T>
SsimComponents ssim_components(const T* x, const T* y, int h, int w, const SsimConfig& cfg) {
    cfg.validate();
    detail::SsimMoments<T> m;
    m.compute(x, y, h, w, cfg);
    const double c1 = cfg.c1(), c2 = cfg.c2(), c3 = cfg.c3();
    SsimComponents out;
    out.map_h = m.map_h;
    out.map_w = m.map_w;
    const size_t n = m.mu_x.size();
    out.luminance.resize(n);
    out.contrast.resize(n);
    out.structure.resize(n);
    for (size_t i = 0; i < n; ++i) {
        const double mx = m.mu_x[i], my = m.mu_y[i];
        const double vx = std::max(m.ex2[i] - mx * mx, 0.0);
        const double vy = std::max(m.ey2[i] - my * my, 0.0);
        const double cov = m.exy[i] - mx * my;
        const double sx = std::sqrt(vx), sy = std::sqrt(vy);
        out.luminance[i] = (2 * mx * my + c1) / (mx * mx + my * my + c1);
        out.contrast[i] = (2 * sx * sy + c2) / (vx + vy + c2);
        out.structure[i] = (cov + c3) / (sx * sy + c3);
    }
    return out;
}

inline SsimComponents ssim_components(const GrayImage& x, const GrayImage& y,
                                      const SsimConfig& cfg = {}) {
    if (x.h != y.h || x.w != y.w)
        raise("ssim_regulator", "ShapeMismatch", "image sizes differ");
    return ssim_components(x.v.data(), y.v.data(), x.h, x.w, cfg);
}

/// L_sim = 1/2 (1 - SSIM(x, x_hat)).
template <typename T>
double sim_loss(const Tensor<T>& x, const Tensor<T>& x_hat, const SsimConfig& cfg = {}) {
    return 0.5 * (1.0 - ssim(x, x_hat, cfg));
}

inline double sim_loss(const GrayImage& x, const GrayImage& x_hat, const SsimConfig& cfg = {}) {
    return 0.5 * (1.0 - ssim(x, x_hat, cfg));
}

/// Forward value of L_sim plus its analytic gradient with respect to
/// every pixel of x_hat (scaled by `upstream`). Requires unit exponents,
/// where SSIM = l * (2*cov + C2)/(var_x + var_y + C2) exactly.
template <typename T>
double sim_loss_grad(const T* x, const T* y, int h, int w, const SsimConfig& cfg, T* dy,
                     double upstream = 1.0) {
    cfg.validate();
    if (!cfg.default_exponents())
        raise("ssim_regulator", "InvalidConfig",
              "gradients are implemented for unit exponents only");
    detail::SsimMoments<T> m;
    m.compute(x, y, h, w, cfg);
    const double c1 = cfg.c1(), c2 = cfg.c2();
    const size_t n = m.mu_x.size();
    const int k = cfg.window;
    const auto taps = cfg.weights();

    std::vector<double> g_mu(n), g_ey2(n), g_exy(n);
    double total = 0;
    for (size_t i = 0; i < n; ++i) {
        const double mx = m.mu_x[i], my = m.mu_y[i];
        const double vx = m.ex2[i] - mx * mx;
        const double vy = m.ey2[i] - my * my;
        const double cov = m.exy[i] - mx * my;
        const double a = 2 * mx * my + c1;
        const double b = mx * mx + my * my + c1;
        const double c = 2 * cov + c2;
        const double d = vx + vy + c2;
        const double l = a / b;
        const double cs = c / d;
        total += l * cs;

        // dSSIM/d(mu_y): through l, and through cov and var_y inside cs.
        const double dl_dmy = (2 * mx * b - a * 2 * my) / (b * b);
        const double dcs_dmy = (-2 * mx * d - c * (-2 * my)) / (d * d);
        g_mu[i] = dl_dmy * cs + l * dcs_dmy;
        g_ey2[i] = l * (-c / (d * d));
        g_exy[i] = l * (2 / d);
    }
    const double mean_scale = 1.0 / static_cast<double>(n);
    // d(sim_loss)/d(SSIM_p) = -1/2 * 1/n
    const double outer = -0.5 * mean_scale * upstream;

    std::fill(dy, dy + static_cast<size_t>(h) * w, T(0));
    for (int py = 0; py < m.map_h; ++py) {
        for (int px = 0; px < m.map_w; ++px) {
            const size_t i = static_cast<size_t>(py) * m.map_w + px;
            const double gm = g_mu[i] * outer;
            const double g2 = g_ey2[i] * outer;
            const double gx = g_exy[i] * outer;
            const double* tap = taps.data();
            for (int ky = 0; ky < k; ++ky) {
                const size_t row = static_cast<size_t>(py + ky) * w + px;
                for (int kx = 0; kx < k; ++kx, ++tap) {
                    const double yv = y[row + kx], xv = x[row + kx];
                    dy[row + kx] += static_cast<T>(*tap * (gm + 2.0 * yv * g2 + xv * gx));
                }
            }
        }
    }
    return 0.5 * (1.0 - total * mean_scale);
}

} // namespace ppdeid
