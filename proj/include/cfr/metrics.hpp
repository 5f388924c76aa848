#pragma once

#include <cmath>
#include <vector>

#include "cfr/attack.hpp"
#include "cfr/dataset.hpp"
#include "cfr/errors.hpp"
#include "cfr/model.hpp"
#include "cfr/region.hpp"

namespace cfr {

// Exponents and stabilizers for the three-component SSIM. Defaults are the
// standard constants for dynamic range L=1: c1=(0.01 L)^2, c2=(0.03 L)^2,
// c3=c2/2, exponents all 1.
struct SsimParams {
    double alpha = 1.0, beta = 1.0, gamma = 1.0;
    double c1 = 0.0001, c2 = 0.0009, c3 = 0.00045;
    double dynamic_range = 1.0;
    bool windowed = false;  // 11x11 Gaussian sliding window instead of global stats
    int window = 11;
    double window_sigma = 1.5;

    static SsimParams defaults() { return {}; }

    void validate() const {
        if (alpha <= 0.0 || beta <= 0.0 || gamma <= 0.0)
            throw config_error("ssim: exponents must be > 0");
        if (c1 <= 0.0 || c2 <= 0.0 || c3 <= 0.0) throw config_error("ssim: stabilizers must be > 0");
    }
};

struct MetricsReport {
    double asr = 0.0;
    double mean_ssim = 0.0;
    double mean_l0 = 0.0, mean_l1 = 0.0, mean_l2 = 0.0, mean_linf = 0.0;
    int n = 0;
};

struct LpNorms {
    double l0 = 0.0, l1 = 0.0, l2 = 0.0, linf = 0.0;
};

inline LpNorms lp_norms(const Tensor& delta) {
    LpNorms n;
    for (double x : delta.data()) {
        const double a = std::abs(x);
        if (a > kL0Threshold) n.l0 += 1.0;
        n.l1 += a;
        n.l2 += a * a;
        n.linf = std::max(n.linf, a);
    }
    n.l2 = std::sqrt(n.l2);
    return n;
}

inline double asr(const std::vector<AttackResult>& results) {
    if (results.empty()) throw contract_error("asr: empty result list");
    std::size_t wins = 0;
    for (const auto& r : results) wins += r.success ? 1 : 0;
    return 100.0 * static_cast<double>(wins) / static_cast<double>(results.size());
}

namespace detail {

struct ChannelStats {
    double mu_x = 0.0, mu_y = 0.0, var_x = 0.0, var_y = 0.0, cov = 0.0;
};

inline ChannelStats channel_stats(const double* x, const double* y, std::size_t n) {
    ChannelStats s;
    for (std::size_t i = 0; i < n; ++i) {
        s.mu_x += x[i];
        s.mu_y += y[i];
    }
    s.mu_x /= static_cast<double>(n);
    s.mu_y /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = x[i] - s.mu_x;
        const double dy = y[i] - s.mu_y;
        s.var_x += dx * dx;
        s.var_y += dy * dy;
        s.cov += dx * dy;
    }
    s.var_x /= static_cast<double>(n);
    s.var_y /= static_cast<double>(n);
    s.cov /= static_cast<double>(n);
    return s;
}

inline double ssim_from_stats(const ChannelStats& s, const SsimParams& p) {
    const double sd_x = std::sqrt(s.var_x);
    const double sd_y = std::sqrt(s.var_y);
    const double l = (2.0 * s.mu_x * s.mu_y + p.c1) / (s.mu_x * s.mu_x + s.mu_y * s.mu_y + p.c1);
    const double c = (2.0 * s.cov + p.c2) / (s.var_x + s.var_y + p.c2);
    const double st = (s.cov + p.c3) / (sd_x * sd_y + p.c3);
    auto powe = [](double base, double e) { return e == 1.0 ? base : std::pow(base, e); };
    return powe(l, p.alpha) * powe(c, p.beta) * powe(st, p.gamma);
}

inline double ssim_windowed_channel(const double* x, const double* y, int h, int w,
                                    const SsimParams& p) {
    const int half = p.window / 2;
    std::vector<double> kernel(static_cast<std::size_t>(p.window) * p.window);
    double ksum = 0.0;
    for (int i = 0; i < p.window; ++i)
        for (int j = 0; j < p.window; ++j) {
            const double di = i - half, dj = j - half;
            const double v = std::exp(-(di * di + dj * dj) / (2.0 * p.window_sigma * p.window_sigma));
            kernel[static_cast<std::size_t>(i) * p.window + j] = v;
            ksum += v;
        }
    for (double& v : kernel) v /= ksum;

    double total = 0.0;
    std::size_t count = 0;
    for (int ci = half; ci < h - half; ++ci) {
        for (int cj = half; cj < w - half; ++cj) {
            ChannelStats s;
            double wx = 0.0, wy = 0.0, wxx = 0.0, wyy = 0.0, wxy = 0.0;
            for (int i = 0; i < p.window; ++i)
                for (int j = 0; j < p.window; ++j) {
                    const double k = kernel[static_cast<std::size_t>(i) * p.window + j];
                    const double xv = x[static_cast<std::size_t>(ci - half + i) * w + (cj - half + j)];
                    const double yv = y[static_cast<std::size_t>(ci - half + i) * w + (cj - half + j)];
                    wx += k * xv;
                    wy += k * yv;
                    wxx += k * xv * xv;
                    wyy += k * yv * yv;
                    wxy += k * xv * yv;
                }
            s.mu_x = wx;
            s.mu_y = wy;
            s.var_x = wxx - wx * wx;
            s.var_y = wyy - wy * wy;
            s.cov = wxy - wx * wy;
            total += ssim_from_stats(s, p);
            ++count;
        }
    }
    if (count == 0) throw dimension_error("ssim: image smaller than the sliding window");
    return total / static_cast<double>(count);
}

}  // namespace detail

// Structural similarity as the paper states it: global per-channel
// statistics (population variance/covariance over all pixels), combined as
// l^alpha * c^beta * s^gamma and averaged over channels. A sliding-window
// variant is available behind `windowed` for comparison.
inline double ssim(const Tensor& x, const Tensor& y, const SsimParams& p = SsimParams::defaults()) {
    p.validate();
    if (x.shape() != y.shape()) throw dimension_error("ssim: image shapes differ");
    if (x.shape().size() != 3) throw dimension_error("ssim: expected [C,H,W] images");
    const int c = x.shape()[0], h = x.shape()[1], w = x.shape()[2];
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    double total = 0.0;
    for (int ci = 0; ci < c; ++ci) {
        const double* xp = x.data().data() + static_cast<std::size_t>(ci) * plane;
        const double* yp = y.data().data() + static_cast<std::size_t>(ci) * plane;
        if (p.windowed)
            total += detail::ssim_windowed_channel(xp, yp, h, w, p);
        else
            total += detail::ssim_from_stats(detail::channel_stats(xp, yp, plane), p);
    }
    return total / static_cast<double>(c);
}

inline MetricsReport compute_report(const std::vector<AttackResult>& results,
                                    const SsimParams& p = SsimParams::defaults()) {
    MetricsReport rep;
    rep.n = static_cast<int>(results.size());
    if (results.empty()) return rep;
    rep.asr = asr(results);
    for (const auto& r : results) {
        rep.mean_ssim += ssim(r.clean, r.adversarial, p);
        const LpNorms n = lp_norms(r.delta);
        rep.mean_l0 += n.l0;
        rep.mean_l1 += n.l1;
        rep.mean_l2 += n.l2;
        rep.mean_linf += n.linf;
    }
    const double inv = 1.0 / static_cast<double>(results.size());
    rep.mean_ssim *= inv;
    rep.mean_l0 *= inv;
    rep.mean_l1 *= inv;
    rep.mean_l2 *= inv;
    rep.mean_linf *= inv;
    return rep;
}

// Black-box transfer: ASR of substitute-crafted adversarial images measured
// on a different target model, over the subset whose clean images the target
// classifies correctly.
inline double transfer_eval(const std::vector<AttackResult>& results, const Model& target) {
    if (results.empty()) throw contract_error("transfer_eval: empty result list");
    std::size_t n = 0, wins = 0;
    for (const auto& r : results) {
        if (predict(target, r.clean) != r.label) continue;
        ++n;
        wins += predict(target, r.adversarial) != r.label ? 1 : 0;
    }
    if (n == 0) throw contract_error("transfer_eval: target classifies no clean image correctly");
    return 100.0 * static_cast<double>(wins) / static_cast<double>(n);
}

struct ImportanceResult {
    double clean_accuracy = 0.0;
    double adv_cfr_accuracy = 0.0;      // pixels outside the CFR zeroed
    double adv_non_cfr_accuracy = 0.0;  // pixels inside the CFR zeroed
};

// The region-importance experiment: how accuracy responds to keeping only
// the CFR versus removing only the CFR.
inline ImportanceResult cfr_importance_eval(const Model& model, const LabeledDataset& data, double tau) {
    if (data.images.empty()) throw contract_error("cfr_importance_eval: empty dataset");
    ImportanceResult out;
    for (const auto& img : data.images) {
        const int h = img.pixels.shape()[1], w = img.pixels.shape()[2];
        ForwardTrace tr = forward_trace(model, img.pixels);
        out.clean_accuracy += tr.predicted == img.label ? 1.0 : 0.0;
        SoftMask mask = soft_mask_for(tr, img.label, h, w, tau);
        HardMask hm = hard_mask(mask);
        out.adv_cfr_accuracy += predict(model, zero_outside_cfr(img.pixels, hm)) == img.label ? 1.0 : 0.0;
        out.adv_non_cfr_accuracy += predict(model, zero_inside_cfr(img.pixels, hm)) == img.label ? 1.0 : 0.0;
    }
    const double inv = 100.0 / static_cast<double>(data.images.size());
    out.clean_accuracy *= inv;
    out.adv_cfr_accuracy *= inv;
    out.adv_non_cfr_accuracy *= inv;
    return out;
}

}  // namespace cfr
