#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <string>
#include <thread>
#include <vector>

#include "cfr/dataset.hpp"
#include "cfr/errors.hpp"
#include "cfr/model.hpp"
#include "cfr/region.hpp"
#include "cfr/rng.hpp"
#include "cfr/tensor.hpp"

namespace cfr {

// Floor for the distortion regularizer denominator; bounds its gradient near
// the delta = 0 singularity.
constexpr double kRegularizerFloor = 1e-6;
constexpr double kDeltaInitAmplitude = 1e-3;
constexpr double kL0Threshold = 1e-8;

struct AttackConfig {
    int iterations = 20;         // N
    double step_size = 10.0;     // eta; 10 for inputs up to 32px, 20 for larger
    double inv_temperature = 0.1;  // T
    double distortion_weight = 1.0;  // beta
    double tau = 0.2;
    bool early_stop = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (iterations < 0) throw config_error("attack: iterations must be >= 0");
        if (step_size <= 0.0) throw config_error("attack: step size must be > 0");
        if (inv_temperature <= 0.0) throw config_error("attack: inverse temperature T must be > 0");
        if (distortion_weight < 0.0) throw config_error("attack: distortion weight must be >= 0");
        if (tau < 0.0 || tau > 1.0) throw config_error("attack: tau must be in [0,1]");
    }
};

inline AttackConfig default_attack_config(int input_side) {
    AttackConfig cfg;
    cfg.step_size = input_side <= 32 ? 10.0 : 20.0;
    return cfg;
}

struct BaselineConfig {
    double eps = 16.0 / 255.0;
    double alpha = 2.0 / 255.0;
    int steps = 20;
    bool random_start = false;
    std::uint64_t seed = 0;

    void validate() const {
        if (eps <= 0.0) throw config_error("baseline attack: eps must be > 0");
        if (alpha <= 0.0) throw config_error("baseline attack: alpha must be > 0");
        if (steps < 1) throw config_error("baseline attack: steps must be >= 1");
        if (steps > 1 && alpha > eps) throw config_error("baseline attack: alpha must be <= eps for multi-step use");
    }
};

struct AttackResult {
    Tensor clean;
    Tensor delta;
    Tensor adversarial;  // clean + delta, in [0,1]
    bool success = false;
    int final_predicted = -1;
    int label = -1;
    std::string id;
    std::vector<double> loss_history;
    int iterations_used = 0;
    int suprathreshold_count = 0;
    int l0_delta = 0;
    bool empty_cfr_fallback = false;
    bool regularizer_clamped = false;
    std::string error;  // nonempty when the per-image run failed
};

namespace detail {

// Re-derives delta as clip(X + delta, 0, 1) - X so that X + delta is exactly
// the stored adversarial image and stays in range. Rounding can leave
// X + (clip - X) an ulp outside [0,1]; iterate, then zero any pathological
// residue (X alone is always in range).
inline void clip_rederive(const std::vector<double>& x, std::vector<double>& delta) {
    for (int pass = 0; pass < 4; ++pass) {
        bool in_range = true;
        for (std::size_t i = 0; i < delta.size(); ++i) {
            const double clipped = std::min(1.0, std::max(0.0, x[i] + delta[i]));
            delta[i] = clipped - x[i];
            const double re = x[i] + delta[i];
            in_range = in_range && re >= 0.0 && re <= 1.0;
        }
        if (in_range) return;
    }
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double re = x[i] + delta[i];
        if (re < 0.0 || re > 1.0) delta[i] = 0.0;
    }
}

inline Tensor adversarial_from(const Tensor& clean, const std::vector<double>& delta) {
    std::vector<double> out(clean.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = clean[i] + delta[i];
    return Tensor(clean.shape(), std::move(out));
}

inline int count_l0(const std::vector<double>& v) {
    int n = 0;
    for (double x : v) n += std::abs(x) > kL0Threshold ? 1 : 0;
    return n;
}

// Mask replicated across channels as a constant (no-grad) tensor.
inline Tensor broadcast_mask(const SoftMask& m, int channels) {
    const std::size_t plane = m.weights.size();
    std::vector<double> d(static_cast<std::size_t>(channels) * plane);
    for (int c = 0; c < channels; ++c)
        std::copy(m.weights.begin(), m.weights.end(), d.begin() + static_cast<std::size_t>(c) * plane);
    return Tensor({channels, m.rows, m.cols}, std::move(d));
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

struct LossValue {
    double j = 0.0;
    std::vector<double> grad_delta;
    bool clamped = false;
};

// J = (-log S_y)/T + beta / ||delta ⊙ M̃||_2, with the gradient w.r.t. delta.
// The trace must have been built with `delta` on its tape (input = X + delta).
inline LossValue loss_j(const ForwardTrace& trace, int y, const Tensor& delta, const SoftMask& mask,
                        double inv_temperature, double distortion_weight) {
    if (inv_temperature <= 0.0) throw config_error("loss_j: inverse temperature T must be > 0");
    if (y < 0 || y >= static_cast<int>(trace.probs.size()))
        throw contract_error("loss_j: class index out of range");
    Tensor j = scale(neg(log(pick(trace.probs, static_cast<std::size_t>(y)))), 1.0 / inv_temperature);
    bool clamped = false;
    if (distortion_weight != 0.0) {
        Tensor mask3 = detail::broadcast_mask(mask, delta.shape()[0]);
        Tensor masked = mul(delta, mask3);
        Tensor norm = cfr::sqrt(sum(mul(masked, masked)));
        clamped = norm.value() < kRegularizerFloor;
        j = add(j, scale(reciprocal(clamp_min(norm, kRegularizerFloor)), distortion_weight));
    }
    backward(j, {delta});
    LossValue lv;
    lv.j = j.value();
    lv.grad_delta = delta.grad();
    lv.clamped = clamped;
    return lv;
}

// Algorithm: locate the CFR once on the clean image (Grad-CAM weights ->
// activation map -> soft mask), then run N gradient-ascent steps
// delta <- (delta + eta * dJ/ddelta) ⊙ M̃ with a clip of X + delta to [0,1]
// after every step. Untargeted: success means the final prediction differs
// from the ground-truth label.
inline AttackResult cfr_attack(const Model& model, const LabeledImage& image, const AttackConfig& cfg) {
    cfg.validate();
    const Tensor& x = image.pixels;
    const int channels = x.shape()[0], h = x.shape()[1], w = x.shape()[2];

    AttackResult res;
    res.clean = x;
    res.label = image.label;
    res.id = image.id;

    ForwardTrace clean_trace = forward_trace(model, x);
    SoftMask mask = soft_mask_for(clean_trace, image.label, h, w, cfg.tau);
    if (mask.suprathreshold_count == 0) {
        // Empty CFR: reportable, not fatal. Fall back to a full-support
        // uniform mask and flag the sample.
        res.empty_cfr_fallback = true;
        mask.weights.assign(static_cast<std::size_t>(h) * w, 1.0 / (static_cast<double>(h) * w));
        mask.suprathreshold_count = h * w;
    }
    res.suprathreshold_count = mask.suprathreshold_count;
    const Tensor mask3 = detail::broadcast_mask(mask, channels);

    Rng rng(cfg.seed);
    std::vector<double> delta(x.size());
    for (std::size_t i = 0; i < delta.size(); ++i) {
        const double noise = rng.uniform(-kDeltaInitAmplitude, kDeltaInitAmplitude);
        delta[i] = mask3[i] > 0.0 ? noise : 0.0;
    }
    detail::clip_rederive(x.data(), delta);

    for (int t = 1; t <= cfg.iterations; ++t) {
        Tensor delta_leaf(x.shape(), delta, true);
        Tensor x_adv = add(x, delta_leaf);
        ForwardTrace trace = forward_trace(model, x_adv);
        LossValue lv = loss_j(trace, image.label, delta_leaf, mask, cfg.inv_temperature,
                              cfg.distortion_weight);
        if (!std::isfinite(lv.j)) throw numeric_error("cfr_attack: non-finite loss on " + image.id);
        res.loss_history.push_back(lv.j);
        res.regularizer_clamped = res.regularizer_clamped || lv.clamped;

        for (std::size_t i = 0; i < delta.size(); ++i)
            delta[i] = (delta[i] + cfg.step_size * lv.grad_delta[i]) * mask3[i];
        detail::clip_rederive(x.data(), delta);
        res.iterations_used = t;

        if (cfg.early_stop &&
            predict(model, detail::adversarial_from(x, delta)) != image.label)
            break;
    }

    res.delta = Tensor(x.shape(), delta);
    res.adversarial = detail::adversarial_from(x, delta);
    res.final_predicted = predict(model, res.adversarial);
    res.success = res.final_predicted != image.label;
    res.l0_delta = detail::count_l0(delta);
    return res;
}

// One-step sign-gradient baseline: X' = clip(X + eps * sign(dJ_CE/dX), 0, 1).
inline AttackResult fgsm(const Model& model, const LabeledImage& image, double eps) {
    if (eps < 0.0) throw config_error("fgsm: eps must be >= 0");
    const Tensor& x = image.pixels;

    AttackResult res;
    res.clean = x;
    res.label = image.label;
    res.id = image.id;
    res.suprathreshold_count = x.shape()[1] * x.shape()[2];

    Tensor x_leaf(x.shape(), x.data(), true);
    ForwardTrace trace = forward_trace(model, x_leaf);
    Tensor ce = neg(log(pick(trace.probs, static_cast<std::size_t>(image.label))));
    backward(ce, {x_leaf});
    res.loss_history.push_back(ce.value());

    std::vector<double> delta(x.size());
    const auto& g = x_leaf.grad();
    for (std::size_t i = 0; i < delta.size(); ++i) delta[i] = eps * detail::sign(g[i]);
    detail::clip_rederive(x.data(), delta);
    res.iterations_used = 1;

    res.delta = Tensor(x.shape(), delta);
    res.adversarial = detail::adversarial_from(x, delta);
    res.final_predicted = predict(model, res.adversarial);
    res.success = res.final_predicted != image.label;
    res.l0_delta = detail::count_l0(delta);
    return res;
}

// Iterative sign-gradient ascent with per-step projection onto the
// l-infinity ball of radius eps and clip to [0,1].
inline AttackResult pgd(const Model& model, const LabeledImage& image, const BaselineConfig& cfg) {
    cfg.validate();
    const Tensor& x = image.pixels;

    AttackResult res;
    res.clean = x;
    res.label = image.label;
    res.id = image.id;
    res.suprathreshold_count = x.shape()[1] * x.shape()[2];

    std::vector<double> delta(x.size(), 0.0);
    if (cfg.random_start) {
        Rng rng(cfg.seed);
        for (double& d : delta) d = rng.uniform(-cfg.eps, cfg.eps);
        detail::clip_rederive(x.data(), delta);
    }

    for (int t = 1; t <= cfg.steps; ++t) {
        Tensor delta_leaf(x.shape(), delta, true);
        Tensor x_adv = add(x, delta_leaf);
        ForwardTrace trace = forward_trace(model, x_adv);
        Tensor ce = neg(log(pick(trace.probs, static_cast<std::size_t>(image.label))));
        backward(ce, {delta_leaf});
        res.loss_history.push_back(ce.value());
        const auto& g = delta_leaf.grad();
        for (std::size_t i = 0; i < delta.size(); ++i) {
            delta[i] += cfg.alpha * detail::sign(g[i]);
            delta[i] = std::min(cfg.eps, std::max(-cfg.eps, delta[i]));
        }
        detail::clip_rederive(x.data(), delta);
        res.iterations_used = t;
    }

    res.delta = Tensor(x.shape(), delta);
    res.adversarial = detail::adversarial_from(x, delta);
    res.final_predicted = predict(model, res.adversarial);
    res.success = res.final_predicted != image.label;
    res.l0_delta = detail::count_l0(delta);
    return res;
}

enum class AttackKind { Cfr, Fgsm, Pgd };

struct AttackMethod {
    AttackKind kind = AttackKind::Cfr;
    AttackConfig cfr;
    BaselineConfig baseline;
    double fgsm_eps = 16.0 / 255.0;

    std::string name() const {
        switch (kind) {
            case AttackKind::Cfr: return "cfr";
            case AttackKind::Fgsm: return "fgsm";
            default: return "pgd";
        }
    }
};

// Runs one attack per image. Per-image seeds derive from the master seed and
// the image index, so results are identical for any worker count; failures
// are recorded per image instead of aborting the batch.
inline std::vector<AttackResult> attack_batch(const Model& model, const LabeledDataset& dataset,
                                              const AttackMethod& method, int workers,
                                              std::uint64_t master_seed) {
    const std::size_t n = dataset.images.size();
    std::vector<AttackResult> results(n);
    if (n == 0) return results;

    auto run_one = [&](std::size_t i) {
        const std::uint64_t seed = Rng::derive(master_seed, i);
        const LabeledImage& img = dataset.images[i];
        try {
            switch (method.kind) {
                case AttackKind::Cfr: {
                    AttackConfig c = method.cfr;
                    c.seed = seed;
                    results[i] = cfr_attack(model, img, c);
                    break;
                }
                case AttackKind::Fgsm:
                    results[i] = fgsm(model, img, method.fgsm_eps);
                    break;
                case AttackKind::Pgd: {
                    BaselineConfig c = method.baseline;
                    c.seed = seed;
                    results[i] = pgd(model, img, c);
                    break;
                }
            }
        } catch (const std::exception& e) {
            AttackResult fail;
            fail.clean = img.pixels;
            fail.delta = Tensor::zeros(img.pixels.shape());
            fail.adversarial = img.pixels;
            fail.label = img.label;
            fail.id = img.id;
            fail.error = e.what();
            results[i] = std::move(fail);
        }
    };

    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) run_one(i);
        return results;
    }
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) run_one(i);
    };
    std::vector<std::thread> pool;
    const int count = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), n));
    for (int t = 0; t < count; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
    return results;
}

}  // namespace cfr
