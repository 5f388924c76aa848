#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cfr/errors.hpp"
#include "cfr/model.hpp"
#include "cfr/tensor.hpp"

namespace cfr {

// Class activation map at feature-map resolution. Non-negative by
// construction (post-ReLU).
struct ActivationMap {
    int rows = 0, cols = 0;
    std::vector<double> values;  // row-major [rows, cols]
    int class_index = -1;
    std::string source;

    double at(int i, int j) const { return values[static_cast<std::size_t>(i) * cols + j]; }
};

// Pixel-resolution soft mask. Entries are >= 0 and sum to 1 over the
// suprathreshold support; zero elsewhere. suprathreshold_count == 0 signals
// an empty region (all-zero activation map), which is a reportable condition
// rather than an error.
struct SoftMask {
    int rows = 0, cols = 0;
    std::vector<double> weights;
    double tau = 0.0;
    int suprathreshold_count = 0;

    double at(int i, int j) const { return weights[static_cast<std::size_t>(i) * cols + j]; }
};

struct HardMask {
    int rows = 0, cols = 0;
    std::vector<std::uint8_t> bits;

    bool at(int i, int j) const { return bits[static_cast<std::size_t>(i) * cols + j] != 0; }
    int popcount() const {
        int n = 0;
        for (auto b : bits) n += b;
        return n;
    }
};

// Kernel importance weights: lambda_k = mean over (p,q) of dZ_y/dA^(k)_pq.
// Runs a backward sweep from the selected logit, so the trace must still
// hold its tape.
inline std::vector<double> gradcam_weights(const ForwardTrace& trace, int y) {
    if (y < 0 || y >= static_cast<int>(trace.logits.size()))
        throw contract_error("gradcam_weights: class index out of range");
    Tensor zy = pick(trace.logits, static_cast<std::size_t>(y));
    backward(zy, {trace.activations});
    const auto& shape = trace.activations.shape();
    const int k = shape[0], u = shape[1], v = shape[2];
    const auto& g = trace.activations.grad();
    std::vector<double> lambda(static_cast<std::size_t>(k));
    const double inv = 1.0 / (static_cast<double>(u) * v);
    for (int ki = 0; ki < k; ++ki) {
        double acc = 0.0;
        const std::size_t base = static_cast<std::size_t>(ki) * u * v;
        for (int i = 0; i < u * v; ++i) acc += g[base + static_cast<std::size_t>(i)];
        lambda[static_cast<std::size_t>(ki)] = acc * inv;
    }
    return lambda;
}

// L = ReLU(sum_k lambda_k A^(k)).
inline ActivationMap activation_map(const std::vector<double>& lambda, const Tensor& activations, int y,
                                    const std::string& source = "") {
    const auto& shape = activations.shape();
    if (shape.size() != 3) throw dimension_error("activation_map: activations must be [K,u,v]");
    const int k = shape[0], u = shape[1], v = shape[2];
    if (static_cast<int>(lambda.size()) != k)
        throw dimension_error("activation_map: lambda length does not match kernel count");
    ActivationMap map;
    map.rows = u;
    map.cols = v;
    map.class_index = y;
    map.source = source;
    map.values.assign(static_cast<std::size_t>(u) * v, 0.0);
    const auto& a = activations.data();
    for (int ki = 0; ki < k; ++ki) {
        const double w = lambda[static_cast<std::size_t>(ki)];
        const std::size_t base = static_cast<std::size_t>(ki) * u * v;
        for (std::size_t i = 0; i < static_cast<std::size_t>(u) * v; ++i) map.values[i] += w * a[base + i];
    }
    for (double& x : map.values) x = x > 0.0 ? x : 0.0;
    return map;
}

enum class UpsampleMode { Bilinear, Nearest };

// Feature-map grid -> input resolution. Bilinear with corner alignment by
// default; nearest kept for ablation.
inline std::vector<double> upsample(const ActivationMap& map, int h, int w,
                                    UpsampleMode mode = UpsampleMode::Bilinear) {
    if (map.rows > h || map.cols > w) throw dimension_error("upsample: target smaller than source");
    std::vector<double> out(static_cast<std::size_t>(h) * w);
    const int u = map.rows, v = map.cols;
    for (int i = 0; i < h; ++i) {
        const double si = h > 1 ? static_cast<double>(i) * (u - 1) / (h - 1) : 0.0;
        for (int j = 0; j < w; ++j) {
            const double sj = w > 1 ? static_cast<double>(j) * (v - 1) / (w - 1) : 0.0;
            double val;
            if (mode == UpsampleMode::Nearest) {
                val = map.at(static_cast<int>(std::lround(si)), static_cast<int>(std::lround(sj)));
            } else {
                const int i0 = static_cast<int>(si), j0 = static_cast<int>(sj);
                const int i1 = std::min(i0 + 1, u - 1), j1 = std::min(j0 + 1, v - 1);
                const double fi = si - i0, fj = sj - j0;
                val = (1 - fi) * ((1 - fj) * map.at(i0, j0) + fj * map.at(i0, j1)) +
                      fi * ((1 - fj) * map.at(i1, j0) + fj * map.at(i1, j1));
            }
            out[static_cast<std::size_t>(i) * w + j] = val;
        }
    }
    return out;
}

// Soft mask from an upsampled activation map. The map is first normalized to
// [0,1] by its max (tau is scale-free); cells with normalized value >= tau
// share the mass, each weighted by its normalized value over the
// suprathreshold sum. All-zero maps yield suprathreshold_count == 0.
inline SoftMask soft_mask(const std::vector<double>& upsampled, int h, int w, double tau) {
    if (static_cast<std::size_t>(h) * w != upsampled.size())
        throw dimension_error("soft_mask: grid size mismatch");
    if (tau < 0.0 || tau > 1.0) throw config_error("soft_mask: tau must be in [0,1]");
    SoftMask m;
    m.rows = h;
    m.cols = w;
    m.tau = tau;
    m.weights.assign(upsampled.size(), 0.0);

    double maxv = 0.0;
    for (double x : upsampled) {
        if (x < 0.0) throw contract_error("soft_mask: activation map must be non-negative");
        maxv = std::max(maxv, x);
    }
    if (maxv == 0.0) return m;  // empty region

    double denom = 0.0;
    int count = 0;
    for (double x : upsampled) {
        const double nx = x / maxv;
        if (nx >= tau) {
            denom += nx;
            ++count;
        }
    }
    m.suprathreshold_count = count;
    if (denom == 0.0) return m;
    for (std::size_t i = 0; i < upsampled.size(); ++i) {
        const double nx = upsampled[i] / maxv;
        if (nx >= tau) m.weights[i] = nx / denom;
    }
    return m;
}

inline SoftMask soft_mask_for(const ForwardTrace& trace, int y, int h, int w, double tau,
                              UpsampleMode mode = UpsampleMode::Bilinear) {
    auto lambda = gradcam_weights(trace, y);
    auto map = activation_map(lambda, trace.activations, y);
    return soft_mask(upsample(map, h, w, mode), h, w, tau);
}

inline HardMask hard_mask(const SoftMask& m) {
    HardMask h;
    h.rows = m.rows;
    h.cols = m.cols;
    h.bits.assign(m.weights.size(), 0);
    for (std::size_t i = 0; i < m.weights.size(); ++i) h.bits[i] = m.weights[i] > 0.0 ? 1 : 0;
    return h;
}

namespace detail {

inline void check_mask_shape(const Tensor& image, int rows, int cols, const char* op) {
    if (image.shape().size() != 3 || image.shape()[1] != rows || image.shape()[2] != cols)
        throw dimension_error(std::string(op) + ": mask shape does not match image");
}

}  // namespace detail

// Keeps masked pixels, zeroes the rest (the Adv-CFR transform). Mask is
// broadcast across channels.
inline Tensor zero_outside_cfr(const Tensor& image, const HardMask& m) {
    detail::check_mask_shape(image, m.rows, m.cols, "zero_outside_cfr");
    std::vector<double> out = image.data();
    const std::size_t plane = static_cast<std::size_t>(m.rows) * m.cols;
    for (int c = 0; c < image.shape()[0]; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (!m.bits[i]) out[static_cast<std::size_t>(c) * plane + i] = 0.0;
    return Tensor(image.shape(), std::move(out));
}

// Zeroes masked pixels, keeps the rest (the Adv-non-CFR transform).
inline Tensor zero_inside_cfr(const Tensor& image, const HardMask& m) {
    detail::check_mask_shape(image, m.rows, m.cols, "zero_inside_cfr");
    std::vector<double> out = image.data();
    const std::size_t plane = static_cast<std::size_t>(m.rows) * m.cols;
    for (int c = 0; c < image.shape()[0]; ++c)
        for (std::size_t i = 0; i < plane; ++i)
            if (m.bits[i]) out[static_cast<std::size_t>(c) * plane + i] = 0.0;
    return Tensor(image.shape(), std::move(out));
}

}  // namespace cfr
