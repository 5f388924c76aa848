#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <vector>

#include "cfr/attack.hpp"
#include "cfr/dataset.hpp"
#include "cfr/errors.hpp"
#include "cfr/model.hpp"
#include "cfr/rng.hpp"

namespace cfr {

struct AdvTrainConfig {
    int steps = 7;
    double alpha = 2.0 / 255.0;
    double eps = 8.0 / 255.0;
};

struct TrainConfig {
    int epochs = 3;
    int batch_size = 32;
    double learning_rate = 0.05;
    double momentum = 0.9;
    std::uint64_t seed = 1;
    std::optional<AdvTrainConfig> adversarial;

    void validate() const {
        if (epochs < 1) throw config_error("train: epochs must be >= 1");
        if (batch_size < 1) throw config_error("train: batch size must be >= 1");
        if (learning_rate < 0.0) throw config_error("train: learning rate must be >= 0");
        if (momentum < 0.0 || momentum >= 1.0) throw config_error("train: momentum must be in [0,1)");
        if (adversarial && (adversarial->eps < 0.0 || adversarial->steps < 1))
            throw config_error("train: adversarial mode needs eps >= 0 and steps >= 1");
    }
};

struct EpochStats {
    double train_accuracy = 0.0;
    double val_accuracy = 0.0;
    double mean_loss = 0.0;
};

inline double accuracy(const Model& m, const LabeledDataset& data) {
    if (data.images.empty()) return 0.0;
    std::size_t hits = 0;
    for (const auto& img : data.images) hits += predict(m, img.pixels) == img.label ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(data.images.size());
}

namespace detail {

// SGD with momentum over summed-batch cross-entropy graphs. The per-batch
// transform hook lets adversarial training swap images before each step
// without touching the rng stream when it is a no-op.
inline std::vector<EpochStats> run_training(
    Model& model, const LabeledDataset& data, const LabeledDataset& val, const TrainConfig& cfg,
    const std::function<Tensor(const Tensor&, int, std::uint64_t)>& transform) {
    cfg.validate();
    if (data.images.empty()) throw data_error("train: dataset is empty");
    for (const auto& img : data.images)
        if (img.label < 0 || img.label >= model.spec.class_count)
            throw data_error("train: label " + std::to_string(img.label) + " out of range on " + img.id);

    std::vector<std::vector<double>> velocity(model.params.size());
    for (std::size_t i = 0; i < model.params.size(); ++i)
        velocity[i].assign(model.params[i].size(), 0.0);

    Rng rng(cfg.seed);
    std::vector<std::size_t> order(data.images.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    std::vector<EpochStats> history;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        shuffle(order, rng);
        double loss_sum = 0.0;
        std::size_t seen = 0, hits = 0;
        for (std::size_t begin = 0; begin < order.size(); begin += static_cast<std::size_t>(cfg.batch_size)) {
            const std::size_t end = std::min(order.size(), begin + static_cast<std::size_t>(cfg.batch_size));
            Tensor batch_loss;
            for (std::size_t k = begin; k < end; ++k) {
                const auto& img = data.images[order[k]];
                const std::uint64_t sample_seed =
                    Rng::derive(cfg.seed, (static_cast<std::uint64_t>(epoch) << 32) ^ order[k]);
                Tensor input = transform ? transform(img.pixels, img.label, sample_seed) : img.pixels;
                ForwardTrace tr = forward_trace(model, input);
                Tensor ce = neg(log(pick(tr.probs, static_cast<std::size_t>(img.label))));
                batch_loss = batch_loss.defined() ? add(batch_loss, ce) : ce;
                hits += tr.predicted == img.label ? 1 : 0;
                ++seen;
            }
            batch_loss = scale(batch_loss, 1.0 / static_cast<double>(end - begin));
            loss_sum += batch_loss.value() * static_cast<double>(end - begin);
            backward(batch_loss);
            for (std::size_t p = 0; p < model.params.size(); ++p) {
                auto& theta = model.params[p].data();
                const auto& g = model.params[p].grad();
                auto& v = velocity[p];
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    v[i] = cfg.momentum * v[i] + g[i];
                    theta[i] -= cfg.learning_rate * v[i];
                }
            }
        }
        EpochStats st;
        st.train_accuracy = static_cast<double>(hits) / static_cast<double>(seen);
        st.val_accuracy = val.images.empty() ? 0.0 : accuracy(model, val);
        st.mean_loss = loss_sum / static_cast<double>(seen);
        history.push_back(st);
    }
    return history;
}

}  // namespace detail

inline std::vector<EpochStats> train(Model& model, const LabeledDataset& data,
                                     const LabeledDataset& val, const TrainConfig& cfg) {
    return detail::run_training(model, data, val, cfg, nullptr);
}

// PGD adversarial training: each sample is replaced by a PGD adversarial
// example against the current parameters before the SGD step. eps == 0
// degenerates to plain training (same rng stream, same trajectory).
inline std::vector<EpochStats> train_pgd_protected(Model& model, const LabeledDataset& data,
                                                   const LabeledDataset& val, const TrainConfig& cfg) {
    if (!cfg.adversarial) throw config_error("train_pgd_protected: adversarial mode not set");
    const AdvTrainConfig adv = *cfg.adversarial;
    if (adv.eps == 0.0) return detail::run_training(model, data, val, cfg, nullptr);

    auto transform = [&model, adv](const Tensor& pixels, int label, std::uint64_t seed) {
        LabeledImage tmp;
        tmp.pixels = pixels;
        tmp.label = label;
        BaselineConfig pcfg;
        pcfg.eps = adv.eps;
        pcfg.alpha = adv.alpha;
        pcfg.steps = adv.steps;
        pcfg.random_start = true;
        pcfg.seed = seed;
        return pgd(model, tmp, pcfg).adversarial;
    };
    return detail::run_training(model, data, val, cfg, transform);
}

}  // namespace cfr
