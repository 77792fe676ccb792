#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "deephoyer/errors.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/optimizer.hpp"
#include "deephoyer/regularizers.hpp"

// Threshold computation and the prune stage of the three-stage pipeline:
// element-wise (zero every |w| < tau) and structural (zero whole groups whose
// l2 norm falls below tau).

namespace deephoyer {

enum class ThresholdMode { RatioOfStd, Absolute };

struct ThresholdRule {
    ThresholdMode mode = ThresholdMode::RatioOfStd;
    double value = 0.0;  // ratio for RatioOfStd, tau for Absolute

    void validate() const {
        if (value < 0.0) throw ArgumentError("threshold value must be >= 0");
    }
};

// tau_l = ratio * std(W_l) (conventional centered population std over the
// layer's weight entries) or the configured absolute value.
inline std::vector<double> compute_thresholds(const Network& net,
                                              const std::vector<ThresholdRule>& rules) {
    if (rules.size() != net.num_param_layers()) {
        throw ArgumentError("expected " + std::to_string(net.num_param_layers()) +
                            " threshold rules, got " + std::to_string(rules.size()));
    }
    std::vector<double> taus(rules.size());
    for (size_t p = 0; p < rules.size(); ++p) {
        rules[p].validate();
        if (rules[p].mode == ThresholdMode::Absolute) {
            taus[p] = rules[p].value;
            continue;
        }
        const Tensor& w = net.weights[p];
        const double n = static_cast<double>(w.numel());
        double mean = 0.0;
        for (double v : w.vec()) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : w.vec()) var += (v - mean) * (v - mean);
        var /= n;
        taus[p] = rules[p].value * std::sqrt(var);
    }
    return taus;
}

// mask = 0 where |w| < tau_l ("smaller than" is strict; ties survive),
// 1 otherwise; weights zeroed under the mask.
inline void prune_elementwise(Network& net, const std::vector<double>& taus) {
    if (taus.size() != net.num_param_layers()) {
        throw ArgumentError("expected " + std::to_string(net.num_param_layers()) +
                            " thresholds, got " + std::to_string(taus.size()));
    }
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        Tensor& w = net.weights[p];
        Tensor& m = net.masks[p];
        for (size_t i = 0; i < w.numel(); ++i) {
            if (std::abs(w[i]) < taus[p]) m[i] = 0.0;
        }
    }
    net.apply_masks();
}

// A whole group is masked when its l2 norm < tau_l; with several schemes per
// layer an element survives only if every scheme keeps it (keep-decisions
// are ANDed). No partial group is ever masked.
inline void prune_structural(Network& net, const std::vector<double>& taus,
                             const std::vector<std::vector<GroupScheme>>& schemes_per_layer) {
    if (taus.size() != net.num_param_layers() ||
        schemes_per_layer.size() != net.num_param_layers()) {
        throw ArgumentError("prune_structural: per-layer inputs do not match network");
    }
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        Tensor& w = net.weights[p];
        Tensor& m = net.masks[p];
        for (const auto& scheme : schemes_per_layer[p]) {
            if (scheme.tensor_numel != w.numel()) {
                throw SchemeError("prune_structural: scheme built for " +
                                  std::to_string(scheme.tensor_numel) +
                                  " elements applied to layer of " + std::to_string(w.numel()));
            }
            for (const auto& group : scheme.groups) {
                double sq = 0.0;
                for (uint32_t idx : group) sq += w[idx] * w[idx];
                if (std::sqrt(sq) < taus[p]) {
                    for (uint32_t idx : group) m[idx] = 0.0;
                }
            }
        }
    }
    net.apply_masks();
}

// Stage 3: masked training with the DeepHoyer terms removed. Returns the
// best-test-accuracy snapshot (weights, biases and the epoch it occurred).
struct FinetuneResult {
    TrainLog log;
    double best_accuracy = 0.0;
    int best_epoch = 0;  // 0 = the pre-finetune state was never improved on
};

inline FinetuneResult finetune(Network& net, const Dataset& train, const Dataset& test,
                               const ObjectiveSpec& objective, OptimizerState& opt, int epochs,
                               uint64_t seed, size_t batch_size = 64) {
    for (const auto& term : objective.terms) {
        if (term.reg.kind == RegKind::Hoyer || term.reg.kind == RegKind::HoyerSquare ||
            term.reg.kind == RegKind::GroupHS) {
            throw ArgumentError("finetune objective must not contain DeepHoyer terms");
        }
    }
    FinetuneResult result;
    result.best_accuracy = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
    std::vector<Tensor> best_weights = net.weights;
    std::vector<Tensor> best_biases = net.biases;
    result.log.penalty_labels = ObjectiveSpec(objective).labels();
    Rng shuffle_seed_stream(seed);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        TrainLog one = train_epochs(net, train, test, objective, opt, 1,
                                    shuffle_seed_stream.next(), batch_size);
        one.epochs[0].epoch = epoch + 1;
        result.log.epochs.push_back(one.epochs[0]);
        if (one.epochs[0].test_acc > result.best_accuracy) {
            result.best_accuracy = one.epochs[0].test_acc;
            result.best_epoch = epoch + 1;
            best_weights = net.weights;
            best_biases = net.biases;
        }
    }
    net.weights = std::move(best_weights);
    net.biases = std::move(best_biases);
    return result;
}

}  // namespace deephoyer
