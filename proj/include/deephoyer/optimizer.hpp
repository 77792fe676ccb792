#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "deephoyer/data.hpp"
#include "deephoyer/errors.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"

// Optimizers and the composite training objective: data loss plus a list of
// per-layer penalty terms, each with its own decay coefficient. Penalty
// values are tracked separately from the data loss for logging.

namespace deephoyer {

enum class OptKind { SGD, Adam };

struct OptimizerConfig {
    OptKind kind = OptKind::Adam;
    double lr = 0.001;
    double momentum = 0.0;  // SGD
    double beta1 = 0.9;     // Adam
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Per-parameter moment buffers plus a step counter. Buffer layout mirrors the
// network's parameter list (weights then biases per slot).
class OptimizerState {
public:
    OptimizerState(const OptimizerConfig& config, const Network& net) : config_(config) {
        for (size_t p = 0; p < net.num_param_layers(); ++p) {
            m_w_.emplace_back(net.weights[p].shape());
            m_b_.emplace_back(net.biases[p].shape());
            if (config.kind == OptKind::Adam) {
                v_w_.emplace_back(net.weights[p].shape());
                v_b_.emplace_back(net.biases[p].shape());
            }
        }
    }

    const OptimizerConfig& config() const { return config_; }
    int64_t step_count() const { return step_; }

    // One update over every parameter tensor. SGD: v <- mu v + g, w <- w - lr v.
    // Adam: standard bias-corrected update.
    void step(Network& net, const std::vector<Tensor>& wgrads, const std::vector<Tensor>& bgrads) {
        if (wgrads.size() != net.num_param_layers() || bgrads.size() != net.num_param_layers()) {
            throw DimensionError("optimizer step: gradient list does not match network");
        }
        ++step_;
        for (size_t p = 0; p < net.num_param_layers(); ++p) {
            update_tensor(net.weights[p], wgrads[p], m_w_[p],
                          config_.kind == OptKind::Adam ? &v_w_[p] : nullptr);
            update_tensor(net.biases[p], bgrads[p], m_b_[p],
                          config_.kind == OptKind::Adam ? &v_b_[p] : nullptr);
        }
        // Masked coordinates are pinned to exact zero after every step.
        net.apply_masks();
    }

private:
    void update_tensor(Tensor& param, const Tensor& grad, Tensor& m, Tensor* v) {
        if (!param.same_shape(grad)) {
            throw DimensionError("optimizer step: gradient shape " + grad.shape_string() +
                                 " does not match parameter " + param.shape_string());
        }
        const size_t n = param.numel();
        if (config_.kind == OptKind::SGD) {
            const double mu = config_.momentum, lr = config_.lr;
            for (size_t i = 0; i < n; ++i) {
                m[i] = mu * m[i] + grad[i];
                param[i] -= lr * m[i];
            }
        } else {
            const double b1 = config_.beta1, b2 = config_.beta2;
            const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
            const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
            const double lr = config_.lr, eps = config_.eps;
            for (size_t i = 0; i < n; ++i) {
                m[i] = b1 * m[i] + (1.0 - b1) * grad[i];
                (*v)[i] = b2 * (*v)[i] + (1.0 - b2) * grad[i] * grad[i];
                const double mhat = m[i] / bc1;
                const double vhat = (*v)[i] / bc2;
                param[i] -= lr * mhat / (std::sqrt(vhat) + eps);
            }
        }
    }

    OptimizerConfig config_;
    std::vector<Tensor> m_w_, m_b_;  // SGD momentum / Adam first moment
    std::vector<Tensor> v_w_, v_b_;  // Adam second moment
    int64_t step_ = 0;
};

// One penalty term: a regularizer applied to one layer's weight tensor.
// Terms sharing a label are aggregated in logs (e.g. the per-layer terms of
// one objective sum).
struct ObjectiveTerm {
    size_t layer = 0;  // layer index in Network::layers; must be parametric
    RegularizerSpec reg;
    std::string label;
};

struct ObjectiveSpec {
    std::vector<ObjectiveTerm> terms;

    void validate(const Network& net) const {
        for (const auto& t : terms) {
            if (t.layer >= net.layers.size() || !net.layers[t.layer].parametric()) {
                throw ArgumentError("objective term targets non-parametric layer " +
                                    std::to_string(t.layer));
            }
            t.reg.validate();
        }
    }

    // Label order as first encountered; stable across runs.
    std::vector<std::string> labels() const {
        std::vector<std::string> out;
        for (const auto& t : terms) {
            bool seen = false;
            for (const auto& l : out) seen = seen || l == t.label;
            if (!seen) out.push_back(t.label);
        }
        return out;
    }
};

struct CompositeResult {
    double data_loss = 0.0;
    Tensor logits;  // forward output for the batch (empty for an empty batch)
    std::vector<std::pair<std::string, double>> penalties;  // label -> raw (undecayed) value
    std::vector<Tensor> weight_grads;
    std::vector<Tensor> bias_grads;

    double penalty(const std::string& label) const {
        for (const auto& [l, v] : penalties) {
            if (l == label) return v;
        }
        throw ArgumentError("no penalty labeled '" + label + "'");
    }
};

// grads = dL/dW + sum decay * d(regularizer)/dW per layer. An empty batch
// contributes zero data loss and zero data gradients (pure-penalty descent).
inline CompositeResult composite_gradient(const Network& net, const Tensor& batch,
                                          const std::vector<int>& labels,
                                          const ObjectiveSpec& objective) {
    objective.validate(net);
    CompositeResult res;
    if (batch.numel() > 0 && batch.dim(0) > 0) {
        BackwardResult data = net.backward(batch, labels);
        res.data_loss = data.loss;
        res.logits = std::move(data.logits);
        res.weight_grads = std::move(data.weight_grads);
        res.bias_grads = std::move(data.bias_grads);
    } else {
        for (const auto& w : net.weights) res.weight_grads.emplace_back(w.shape());
        for (const auto& b : net.biases) res.bias_grads.emplace_back(b.shape());
    }
    for (const auto& label : objective.labels()) res.penalties.emplace_back(label, 0.0);
    for (const auto& term : objective.terms) {
        const size_t slot = static_cast<size_t>(net.param_slot[term.layer]);
        const Tensor& w = net.weights[slot];
        const double value = regularizer_value(term.reg, w);
        for (auto& [l, v] : res.penalties) {
            if (l == term.label) v += value;
        }
        if (term.reg.decay != 0.0) {
            Tensor g = regularizer_gradient(term.reg, w);
            Tensor& acc = res.weight_grads[slot];
            for (size_t i = 0; i < g.numel(); ++i) acc[i] += term.reg.decay * g[i];
        }
    }
    // Regularizer gradients at masked coordinates are discarded along with
    // the data gradients; the mask contract covers the whole composite.
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        for (size_t i = 0; i < net.masks[p].numel(); ++i) {
            if (net.masks[p][i] == 0.0) res.weight_grads[p][i] = 0.0;
        }
    }
    return res;
}

struct EpochLog {
    int epoch = 0;
    double data_loss = 0.0;  // mean over the epoch's steps
    std::vector<std::pair<std::string, double>> penalties;  // end-of-epoch values
    double train_acc = 0.0;  // running accuracy over the epoch's minibatches
    double test_acc = 0.0;
    double nonzero_fraction = 1.0;
};

struct TrainLog {
    std::vector<std::string> penalty_labels;
    std::vector<EpochLog> epochs;
};

inline double evaluate_accuracy(const Network& net, const Dataset& ds, size_t batch_size = 256) {
    size_t correct = 0;
    std::vector<size_t> idx(batch_size);
    for (size_t start = 0; start < ds.size(); start += batch_size) {
        const size_t b = std::min(batch_size, ds.size() - start);
        idx.resize(b);
        std::iota(idx.begin(), idx.end(), start);
        auto [x, y] = gather_batch(ds, idx);
        Tensor logits = net.forward(x);
        const size_t classes = logits.dim(1);
        for (size_t i = 0; i < b; ++i) {
            size_t best = 0;
            for (size_t c = 1; c < classes; ++c) {
                if (logits.at2(i, c) > logits.at2(i, best)) best = c;
            }
            correct += static_cast<int>(best) == y[i] ? 1 : 0;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(ds.size());
}

inline double nonzero_fraction(const Network& net) {
    size_t nz = 0, total = 0;
    for (const auto& w : net.weights) {
        total += w.numel();
        for (double v : w.vec()) nz += v != 0.0 ? 1 : 0;
    }
    return total == 0 ? 0.0 : static_cast<double>(nz) / static_cast<double>(total);
}

// Seeded mini-batch training. The shuffle stream depends only on (seed,
// epoch ordinal), so identical inputs give identical logs and weights.
inline TrainLog train_epochs(Network& net, const Dataset& train, const Dataset& test,
                             const ObjectiveSpec& objective, OptimizerState& opt, int epochs,
                             uint64_t seed, size_t batch_size = 64) {
    if (train.size() == 0) throw ArgumentError("train_epochs on empty dataset");
    objective.validate(net);
    TrainLog log;
    log.penalty_labels = objective.labels();
    Rng shuffle_rng(seed);
    std::vector<size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (int epoch = 0; epoch < epochs; ++epoch) {
        shuffle_rng.shuffle(order);
        double loss_sum = 0.0;
        size_t steps = 0, train_correct = 0, train_seen = 0;
        for (size_t start = 0; start < order.size(); start += batch_size) {
            const size_t b = std::min(batch_size, order.size() - start);
            std::vector<size_t> idx(order.begin() + start, order.begin() + start + b);
            auto [x, y] = gather_batch(train, idx);
            CompositeResult res = composite_gradient(net, x, y, objective);
            // Batch accuracy on pre-update weights, from the same forward pass.
            const size_t classes = res.logits.dim(1);
            for (size_t i = 0; i < b; ++i) {
                size_t best = 0;
                for (size_t c = 1; c < classes; ++c) {
                    if (res.logits.at2(i, c) > res.logits.at2(i, best)) best = c;
                }
                train_correct += static_cast<int>(best) == y[i] ? 1 : 0;
            }
            train_seen += b;
            loss_sum += res.data_loss;
            ++steps;
            opt.step(net, res.weight_grads, res.bias_grads);
        }
        EpochLog row;
        row.epoch = epoch + 1;
        row.data_loss = steps > 0 ? loss_sum / static_cast<double>(steps) : 0.0;
        // End-of-epoch penalty snapshot on current weights.
        for (const auto& label : log.penalty_labels) row.penalties.emplace_back(label, 0.0);
        for (const auto& term : objective.terms) {
            const size_t slot = static_cast<size_t>(net.param_slot[term.layer]);
            const double value = regularizer_value(term.reg, net.weights[slot]);
            for (auto& [l, v] : row.penalties) {
                if (l == term.label) v += value;
            }
        }
        row.train_acc = train_seen > 0
                            ? static_cast<double>(train_correct) / static_cast<double>(train_seen)
                            : 0.0;
        row.test_acc = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
        row.nonzero_fraction = nonzero_fraction(net);
        log.epochs.push_back(std::move(row));
    }
    return log;
}

inline void write_log_csv(const TrainLog& log, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open log for writing: " + path);
    out << "epoch,data_loss";
    for (const auto& label : log.penalty_labels) out << "," << label;
    out << ",train_acc,test_acc,nonzero_fraction\n";
    char buf[64];
    const auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (const auto& row : log.epochs) {
        out << row.epoch << "," << fmt(row.data_loss);
        for (const auto& [label, value] : row.penalties) {
            (void)label;
            out << "," << fmt(value);
        }
        out << "," << fmt(row.train_acc) << "," << fmt(row.test_acc) << ","
            << fmt(row.nonzero_fraction) << "\n";
    }
    if (!out) throw IoError("short write on log: " + path);
}

}  // namespace deephoyer
