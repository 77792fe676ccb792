#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "deephoyer/config.hpp"
#include "deephoyer/data.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/optimizer.hpp"
#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"

// Central finite-difference validation of the analytic gradients: each
// regularizer kind on random vectors, and the whole-network composite
// objective probed at random weight coordinates. The error measure is
// |fd - analytic| / max(1, |fd|, |analytic|), i.e. relative with an absolute
// floor so exact cancellations near zero do not produce spurious blowups.

namespace deephoyer {

struct GradCheckItem {
    std::string name;
    double max_rel_err = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

namespace detail {

inline double rel_err(double fd, double analytic) {
    const double scale = std::max({1.0, std::abs(fd), std::abs(analytic)});
    return std::abs(fd - analytic) / scale;
}

// Random vector with every |w_i| >= 1e-2 (magnitude in [0.01, 1.01]).
inline Tensor away_from_zero_vector(Rng& rng, size_t n) {
    Tensor w({n});
    for (size_t i = 0; i < n; ++i) {
        const double mag = 0.01 + rng.uniform();
        w[i] = (rng.uniform() < 0.5 ? -1.0 : 1.0) * mag;
    }
    return w;
}

inline std::shared_ptr<GroupScheme> chunk_scheme(size_t n, size_t group_size) {
    auto scheme = std::make_shared<GroupScheme>();
    scheme->kind = GroupKind::FcRows;
    scheme->tensor_numel = n;
    for (size_t start = 0; start < n; start += group_size) {
        std::vector<uint32_t> g;
        for (size_t i = start; i < std::min(n, start + group_size); ++i) {
            g.push_back(static_cast<uint32_t>(i));
        }
        scheme->groups.push_back(std::move(g));
    }
    scheme->validate();
    return scheme;
}

}  // namespace detail

// One regularizer kind at `points` random vectors; every coordinate checked.
// The corrupt hook injects a bias into one analytic component, as a negative
// control that the harness actually detects wrong gradients.
inline GradCheckItem gradcheck_regularizer(RegKind kind, uint64_t seed, int points = 50,
                                           double h = 1e-6, bool corrupt = false) {
    Rng rng(seed);
    GradCheckItem item;
    item.name = reg_kind_name(kind);
    item.tolerance = 1e-6;
    for (int p = 0; p < points; ++p) {
        const size_t n = 8 + rng.uniform_int(25);  // 8..32 elements
        Tensor w = detail::away_from_zero_vector(rng, n);
        RegularizerSpec spec;
        spec.kind = kind;
        if (kind == RegKind::TransformedL1) spec.tl1_a = 0.5 + rng.uniform();
        if (kind == RegKind::GroupHS) {
            spec.scheme = detail::chunk_scheme(n, 1 + rng.uniform_int(4));
        }
        Tensor analytic = regularizer_gradient(spec, w);
        if (corrupt && p == 0) analytic[0] += 1e-3;
        for (size_t j = 0; j < n; ++j) {
            const double keep = w[j];
            w[j] = keep + h;
            const double up = regularizer_value(spec, w);
            w[j] = keep - h;
            const double down = regularizer_value(spec, w);
            w[j] = keep;
            const double fd = (up - down) / (2.0 * h);
            item.max_rel_err = std::max(item.max_rel_err, detail::rel_err(fd, analytic[j]));
        }
    }
    item.pass = item.max_rel_err <= item.tolerance;
    return item;
}

// Full objective value (mean cross-entropy plus decayed penalties) for FD.
inline double objective_value(const Network& net, const Tensor& batch,
                              const std::vector<int>& labels, const ObjectiveSpec& objective) {
    double value = 0.0;
    if (batch.numel() > 0 && batch.dim(0) > 0) {
        Tensor logits = net.forward(batch);
        const size_t b = batch.dim(0), classes = logits.dim(1);
        double loss_sum = 0.0;
        for (size_t i = 0; i < b; ++i) {
            Tensor row({classes}, std::vector<double>(logits.data() + i * classes,
                                                      logits.data() + (i + 1) * classes));
            loss_sum += softmax_cross_entropy(row, labels[i]).first;
        }
        value += loss_sum / static_cast<double>(b);
    }
    for (const auto& term : objective.terms) {
        const size_t slot = static_cast<size_t>(net.param_slot[term.layer]);
        value += term.reg.decay * regularizer_value(term.reg, net.weights[slot]);
    }
    return value;
}

// Whole-network composite gradient vs central differences at `probes` random
// weight coordinates. Probed coordinates are pre-perturbed away from zero.
inline GradCheckItem gradcheck_network(Network& net, const Tensor& batch,
                                       const std::vector<int>& labels,
                                       const ObjectiveSpec& objective, uint64_t seed,
                                       int probes = 50, double h = 1e-6, bool corrupt = false) {
    Rng rng(seed);
    GradCheckItem item;
    item.name = "network(" + net.arch + ")";
    item.tolerance = 1e-5;
    for (int p = 0; p < probes; ++p) {
        const size_t slot = rng.uniform_int(net.num_param_layers());
        const size_t j = rng.uniform_int(net.weights[slot].numel());
        double& wj = net.weights[slot][j];
        if (std::abs(wj) < 1e-2) wj = (wj < 0.0 ? -1.0 : 1.0) * (1e-2 + 0.04 * rng.uniform());
        CompositeResult res = composite_gradient(net, batch, labels, objective);
        double analytic = res.weight_grads[slot][j];
        if (corrupt && p == 0) analytic += 1e-3;
        const double keep = wj;
        wj = keep + h;
        const double up = objective_value(net, batch, labels, objective);
        wj = keep - h;
        const double down = objective_value(net, batch, labels, objective);
        wj = keep;
        const double fd = (up - down) / (2.0 * h);
        item.max_rel_err = std::max(item.max_rel_err, detail::rel_err(fd, analytic));
    }
    item.pass = item.max_rel_err <= item.tolerance;
    return item;
}

// The default suite: all six regularizer kinds plus whole-network composite
// gradients under an element-wise (Eq.-7-style) and a structural
// (Eq.-8-style) objective on a small synthetic batch.
inline std::vector<GradCheckItem> run_gradcheck_suite(uint64_t seed, bool corrupt = false) {
    std::vector<GradCheckItem> items;
    for (RegKind kind : {RegKind::L1, RegKind::L2, RegKind::Hoyer, RegKind::HoyerSquare,
                         RegKind::GroupHS, RegKind::TransformedL1}) {
        items.push_back(gradcheck_regularizer(kind, seed + static_cast<uint64_t>(kind), 50, 1e-6,
                                              corrupt));
    }

    Dataset blob = synthetic_blobs(8, 10, seed);
    std::vector<size_t> idx(8);
    for (size_t i = 0; i < 8; ++i) idx[i] = i;
    auto [x, y] = gather_batch(blob, idx);

    {
        Network net = build_lenet300100();
        net.init_weights(seed + 101);
        ExperimentConfig cfg;
        cfg.model = "lenet300";
        cfg.sparsify.regularizer = RegKind::HoyerSquare;
        cfg.sparsify.decay = 1e-2;
        cfg.sparsify.l2_decay = 1e-3;
        ObjectiveSpec objective = build_sparsify_objective(cfg, net);
        GradCheckItem item = gradcheck_network(net, x, y, objective, seed + 202, 50, 1e-6, corrupt);
        item.name = "network(lenet300, hoyer_square+l2)";
        items.push_back(item);
    }
    {
        Network net = build_lenet300100();
        net.init_weights(seed + 303);
        ExperimentConfig cfg;
        cfg.model = "lenet300";
        cfg.sparsify.regularizer = RegKind::GroupHS;
        cfg.sparsify.decay_n = 1e-2;
        cfg.sparsify.decay_c = 1e-2;
        ObjectiveSpec objective = build_sparsify_objective(cfg, net);
        GradCheckItem item = gradcheck_network(net, x, y, objective, seed + 404, 50, 1e-6, corrupt);
        item.name = "network(lenet300, group_hs)";
        items.push_back(item);
    }
    return items;
}

}  // namespace deephoyer
