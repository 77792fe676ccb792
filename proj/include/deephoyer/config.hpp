#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "deephoyer/errors.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/optimizer.hpp"
#include "deephoyer/pruning.hpp"

// Experiment configuration: JSON with explicit schema validation. Unknown
// keys are rejected at every level so typos fail loudly instead of silently
// running a different experiment.

namespace deephoyer {

struct DataConfig {
    std::string kind = "mnist";  // mnist | synthetic
    std::string dir = "data/mnist";
    size_t n_train = 2048;  // synthetic only
    size_t n_test = 512;
    int classes = 10;
};

struct EpochsConfig {
    int pretrain = 0;
    int sparsify = 0;
    int finetune = 0;
};

struct SparsifyConfig {
    RegKind regularizer = RegKind::HoyerSquare;
    double decay = 0.0;    // alpha for element-wise kinds
    double decay_n = 0.0;  // alpha_n: filters / fc rows (group_hs)
    double decay_c = 0.0;  // alpha_c: channels / fc columns (group_hs)
    double l2_decay = 0.0; // beta
    double tl1_a = 1.0;
};

struct PruneStageConfig {
    bool structural = false;
    ThresholdRule rule;                     // broadcast to every layer ...
    std::vector<ThresholdRule> per_layer;   // ... unless overridden here
};

struct ExperimentConfig {
    std::string model = "lenet300";  // lenet300 | lenet5
    uint64_t seed = 1;
    std::string out_dir = "runs/out";
    DataConfig data;
    OptimizerConfig optimizer;
    size_t batch_size = 64;
    EpochsConfig epochs;
    SparsifyConfig sparsify;
    PruneStageConfig prune;
    double finetune_l2_decay = 0.0;
    std::string pretrained_checkpoint;  // optional: load instead of pretraining
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& known,
                                const std::string& where) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        if (!known.count(it.key())) {
            throw ConfigError("unknown key '" + it.key() + "' in " + where);
        }
    }
}

inline RegKind parse_reg_kind(const std::string& name) {
    if (name == "l1") return RegKind::L1;
    if (name == "l2") return RegKind::L2;
    if (name == "hoyer") return RegKind::Hoyer;
    if (name == "hoyer_square") return RegKind::HoyerSquare;
    if (name == "group_hs") return RegKind::GroupHS;
    if (name == "transformed_l1") return RegKind::TransformedL1;
    throw ConfigError("unknown regularizer '" + name + "'");
}

inline ThresholdRule parse_threshold_rule(const nlohmann::json& j, const std::string& where) {
    reject_unknown_keys(j, {"mode", "value"}, where);
    ThresholdRule rule;
    const std::string mode = j.at("mode").get<std::string>();
    if (mode == "ratio_of_std") {
        rule.mode = ThresholdMode::RatioOfStd;
    } else if (mode == "absolute") {
        rule.mode = ThresholdMode::Absolute;
    } else {
        throw ConfigError("unknown threshold mode '" + mode + "' in " + where);
    }
    rule.value = j.at("value").get<double>();
    if (rule.value < 0.0) throw ConfigError("threshold value must be >= 0 in " + where);
    return rule;
}

}  // namespace detail

inline ExperimentConfig parse_experiment_config(const nlohmann::json& j) {
    using detail::reject_unknown_keys;
    reject_unknown_keys(j,
                        {"model", "seed", "out_dir", "data", "optimizer", "batch_size", "epochs",
                         "sparsify", "prune", "finetune", "pretrained_checkpoint"},
                        "config root");
    ExperimentConfig cfg;
    cfg.model = j.at("model").get<std::string>();
    if (cfg.model != "lenet300" && cfg.model != "lenet5") {
        throw ConfigError("model must be lenet300 or lenet5, got '" + cfg.model + "'");
    }
    cfg.seed = j.value("seed", uint64_t{1});
    cfg.out_dir = j.at("out_dir").get<std::string>();

    if (j.contains("data")) {
        const auto& dj = j["data"];
        reject_unknown_keys(dj, {"kind", "dir", "n_train", "n_test", "classes"}, "data");
        cfg.data.kind = dj.value("kind", "mnist");
        if (cfg.data.kind == "mnist") {
            cfg.data.dir = dj.value("dir", cfg.data.dir);
        } else if (cfg.data.kind == "synthetic") {
            cfg.data.n_train = dj.value("n_train", cfg.data.n_train);
            cfg.data.n_test = dj.value("n_test", cfg.data.n_test);
            cfg.data.classes = dj.value("classes", cfg.data.classes);
            if (cfg.data.n_train == 0) throw ConfigError("data.n_train must be > 0");
            if (cfg.data.classes < 2 || cfg.data.classes > 10) {
                throw ConfigError("data.classes must be in [2,10]");
            }
        } else {
            throw ConfigError("data.kind must be mnist or synthetic");
        }
    }

    if (j.contains("optimizer")) {
        const auto& oj = j["optimizer"];
        reject_unknown_keys(oj, {"kind", "lr", "momentum", "beta1", "beta2", "eps"}, "optimizer");
        const std::string kind = oj.value("kind", "adam");
        if (kind == "adam") {
            cfg.optimizer.kind = OptKind::Adam;
        } else if (kind == "sgd") {
            cfg.optimizer.kind = OptKind::SGD;
        } else {
            throw ConfigError("optimizer.kind must be adam or sgd");
        }
        cfg.optimizer.lr = oj.value("lr", cfg.optimizer.lr);
        cfg.optimizer.momentum = oj.value("momentum", cfg.optimizer.momentum);
        cfg.optimizer.beta1 = oj.value("beta1", cfg.optimizer.beta1);
        cfg.optimizer.beta2 = oj.value("beta2", cfg.optimizer.beta2);
        cfg.optimizer.eps = oj.value("eps", cfg.optimizer.eps);
        if (cfg.optimizer.lr <= 0.0) throw ConfigError("optimizer.lr must be > 0");
    }

    cfg.batch_size = j.value("batch_size", size_t{64});
    if (cfg.batch_size == 0) throw ConfigError("batch_size must be > 0");

    {
        const auto& ej = j.at("epochs");
        reject_unknown_keys(ej, {"pretrain", "sparsify", "finetune"}, "epochs");
        cfg.epochs.pretrain = ej.value("pretrain", 0);
        cfg.epochs.sparsify = ej.value("sparsify", 0);
        cfg.epochs.finetune = ej.value("finetune", 0);
        if (cfg.epochs.pretrain < 0 || cfg.epochs.sparsify < 0 || cfg.epochs.finetune < 0) {
            throw ConfigError("epoch counts must be >= 0");
        }
    }

    if (j.contains("sparsify")) {
        const auto& sj = j["sparsify"];
        reject_unknown_keys(sj, {"regularizer", "decay", "decay_n", "decay_c", "l2_decay", "tl1_a"},
                            "sparsify");
        cfg.sparsify.regularizer = detail::parse_reg_kind(sj.at("regularizer").get<std::string>());
        cfg.sparsify.decay = sj.value("decay", 0.0);
        cfg.sparsify.decay_n = sj.value("decay_n", cfg.sparsify.decay);
        cfg.sparsify.decay_c = sj.value("decay_c", cfg.sparsify.decay);
        cfg.sparsify.l2_decay = sj.value("l2_decay", 0.0);
        cfg.sparsify.tl1_a = sj.value("tl1_a", 1.0);
        if (cfg.sparsify.decay < 0 || cfg.sparsify.decay_n < 0 || cfg.sparsify.decay_c < 0 ||
            cfg.sparsify.l2_decay < 0) {
            throw ConfigError("sparsify decays must be >= 0");
        }
        if (cfg.sparsify.tl1_a <= 0) throw ConfigError("sparsify.tl1_a must be > 0");
    }

    if (j.contains("prune")) {
        const auto& pj = j["prune"];
        reject_unknown_keys(pj, {"structural", "mode", "value", "per_layer"}, "prune");
        cfg.prune.structural = pj.value("structural", false);
        if (pj.contains("mode") || pj.contains("value")) {
            cfg.prune.rule = detail::parse_threshold_rule(
                {{"mode", pj.value("mode", "ratio_of_std")}, {"value", pj.value("value", 0.0)}},
                "prune");
        }
        if (pj.contains("per_layer")) {
            for (const auto& rj : pj["per_layer"]) {
                cfg.prune.per_layer.push_back(detail::parse_threshold_rule(rj, "prune.per_layer"));
            }
        }
    }

    if (j.contains("finetune")) {
        const auto& fj = j["finetune"];
        reject_unknown_keys(fj, {"l2_decay"}, "finetune");
        cfg.finetune_l2_decay = fj.value("l2_decay", 0.0);
        if (cfg.finetune_l2_decay < 0) throw ConfigError("finetune.l2_decay must be >= 0");
    }

    cfg.pretrained_checkpoint = j.value("pretrained_checkpoint", "");

    // Cross-field checks that need the model.
    const size_t n_param = cfg.model == "lenet300" ? 3 : 4;
    if (!cfg.prune.per_layer.empty() && cfg.prune.per_layer.size() != n_param) {
        throw ConfigError("prune.per_layer must list " + std::to_string(n_param) +
                          " rules for model " + cfg.model);
    }
    return cfg;
}

inline ExperimentConfig load_experiment_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open config: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    try {
        return parse_experiment_config(j);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config field error in " + path + ": " + e.what());
    }
}

inline Network build_model(const std::string& tag) {
    if (tag == "lenet300") return build_lenet300100();
    if (tag == "lenet5") return build_lenet5();
    throw ConfigError("unknown model tag '" + tag + "'");
}

// Per-layer threshold rules: broadcast the single rule unless overridden.
inline std::vector<ThresholdRule> threshold_rules(const ExperimentConfig& cfg,
                                                  const Network& net) {
    if (!cfg.prune.per_layer.empty()) return cfg.prune.per_layer;
    return std::vector<ThresholdRule>(net.num_param_layers(), cfg.prune.rule);
}

// Structural grouping used by both the Group-HS objective and structural
// pruning: filters+channels for conv layers, rows+columns for dense layers.
inline std::vector<std::vector<GroupScheme>> structural_schemes(const Network& net) {
    std::vector<std::vector<GroupScheme>> per_layer;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        if (!net.layers[l].parametric()) continue;
        std::vector<GroupScheme> schemes;
        if (net.layers[l].kind == LayerKind::Conv) {
            schemes.push_back(group_view(net, l, GroupKind::FilterWise));
            schemes.push_back(group_view(net, l, GroupKind::ChannelWise));
        } else {
            schemes.push_back(group_view(net, l, GroupKind::FcRows));
            schemes.push_back(group_view(net, l, GroupKind::FcColumns));
        }
        per_layer.push_back(std::move(schemes));
    }
    return per_layer;
}

// Stage-1 objective. Element-wise kinds apply one term per layer; group_hs
// applies the two-way grouping with decays alpha_n / alpha_c. An optional
// unsquared-l2 term with decay beta rides along.
inline ObjectiveSpec build_sparsify_objective(const ExperimentConfig& cfg, const Network& net) {
    ObjectiveSpec objective;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        if (!net.layers[l].parametric()) continue;
        if (cfg.sparsify.regularizer == RegKind::GroupHS) {
            const bool conv = net.layers[l].kind == LayerKind::Conv;
            RegularizerSpec n_spec;
            n_spec.kind = RegKind::GroupHS;
            n_spec.decay = cfg.sparsify.decay_n;
            n_spec.scheme = std::make_shared<GroupScheme>(
                group_view(net, l, conv ? GroupKind::FilterWise : GroupKind::FcRows));
            objective.terms.push_back({l, std::move(n_spec), "group_hs_n"});
            RegularizerSpec c_spec;
            c_spec.kind = RegKind::GroupHS;
            c_spec.decay = cfg.sparsify.decay_c;
            c_spec.scheme = std::make_shared<GroupScheme>(
                group_view(net, l, conv ? GroupKind::ChannelWise : GroupKind::FcColumns));
            objective.terms.push_back({l, std::move(c_spec), "group_hs_c"});
        } else {
            RegularizerSpec spec;
            spec.kind = cfg.sparsify.regularizer;
            spec.decay = cfg.sparsify.decay;
            spec.tl1_a = cfg.sparsify.tl1_a;
            objective.terms.push_back({l, std::move(spec), reg_kind_name(cfg.sparsify.regularizer)});
        }
        if (cfg.sparsify.l2_decay > 0.0) {
            RegularizerSpec l2;
            l2.kind = RegKind::L2;
            l2.decay = cfg.sparsify.l2_decay;
            objective.terms.push_back({l, std::move(l2), "l2"});
        }
    }
    return objective;
}

// Stage-3 objective: DeepHoyer terms removed; the l2 term is off by default.
inline ObjectiveSpec build_finetune_objective(const ExperimentConfig& cfg, const Network& net) {
    ObjectiveSpec objective;
    if (cfg.finetune_l2_decay > 0.0) {
        for (size_t l = 0; l < net.layers.size(); ++l) {
            if (!net.layers[l].parametric()) continue;
            RegularizerSpec l2;
            l2.kind = RegKind::L2;
            l2.decay = cfg.finetune_l2_decay;
            objective.terms.push_back({l, std::move(l2), "l2"});
        }
    }
    return objective;
}

}  // namespace deephoyer
