#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "deephoyer/checkpoint.hpp"
#include "deephoyer/config.hpp"
#include "deephoyer/data.hpp"
#include "deephoyer/errors.hpp"
#include "deephoyer/metrics.hpp"
#include "deephoyer/network.hpp"
#include "deephoyer/optimizer.hpp"
#include "deephoyer/pruning.hpp"

// The three-stage pipeline: (1) train with a DeepHoyer penalty, (2) threshold
// prune, (3) masked finetune without the penalty. Each stage persists a
// checkpoint, and stages 1-3 persist reports/logs, all under cfg.out_dir.
// Stage seeds are derived from cfg.seed with fixed offsets so a loaded
// pretrained checkpoint leaves the later stages bit-identical to a fresh run.

namespace deephoyer {

struct StagePaths {
    std::string pretrained, sparsified, pruned, final_ckpt;
    std::string log_pretrain, log_sparsify, log_finetune;
    std::string report_sparsify, report_prune, report_final;

    explicit StagePaths(const std::string& out_dir)
        : pretrained(out_dir + "/pretrained.json"),
          sparsified(out_dir + "/sparsified.json"),
          pruned(out_dir + "/pruned.json"),
          final_ckpt(out_dir + "/final.json"),
          log_pretrain(out_dir + "/log_pretrain.csv"),
          log_sparsify(out_dir + "/log_sparsify.csv"),
          log_finetune(out_dir + "/log_finetune.csv"),
          report_sparsify(out_dir + "/report_sparsify.json"),
          report_prune(out_dir + "/report_prune.json"),
          report_final(out_dir + "/report.json") {}
};

inline void ensure_out_dir(const std::string& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory " + out_dir + ": " + ec.message());
}

inline std::pair<Dataset, Dataset> load_data(const ExperimentConfig& cfg,
                                             const std::string& data_dir_override = "") {
    if (cfg.data.kind == "mnist") {
        const std::string dir = data_dir_override.empty() ? cfg.data.dir : data_dir_override;
        return load_mnist(dir);
    }
    Dataset train = synthetic_blobs(cfg.data.n_train, cfg.data.classes, cfg.seed ^ 0x5eedull);
    Dataset test = synthetic_blobs(cfg.data.n_test > 0 ? cfg.data.n_test : 1, cfg.data.classes,
                                   cfg.seed ^ 0x7e57ull);
    return {std::move(train), std::move(test)};
}

inline uint64_t stage_seed(const ExperimentConfig& cfg, int stage) {
    return cfg.seed * 1000003ull + static_cast<uint64_t>(stage);
}

// Stage 0: pretrain from scratch (no penalty) and persist.
inline Network run_pretrain(const ExperimentConfig& cfg, const Dataset& train,
                            const Dataset& test) {
    ensure_out_dir(cfg.out_dir);
    StagePaths paths(cfg.out_dir);
    Network net = build_model(cfg.model);
    net.init_weights(stage_seed(cfg, 0));
    ObjectiveSpec objective;  // pretraining carries no penalty
    OptimizerState opt(cfg.optimizer, net);
    TrainLog log = train_epochs(net, train, test, objective, opt, cfg.epochs.pretrain,
                                stage_seed(cfg, 1), cfg.batch_size);
    write_log_csv(log, paths.log_pretrain);
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epoch = cfg.epochs.pretrain;
    meta.accuracy = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
    meta.stage = "pretrain";
    meta.objective = "cross_entropy";
    save_checkpoint(net, meta, paths.pretrained);
    return net;
}

// Load the pretrained model: explicit checkpoint path, else an existing
// pretrained.json in out_dir, else train one.
inline std::pair<Network, double> pretrain_or_load(const ExperimentConfig& cfg,
                                                   const Dataset& train, const Dataset& test) {
    StagePaths paths(cfg.out_dir);
    std::string source;
    if (!cfg.pretrained_checkpoint.empty()) {
        source = cfg.pretrained_checkpoint;
    } else if (std::filesystem::exists(paths.pretrained)) {
        source = paths.pretrained;
    }
    if (!source.empty()) {
        auto [net, meta] = load_checkpoint(source);
        if (net.arch != cfg.model) {
            throw ConfigError("checkpoint " + source + " holds model '" + net.arch +
                              "' but config wants '" + cfg.model + "'");
        }
        return {std::move(net), meta.accuracy};
    }
    Network net = run_pretrain(cfg, train, test);
    const double baseline = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
    return {std::move(net), baseline};
}

// Stage 1: train with the DeepHoyer objective.
inline TrainLog run_sparsify(const ExperimentConfig& cfg, Network& net, const Dataset& train,
                             const Dataset& test, double baseline) {
    ensure_out_dir(cfg.out_dir);
    StagePaths paths(cfg.out_dir);
    ObjectiveSpec objective = build_sparsify_objective(cfg, net);
    OptimizerState opt(cfg.optimizer, net);
    TrainLog log = train_epochs(net, train, test, objective, opt, cfg.epochs.sparsify,
                                stage_seed(cfg, 2), cfg.batch_size);
    write_log_csv(log, paths.log_sparsify);
    const double acc = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epoch = cfg.epochs.sparsify;
    meta.accuracy = acc;
    meta.stage = "sparsify";
    meta.objective = std::string("cross_entropy+") + reg_kind_name(cfg.sparsify.regularizer);
    save_checkpoint(net, meta, paths.sparsified);
    write_report(build_sparsity_report(net, acc, baseline), paths.report_sparsify);
    return log;
}

// Stage 2: threshold pruning, element-wise or structural.
inline void run_prune(const ExperimentConfig& cfg, Network& net, const Dataset& test,
                      double baseline) {
    ensure_out_dir(cfg.out_dir);
    StagePaths paths(cfg.out_dir);
    const std::vector<double> taus = compute_thresholds(net, threshold_rules(cfg, net));
    if (cfg.prune.structural) {
        prune_structural(net, taus, structural_schemes(net));
    } else {
        prune_elementwise(net, taus);
    }
    const double acc = test.size() > 0 ? evaluate_accuracy(net, test) : 0.0;
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epoch = 0;
    meta.accuracy = acc;
    meta.stage = "prune";
    meta.objective = cfg.prune.structural ? "structural_threshold" : "elementwise_threshold";
    save_checkpoint(net, meta, paths.pruned);
    write_report(build_sparsity_report(net, acc, baseline), paths.report_prune);
}

// Stage 3: masked finetune without DeepHoyer terms; keeps the best snapshot.
inline SparsityReport run_finetune(const ExperimentConfig& cfg, Network& net, const Dataset& train,
                                   const Dataset& test, double baseline) {
    ensure_out_dir(cfg.out_dir);
    StagePaths paths(cfg.out_dir);
    ObjectiveSpec objective = build_finetune_objective(cfg, net);
    OptimizerState opt(cfg.optimizer, net);
    FinetuneResult result = finetune(net, train, test, objective, opt, cfg.epochs.finetune,
                                     stage_seed(cfg, 3), cfg.batch_size);
    write_log_csv(result.log, paths.log_finetune);
    CheckpointMeta meta;
    meta.seed = cfg.seed;
    meta.epoch = result.best_epoch;
    meta.accuracy = result.best_accuracy;
    meta.stage = "finetune";
    meta.objective = cfg.finetune_l2_decay > 0.0 ? "cross_entropy+l2" : "cross_entropy";
    save_checkpoint(net, meta, paths.final_ckpt);
    SparsityReport report = build_sparsity_report(net, result.best_accuracy, baseline);
    write_report(report, paths.report_final);
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        write_histogram_csv(weight_histogram(net, p, 50),
                            cfg.out_dir + "/histogram_" + net.param_names[p] + ".csv");
    }
    return report;
}

struct PipelineResult {
    Network net;
    SparsityReport report;
};

// pretrain-or-load -> sparsify -> prune -> finetune.
inline PipelineResult run_pipeline(const ExperimentConfig& cfg,
                                   const std::string& data_dir_override = "") {
    auto [train, test] = load_data(cfg, data_dir_override);
    auto [net, baseline] = pretrain_or_load(cfg, train, test);
    run_sparsify(cfg, net, train, test, baseline);
    run_prune(cfg, net, test, baseline);
    SparsityReport report = run_finetune(cfg, net, train, test, baseline);
    return {std::move(net), std::move(report)};
}

}  // namespace deephoyer
