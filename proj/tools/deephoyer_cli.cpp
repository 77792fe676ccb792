// Experiment runner: pretrain / sparsify / prune / finetune / pipeline over
// JSON configs, plus the gradient-check suite and the descent-path demo.
//
// Exit codes: 0 success, 1 check failure, 2 config error, 3 I/O error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "deephoyer/deephoyer.hpp"

namespace dh = deephoyer;

namespace {

struct CommonOpts {
    std::string config_path;
    std::string out_dir;    // override
    std::string data_dir;   // override
    int64_t seed = -1;      // override when >= 0
};

void add_common(CLI::App* cmd, CommonOpts& opts) {
    cmd->add_option("--config", opts.config_path, "experiment config JSON")->required();
    cmd->add_option("--seed", opts.seed, "override the config seed");
    cmd->add_option("--out", opts.out_dir, "override the output directory");
    cmd->add_option("--data", opts.data_dir, "override the MNIST directory");
}

dh::ExperimentConfig load_config(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = dh::load_experiment_config(opts.config_path);
    if (opts.seed >= 0) cfg.seed = static_cast<uint64_t>(opts.seed);
    if (!opts.out_dir.empty()) cfg.out_dir = opts.out_dir;
    return cfg;
}

// Baseline (pretrain) accuracy for reports produced by the later stages.
double find_baseline(const dh::ExperimentConfig& cfg) {
    const dh::StagePaths paths(cfg.out_dir);
    for (const std::string& path : {paths.pretrained, cfg.pretrained_checkpoint}) {
        if (path.empty() || !std::filesystem::exists(path)) continue;
        return dh::load_checkpoint(path).second.accuracy;
    }
    return 0.0;
}

int cmd_pretrain(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = load_config(opts);
    auto [train, test] = dh::load_data(cfg, opts.data_dir);
    dh::Network net = dh::run_pretrain(cfg, train, test);
    std::printf("pretrain: %d epochs, test accuracy %.4f -> %s/pretrained.json\n",
                cfg.epochs.pretrain, dh::evaluate_accuracy(net, test), cfg.out_dir.c_str());
    return 0;
}

int cmd_sparsify(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = load_config(opts);
    const dh::StagePaths paths(cfg.out_dir);
    const std::string source =
        cfg.pretrained_checkpoint.empty() ? paths.pretrained : cfg.pretrained_checkpoint;
    auto [net, meta] = dh::load_checkpoint(source);
    auto [train, test] = dh::load_data(cfg, opts.data_dir);
    dh::run_sparsify(cfg, net, train, test, meta.accuracy);
    std::printf("sparsify: %d epochs with %s, test accuracy %.4f -> %s/sparsified.json\n",
                cfg.epochs.sparsify, dh::reg_kind_name(cfg.sparsify.regularizer),
                dh::evaluate_accuracy(net, test), cfg.out_dir.c_str());
    return 0;
}

int cmd_prune(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = load_config(opts);
    const dh::StagePaths paths(cfg.out_dir);
    auto [net, meta] = dh::load_checkpoint(paths.sparsified);
    auto [train, test] = dh::load_data(cfg, opts.data_dir);
    (void)train;
    dh::run_prune(cfg, net, test, find_baseline(cfg));
    const double nz = dh::nonzero_fraction(net);
    std::printf("prune: %s thresholds, %.2f%% nonzero -> %s/pruned.json\n",
                cfg.prune.structural ? "structural" : "element-wise", 100.0 * nz,
                cfg.out_dir.c_str());
    return 0;
}

int cmd_finetune(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = load_config(opts);
    const dh::StagePaths paths(cfg.out_dir);
    auto [net, meta] = dh::load_checkpoint(paths.pruned);
    auto [train, test] = dh::load_data(cfg, opts.data_dir);
    dh::SparsityReport report = dh::run_finetune(cfg, net, train, test, find_baseline(cfg));
    std::printf("finetune: best test accuracy %.4f at %.2f%% nonzero -> %s/report.json\n",
                report.test_accuracy, 100.0 * report.total_percentage, cfg.out_dir.c_str());
    return 0;
}

int cmd_pipeline(const CommonOpts& opts) {
    dh::ExperimentConfig cfg = load_config(opts);
    dh::PipelineResult result = dh::run_pipeline(cfg, opts.data_dir);
    std::printf("pipeline: test accuracy %.4f (baseline %.4f), %.2f%% nonzero, "
                "%llu FLOPs (%.2f%%) -> %s/report.json\n",
                result.report.test_accuracy, result.report.baseline_accuracy,
                100.0 * result.report.total_percentage,
                static_cast<unsigned long long>(result.report.flops_count),
                100.0 * result.report.flops_percentage, cfg.out_dir.c_str());
    return 0;
}

int cmd_gradcheck(uint64_t seed, bool corrupt) {
    const auto items = dh::run_gradcheck_suite(seed, corrupt);
    bool all_pass = true;
    for (const auto& item : items) {
        std::printf("%-40s max_rel_err=%.3e tol=%.0e %s\n", item.name.c_str(), item.max_rel_err,
                    item.tolerance, item.pass ? "PASS" : "FAIL");
        all_pass = all_pass && item.pass;
    }
    return all_pass ? 0 : 1;
}

int cmd_descent_demo(uint64_t seed, size_t dim, size_t steps, double lr,
                     const std::string& out_dir) {
    dh::ensure_out_dir(out_dir);
    const std::string path = out_dir + "/descent_trajectory.csv";
    std::ofstream csv(path);
    if (!csv) throw dh::IoError("cannot open " + path + " for writing");
    dh::DescentResult result = dh::hs_descent_path(seed, dim, steps, lr, &csv);
    size_t below = 0;
    double max_init = 0.0, max_final = 0.0;
    size_t argmax = 0;
    for (size_t i = 0; i < dim; ++i) {
        if (std::abs(result.final_w[i]) < 1e-2) ++below;
        if (std::abs(result.initial[i]) > max_init) {
            max_init = std::abs(result.initial[i]);
            argmax = i;
        }
    }
    max_final = std::abs(result.final_w[argmax]);
    std::printf("descent-demo: %zu steps, %zu/%zu coordinates below 1e-2, "
                "dominant |w_%zu| %.4f -> %.4f, trajectory in %s\n",
                steps, below, dim, argmax, max_init, max_final, path.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"DeepHoyer sparsity regularizers: training, pruning and reporting"};
    app.require_subcommand(1);

    CommonOpts pretrain_opts, sparsify_opts, prune_opts, finetune_opts, pipeline_opts;
    add_common(app.add_subcommand("pretrain", "train the dense baseline"), pretrain_opts);
    add_common(app.add_subcommand("sparsify", "stage 1: train with the DeepHoyer objective"),
               sparsify_opts);
    add_common(app.add_subcommand("prune", "stage 2: threshold pruning"), prune_opts);
    add_common(app.add_subcommand("finetune", "stage 3: masked finetune"), finetune_opts);
    add_common(app.add_subcommand("pipeline", "all stages in sequence"), pipeline_opts);

    uint64_t gc_seed = 12345;
    bool gc_corrupt = false;
    CLI::App* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient checks");
    gradcheck->add_option("--seed", gc_seed, "random seed");
    gradcheck->add_flag("--corrupt", gc_corrupt, "negative control: corrupt one gradient")
        ->group("");  // test hook, hidden from help

    uint64_t dd_seed = 1;
    size_t dd_dim = 20, dd_steps = 100000;
    double dd_lr = 1e-3;
    std::string dd_out = "runs/descent";
    CLI::App* descent = app.add_subcommand("descent-demo", "pure-penalty descent trajectory");
    descent->add_option("--seed", dd_seed, "random seed");
    descent->add_option("--dim", dd_dim, "vector dimension");
    descent->add_option("--steps", dd_steps, "descent steps");
    descent->add_option("--lr", dd_lr, "step size");
    descent->add_option("--out", dd_out, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }

    try {
        if (app.got_subcommand("pretrain")) return cmd_pretrain(pretrain_opts);
        if (app.got_subcommand("sparsify")) return cmd_sparsify(sparsify_opts);
        if (app.got_subcommand("prune")) return cmd_prune(prune_opts);
        if (app.got_subcommand("finetune")) return cmd_finetune(finetune_opts);
        if (app.got_subcommand("pipeline")) return cmd_pipeline(pipeline_opts);
        if (app.got_subcommand("gradcheck")) return cmd_gradcheck(gc_seed, gc_corrupt);
        if (app.got_subcommand("descent-demo")) {
            return cmd_descent_demo(dd_seed, dd_dim, dd_steps, dd_lr, dd_out);
        }
    } catch (const dh::ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dh::IoError& e) {
        std::cerr << "i/o error: " << e.what() << "\n";
        return 3;
    } catch (const dh::FormatError& e) {
        std::cerr << "format error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 2;
}
