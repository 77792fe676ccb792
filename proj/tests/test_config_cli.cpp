#include <catch2/catch_amalgamated.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "deephoyer/config.hpp"

using namespace deephoyer;
using nlohmann::json;

namespace {

int run_cli(const std::string& args) {
    const std::string cmd = std::string(DEEPHOYER_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(status != -1);
    return WIFEXITED(status) ? WEXITSTATUS(status) : -2;
}

std::string temp_dir(const std::string& name) {
    const std::string dir = std::filesystem::temp_directory_path() / name;
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

std::string write_json(const std::string& dir, const std::string& name, const json& j) {
    const std::string path = dir + "/" + name;
    std::ofstream out(path);
    out << j.dump(1);
    return path;
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

json tiny_synthetic_config(const std::string& out_dir) {
    return json{{"model", "lenet300"},
                {"seed", 3},
                {"out_dir", out_dir},
                {"data", {{"kind", "synthetic"}, {"n_train", 128}, {"n_test", 32}}},
                {"epochs", {{"pretrain", 1}, {"sparsify", 1}, {"finetune", 1}}},
                {"sparsify", {{"regularizer", "hoyer_square"}, {"decay", 0.001}}},
                {"prune", {{"mode", "ratio_of_std"}, {"value", 0.5}}}};
}

}  // namespace

TEST_CASE("config parsing accepts the full schema") {
    json j = {{"model", "lenet5"},
              {"seed", 11},
              {"out_dir", "runs/x"},
              {"data", {{"kind", "mnist"}, {"dir", "data/mnist"}}},
              {"optimizer", {{"kind", "adam"}, {"lr", 0.001}}},
              {"batch_size", 64},
              {"epochs", {{"pretrain", 30}, {"sparsify", 50}, {"finetune", 30}}},
              {"sparsify",
               {{"regularizer", "group_hs"}, {"decay_n", 0.1}, {"decay_c", 0.1}, {"l2_decay", 0.0}}},
              {"prune",
               {{"structural", true},
                {"per_layer",
                 json::array({{{"mode", "absolute"}, {"value", 1e-4}},
                              {{"mode", "absolute"}, {"value", 1e-4}},
                              {{"mode", "ratio_of_std"}, {"value", 0.008}},
                              {{"mode", "ratio_of_std"}, {"value", 0.008}}})}}},
              {"finetune", {{"l2_decay", 0.0}}}};
    ExperimentConfig cfg = parse_experiment_config(j);
    CHECK(cfg.model == "lenet5");
    CHECK(cfg.seed == 11);
    CHECK(cfg.sparsify.regularizer == RegKind::GroupHS);
    CHECK(cfg.sparsify.decay_n == 0.1);
    CHECK(cfg.prune.structural);
    REQUIRE(cfg.prune.per_layer.size() == 4);
    CHECK(cfg.prune.per_layer[0].mode == ThresholdMode::Absolute);
    CHECK(cfg.prune.per_layer[2].value == 0.008);
}

TEST_CASE("config parsing rejects unknown and invalid fields") {
    json base = tiny_synthetic_config("runs/x");

    json unknown_root = base;
    unknown_root["typo_field"] = 1;
    CHECK_THROWS_AS(parse_experiment_config(unknown_root), ConfigError);

    json unknown_nested = base;
    unknown_nested["sparsify"]["alpha"] = 0.1;
    CHECK_THROWS_AS(parse_experiment_config(unknown_nested), ConfigError);

    json bad_model = base;
    bad_model["model"] = "resnet";
    CHECK_THROWS_AS(parse_experiment_config(bad_model), ConfigError);

    json bad_reg = base;
    bad_reg["sparsify"]["regularizer"] = "l0";
    CHECK_THROWS_AS(parse_experiment_config(bad_reg), ConfigError);

    json neg_decay = base;
    neg_decay["sparsify"]["decay"] = -1.0;
    CHECK_THROWS_AS(parse_experiment_config(neg_decay), ConfigError);

    json bad_mode = base;
    bad_mode["prune"]["mode"] = "percentile";
    CHECK_THROWS_AS(parse_experiment_config(bad_mode), ConfigError);

    json short_per_layer = base;
    short_per_layer["prune"] = {{"per_layer", json::array({{{"mode", "absolute"}, {"value", 0.1}}})}};
    CHECK_THROWS_AS(parse_experiment_config(short_per_layer), ConfigError);

    json no_epochs = base;
    no_epochs.erase("epochs");
    CHECK_THROWS_AS(parse_experiment_config(no_epochs), nlohmann::json::exception);
}

TEST_CASE("cli exit codes: config and checkpoint failures") {
    const std::string dir = temp_dir("dh_cli_codes");

    CHECK(run_cli("") == 2);  // missing subcommand
    CHECK(run_cli("pipeline") == 2);  // missing --config
    CHECK(run_cli("pipeline --config " + dir + "/missing.json") == 3);

    json invalid = tiny_synthetic_config(dir + "/out");
    invalid["surprise"] = true;
    const std::string invalid_path = write_json(dir, "invalid.json", invalid);
    CHECK(run_cli("pipeline --config " + invalid_path) == 2);

    // valid config but no pretrained checkpoint for stage commands
    const std::string valid_path = write_json(dir, "valid.json", tiny_synthetic_config(dir + "/out"));
    CHECK(run_cli("sparsify --config " + valid_path) == 3);
    CHECK(run_cli("prune --config " + valid_path) == 3);
    CHECK(run_cli("finetune --config " + valid_path) == 3);
}

TEST_CASE("cli pipeline on synthetic data is deterministic") {
    const std::string dir = temp_dir("dh_cli_pipeline");
    const std::string out1 = dir + "/run1";
    const std::string out2 = dir + "/run2";
    json cfg = tiny_synthetic_config(out1);
    const std::string cfg_path = write_json(dir, "cfg.json", cfg);

    CHECK(run_cli("pipeline --config " + cfg_path) == 0);
    CHECK(std::filesystem::exists(out1 + "/report.json"));
    CHECK(std::filesystem::exists(out1 + "/final.json"));
    CHECK(std::filesystem::exists(out1 + "/log_finetune.csv"));
    CHECK(std::filesystem::exists(out1 + "/histogram_fc1.csv"));

    CHECK(run_cli("pipeline --config " + cfg_path + " --out " + out2) == 0);
    CHECK(slurp(out1 + "/report.json") == slurp(out2 + "/report.json"));

    // the stage commands run off the pipeline's checkpoints
    CHECK(run_cli("prune --config " + cfg_path) == 0);
    CHECK(run_cli("finetune --config " + cfg_path) == 0);
}

TEST_CASE("cli gradcheck passes and its negative control fails") {
    const std::string dir = temp_dir("dh_cli_gradcheck");
    const std::string out = dir + "/out.txt";
    const std::string cmd =
        std::string(DEEPHOYER_CLI_PATH) + " gradcheck --seed 5 > " + out + " 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    CHECK(WEXITSTATUS(status) == 0);
    const std::string report = slurp(out);
    for (const char* kind : {"l1", "l2", "hoyer", "hoyer_square", "group_hs", "transformed_l1"}) {
        INFO("missing kind " << kind);
        CHECK(report.find(kind) != std::string::npos);
    }
    CHECK(report.find("network") != std::string::npos);

    CHECK(run_cli("gradcheck --seed 5 --corrupt") == 1);
}

TEST_CASE("cli commands do not mutate their input files") {
    const std::string dir = temp_dir("dh_cli_immutable");
    json cfg = tiny_synthetic_config(dir + "/out");
    const std::string cfg_path = write_json(dir, "cfg.json", cfg);
    const std::string before = slurp(cfg_path);
    CHECK(run_cli("pipeline --config " + cfg_path) == 0);
    CHECK(slurp(cfg_path) == before);
}

TEST_CASE("cli descent demo writes a consistent trajectory") {
    const std::string dir = temp_dir("dh_cli_descent");
    CHECK(run_cli("descent-demo --seed 4 --dim 6 --steps 500 --out " + dir) == 0);
    const std::string csv = dir + "/descent_trajectory.csv";
    REQUIRE(std::filesystem::exists(csv));

    std::ifstream in(csv);
    std::string header;
    std::getline(in, header);
    CHECK(header == "step,w0,w1,w2,w3,w4,w5,threshold");
    size_t rows = 0;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        ++rows;
        // threshold column equals sum(w^2)/sum(|w|) recomputed from the row
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');  // step
        double l1 = 0.0, sq = 0.0;
        for (int i = 0; i < 6; ++i) {
            std::getline(ss, cell, ',');
            const double w = std::stod(cell);
            l1 += std::abs(w);
            sq += w * w;
        }
        std::getline(ss, cell, ',');
        const double threshold = std::stod(cell);
        CHECK(std::abs(threshold - sq / l1) <= 1e-9);
    }
    CHECK(rows == 501);

    // fixed seed reruns byte-identically
    const std::string dir2 = temp_dir("dh_cli_descent2");
    CHECK(run_cli("descent-demo --seed 4 --dim 6 --steps 500 --out " + dir2) == 0);
    CHECK(slurp(csv) == slurp(dir2 + "/descent_trajectory.csv"));
}
