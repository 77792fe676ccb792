#pragma once

#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deephoyer/errors.hpp"
#include "deephoyer/network.hpp"

// Checkpoint file format: one JSON document holding the architecture tag,
// the full layer-spec list, per-layer weights/biases as flat row-major
// arrays, masks as 0/1 arrays, and run metadata. Doubles are serialized via
// shortest round-trip representation, so save -> load -> save is bit-exact.

namespace deephoyer {

struct CheckpointMeta {
    uint64_t seed = 0;
    int epoch = 0;
    double accuracy = 0.0;
    std::string stage;      // pretrain / sparsify / prune / finetune
    std::string objective;  // human-readable description of the training objective
};

namespace detail {

inline nlohmann::json layer_spec_json(const LayerSpec& spec) {
    nlohmann::json j;
    j["kind"] = layer_kind_name(spec.kind);
    if (spec.kind == LayerKind::Dense) {
        j["in"] = spec.in;
        j["out"] = spec.out;
    } else if (spec.kind == LayerKind::Conv) {
        j["in"] = spec.in;
        j["out"] = spec.out;
        j["k"] = spec.k;
    }
    return j;
}

inline LayerSpec layer_spec_from_json(const nlohmann::json& j) {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "dense") return LayerSpec::dense(j.at("in"), j.at("out"));
    if (kind == "conv") return LayerSpec::conv(j.at("in"), j.at("out"), j.at("k"));
    if (kind == "maxpool2") return LayerSpec::maxpool2();
    if (kind == "relu") return LayerSpec::relu_layer();
    if (kind == "flatten") return LayerSpec::flatten();
    throw FormatError("checkpoint: unknown layer kind '" + kind + "'");
}

}  // namespace detail

inline nlohmann::json checkpoint_json(const Network& net, const CheckpointMeta& meta) {
    nlohmann::json j;
    j["format"] = "deephoyer-checkpoint-v1";
    j["architecture"] = net.arch;
    j["layer_specs"] = nlohmann::json::array();
    for (const auto& spec : net.layers) j["layer_specs"].push_back(detail::layer_spec_json(spec));
    j["layers"] = nlohmann::json::array();
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        nlohmann::json lj;
        lj["name"] = net.param_names[p];
        lj["shape"] = net.weights[p].shape();
        lj["weights"] = net.weights[p].vec();
        lj["bias"] = net.biases[p].vec();
        std::vector<int> mask(net.masks[p].numel());
        for (size_t i = 0; i < mask.size(); ++i) mask[i] = net.masks[p][i] != 0.0 ? 1 : 0;
        lj["mask"] = mask;
        j["layers"].push_back(std::move(lj));
    }
    j["metadata"] = {{"seed", meta.seed},
                     {"epoch", meta.epoch},
                     {"accuracy", meta.accuracy},
                     {"stage", meta.stage},
                     {"objective", meta.objective}};
    return j;
}

inline void save_checkpoint(const Network& net, const CheckpointMeta& meta,
                            const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open checkpoint for writing: " + path);
    out << checkpoint_json(net, meta).dump(1) << "\n";
    if (!out) throw IoError("short write on checkpoint: " + path);
}

inline std::pair<Network, CheckpointMeta> checkpoint_from_json(const nlohmann::json& j) {
    if (j.value("format", "") != "deephoyer-checkpoint-v1") {
        throw FormatError("checkpoint: missing or unknown format tag");
    }
    Network net;
    net.arch = j.at("architecture").get<std::string>();
    int param = 0;
    const auto& layer_json = j.at("layers");
    for (const auto& sj : j.at("layer_specs")) {
        LayerSpec spec = detail::layer_spec_from_json(sj);
        if (spec.parametric()) {
            const auto& lj = layer_json.at(param);
            detail::add_param_layer(net, spec, lj.at("name").get<std::string>());
            auto& w = net.weights.back();
            auto& b = net.biases.back();
            auto& m = net.masks.back();
            const auto shape = lj.at("shape").get<std::vector<size_t>>();
            if (shape != w.shape()) {
                throw FormatError("checkpoint: stored shape does not match layer spec for '" +
                                  net.param_names.back() + "'");
            }
            const auto wv = lj.at("weights").get<std::vector<double>>();
            const auto bv = lj.at("bias").get<std::vector<double>>();
            const auto mv = lj.at("mask").get<std::vector<int>>();
            if (wv.size() != w.numel() || bv.size() != b.numel() || mv.size() != w.numel()) {
                throw FormatError("checkpoint: array length mismatch for '" +
                                  net.param_names.back() + "'");
            }
            std::copy(wv.begin(), wv.end(), w.data());
            std::copy(bv.begin(), bv.end(), b.data());
            for (size_t i = 0; i < mv.size(); ++i) {
                if (mv[i] != 0 && mv[i] != 1) {
                    throw FormatError("checkpoint: mask entries must be 0/1");
                }
                m[i] = mv[i];
                if (mv[i] == 0 && wv[i] != 0.0) {
                    throw FormatError("checkpoint: nonzero weight under zero mask in '" +
                                      net.param_names.back() + "'");
                }
            }
            ++param;
        } else {
            detail::add_plain_layer(net, spec);
        }
    }
    CheckpointMeta meta;
    const auto& mj = j.at("metadata");
    meta.seed = mj.at("seed").get<uint64_t>();
    meta.epoch = mj.at("epoch").get<int>();
    meta.accuracy = mj.at("accuracy").get<double>();
    meta.stage = mj.value("stage", "");
    meta.objective = mj.value("objective", "");
    return {std::move(net), std::move(meta)};
}

inline std::pair<Network, CheckpointMeta> load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open checkpoint: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint parse error in " + path + ": " + e.what());
    }
    try {
        return checkpoint_from_json(j);
    } catch (const nlohmann::json::exception& e) {
        throw FormatError("checkpoint field error in " + path + ": " + e.what());
    }
}

}  // namespace deephoyer
