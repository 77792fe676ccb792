#pragma once

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "deephoyer/errors.hpp"
#include "deephoyer/network.hpp"

// Sparsity accounting: exact nonzero counts, surviving structure after
// structural pruning, and multiply-accumulate FLOPs of the surviving chain.

namespace deephoyer {

inline std::vector<size_t> count_nonzero(const Network& net) {
    std::vector<size_t> counts(net.num_param_layers(), 0);
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        for (double v : net.weights[p].vec()) counts[p] += v != 0.0 ? 1 : 0;
    }
    return counts;
}

namespace detail {

// Dense [out x in]: whether row r / column c holds any nonzero weight.
inline bool dense_row_alive(const Tensor& w, size_t r) {
    const size_t in = w.shape()[1];
    for (size_t c = 0; c < in; ++c) {
        if (w[r * in + c] != 0.0) return true;
    }
    return false;
}

inline bool dense_col_alive(const Tensor& w, size_t c) {
    const size_t out = w.shape()[0], in = w.shape()[1];
    for (size_t r = 0; r < out; ++r) {
        if (w[r * in + c] != 0.0) return true;
    }
    return false;
}

inline bool dense_col_block_alive(const Tensor& w, size_t first, size_t count) {
    for (size_t c = first; c < first + count; ++c) {
        if (dense_col_alive(w, c)) return true;
    }
    return false;
}

// Conv [C_out x C_in x k x k]: output-filter slab / input-channel slices.
inline bool conv_filter_alive(const Tensor& w, size_t n) {
    const size_t slab = w.shape()[1] * w.shape()[2] * w.shape()[3];
    for (size_t i = n * slab; i < (n + 1) * slab; ++i) {
        if (w[i] != 0.0) return true;
    }
    return false;
}

inline bool conv_channel_alive(const Tensor& w, size_t c) {
    const size_t cout = w.shape()[0], cin = w.shape()[1], kk = w.shape()[2] * w.shape()[3];
    for (size_t n = 0; n < cout; ++n) {
        for (size_t e = 0; e < kk; ++e) {
            if (w[(n * cin + c) * kk + e] != 0.0) return true;
        }
    }
    return false;
}

}  // namespace detail

// Per-boundary neuron/channel counts after removing all-zero structures.
// A hidden unit survives only if both its incoming and its outgoing weights
// hold a nonzero; output units always survive and are not listed. For a
// conv->dense transition the dense layer's surviving input columns form
// their own entry (the "800" of 20-50-800-500).
inline std::vector<size_t> surviving_structure(const Network& net) {
    std::vector<size_t> param_layers;
    for (size_t l = 0; l < net.layers.size(); ++l) {
        if (net.layers[l].parametric()) param_layers.push_back(l);
    }
    std::vector<size_t> structure;
    for (size_t pi = 0; pi < param_layers.size(); ++pi) {
        const LayerSpec& spec = net.layers[param_layers[pi]];
        const Tensor& w = net.weights[pi];
        const bool last = pi + 1 == param_layers.size();
        const bool prev_is_dense =
            pi > 0 && net.layers[param_layers[pi - 1]].kind == LayerKind::Dense;

        if (spec.kind == LayerKind::Dense && !prev_is_dense) {
            // Input-column boundary (network input or flattened conv maps).
            size_t alive = 0;
            for (size_t c = 0; c < spec.in; ++c) alive += detail::dense_col_alive(w, c) ? 1 : 0;
            structure.push_back(alive);
        }
        if (last) break;

        const LayerSpec& next = net.layers[param_layers[pi + 1]];
        const Tensor& wn = net.weights[pi + 1];
        size_t alive = 0;
        for (size_t u = 0; u < spec.out; ++u) {
            bool out_alive = spec.kind == LayerKind::Dense ? detail::dense_row_alive(w, u)
                                                           : detail::conv_filter_alive(w, u);
            if (!out_alive) continue;
            bool used;
            if (next.kind == LayerKind::Conv) {
                used = detail::conv_channel_alive(wn, u);
            } else if (spec.kind == LayerKind::Conv) {
                const size_t block = next.in / spec.out;  // spatial size per channel
                used = detail::dense_col_block_alive(wn, u * block, block);
            } else {
                used = detail::dense_col_alive(wn, u);
            }
            alive += used ? 1 : 0;
        }
        structure.push_back(alive);
    }
    return structure;
}

// Multiply-accumulate count of a forward pass over the surviving structure.
// Dense boundary: n_in * n_out; conv layer: H_out * W_out * k^2 * c_in * c_out.
inline uint64_t flops(const std::vector<size_t>& structure, const std::string& arch) {
    if (arch == "lenet300") {
        if (structure.size() != 3) {
            throw ArgumentError("lenet300 structure must have 3 entries, got " +
                                std::to_string(structure.size()));
        }
        if (structure[0] > 784 || structure[1] > 300 || structure[2] > 100) {
            throw ArgumentError("lenet300 structure exceeds 784-300-100");
        }
        return uint64_t(structure[0]) * structure[1] + uint64_t(structure[1]) * structure[2] +
               uint64_t(structure[2]) * 10;
    }
    if (arch == "lenet5") {
        if (structure.size() != 4) {
            throw ArgumentError("lenet5 structure must have 4 entries, got " +
                                std::to_string(structure.size()));
        }
        if (structure[0] > 20 || structure[1] > 50 || structure[2] > 800 || structure[3] > 500) {
            throw ArgumentError("lenet5 structure exceeds 20-50-800-500");
        }
        const uint64_t conv1 = 24ull * 24 * 25 * 1 * structure[0];
        const uint64_t conv2 = 8ull * 8 * 25 * structure[0] * structure[1];
        const uint64_t fc1 = uint64_t(structure[2]) * structure[3];
        const uint64_t fc2 = uint64_t(structure[3]) * 10;
        return conv1 + conv2 + fc1 + fc2;
    }
    throw ArgumentError("flops: unknown architecture '" + arch + "'");
}

inline std::vector<size_t> full_structure(const std::string& arch) {
    if (arch == "lenet300") return {784, 300, 100};
    if (arch == "lenet5") return {20, 50, 800, 500};
    throw ArgumentError("full_structure: unknown architecture '" + arch + "'");
}

struct Histogram {
    std::vector<double> edges;   // bins + 1
    std::vector<size_t> counts;  // bins
};

// Histogram over the nonzero entries of one parametric layer's weights.
inline Histogram weight_histogram(const Network& net, size_t param_layer, size_t bins) {
    if (param_layer >= net.num_param_layers()) {
        throw ArgumentError("weight_histogram: no parametric layer " + std::to_string(param_layer));
    }
    if (bins < 1) throw ArgumentError("weight_histogram: bins must be >= 1");
    const Tensor& w = net.weights[param_layer];
    Histogram h;
    h.edges.assign(bins + 1, 0.0);
    h.counts.assign(bins, 0);
    double lo = 0.0, hi = 0.0;
    bool any = false;
    for (double v : w.vec()) {
        if (v == 0.0) continue;
        if (!any) {
            lo = hi = v;
            any = true;
        } else {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
    }
    if (!any) return h;  // all-zero layer: zero counts, degenerate edges
    for (size_t i = 0; i <= bins; ++i) {
        h.edges[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(bins);
    }
    h.edges[bins] = hi;
    for (double v : w.vec()) {
        if (v == 0.0) continue;
        size_t bin;
        if (hi == lo) {
            bin = 0;
        } else {
            bin = static_cast<size_t>((v - lo) / (hi - lo) * static_cast<double>(bins));
            if (bin >= bins) bin = bins - 1;  // top edge inclusive
        }
        h.counts[bin]++;
    }
    return h;
}

inline void write_histogram_csv(const Histogram& h, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open histogram for writing: " + path);
    out << "bin_left,bin_right,count\n";
    char buf[64];
    const auto fmt = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.12g", v);
        return std::string(buf);
    };
    for (size_t i = 0; i < h.counts.size(); ++i) {
        out << fmt(h.edges[i]) << "," << fmt(h.edges[i + 1]) << "," << h.counts[i] << "\n";
    }
    if (!out) throw IoError("short write on histogram: " + path);
}

struct SparsityReport {
    std::string architecture;
    std::vector<std::string> layer_names;
    std::vector<size_t> layer_nonzero;
    std::vector<size_t> layer_total;
    std::vector<double> layer_percentage;  // nonzero / total
    size_t total_nonzero = 0;
    size_t total_weights = 0;
    double total_percentage = 0.0;
    std::vector<size_t> surviving;
    uint64_t flops_count = 0;
    uint64_t flops_full = 0;
    double flops_percentage = 0.0;
    double test_accuracy = 0.0;
    double baseline_accuracy = 0.0;
};

inline SparsityReport build_sparsity_report(const Network& net, double test_accuracy,
                                            double baseline_accuracy) {
    SparsityReport r;
    r.architecture = net.arch;
    r.layer_names = net.param_names;
    r.layer_nonzero = count_nonzero(net);
    for (size_t p = 0; p < net.num_param_layers(); ++p) {
        r.layer_total.push_back(net.weights[p].numel());
        r.layer_percentage.push_back(static_cast<double>(r.layer_nonzero[p]) /
                                     static_cast<double>(r.layer_total[p]));
        r.total_nonzero += r.layer_nonzero[p];
        r.total_weights += r.layer_total[p];
    }
    r.total_percentage =
        static_cast<double>(r.total_nonzero) / static_cast<double>(r.total_weights);
    r.surviving = surviving_structure(net);
    r.flops_count = flops(r.surviving, net.arch);
    r.flops_full = flops(full_structure(net.arch), net.arch);
    r.flops_percentage = static_cast<double>(r.flops_count) / static_cast<double>(r.flops_full);
    r.test_accuracy = test_accuracy;
    r.baseline_accuracy = baseline_accuracy;
    return r;
}

inline nlohmann::json report_json(const SparsityReport& r) {
    nlohmann::json j;
    j["architecture"] = r.architecture;
    j["layers"] = nlohmann::json::array();
    for (size_t p = 0; p < r.layer_names.size(); ++p) {
        j["layers"].push_back({{"name", r.layer_names[p]},
                               {"nonzero", r.layer_nonzero[p]},
                               {"total", r.layer_total[p]},
                               {"percentage", r.layer_percentage[p]}});
    }
    j["total_nonzero"] = r.total_nonzero;
    j["total_weights"] = r.total_weights;
    j["total_percentage"] = r.total_percentage;
    j["surviving_structure"] = r.surviving;
    j["flops"] = r.flops_count;
    j["flops_full"] = r.flops_full;
    j["flops_percentage"] = r.flops_percentage;
    j["accuracy"] = {{"test", r.test_accuracy}, {"baseline", r.baseline_accuracy}};
    return j;
}

inline void write_report(const SparsityReport& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot open report for writing: " + path);
    out << report_json(r).dump(1) << "\n";
    if (!out) throw IoError("short write on report: " + path);
}

}  // namespace deephoyer
