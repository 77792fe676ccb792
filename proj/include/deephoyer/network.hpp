#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "deephoyer/errors.hpp"
#include "deephoyer/kernels.hpp"
#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"
#include "deephoyer/tensor.hpp"

// Layer-graph definition and whole-network forward/backward. Weights carry
// optional binary prune masks; a masked weight stays exactly 0 through any
// update and its gradient is reported as exactly 0.

namespace deephoyer {

enum class LayerKind { Dense, Conv, MaxPool2, ReLU, Flatten };

struct LayerSpec {
    LayerKind kind = LayerKind::ReLU;
    size_t in = 0;   // Dense: input features; Conv: input channels
    size_t out = 0;  // Dense: output features; Conv: output channels
    size_t k = 0;    // Conv: kernel size

    bool parametric() const { return kind == LayerKind::Dense || kind == LayerKind::Conv; }

    static LayerSpec dense(size_t in, size_t out) { return {LayerKind::Dense, in, out, 0}; }
    static LayerSpec conv(size_t cin, size_t cout, size_t k) {
        return {LayerKind::Conv, cin, cout, k};
    }
    static LayerSpec maxpool2() { return {LayerKind::MaxPool2, 0, 0, 0}; }
    static LayerSpec relu_layer() { return {LayerKind::ReLU, 0, 0, 0}; }
    static LayerSpec flatten() { return {LayerKind::Flatten, 0, 0, 0}; }
};

inline const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Dense: return "dense";
        case LayerKind::Conv: return "conv";
        case LayerKind::MaxPool2: return "maxpool2";
        case LayerKind::ReLU: return "relu";
        case LayerKind::Flatten: return "flatten";
    }
    return "?";
}

struct BackwardResult {
    double loss = 0.0;
    Tensor logits;  // forward output, [B x classes]
    std::vector<Tensor> weight_grads;  // per parametric layer
    std::vector<Tensor> bias_grads;
};

class Network {
public:
    std::string arch;                     // architecture tag for checkpoints/reports
    std::vector<LayerSpec> layers;
    std::vector<Tensor> weights;          // one per parametric layer
    std::vector<Tensor> biases;
    std::vector<Tensor> masks;            // 0/1, same shape as weights
    std::vector<std::string> param_names; // "fc1", "conv2", ...
    std::vector<int> param_slot;          // layer index -> slot in the vectors above, or -1

    size_t num_param_layers() const { return weights.size(); }

    size_t weight_count() const {
        size_t n = 0;
        for (const auto& w : weights) n += w.numel();
        return n;
    }

    // Uniform in +-sqrt(1/fan_in) per layer; biases start at zero. Biases are
    // never regularized or pruned.
    void init_weights(uint64_t seed) {
        Rng rng(seed);
        for (size_t p = 0; p < weights.size(); ++p) {
            const LayerSpec& spec = layers[layer_of_slot(p)];
            const double fan_in = spec.kind == LayerKind::Dense
                                      ? static_cast<double>(spec.in)
                                      : static_cast<double>(spec.in * spec.k * spec.k);
            const double bound = std::sqrt(1.0 / fan_in);
            for (double& v : weights[p].vec()) v = rng.uniform(-bound, bound);
            biases[p].fill(0.0);
        }
        apply_masks();
    }

    void apply_masks() {
        for (size_t p = 0; p < weights.size(); ++p) {
            for (size_t i = 0; i < weights[p].numel(); ++i) {
                if (masks[p][i] == 0.0) weights[p][i] = 0.0;
            }
        }
    }

    size_t layer_of_slot(size_t slot) const {
        for (size_t l = 0; l < layers.size(); ++l) {
            if (param_slot[l] == static_cast<int>(slot)) return l;
        }
        throw ArgumentError("no layer for parameter slot " + std::to_string(slot));
    }

    // Evaluation-only forward; returns logits [B x classes].
    Tensor forward(const Tensor& batch) const {
        Tensor x = batch;
        for (size_t l = 0; l < layers.size(); ++l) x = forward_layer(l, std::move(x), nullptr);
        return x;
    }

    // Mean cross-entropy over the batch and gradients of that mean w.r.t.
    // every parameter. Gradients at masked-out weights are exactly 0.
    BackwardResult backward(const Tensor& batch, const std::vector<int>& labels) const {
        const size_t b = batch.dim(0);
        if (labels.size() != b) {
            throw DimensionError("batch of " + std::to_string(b) + " samples with " +
                                 std::to_string(labels.size()) + " labels");
        }
        Caches caches(layers.size());
        Tensor x = batch;
        for (size_t l = 0; l < layers.size(); ++l) x = forward_layer(l, std::move(x), &caches);

        BackwardResult res;
        for (const auto& w : weights) res.weight_grads.emplace_back(w.shape());
        for (const auto& bt : biases) res.bias_grads.emplace_back(bt.shape());

        // Loss and logits gradient, scaled so grads are of the batch mean.
        const size_t classes = x.dim(1);
        Tensor grad(x.shape());
        double loss_sum = 0.0;
        const double inv_b = b > 0 ? 1.0 / static_cast<double>(b) : 0.0;
        for (size_t i = 0; i < b; ++i) {
            Tensor row({classes},
                       std::vector<double>(x.data() + i * classes, x.data() + (i + 1) * classes));
            auto [loss, grow] = softmax_cross_entropy(row, labels[i]);
            loss_sum += loss;
            for (size_t j = 0; j < classes; ++j) grad.at2(i, j) = grow[j] * inv_b;
        }
        res.loss = loss_sum * inv_b;

        res.logits = std::move(x);

        for (size_t l = layers.size(); l-- > 0;) {
            grad = backward_layer(l, std::move(grad), caches, res);
        }

        // Mask contract: masked coordinates contribute no gradient.
        for (size_t p = 0; p < weights.size(); ++p) {
            for (size_t i = 0; i < masks[p].numel(); ++i) {
                if (masks[p][i] == 0.0) res.weight_grads[p][i] = 0.0;
            }
        }
        return res;
    }

private:
    struct Caches {
        explicit Caches(size_t n) : inputs(n), pool_argmax(n) {}
        std::vector<Tensor> inputs;                     // per layer, as consumed
        std::vector<std::vector<size_t>> pool_argmax;   // flat into the batch input tensor
    };

    static Tensor flatten_to_2d(const Tensor& x) {
        size_t rest = 1;
        for (size_t i = 1; i < x.rank(); ++i) rest *= x.dim(i);
        return x.reshaped({x.dim(0), rest});
    }

    Tensor forward_layer(size_t l, Tensor x, Caches* caches) const {
        const LayerSpec& spec = layers[l];
        switch (spec.kind) {
            case LayerKind::Dense: {
                Tensor x2 = flatten_to_2d(x);
                if (x2.dim(1) != spec.in) {
                    throw DimensionError("dense layer expects " + std::to_string(spec.in) +
                                         " features, got " + x2.shape_string());
                }
                if (caches) caches->inputs[l] = x2;
                const size_t slot = static_cast<size_t>(param_slot[l]);
                Tensor y = matmul_nt(x2, weights[slot]);  // [B x out]
                const Tensor& bias = biases[slot];
                for (size_t i = 0; i < y.dim(0); ++i) {
                    double* row = y.data() + i * spec.out;
                    for (size_t j = 0; j < spec.out; ++j) row[j] += bias[j];
                }
                return y;
            }
            case LayerKind::Conv: {
                if (x.rank() != 4) {
                    throw DimensionError("conv layer expects [B x C x H x W], got " +
                                         x.shape_string());
                }
                if (caches) caches->inputs[l] = x;
                const size_t slot = static_cast<size_t>(param_slot[l]);
                const size_t b = x.dim(0), h = x.dim(2), w = x.dim(3);
                const size_t ho = h - spec.k + 1, wo = w - spec.k + 1;
                Tensor y({b, spec.out, ho, wo});
                const size_t in_sample = x.numel() / b;
                const size_t out_sample = spec.out * ho * wo;
                for (size_t i = 0; i < b; ++i) {
                    Tensor sample({spec.in, h, w},
                                  std::vector<double>(x.data() + i * in_sample,
                                                      x.data() + (i + 1) * in_sample));
                    Tensor out = conv2d_forward(sample, weights[slot], biases[slot]);
                    std::copy(out.data(), out.data() + out_sample, y.data() + i * out_sample);
                }
                return y;
            }
            case LayerKind::MaxPool2: {
                if (x.rank() != 4) {
                    throw DimensionError("maxpool layer expects [B x C x H x W], got " +
                                         x.shape_string());
                }
                const size_t b = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
                Tensor y({b, c, h / 2, w / 2});
                const size_t in_sample = c * h * w;
                const size_t out_sample = c * (h / 2) * (w / 2);
                if (caches) {
                    caches->inputs[l] = Tensor(x.shape());  // shape holder for backward
                    caches->pool_argmax[l].resize(b * out_sample);
                }
                for (size_t i = 0; i < b; ++i) {
                    Tensor sample({c, h, w}, std::vector<double>(x.data() + i * in_sample,
                                                                 x.data() + (i + 1) * in_sample));
                    MaxPoolResult r = maxpool2x2(sample);
                    std::copy(r.output.data(), r.output.data() + out_sample,
                              y.data() + i * out_sample);
                    if (caches) {
                        for (size_t o = 0; o < out_sample; ++o) {
                            caches->pool_argmax[l][i * out_sample + o] =
                                i * in_sample + r.argmax[o];
                        }
                    }
                }
                return y;
            }
            case LayerKind::ReLU: {
                if (caches) caches->inputs[l] = x;
                return relu(x);
            }
            case LayerKind::Flatten: {
                if (caches) caches->inputs[l] = Tensor(x.shape());  // shape holder
                return flatten_to_2d(x);
            }
        }
        throw ArgumentError("unknown layer kind");
    }

    Tensor backward_layer(size_t l, Tensor grad, const Caches& caches, BackwardResult& res) const {
        const LayerSpec& spec = layers[l];
        switch (spec.kind) {
            case LayerKind::Dense: {
                const size_t slot = static_cast<size_t>(param_slot[l]);
                const Tensor& x = caches.inputs[l];  // [B x in]
                res.weight_grads[slot] = matmul_tn(grad, x);  // [out x in]
                Tensor& bg = res.bias_grads[slot];
                for (size_t i = 0; i < grad.dim(0); ++i) {
                    const double* row = grad.data() + i * spec.out;
                    for (size_t j = 0; j < spec.out; ++j) bg[j] += row[j];
                }
                return matmul(grad, weights[slot]);  // [B x in]
            }
            case LayerKind::Conv: {
                const size_t slot = static_cast<size_t>(param_slot[l]);
                const Tensor& x = caches.inputs[l];
                const size_t b = x.dim(0), h = x.dim(2), w = x.dim(3);
                const size_t in_sample = x.numel() / b;
                const size_t out_sample = grad.numel() / b;
                const size_t ho = h - spec.k + 1, wo = w - spec.k + 1;
                Tensor gi(x.shape());
                for (size_t i = 0; i < b; ++i) {
                    Tensor sample({spec.in, h, w}, std::vector<double>(x.data() + i * in_sample,
                                                                       x.data() + (i + 1) * in_sample));
                    Tensor gout({spec.out, ho, wo},
                                std::vector<double>(grad.data() + i * out_sample,
                                                    grad.data() + (i + 1) * out_sample));
                    Conv2dGrads g = conv2d_backward(sample, weights[slot], gout);
                    for (size_t j = 0; j < g.grad_kernels.numel(); ++j) {
                        res.weight_grads[slot][j] += g.grad_kernels[j];
                    }
                    for (size_t j = 0; j < g.grad_bias.numel(); ++j) {
                        res.bias_grads[slot][j] += g.grad_bias[j];
                    }
                    std::copy(g.grad_input.data(), g.grad_input.data() + in_sample,
                              gi.data() + i * in_sample);
                }
                return gi;
            }
            case LayerKind::MaxPool2: {
                const auto& shape = caches.inputs[l].shape();
                Tensor gi(shape);
                const auto& argmax = caches.pool_argmax[l];
                for (size_t o = 0; o < argmax.size(); ++o) gi[argmax[o]] += grad[o];
                return gi;
            }
            case LayerKind::ReLU: {
                return relu_backward(caches.inputs[l], grad);
            }
            case LayerKind::Flatten: {
                return grad.reshaped(caches.inputs[l].shape());
            }
        }
        throw ArgumentError("unknown layer kind");
    }
};

namespace detail {

inline void add_param_layer(Network& net, LayerSpec spec, const std::string& name) {
    net.layers.push_back(spec);
    net.param_slot.push_back(static_cast<int>(net.weights.size()));
    if (spec.kind == LayerKind::Dense) {
        net.weights.emplace_back(std::vector<size_t>{spec.out, spec.in});
        net.biases.emplace_back(std::vector<size_t>{spec.out});
    } else {
        net.weights.emplace_back(std::vector<size_t>{spec.out, spec.in, spec.k, spec.k});
        net.biases.emplace_back(std::vector<size_t>{spec.out});
    }
    net.masks.emplace_back(net.weights.back().shape(), 1.0);
    net.param_names.push_back(name);
}

inline void add_plain_layer(Network& net, LayerSpec spec) {
    net.layers.push_back(spec);
    net.param_slot.push_back(-1);
}

}  // namespace detail

// 784-300-100 fully connected classifier.
inline Network build_lenet300100() {
    Network net;
    net.arch = "lenet300";
    detail::add_param_layer(net, LayerSpec::dense(784, 300), "fc1");
    detail::add_plain_layer(net, LayerSpec::relu_layer());
    detail::add_param_layer(net, LayerSpec::dense(300, 100), "fc2");
    detail::add_plain_layer(net, LayerSpec::relu_layer());
    detail::add_param_layer(net, LayerSpec::dense(100, 10), "fc3");
    return net;
}

// LeNet-5 variant with the 20-50-800-500 structure.
inline Network build_lenet5() {
    Network net;
    net.arch = "lenet5";
    detail::add_param_layer(net, LayerSpec::conv(1, 20, 5), "conv1");
    detail::add_plain_layer(net, LayerSpec::maxpool2());
    detail::add_plain_layer(net, LayerSpec::relu_layer());
    detail::add_param_layer(net, LayerSpec::conv(20, 50, 5), "conv2");
    detail::add_plain_layer(net, LayerSpec::maxpool2());
    detail::add_plain_layer(net, LayerSpec::relu_layer());
    detail::add_plain_layer(net, LayerSpec::flatten());
    detail::add_param_layer(net, LayerSpec::dense(800, 500), "fc1");
    detail::add_plain_layer(net, LayerSpec::relu_layer());
    detail::add_param_layer(net, LayerSpec::dense(500, 10), "fc2");
    return net;
}

// Group decomposition of one parametric layer's weight tensor, by flat index.
// Conv [C_out x C_in x k x k]: filter_wise groups one output channel's slab,
// channel_wise one input channel's slices. Dense [out x in]: fc_rows groups a
// row (one output neuron), fc_columns a column (one input neuron).
inline GroupScheme group_view(const Network& net, size_t layer, GroupKind kind) {
    if (layer >= net.layers.size()) {
        throw ArgumentError("layer index " + std::to_string(layer) + " out of range");
    }
    const LayerSpec& spec = net.layers[layer];
    if (!spec.parametric()) {
        throw ArgumentError("group_view on non-parametric layer " +
                            std::string(layer_kind_name(spec.kind)));
    }
    const size_t slot = static_cast<size_t>(net.param_slot[layer]);
    const Tensor& w = net.weights[slot];
    GroupScheme scheme;
    scheme.kind = kind;
    scheme.tensor_numel = w.numel();
    if (spec.kind == LayerKind::Dense) {
        const size_t out = spec.out, in = spec.in;
        if (kind == GroupKind::FcRows) {
            scheme.groups.resize(out);
            for (size_t r = 0; r < out; ++r) {
                scheme.groups[r].resize(in);
                for (size_t c = 0; c < in; ++c) {
                    scheme.groups[r][c] = static_cast<uint32_t>(r * in + c);
                }
            }
        } else if (kind == GroupKind::FcColumns) {
            scheme.groups.resize(in);
            for (size_t c = 0; c < in; ++c) {
                scheme.groups[c].resize(out);
                for (size_t r = 0; r < out; ++r) {
                    scheme.groups[c][r] = static_cast<uint32_t>(r * in + c);
                }
            }
        } else {
            throw ArgumentError("dense layer supports fc_rows/fc_columns grouping only");
        }
    } else {
        const size_t cout = spec.out, cin = spec.in, kk = spec.k * spec.k;
        if (kind == GroupKind::FilterWise) {
            scheme.groups.resize(cout);
            for (size_t n = 0; n < cout; ++n) {
                scheme.groups[n].resize(cin * kk);
                for (size_t j = 0; j < cin * kk; ++j) {
                    scheme.groups[n][j] = static_cast<uint32_t>(n * cin * kk + j);
                }
            }
        } else if (kind == GroupKind::ChannelWise) {
            scheme.groups.resize(cin);
            for (size_t c = 0; c < cin; ++c) {
                scheme.groups[c].resize(cout * kk);
                size_t j = 0;
                for (size_t n = 0; n < cout; ++n) {
                    for (size_t e = 0; e < kk; ++e) {
                        scheme.groups[c][j++] = static_cast<uint32_t>((n * cin + c) * kk + e);
                    }
                }
            }
        } else {
            throw ArgumentError("conv layer supports filter_wise/channel_wise grouping only");
        }
    }
    scheme.validate();
    return scheme;
}

}  // namespace deephoyer
