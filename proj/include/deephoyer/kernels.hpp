#pragma once

#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

#include "deephoyer/errors.hpp"
#include "deephoyer/tensor.hpp"

// Forward/backward compute kernels: matrix multiply, valid-padding stride-1
// 2-D convolution, 2x2 max pooling, ReLU, softmax cross-entropy. All pure
// functions on Tensors; every reduction has a fixed order so repeated runs
// are bit-identical.

namespace deephoyer {

inline void require_matrix(const Tensor& t, const char* name) {
    if (t.rank() != 2) {
        throw DimensionError(std::string(name) + " must be 2-D, got " + t.shape_string());
    }
}

// C[m x n] = A[m x k] * B[k x n]
inline Tensor matmul(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul A");
    require_matrix(b, "matmul B");
    if (a.dim(1) != b.dim(0)) {
        throw DimensionError("matmul inner dimensions disagree: " + a.shape_string() +
                             " x " + b.shape_string());
    }
    const size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        double* crow = pc + i * n;
        for (size_t kk = 0; kk < k; ++kk) {
            const double av = pa[i * k + kk];
            const double* brow = pb + kk * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

// C[m x n] = A[m x k] * B[n x k]^T  (dot products of rows)
inline Tensor matmul_nt(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_nt A");
    require_matrix(b, "matmul_nt B");
    if (a.dim(1) != b.dim(1)) {
        throw DimensionError("matmul_nt inner dimensions disagree: " + a.shape_string() +
                             " x " + b.shape_string() + "^T");
    }
    const size_t m = a.dim(0), k = a.dim(1), n = b.dim(0);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
#pragma omp parallel for schedule(static)
    for (long long i = 0; i < static_cast<long long>(m); ++i) {
        const double* arow = pa + i * k;
        for (size_t j = 0; j < n; ++j) {
            const double* brow = pb + j * k;
            double s = 0.0;
            // simd reduction fixes a lane-wise summation order at compile
            // time; results stay bit-identical across runs of one binary.
#pragma omp simd reduction(+ : s)
            for (size_t kk = 0; kk < k; ++kk) s += arow[kk] * brow[kk];
            pc[i * n + j] = s;
        }
    }
    return c;
}

// C[m x n] = A[k x m]^T * B[k x n]
inline Tensor matmul_tn(const Tensor& a, const Tensor& b) {
    require_matrix(a, "matmul_tn A");
    require_matrix(b, "matmul_tn B");
    if (a.dim(0) != b.dim(0)) {
        throw DimensionError("matmul_tn inner dimensions disagree: " + a.shape_string() +
                             "^T x " + b.shape_string());
    }
    const size_t k = a.dim(0), m = a.dim(1), n = b.dim(1);
    Tensor c({m, n});
    const double* pa = a.data();
    const double* pb = b.data();
    double* pc = c.data();
    for (size_t kk = 0; kk < k; ++kk) {
        const double* arow = pa + kk * m;
        const double* brow = pb + kk * n;
        for (size_t i = 0; i < m; ++i) {
            const double av = arow[i];
            double* crow = pc + i * n;
            for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
    return c;
}

inline void require_conv_shapes(const Tensor& input, const Tensor& kernels,
                                const Tensor* bias) {
    if (input.rank() != 3) {
        throw DimensionError("conv2d input must be [C_in x H x W], got " + input.shape_string());
    }
    if (kernels.rank() != 4) {
        throw DimensionError("conv2d kernels must be [C_out x C_in x k x k], got " +
                             kernels.shape_string());
    }
    if (kernels.dim(2) != kernels.dim(3)) {
        throw DimensionError("conv2d kernels must be square, got " + kernels.shape_string());
    }
    if (kernels.dim(1) != input.dim(0)) {
        throw DimensionError("conv2d channel mismatch: input " + input.shape_string() +
                             " vs kernels " + kernels.shape_string());
    }
    const size_t k = kernels.dim(2);
    if (k > input.dim(1) || k > input.dim(2)) {
        throw DimensionError("conv2d kernel " + kernels.shape_string() +
                             " larger than input " + input.shape_string());
    }
    if (bias && (bias->rank() != 1 || bias->dim(0) != kernels.dim(0))) {
        throw DimensionError("conv2d bias must be [C_out], got " + bias->shape_string());
    }
}

// Cross-correlation, valid padding, stride 1.
inline Tensor conv2d_forward(const Tensor& input, const Tensor& kernels, const Tensor& bias) {
    require_conv_shapes(input, kernels, &bias);
    const size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const size_t cout = kernels.dim(0), k = kernels.dim(2);
    const size_t ho = h - k + 1, wo = w - k + 1;
    Tensor out({cout, ho, wo});
    for (size_t co = 0; co < cout; ++co) {
        for (size_t y = 0; y < ho; ++y) {
            for (size_t x = 0; x < wo; ++x) {
                double s = bias[co];
                for (size_t ci = 0; ci < cin; ++ci) {
                    for (size_t dy = 0; dy < k; ++dy) {
                        const double* irow = input.data() + (ci * h + y + dy) * w + x;
                        const double* krow = kernels.data() + ((co * cin + ci) * k + dy) * k;
                        for (size_t dx = 0; dx < k; ++dx) s += irow[dx] * krow[dx];
                    }
                }
                out.at3(co, y, x) = s;
            }
        }
    }
    return out;
}

struct Conv2dGrads {
    Tensor grad_input;
    Tensor grad_kernels;
    Tensor grad_bias;
};

inline Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernels,
                                   const Tensor& grad_out) {
    require_conv_shapes(input, kernels, nullptr);
    const size_t cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const size_t cout = kernels.dim(0), k = kernels.dim(2);
    const size_t ho = h - k + 1, wo = w - k + 1;
    if (grad_out.rank() != 3 || grad_out.dim(0) != cout || grad_out.dim(1) != ho ||
        grad_out.dim(2) != wo) {
        throw DimensionError("conv2d grad_out shape " + grad_out.shape_string() +
                             " inconsistent with forward output");
    }
    Conv2dGrads g{Tensor(input.shape()), Tensor(kernels.shape()), Tensor({cout})};
    for (size_t co = 0; co < cout; ++co) {
        for (size_t y = 0; y < ho; ++y) {
            for (size_t x = 0; x < wo; ++x) {
                const double go = grad_out.at3(co, y, x);
                g.grad_bias[co] += go;
                for (size_t ci = 0; ci < cin; ++ci) {
                    for (size_t dy = 0; dy < k; ++dy) {
                        const double* irow = input.data() + (ci * h + y + dy) * w + x;
                        double* girow = g.grad_input.data() + (ci * h + y + dy) * w + x;
                        const double* krow = kernels.data() + ((co * cin + ci) * k + dy) * k;
                        double* gkrow = g.grad_kernels.data() + ((co * cin + ci) * k + dy) * k;
                        for (size_t dx = 0; dx < k; ++dx) {
                            gkrow[dx] += go * irow[dx];
                            girow[dx] += go * krow[dx];
                        }
                    }
                }
            }
        }
    }
    return g;
}

struct MaxPoolResult {
    Tensor output;
    std::vector<size_t> argmax;  // flat index into the input, per output cell
};

// 2x2 non-overlapping max; ties broken by lowest row-major index.
inline MaxPoolResult maxpool2x2(const Tensor& input) {
    if (input.rank() != 3) {
        throw DimensionError("maxpool2x2 input must be [C x H x W], got " + input.shape_string());
    }
    const size_t c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h % 2 != 0 || w % 2 != 0) {
        throw DimensionError("maxpool2x2 requires even spatial dims, got " + input.shape_string());
    }
    MaxPoolResult r{Tensor({c, h / 2, w / 2}), {}};
    r.argmax.resize(c * (h / 2) * (w / 2));
    size_t o = 0;
    for (size_t ci = 0; ci < c; ++ci) {
        for (size_t y = 0; y + 1 < h; y += 2) {
            for (size_t x = 0; x + 1 < w; x += 2) {
                size_t best = (ci * h + y) * w + x;
                double bv = input[best];
                const size_t cand[3] = {(ci * h + y) * w + x + 1, (ci * h + y + 1) * w + x,
                                        (ci * h + y + 1) * w + x + 1};
                for (size_t idx : cand) {
                    if (input[idx] > bv) {
                        bv = input[idx];
                        best = idx;
                    }
                }
                r.output[o] = bv;
                r.argmax[o] = best;
                ++o;
            }
        }
    }
    return r;
}

inline Tensor maxpool2x2_backward(const std::vector<size_t>& argmax,
                                  const std::vector<size_t>& input_shape,
                                  const Tensor& grad_out) {
    if (grad_out.numel() != argmax.size()) {
        throw DimensionError("maxpool2x2_backward grad_out " + grad_out.shape_string() +
                             " does not match recorded argmax count");
    }
    Tensor gi(input_shape);
    for (size_t o = 0; o < argmax.size(); ++o) gi[argmax[o]] += grad_out[o];
    return gi;
}

inline Tensor relu(const Tensor& x) {
    Tensor y = x;
    for (double& v : y.vec()) v = v > 0.0 ? v : 0.0;
    return y;
}

// Subgradient at 0 taken as 0.
inline Tensor relu_backward(const Tensor& x, const Tensor& grad_out) {
    if (!x.same_shape(grad_out)) {
        throw DimensionError("relu_backward shape mismatch: " + x.shape_string() + " vs " +
                             grad_out.shape_string());
    }
    Tensor gi = Tensor(x.shape());
    for (size_t i = 0; i < x.numel(); ++i) gi[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
    return gi;
}

// loss = -log softmax(logits)[label]; grad = softmax - one_hot. Stable via
// max-shift.
inline std::pair<double, Tensor> softmax_cross_entropy(const Tensor& logits, int label) {
    if (logits.rank() != 1) {
        throw DimensionError("softmax_cross_entropy logits must be 1-D, got " +
                             logits.shape_string());
    }
    const size_t c = logits.dim(0);
    if (label < 0 || static_cast<size_t>(label) >= c) {
        throw ArgumentError("label " + std::to_string(label) + " outside [0, " +
                            std::to_string(c) + ")");
    }
    double mx = logits[0];
    for (size_t i = 1; i < c; ++i) mx = std::max(mx, logits[i]);
    double sum = 0.0;
    Tensor grad({c});
    for (size_t i = 0; i < c; ++i) {
        grad[i] = std::exp(logits[i] - mx);
        sum += grad[i];
    }
    const double loss = std::log(sum) - (logits[static_cast<size_t>(label)] - mx);
    for (size_t i = 0; i < c; ++i) grad[i] /= sum;
    grad[static_cast<size_t>(label)] -= 1.0;
    return {loss, std::move(grad)};
}

}  // namespace deephoyer
