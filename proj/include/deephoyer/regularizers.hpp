#pragma once

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "deephoyer/errors.hpp"
#include "deephoyer/tensor.hpp"

// Sparsity-inducing penalties and their analytic gradients:
//
//   L1            sum |w|
//   L2            sqrt(sum w^2)            (unsquared norm)
//   Hoyer         sum |w| / ||W||_2
//   HoyerSquare   (sum |w|)^2 / sum w^2
//   GroupHS       (sum_g ||w^(g)||_2)^2 / sum_g ||w^(g)||_2^2
//   TransformedL1 sum (a+1)|w| / (a + |w|)
//
// Hoyer, HoyerSquare and GroupHS are scale-invariant; their 0/0 limit at the
// all-zero tensor is defined as 0 with an exact guard, never an epsilon in
// the denominator (an epsilon would break exact scale invariance).
// sign(0) = 0 throughout.

namespace deephoyer {

enum class RegKind { L1, L2, Hoyer, HoyerSquare, GroupHS, TransformedL1 };

inline const char* reg_kind_name(RegKind k) {
    switch (k) {
        case RegKind::L1: return "l1";
        case RegKind::L2: return "l2";
        case RegKind::Hoyer: return "hoyer";
        case RegKind::HoyerSquare: return "hoyer_square";
        case RegKind::GroupHS: return "group_hs";
        case RegKind::TransformedL1: return "transformed_l1";
    }
    return "?";
}

enum class GroupKind { FilterWise, ChannelWise, FcRows, FcColumns };

inline const char* group_kind_name(GroupKind k) {
    switch (k) {
        case GroupKind::FilterWise: return "filter_wise";
        case GroupKind::ChannelWise: return "channel_wise";
        case GroupKind::FcRows: return "fc_rows";
        case GroupKind::FcColumns: return "fc_columns";
    }
    return "?";
}

// A disjoint, covering partition of one weight tensor (flat indices).
struct GroupScheme {
    GroupKind kind = GroupKind::FcRows;
    std::vector<std::vector<uint32_t>> groups;
    size_t tensor_numel = 0;

    // Enforces: groups non-empty, pairwise disjoint, union covers [0, numel).
    void validate() const {
        std::vector<char> seen(tensor_numel, 0);
        size_t covered = 0;
        for (const auto& g : groups) {
            if (g.empty()) throw SchemeError("group scheme contains an empty group");
            for (uint32_t idx : g) {
                if (idx >= tensor_numel) {
                    throw SchemeError("group index " + std::to_string(idx) +
                                      " outside tensor of " + std::to_string(tensor_numel));
                }
                if (seen[idx]) {
                    throw SchemeError("group scheme overlaps at index " + std::to_string(idx));
                }
                seen[idx] = 1;
                ++covered;
            }
        }
        if (covered != tensor_numel) {
            throw SchemeError("group scheme covers " + std::to_string(covered) + " of " +
                              std::to_string(tensor_numel) + " elements");
        }
    }
};

struct RegularizerSpec {
    RegKind kind = RegKind::L1;
    double decay = 0.0;
    double tl1_a = 1.0;
    std::shared_ptr<const GroupScheme> scheme;  // required iff kind == GroupHS

    void validate() const {
        if (decay < 0.0) throw ArgumentError("regularizer decay must be >= 0");
        if (tl1_a <= 0.0) throw ArgumentError("transformed-l1 parameter a must be > 0");
        if (kind == RegKind::GroupHS && !scheme) {
            throw SchemeError("group_hs requires a group scheme");
        }
        if (kind != RegKind::GroupHS && scheme) {
            throw SchemeError(std::string(reg_kind_name(kind)) + " must not carry a group scheme");
        }
    }
};

namespace detail {

inline double sum_abs(const Tensor& w) {
    double s = 0.0;
    for (double v : w.vec()) s += std::abs(v);
    return s;
}

inline double sum_sq(const Tensor& w) {
    double s = 0.0;
    for (double v : w.vec()) s += v * v;
    return s;
}

inline double sign(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

inline void require_scheme_matches(const GroupScheme& s, const Tensor& w) {
    if (s.tensor_numel != w.numel()) {
        throw SchemeError("group scheme built for " + std::to_string(s.tensor_numel) +
                          " elements applied to tensor of " + std::to_string(w.numel()));
    }
}

inline std::vector<double> group_norms(const GroupScheme& s, const Tensor& w) {
    std::vector<double> norms(s.groups.size());
    for (size_t g = 0; g < s.groups.size(); ++g) {
        double sq = 0.0;
        for (uint32_t idx : s.groups[g]) sq += w[idx] * w[idx];
        norms[g] = std::sqrt(sq);
    }
    return norms;
}

}  // namespace detail

// Normalized Hoyer sparsity measure, in [0,1]: 1 for a one-hot vector,
// 0 for an all-equal vector.
inline double hoyer_measure(const Tensor& x) {
    const size_t n = x.numel();
    if (n < 2) {
        throw DegenerateInputError("hoyer_measure needs n >= 2, got " + std::to_string(n));
    }
    const double l1 = detail::sum_abs(x);
    const double l2 = std::sqrt(detail::sum_sq(x));
    if (l2 == 0.0) {
        throw DegenerateInputError("hoyer_measure undefined for the all-zero vector");
    }
    const double rn = std::sqrt(static_cast<double>(n));
    return (rn - l1 / l2) / (rn - 1.0);
}

inline double regularizer_value(const RegularizerSpec& spec, const Tensor& w) {
    spec.validate();
    if (w.numel() == 0) throw ArgumentError("regularizer on empty tensor");
    switch (spec.kind) {
        case RegKind::L1:
            return detail::sum_abs(w);
        case RegKind::L2:
            return std::sqrt(detail::sum_sq(w));
        case RegKind::Hoyer: {
            const double sq = detail::sum_sq(w);
            return sq == 0.0 ? 0.0 : detail::sum_abs(w) / std::sqrt(sq);
        }
        case RegKind::HoyerSquare: {
            const double sq = detail::sum_sq(w);
            if (sq == 0.0) return 0.0;
            const double l1 = detail::sum_abs(w);
            return l1 * l1 / sq;
        }
        case RegKind::GroupHS: {
            detail::require_scheme_matches(*spec.scheme, w);
            const auto norms = detail::group_norms(*spec.scheme, w);
            double s = 0.0, d = 0.0;
            for (double n : norms) {
                s += n;
                d += n * n;
            }
            return d == 0.0 ? 0.0 : s * s / d;
        }
        case RegKind::TransformedL1: {
            const double a = spec.tl1_a;
            double s = 0.0;
            for (double v : w.vec()) s += (a + 1.0) * std::abs(v) / (a + std::abs(v));
            return s;
        }
    }
    throw ArgumentError("unknown regularizer kind");
}

inline Tensor regularizer_gradient(const RegularizerSpec& spec, const Tensor& w) {
    spec.validate();
    if (w.numel() == 0) throw ArgumentError("regularizer on empty tensor");
    Tensor grad(w.shape());
    switch (spec.kind) {
        case RegKind::L1: {
            for (size_t i = 0; i < w.numel(); ++i) grad[i] = detail::sign(w[i]);
            break;
        }
        case RegKind::L2: {
            const double l2 = std::sqrt(detail::sum_sq(w));
            if (l2 == 0.0) break;
            for (size_t i = 0; i < w.numel(); ++i) grad[i] = w[i] / l2;
            break;
        }
        case RegKind::Hoyer: {
            const double sq = detail::sum_sq(w);
            if (sq == 0.0) break;
            const double l2 = std::sqrt(sq);
            const double l1 = detail::sum_abs(w);
            const double inv_l2 = 1.0 / l2;
            const double l1_over_cube = l1 / (sq * l2);
            for (size_t i = 0; i < w.numel(); ++i) {
                grad[i] = detail::sign(w[i]) * inv_l2 - w[i] * l1_over_cube;
            }
            break;
        }
        case RegKind::HoyerSquare: {
            const double sq = detail::sum_sq(w);
            if (sq == 0.0) break;
            const double l1 = detail::sum_abs(w);
            const double scale = 2.0 * l1 / (sq * sq);
            for (size_t i = 0; i < w.numel(); ++i) {
                grad[i] = detail::sign(w[i]) * scale * (sq - std::abs(w[i]) * l1);
            }
            break;
        }
        case RegKind::GroupHS: {
            detail::require_scheme_matches(*spec.scheme, w);
            const auto& groups = spec.scheme->groups;
            const auto norms = detail::group_norms(*spec.scheme, w);
            double s = 0.0, d = 0.0;
            for (double n : norms) {
                s += n;
                d += n * n;
            }
            if (d == 0.0) break;
            const double scale = 2.0 * s / (d * d);
            for (size_t g = 0; g < groups.size(); ++g) {
                if (norms[g] == 0.0) continue;  // limit term is 0 for an all-zero group
                const double factor = scale * (d - norms[g] * s) / norms[g];
                for (uint32_t idx : groups[g]) grad[idx] = w[idx] * factor;
            }
            break;
        }
        case RegKind::TransformedL1: {
            const double a = spec.tl1_a;
            for (size_t i = 0; i < w.numel(); ++i) {
                const double den = a + std::abs(w[i]);
                grad[i] = detail::sign(w[i]) * a * (a + 1.0) / (den * den);
            }
            break;
        }
    }
    return grad;
}

}  // namespace deephoyer
