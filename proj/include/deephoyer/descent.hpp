#pragma once

#include <cmath>
#include <cstdio>
#include <ostream>
#include <vector>

#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"
#include "deephoyer/tensor.hpp"

// Pure-penalty gradient descent on the Hoyer-Square regularizer from a
// standard-normal start. Small coordinates are driven to zero while
// coordinates above the induced threshold sum(w^2)/sum(|w|) are pushed away
// from it; the threshold adapts upward as coordinates die off.

namespace deephoyer {

struct DescentResult {
    std::vector<double> initial;
    std::vector<double> final_w;
};

inline double hs_trimming_threshold(const Tensor& w) {
    double l1 = 0.0, sq = 0.0;
    for (double v : w.vec()) {
        l1 += std::abs(v);
        sq += v * v;
    }
    return l1 == 0.0 ? 0.0 : sq / l1;
}

// Runs `steps` iterations of w <- w - lr * grad(HS). When csv is non-null,
// writes one row per state (steps+1 rows): step, w_0..w_{dim-1}, threshold.
inline DescentResult hs_descent_path(uint64_t seed, size_t dim, size_t steps, double lr,
                                     std::ostream* csv) {
    Rng rng(seed);
    Tensor w({dim});
    for (size_t i = 0; i < dim; ++i) w[i] = rng.normal();
    DescentResult result;
    result.initial = w.vec();

    RegularizerSpec hs;
    hs.kind = RegKind::HoyerSquare;

    char buf[64];
    const auto emit = [&](size_t step) {
        if (!csv) return;
        *csv << step;
        for (size_t i = 0; i < dim; ++i) {
            std::snprintf(buf, sizeof buf, "%.12g", w[i]);
            *csv << "," << buf;
        }
        std::snprintf(buf, sizeof buf, "%.12g", hs_trimming_threshold(w));
        *csv << "," << buf << "\n";
    };

    if (csv) {
        *csv << "step";
        for (size_t i = 0; i < dim; ++i) *csv << ",w" << i;
        *csv << ",threshold\n";
    }
    emit(0);
    for (size_t s = 1; s <= steps; ++s) {
        Tensor grad = regularizer_gradient(hs, w);
        for (size_t i = 0; i < dim; ++i) w[i] -= lr * grad[i];
        emit(s);
    }
    result.final_w = w.vec();
    return result;
}

}  // namespace deephoyer
