#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <memory>

#include "deephoyer/descent.hpp"
#include "deephoyer/gradcheck.hpp"
#include "deephoyer/regularizers.hpp"
#include "deephoyer/rng.hpp"

using namespace deephoyer;

namespace {

RegularizerSpec spec_of(RegKind kind) {
    RegularizerSpec s;
    s.kind = kind;
    return s;
}

std::shared_ptr<GroupScheme> scheme_of(std::vector<std::vector<uint32_t>> groups, size_t numel) {
    auto s = std::make_shared<GroupScheme>();
    s->groups = std::move(groups);
    s->tensor_numel = numel;
    s->validate();
    return s;
}

}  // namespace

TEST_CASE("hoyer measure endpoints and hand value") {
    CHECK(hoyer_measure(tensor1({0, 0, 3, 0})) == 1.0);
    CHECK(std::abs(hoyer_measure(tensor1({2, 2, 2, 2}))) <= 1e-15);

    const double expected = (std::sqrt(3.0) - 5.0 / 3.0) / (std::sqrt(3.0) - 1.0);
    CHECK(std::abs(hoyer_measure(tensor1({1, 2, 2})) - expected) <= 1e-15);

    CHECK_THROWS_AS(hoyer_measure(tensor1({0, 0, 0})), DegenerateInputError);
    CHECK_THROWS_AS(hoyer_measure(tensor1({5})), DegenerateInputError);
}

TEST_CASE("regularizer values at hand-computed points") {
    CHECK(regularizer_value(spec_of(RegKind::HoyerSquare), tensor1({3, 0, 0, 0})) == 1.0);
    CHECK(regularizer_value(spec_of(RegKind::HoyerSquare), tensor1({1, 1, 1, 1})) == 4.0);
    CHECK(std::abs(regularizer_value(spec_of(RegKind::HoyerSquare), tensor1({1, 2, 2})) -
                   25.0 / 9.0) <= 1e-15);

    CHECK(regularizer_value(spec_of(RegKind::L1), tensor1({1, -2, 2})) == 5.0);
    CHECK(regularizer_value(spec_of(RegKind::L2), tensor1({3, -4})) == 5.0);
    CHECK(std::abs(regularizer_value(spec_of(RegKind::Hoyer), tensor1({1, 2, 2})) - 5.0 / 3.0) <=
          1e-15);
    CHECK(regularizer_value(spec_of(RegKind::TransformedL1), tensor1({1})) == 1.0);

    // All-zero input: the 0/0 limit is taken as 0 for the scale-invariant kinds.
    CHECK(regularizer_value(spec_of(RegKind::Hoyer), tensor1({0, 0})) == 0.0);
    CHECK(regularizer_value(spec_of(RegKind::HoyerSquare), tensor1({0, 0})) == 0.0);
    RegularizerSpec ghs = spec_of(RegKind::GroupHS);
    ghs.scheme = scheme_of({{0, 1}, {2, 3}}, 4);
    CHECK(regularizer_value(ghs, tensor1({0, 0, 0, 0})) == 0.0);
    Tensor zero_grad = regularizer_gradient(ghs, tensor1({0, 0, 0, 0}));
    for (double v : zero_grad.vec()) CHECK(v == 0.0);
}

TEST_CASE("group-hs values over explicit group norms") {
    RegularizerSpec ghs = spec_of(RegKind::GroupHS);
    ghs.scheme = scheme_of({{0, 1}, {2, 3}}, 4);
    // group norms 5 and 0 -> 25/25
    CHECK(regularizer_value(ghs, tensor1({3, 4, 0, 0})) == 1.0);
    // group norms 5 and 5 -> 100/50
    CHECK(regularizer_value(ghs, tensor1({3, 4, 3, 4})) == 2.0);

    // Scheme built for another tensor size is rejected.
    CHECK_THROWS_AS(regularizer_value(ghs, tensor1({1, 2, 3})), SchemeError);
}

TEST_CASE("spec and scheme validation") {
    RegularizerSpec missing = spec_of(RegKind::GroupHS);
    CHECK_THROWS_AS(regularizer_value(missing, tensor1({1, 2})), SchemeError);

    RegularizerSpec extra = spec_of(RegKind::L1);
    extra.scheme = scheme_of({{0, 1}}, 2);
    CHECK_THROWS_AS(regularizer_value(extra, tensor1({1, 2})), SchemeError);

    RegularizerSpec bad_decay = spec_of(RegKind::L1);
    bad_decay.decay = -1.0;
    CHECK_THROWS_AS(bad_decay.validate(), ArgumentError);

    RegularizerSpec bad_a = spec_of(RegKind::TransformedL1);
    bad_a.tl1_a = 0.0;
    CHECK_THROWS_AS(bad_a.validate(), ArgumentError);

    GroupScheme overlap;
    overlap.tensor_numel = 3;
    overlap.groups = {{0, 1}, {1, 2}};
    CHECK_THROWS_AS(overlap.validate(), SchemeError);

    GroupScheme gap;
    gap.tensor_numel = 3;
    gap.groups = {{0, 1}};
    CHECK_THROWS_AS(gap.validate(), SchemeError);

    GroupScheme empty;
    empty.tensor_numel = 2;
    empty.groups = {{0, 1}, {}};
    CHECK_THROWS_AS(empty.validate(), SchemeError);
}

TEST_CASE("hoyer-square gradient at hand-computed points") {
    Tensor flat = regularizer_gradient(spec_of(RegKind::HoyerSquare), tensor1({1, 1}));
    CHECK(flat[0] == 0.0);
    CHECK(flat[1] == 0.0);

    Tensor g = regularizer_gradient(spec_of(RegKind::HoyerSquare), tensor1({1, 2}));
    CHECK(std::abs(g[0] - 0.48) <= 1e-15);
    CHECK(std::abs(g[1] + 0.24) <= 1e-15);
}

TEST_CASE("every kind matches central finite differences") {
    for (RegKind kind : {RegKind::L1, RegKind::L2, RegKind::Hoyer, RegKind::HoyerSquare,
                         RegKind::GroupHS, RegKind::TransformedL1}) {
        GradCheckItem item = gradcheck_regularizer(kind, 9000 + static_cast<uint64_t>(kind));
        INFO(item.name << " max_rel_err " << item.max_rel_err);
        CHECK(item.max_rel_err <= 1e-6);
    }
}

TEST_CASE("gradcheck corruption hook is detected") {
    GradCheckItem item = gradcheck_regularizer(RegKind::HoyerSquare, 17, 50, 1e-6, true);
    CHECK_FALSE(item.pass);
}

TEST_CASE("range bound for nonzero vectors") {
    Rng rng(100);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 2 + rng.uniform_int(30);
        Tensor w({n});
        for (double& v : w.vec()) v = rng.uniform(-2.0, 2.0);
        if (std::abs(w[0]) < 1e-9) w[0] = 1.0;
        const double hoyer = regularizer_value(spec_of(RegKind::Hoyer), w);
        const double hs = regularizer_value(spec_of(RegKind::HoyerSquare), w);
        CHECK(hoyer >= 1.0 - 1e-12);
        CHECK(hoyer <= std::sqrt(static_cast<double>(n)) + 1e-12);
        CHECK(hs >= 1.0 - 1e-12);
        CHECK(hs <= static_cast<double>(n) + 1e-12);
        // the squared relation, exact up to roundoff
        CHECK(std::abs(hs - hoyer * hoyer) <= 1e-12 * std::max(1.0, hs));
    }
}

TEST_CASE("scale invariance to 1e-12") {
    Rng rng(200);
    RegularizerSpec hoyer = spec_of(RegKind::Hoyer);
    RegularizerSpec hs = spec_of(RegKind::HoyerSquare);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 4 + rng.uniform_int(28);
        Tensor w({n});
        for (double& v : w.vec()) v = rng.uniform(-1.0, 1.0) + (rng.uniform() < 0.5 ? 0.5 : -0.5);
        RegularizerSpec ghs = spec_of(RegKind::GroupHS);
        ghs.scheme = detail::chunk_scheme(n, 3);

        const double alpha = (trial % 2 ? -1.0 : 1.0) * std::pow(10.0, rng.uniform(-3.0, 3.0));
        Tensor scaled({n});
        for (size_t i = 0; i < n; ++i) scaled[i] = alpha * w[i];

        for (const auto* spec : {&hoyer, &hs, &ghs}) {
            const double base = regularizer_value(*spec, w);
            const double after = regularizer_value(*spec, scaled);
            CHECK(std::abs(after - base) <= 1e-12 * std::abs(base));
        }
    }
    // the specific alpha called out in the examples
    Tensor w = tensor1({0.3, -1.2, 0.7, 2.5, -0.4});
    Tensor scaled({5});
    for (size_t i = 0; i < 5; ++i) scaled[i] = 7.3 * w[i];
    CHECK(std::abs(regularizer_value(hs, scaled) - regularizer_value(hs, w)) <=
          1e-12 * regularizer_value(hs, w));
}

TEST_CASE("trimming direction of the hoyer-square gradient") {
    Rng rng(300);
    RegularizerSpec hs = spec_of(RegKind::HoyerSquare);
    for (int trial = 0; trial < 200; ++trial) {
        const size_t n = 3 + rng.uniform_int(20);
        Tensor w({n});
        for (double& v : w.vec()) v = rng.uniform(-2.0, 2.0);
        double l1 = 0.0, sq = 0.0;
        for (double v : w.vec()) {
            l1 += std::abs(v);
            sq += v * v;
        }
        if (l1 == 0.0) continue;
        const double threshold = sq / l1;
        Tensor g = regularizer_gradient(hs, w);
        for (size_t j = 0; j < n; ++j) {
            if (w[j] == 0.0 || std::abs(w[j]) == threshold) continue;
            const double sign_w = w[j] > 0 ? 1.0 : -1.0;
            const double sign_g = g[j] > 0 ? 1.0 : (g[j] < 0 ? -1.0 : 0.0);
            if (std::abs(w[j]) < threshold) {
                CHECK(sign_g == sign_w);  // pushed towards 0 by descent
            } else {
                CHECK(sign_g == -sign_w);  // protected: pushed away from 0
            }
        }
    }
}

TEST_CASE("group-hs with singleton groups equals hoyer-square") {
    Rng rng(400);
    for (int trial = 0; trial < 50; ++trial) {
        const size_t n = 2 + rng.uniform_int(40);
        Tensor w({n});
        for (double& v : w.vec()) v = rng.uniform(-2.0, 2.0);
        RegularizerSpec ghs = spec_of(RegKind::GroupHS);
        ghs.scheme = detail::chunk_scheme(n, 1);
        const double hs = regularizer_value(spec_of(RegKind::HoyerSquare), w);
        CHECK(std::abs(regularizer_value(ghs, w) - hs) <= 1e-12 * std::max(1.0, hs));

        Tensor g_ghs = regularizer_gradient(ghs, w);
        Tensor g_hs = regularizer_gradient(spec_of(RegKind::HoyerSquare), w);
        for (size_t i = 0; i < n; ++i) CHECK(std::abs(g_ghs[i] - g_hs[i]) <= 1e-12);
    }
}

TEST_CASE("pure-penalty descent drives most coordinates to zero") {
    DescentResult r = hs_descent_path(1, 20, 100000, 1e-3, nullptr);
    size_t below = 0;
    size_t argmax = 0;
    for (size_t i = 0; i < 20; ++i) {
        if (std::abs(r.final_w[i]) < 1e-2) ++below;
        if (std::abs(r.initial[i]) > std::abs(r.initial[argmax])) argmax = i;
    }
    CHECK(below >= 15);
    CHECK(std::abs(r.final_w[argmax]) >= 0.5 * std::abs(r.initial[argmax]));
}
