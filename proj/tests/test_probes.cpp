#include <doctest.h>

#include <cmath>

#include "issl/probes.hpp"
#include "issl/rng.hpp"

using namespace issl;

namespace {

MaximalInvariant mi(std::vector<int> ids, int c) {
    MaximalInvariant m;
    m.m_of = std::move(ids);
    m.num_classes = c;
    return m;
}

long perceptron_budget(int c) { return 10L * (1L << c) * c; }

// C points spanning only C-2 dimensions: a smaller frame plus a midpoint.
Eigen::MatrixXd rank_deficient_points(int c) {
    Eigen::MatrixXd base = setf(c - 1, c - 2).vertices;
    Eigen::MatrixXd pts(c, c - 2);
    pts.topRows(c - 1) = base;
    pts.row(c - 1) = 0.5 * (base.row(0) + base.row(1));
    return pts;
}

}  // namespace

TEST_CASE("linear_separate") {
    SUBCASE("frame vertex against the rest") {
        Eigen::MatrixXd pts = setf(3, 2).vertices;
        auto p = linear_separate(pts, {1, 0, 0}, perceptron_budget(3), 1);
        REQUIRE(p.has_value());
        CHECK(p->binary_logit(pts.row(0).transpose()) > 0.0);
        CHECK(p->binary_logit(pts.row(1).transpose()) < 0.0);
        CHECK(p->binary_logit(pts.row(2).transpose()) < 0.0);
    }
    SUBCASE("identical points with different labels fail") {
        Eigen::MatrixXd pts(2, 2);
        pts << 1, 1, 1, 1;
        CHECK_FALSE(linear_separate(pts, {1, 0}, 200, 1).has_value());
    }
    SUBCASE("constant labeling is realizable with a bias") {
        Eigen::MatrixXd pts = setf(4, 3).vertices;
        auto p = linear_separate(pts, {1, 1, 1, 1}, perceptron_budget(4), 1);
        REQUIRE(p.has_value());
        for (int i = 0; i < 4; ++i) CHECK(p->binary_logit(pts.row(i).transpose()) > 0.0);
    }
}

TEST_CASE("shatterable_rank") {
    CHECK(shatterable_rank(setf(4, 3).vertices));
    SUBCASE("collinear points in high dimension") {
        Eigen::MatrixXd pts(4, 3);
        for (int i = 0; i < 4; ++i) {
            pts.row(i).setZero();
            pts(i, 0) = static_cast<double>(i);
        }
        CHECK_FALSE(shatterable_rank(pts));
    }
    SUBCASE("three collinear points in the plane, with the labeling witness") {
        Eigen::MatrixXd pts(3, 2);
        pts << 0, 0, 1, 1, 2, 2;
        CHECK_FALSE(shatterable_rank(pts));
        CHECK_FALSE(linear_separate(pts, {1, 0, 1}, perceptron_budget(3), 5).has_value());
    }
    SUBCASE("duplicate points are rejected") {
        Eigen::MatrixXd pts(3, 2);
        pts << 1, 0, 1, 0, 0, 1;
        CHECK_THROWS_AS((void)shatterable_rank(pts), DuplicatePointError);
    }
}

TEST_CASE("rank criterion cross-validated against the perceptron") {
    for (int c = 2; c <= 6; ++c) {
        Eigen::MatrixXd frame = setf(c, c - 1).vertices;
        REQUIRE(shatterable_rank(frame));
        for (const auto& l : enumerate_binary_labelings(c)) {
            CAPTURE(c);
            CHECK(linear_separate(frame, l.label_of_class, perceptron_budget(c),
                                  static_cast<std::uint64_t>(c))
                      .has_value());
        }
        if (c >= 3) {
            Eigen::MatrixXd bad = rank_deficient_points(c);
            REQUIRE_FALSE(shatterable_rank(bad));
            bool some_failure = false;
            for (const auto& l : enumerate_binary_labelings(c)) {
                if (!linear_separate(bad, l.label_of_class, perceptron_budget(c),
                                     static_cast<std::uint64_t>(c))
                         .has_value()) {
                    some_failure = true;
                    break;
                }
            }
            CHECK(some_failure);
        }
    }
}

TEST_CASE("m_predictable") {
    EquivalenceRelation eq{{0, 0, 1, 1, 2, 2}, 3};
    MaximalInvariant m = maximal_invariant(eq);
    SUBCASE("one-hot representations, linear probe") {
        auto p = m_predictable(one_hot_encoder(m), m, ProbeFamily::linear(), 500, 3);
        REQUIRE(p.has_value());
        Encoder e = one_hot_encoder(m);
        for (int x = 0; x < e.size(); ++x)
            CHECK(predictor_class(*p, e.reps.row(x).transpose()) ==
                  m.m_of[static_cast<std::size_t>(x)]);
    }
    SUBCASE("constant representations are hopeless") {
        Encoder e{Eigen::MatrixXd::Ones(6, 3)};
        CHECK_FALSE(m_predictable(e, m, ProbeFamily::linear(), 100, 3).has_value());
    }
    SUBCASE("frame encoder at d = C-1") {
        MaximalInvariant m4 = mi({0, 1, 2, 3, 0, 1, 2, 3}, 4);
        Encoder e = setf_encoder(m4, 3);
        auto p = m_predictable(e, m4, ProbeFamily::linear(), 2000, 3);
        REQUIRE(p.has_value());
        for (int x = 0; x < e.size(); ++x)
            CHECK(predictor_class(*p, e.reps.row(x).transpose()) ==
                  m4.m_of[static_cast<std::size_t>(x)]);
    }
    SUBCASE("mlp probe on one-hot representations") {
        auto p = m_predictable(one_hot_encoder(m), m, ProbeFamily::mlp({8}), 5000, 3);
        CHECK(p.has_value());
    }
}

TEST_CASE("kary_from_binary") {
    MaximalInvariant m = mi({0, 0, 1, 1, 2, 2}, 3);
    Encoder e = one_hot_encoder(m);
    std::vector<int> labels(m.m_of.begin(), m.m_of.end());

    SUBCASE("hand-built parts compose exactly") {
        // Merged labeling: classes 1 and 2 share label 1.
        LinearPredictor f_km1;
        f_km1.weights = Eigen::MatrixXd::Zero(3, 2);
        f_km1.weights(0, 0) = 2.0;
        f_km1.weights(1, 1) = 2.0;
        f_km1.weights(2, 1) = 2.0;
        f_km1.bias = Eigen::VectorXd::Zero(2);
        f_km1.bias[1] = -1.0;

        LinearPredictor f2;  // fires exactly on class 2
        f2.weights = Eigen::MatrixXd::Zero(3, 1);
        f2.weights(2, 0) = 2.0;
        f2.bias = Eigen::VectorXd::Constant(1, -1.0);

        LinearPredictor f2p;  // fires exactly on class 1
        f2p.weights = Eigen::MatrixXd::Zero(3, 1);
        f2p.weights(1, 0) = 2.0;
        f2p.bias = Eigen::VectorXd::Constant(1, -1.0);

        LinearPredictor composed = kary_from_binary(f_km1, f2, f2p, e.reps, labels, 3);
        for (int x = 0; x < e.size(); ++x)
            CHECK(composed.predict(e.reps.row(x).transpose()) ==
                  labels[static_cast<std::size_t>(x)]);
    }
    SUBCASE("violated precondition is caught") {
        LinearPredictor f_km1;
        f_km1.weights = Eigen::MatrixXd::Zero(3, 2);
        f_km1.bias = Eigen::VectorXd::Zero(2);
        LinearPredictor wrong;  // fires everywhere
        wrong.weights = Eigen::MatrixXd::Zero(3, 1);
        wrong.bias = Eigen::VectorXd::Constant(1, 1.0);
        CHECK_THROWS_AS((void)kary_from_binary(f_km1, wrong, wrong, e.reps, labels, 3),
                        PreconditionError);
    }
    SUBCASE("degenerate k=2 passthrough") {
        LinearPredictor base;
        base.weights = Eigen::MatrixXd::Random(3, 1);
        base.bias = Eigen::VectorXd::Random(1);
        LinearPredictor same = kary_from_binary(base, base, base, e.reps, labels, 2);
        CHECK(same.weights.isApprox(base.weights));
    }
}

TEST_CASE("recursive k-ary construction reproduces random labelings") {
    Rng rng(123);
    for (int k = 2; k <= 6; ++k) {
        std::vector<int> ids;
        for (int c = 0; c < k; ++c) {
            ids.push_back(c);
            ids.push_back(c);
        }
        Encoder e = setf_encoder(mi(ids, k), k - 1);
        for (int trial = 0; trial < 6; ++trial) {
            std::vector<int> class_labels(static_cast<std::size_t>(k));
            for (int c = 0; c < k; ++c)
                class_labels[static_cast<std::size_t>(c)] =
                    static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
            std::vector<int> labels(ids.size());
            for (std::size_t i = 0; i < ids.size(); ++i)
                labels[i] = class_labels[static_cast<std::size_t>(ids[i])];
            auto composed =
                kary_by_recursion(e.reps, labels, k, perceptron_budget(k), rng.next_u64());
            REQUIRE(composed.has_value());
            for (int x = 0; x < e.size(); ++x)
                CHECK(composed->predict(e.reps.row(x).transpose()) ==
                      labels[static_cast<std::size_t>(x)]);
        }
    }
}

TEST_CASE("sample_optimality_report") {
    EquivalenceRelation eq{{0, 0, 1, 1, 2, 2, 3, 3}, 4};
    MaximalInvariant m = maximal_invariant(eq);
    ProbeFamily linear = ProbeFamily::linear();

    SUBCASE("one-hot encoder passes all three bullets") {
        OptimalityReport r = sample_optimality_report(one_hot_encoder(m), eq, linear, 1e-9,
                                                      2000, 11);
        CHECK(r.invariant);
        CHECK(r.m_predictable);
        CHECK(r.shattered);
        CHECK(r.verdict);
        CHECK(r.effective_dim == 4);
        CHECK(r.image_card == 4);
    }
    SUBCASE("frame encoder passes at d = C-1") {
        OptimalityReport r =
            sample_optimality_report(setf_encoder(m, 3), eq, linear, 1e-9, 2000, 11);
        CHECK(r.verdict);
        CHECK(r.effective_dim == 3);
    }
    SUBCASE("rank-starved encoder fails the dimensionality bullet") {
        Encoder full = setf_encoder(m, 3);
        Encoder truncated{Eigen::MatrixXd(full.reps.leftCols(2))};
        OptimalityReport r = sample_optimality_report(truncated, eq, linear, 1e-9, 2000, 11);
        CHECK(r.invariant);
        CHECK_FALSE(r.shattered);
        CHECK_FALSE(r.verdict);
    }
    SUBCASE("non-invariant but shattered encoder") {
        Encoder e = setf_encoder(m, 3);
        e.reps(0, 0) += 0.05;
        OptimalityReport r = sample_optimality_report(e, eq, linear, 1e-6, 2000, 11);
        CHECK_FALSE(r.invariant);
        CHECK(r.shattered);
        CHECK_FALSE(r.verdict);
    }
    SUBCASE("json shape marks empirical mlp verdicts") {
        OptimalityReport r = sample_optimality_report(one_hot_encoder(m), eq,
                                                      ProbeFamily::mlp({8}), 1e-9, 3000, 11);
        std::string j = report_to_json(r);
        CHECK(j.find("empirical") != std::string::npos);
        OptimalityReport rl = sample_optimality_report(one_hot_encoder(m), eq, linear, 1e-9,
                                                       2000, 11);
        CHECK(report_to_json(rl).find("empirical") == std::string::npos);
    }
}

TEST_CASE("empirical_min_dimension") {
    SUBCASE("binary world needs one dimension") {
        EquivalenceRelation eq{{0, 0, 1, 1}, 2};
        auto d = empirical_min_dimension(eq, ProbeFamily::linear(), {1, 2, 3}, 2, 9);
        REQUIRE(d.has_value());
        CHECK(*d == 1);
    }
    SUBCASE("linear probes need C-1 dimensions") {
        EquivalenceRelation eq{{0, 1, 2, 3, 4}, 5};
        auto d = empirical_min_dimension(eq, ProbeFamily::linear(), {1, 2, 3, 4, 5, 6}, 2, 9);
        REQUIRE(d.has_value());
        CHECK(*d == 4);
    }
    SUBCASE("sentinel when the range is too small") {
        EquivalenceRelation eq{{0, 1, 2, 3, 4}, 5};
        CHECK_FALSE(
            empirical_min_dimension(eq, ProbeFamily::linear(), {1, 2}, 2, 9).has_value());
    }
    SUBCASE("an mlp probe needs no more dimensions than linear") {
        EquivalenceRelation eq{{0, 1, 2, 3}, 4};
        auto lin = empirical_min_dimension(eq, ProbeFamily::linear(), {1, 2, 3, 4}, 2, 9);
        auto mlp = empirical_min_dimension(eq, ProbeFamily::mlp({10}), {1, 2, 3, 4}, 2, 9);
        REQUIRE(lin.has_value());
        REQUIRE(mlp.has_value());
        CHECK(*mlp <= *lin);
    }
}
