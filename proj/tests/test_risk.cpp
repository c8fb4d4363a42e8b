#include <doctest.h>

#include <cmath>

#include "issl/risk.hpp"
#include "issl/rng.hpp"

using namespace issl;

namespace {

// Deterministic equiprobable world: one input per class, identity labels.
struct DetWorld {
    EquivalenceRelation eq;
    Task task;
};

DetWorld equiprobable_world(int c) {
    std::vector<int> ids(static_cast<std::size_t>(c));
    for (int i = 0; i < c; ++i) ids[static_cast<std::size_t>(i)] = i;
    EquivalenceRelation eq(ids, c);
    Eigen::MatrixXd cond = Eigen::MatrixXd::Identity(c, c);
    return DetWorld{eq, Task(InputDistribution::uniform(c), cond)};
}

Task binary_det_task(const EquivalenceRelation& eq, const std::vector<int>& class_labels) {
    return task_from_labeling(InvariantLabeling(class_labels, 2), eq,
                              InputDistribution::uniform(eq.size()));
}

Dataset dataset_of(std::vector<std::pair<int, int>> items) {
    Dataset d;
    d.items = std::move(items);
    return d;
}

}  // namespace

TEST_CASE("sample_dataset") {
    DetWorld w = equiprobable_world(4);
    CHECK(sample_dataset(w.task, 0, 1).size() == 0);
    SUBCASE("point mass draws one input") {
        Eigen::VectorXd p(3);
        p << 0.0, 1.0, 0.0;
        Eigen::MatrixXd cond(3, 2);
        cond << 1, 0, 0, 1, 1, 0;
        Task t(InputDistribution(p), cond);
        Dataset ds = sample_dataset(t, 5, 7);
        for (const auto& [x, y] : ds.items) {
            CHECK(x == 1);
            CHECK(y == 1);
        }
    }
    SUBCASE("seed determinism") {
        Dataset a = sample_dataset(w.task, 20, 42);
        Dataset b = sample_dataset(w.task, 20, 42);
        CHECK(a.items == b.items);
    }
}

TEST_CASE("construct_bad_erm") {
    EquivalenceRelation eq{{0, 0, 1, 1}, 2};
    SUBCASE("all classes seen gives the Bayes labeling") {
        Task t = binary_det_task(eq, {0, 1});
        InvariantLabeling l = construct_bad_erm(t, eq, dataset_of({{0, 0}, {2, 1}}));
        CHECK(l.label_of_class == std::vector<int>{0, 1});
    }
    SUBCASE("unseen deterministic class gets the flipped label") {
        Task t = binary_det_task(eq, {0, 1});
        InvariantLabeling l = construct_bad_erm(t, eq, dataset_of({{0, 0}}));
        CHECK(l.label_of_class == std::vector<int>{0, 0});
    }
    SUBCASE("unseen stochastic class gets the argmin label") {
        Eigen::MatrixXd cond(4, 2);
        cond << 0.7, 0.3, 0.7, 0.3, 0.2, 0.8, 0.2, 0.8;
        Task t(InputDistribution::uniform(4), cond);
        InvariantLabeling l = construct_bad_erm(t, eq, dataset_of({{2, 1}}));
        CHECK(l.label_of_class == std::vector<int>{1, 1});
    }
}

TEST_CASE("excess_risk_closed_form") {
    SUBCASE("all classes seen") {
        DetWorld w = equiprobable_world(4);
        Dataset ds = dataset_of({{0, 0}, {1, 1}, {2, 2}, {3, 3}});
        CHECK(excess_risk_closed_form(w.task, w.eq, ds) == 0.0);
    }
    SUBCASE("one unseen equiprobable deterministic class") {
        DetWorld w = equiprobable_world(4);
        Dataset ds = dataset_of({{0, 0}, {1, 1}, {2, 2}});
        CHECK(excess_risk_closed_form(w.task, w.eq, ds) == doctest::Approx(0.25));
    }
    SUBCASE("weighted unseen classes add up") {
        EquivalenceRelation eq{{0, 1, 2}, 3};
        Eigen::VectorXd p(3);
        p << 0.5, 0.3, 0.2;
        Eigen::MatrixXd cond(3, 2);
        cond << 1, 0, 0, 1, 1, 0;
        Task t(InputDistribution(p), cond);
        CHECK(excess_risk_closed_form(t, eq, dataset_of({{0, 0}})) == doctest::Approx(0.5));
    }
}

TEST_CASE("bad-ERM labeling attains the closed form") {
    Rng rng(31);
    EquivalenceRelation eq{{0, 0, 1, 1, 2, 2, 3, 3}, 4};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> labels(4);
        for (auto& l : labels) l = static_cast<int>(rng.uniform_int(2));
        Task t = binary_det_task(eq, labels);
        Dataset ds = sample_dataset(t, static_cast<int>(rng.uniform_int(5)), rng.next_u64());
        InvariantLabeling bad = construct_bad_erm(t, eq, ds);
        CHECK(labeling_excess_risk(t, eq, bad) ==
              doctest::Approx(excess_risk_closed_form(t, eq, ds)).epsilon(1e-12));
    }
}

TEST_CASE("brute_force_worst_erm") {
    EquivalenceRelation eq{{0, 0, 1, 1, 2, 2, 3, 3}, 4};
    MaximalInvariant m = maximal_invariant(eq);
    Encoder frame = setf_encoder(m, 3);

    SUBCASE("matches the closed form on sampled datasets") {
        Rng rng(17);
        for (int trial = 0; trial < 10; ++trial) {
            std::vector<int> labels(4);
            for (auto& l : labels) l = static_cast<int>(rng.uniform_int(2));
            Task t = binary_det_task(eq, labels);
            Dataset ds =
                sample_dataset(t, static_cast<int>(rng.uniform_int(4)), rng.next_u64());
            RiskReport r = brute_force_worst_erm(frame, t, eq, ds);
            CHECK(r.closed_form == doctest::Approx(excess_risk_closed_form(t, eq, ds)));
            REQUIRE(r.witness_erm.has_value());
            CHECK(labeling_excess_risk(t, eq, *r.witness_erm) ==
                  doctest::Approx(r.closed_form));
        }
    }
    SUBCASE("all classes seen leaves only the Bayes labeling") {
        Task t = binary_det_task(eq, {0, 1, 0, 1});
        Dataset ds = dataset_of({{0, 0}, {2, 1}, {4, 0}, {6, 1}});
        RiskReport r = brute_force_worst_erm(frame, t, eq, ds);
        CHECK(r.closed_form == 0.0);
        CHECK(r.witness_erm->label_of_class == std::vector<int>{0, 1, 0, 1});
    }
    SUBCASE("non-invariant encoders are rejected") {
        Encoder crooked = frame;
        crooked.reps(0, 0) += 0.1;
        Task t = binary_det_task(eq, {0, 1, 0, 1});
        CHECK_THROWS_AS((void)brute_force_worst_erm(crooked, t, eq, dataset_of({})),
                        NotSampleOptimalEncoderError);
    }
    SUBCASE("rank-starved encoders are rejected") {
        Encoder truncated{Eigen::MatrixXd(frame.reps.leftCols(2))};
        Task t = binary_det_task(eq, {0, 1, 0, 1});
        CHECK_THROWS_AS((void)brute_force_worst_erm(truncated, t, eq, dataset_of({})),
                        NotSampleOptimalEncoderError);
    }
}

TEST_CASE("expected_excess_risk_exact") {
    SUBCASE("n=0 risks everything") {
        DetWorld w = equiprobable_world(4);
        CHECK(expected_excess_risk_exact(w.task, w.eq, 0) == doctest::Approx(1.0));
    }
    SUBCASE("equiprobable deterministic matches the closed-form law") {
        DetWorld w = equiprobable_world(4);
        CHECK(expected_excess_risk_exact(w.task, w.eq, 3) == doctest::Approx(0.421875));
        for (int c = 2; c <= 12; ++c) {
            DetWorld wc = equiprobable_world(c);
            for (long n = 0; n <= 30; ++n)
                CHECK(std::abs(expected_excess_risk_exact(wc.task, wc.eq, n) -
                               worst_case_rate(c, n)) <= 1e-12);
        }
    }
    SUBCASE("weighted classes") {
        EquivalenceRelation eq{{0, 1, 2}, 3};
        Eigen::VectorXd p(3);
        p << 0.5, 0.3, 0.2;
        Eigen::MatrixXd cond(3, 2);
        cond << 1, 0, 0, 1, 1, 0;
        Task t(InputDistribution(p), cond);
        CHECK(expected_excess_risk_exact(t, eq, 2) ==
              doctest::Approx(0.5 * 0.25 + 0.3 * 0.49 + 0.2 * 0.64));
    }
    SUBCASE("monotone non-increasing in n") {
        DetWorld w = equiprobable_world(5);
        double prev = 2.0;
        for (long n = 0; n <= 20; ++n) {
            double r = expected_excess_risk_exact(w.task, w.eq, n);
            CHECK(r <= prev + 1e-15);
            prev = r;
        }
    }
    SUBCASE("coarser partitions are never worse at equal n") {
        for (long n = 0; n <= 10; ++n) {
            double fine = worst_case_rate(8, n);
            double coarse = worst_case_rate(4, n);
            CHECK(coarse <= fine + 1e-15);
        }
    }
}

TEST_CASE("worst_case_rate") {
    CHECK(worst_case_rate(4, 1) == doctest::Approx(0.75));
    CHECK(worst_case_rate(7, 0) == 1.0);
    CHECK(worst_case_rate(2, 3) == doctest::Approx(0.125));
    CHECK_THROWS_AS((void)worst_case_rate(1, 3), ValidationError);
}

TEST_CASE("mc_expected_excess_risk") {
    DetWorld w = equiprobable_world(4);
    SUBCASE("n=0 is deterministic") {
        McEstimate est = mc_expected_excess_risk(w.task, w.eq, 0, 100, 3);
        CHECK(est.mean == doctest::Approx(1.0));
        CHECK(est.stderr_ == doctest::Approx(0.0));
    }
    SUBCASE("agrees with the exact expectation within 4 sigma") {
        Rng rng(91);
        for (int trial = 0; trial < 5; ++trial) {
            int c = 2 + static_cast<int>(rng.uniform_int(5));
            int n = static_cast<int>(rng.uniform_int(8));
            DetWorld wc = equiprobable_world(c);
            McEstimate est = mc_expected_excess_risk(wc.task, wc.eq, n, 4000, rng.next_u64());
            double exact = expected_excess_risk_exact(wc.task, wc.eq, n);
            double slack = 4.0 * est.stderr_ + 1e-12;
            CHECK(std::abs(est.mean - exact) <= slack);
        }
    }
    SUBCASE("reproducible for a fixed seed") {
        McEstimate a = mc_expected_excess_risk(w.task, w.eq, 3, 500, 11);
        McEstimate b = mc_expected_excess_risk(w.task, w.eq, 3, 500, 11);
        CHECK(a.mean == b.mean);
        CHECK(a.stderr_ == b.stderr_);
    }
}

TEST_CASE("coupon_expected_samples") {
    SUBCASE("two fair coupons take three draws") {
        CHECK(coupon_expected_samples(Eigen::VectorXd::Constant(2, 0.5)) ==
              doctest::Approx(3.0));
    }
    SUBCASE("equiprobable matches the harmonic sum") {
        for (int c = 2; c <= 12; ++c) {
            double harmonic = 0.0;
            for (int i = 1; i <= c; ++i) harmonic += 1.0 / i;
            CHECK(std::abs(coupon_expected_samples(Eigen::VectorXd::Constant(c, 1.0 / c)) -
                           c * harmonic) <= 1e-9);
        }
    }
    SUBCASE("degenerate and oversized inputs are rejected") {
        CHECK_THROWS_AS((void)coupon_expected_samples(Eigen::VectorXd::Constant(1, 1.0)),
                        ValidationError);
        CHECK_THROWS_AS(
            (void)coupon_expected_samples(Eigen::VectorXd::Constant(21, 1.0 / 21)),
            CapacityError);
    }
    SUBCASE("weighted asymptotic reduces to the harmonic sum when equiprobable") {
        double harmonic = 0.0;
        for (int i = 1; i <= 10; ++i) harmonic += 1.0 / i;
        CHECK(coupon_weighted_asymptotic(Eigen::VectorXd::Constant(10, 0.1)) ==
              doctest::Approx(10 * harmonic));
    }
    SUBCASE("mc waiting time brackets the exact value") {
        Eigen::VectorXd p(3);
        p << 0.5, 0.3, 0.2;
        double exact = coupon_expected_samples(p);
        McEstimate est = mc_coupon_waiting_time(p, 20000, 5);
        CHECK(std::abs(est.mean - exact) <= 4.0 * est.stderr_);
    }
}
