#include <doctest.h>

#include <cmath>

#include "issl/rng.hpp"
#include "issl/tasks.hpp"

using namespace issl;

namespace {

Task binary_task(const Eigen::VectorXd& px, std::vector<double> p1) {
    Eigen::MatrixXd cond(static_cast<int>(p1.size()), 2);
    for (std::size_t i = 0; i < p1.size(); ++i) {
        cond(static_cast<int>(i), 0) = 1.0 - p1[i];
        cond(static_cast<int>(i), 1) = p1[i];
    }
    return Task(InputDistribution(px), cond);
}

}  // namespace

TEST_CASE("most_likely_label") {
    Eigen::VectorXd u4 = Eigen::VectorXd::Constant(4, 0.25);
    SUBCASE("deterministic rows") {
        Task t = binary_task(u4, {0.0, 0.0, 1.0, 1.0});
        CHECK(most_likely_label(t) == std::vector<int>{0, 0, 1, 1});
    }
    SUBCASE("majority rows") {
        Task t = binary_task(u4, {0.4, 0.4, 0.6, 0.6});
        CHECK(most_likely_label(t) == std::vector<int>{0, 0, 1, 1});
    }
    SUBCASE("ties are hard errors") {
        Task t = binary_task(u4, {0.5, 0.4, 0.4, 0.4});
        CHECK_THROWS_AS((void)most_likely_label(t), TieError);
    }
}

TEST_CASE("is_invariant_task") {
    Eigen::VectorXd u4 = Eigen::VectorXd::Constant(4, 0.25);
    EquivalenceRelation eq{{0, 0, 1, 1}, 2};
    CHECK(is_invariant_task(binary_task(u4, {0.0, 0.0, 1.0, 1.0}), eq));
    CHECK_FALSE(is_invariant_task(binary_task(u4, {0.0, 1.0, 1.0, 1.0}), eq));
    // Stochastic rows whose argmax is constant per class.
    CHECK(is_invariant_task(binary_task(u4, {0.3, 0.2, 0.9, 0.7}), eq));
}

TEST_CASE("task_from_labeling") {
    Eigen::VectorXd u4 = Eigen::VectorXd::Constant(4, 0.25);
    EquivalenceRelation eq{{0, 0, 1, 1}, 2};
    SUBCASE("identity labels") {
        Task t = task_from_labeling(InvariantLabeling({0, 1}, 2), eq, InputDistribution(u4));
        CHECK(most_likely_label(t) == std::vector<int>{0, 0, 1, 1});
        CHECK(is_invariant_task(t, eq));
    }
    SUBCASE("swapped labels") {
        Task t = task_from_labeling(InvariantLabeling({1, 0}, 2), eq, InputDistribution(u4));
        CHECK(most_likely_label(t) == std::vector<int>{1, 1, 0, 0});
    }
    SUBCASE("merging labels across classes") {
        EquivalenceRelation eq3{{0, 0, 1, 1, 2, 2}, 3};
        Task t = task_from_labeling(InvariantLabeling({0, 1, 0}, 2), eq3,
                                    InputDistribution::uniform(6));
        CHECK(most_likely_label(t) == std::vector<int>{0, 0, 1, 1, 0, 0});
    }
}

TEST_CASE("enumerate_binary_labelings") {
    SUBCASE("C=2 gives the four labelings in lexicographic order") {
        auto all = enumerate_binary_labelings(2);
        REQUIRE(all.size() == 4);
        CHECK(all[0].label_of_class == std::vector<int>{0, 0});
        CHECK(all[1].label_of_class == std::vector<int>{0, 1});
        CHECK(all[2].label_of_class == std::vector<int>{1, 0});
        CHECK(all[3].label_of_class == std::vector<int>{1, 1});
    }
    SUBCASE("C=3 gives 8") { CHECK(enumerate_binary_labelings(3).size() == 8); }
    SUBCASE("C=25 trips the guard") {
        CHECK_THROWS_AS(BinaryLabelingStream(25), CapacityError);
    }
}

TEST_CASE("bayes_error") {
    Eigen::VectorXd u4 = Eigen::VectorXd::Constant(4, 0.25);
    CHECK(bayes_error(binary_task(u4, {0.0, 0.0, 1.0, 1.0})) == doctest::Approx(0.0));
    CHECK(bayes_error(binary_task(u4, {0.3, 0.3, 0.3, 0.3})) == doctest::Approx(0.3));
    Eigen::VectorXd half(2);
    half << 0.5, 0.5;
    CHECK(bayes_error(binary_task(half, {0.1, 0.4})) == doctest::Approx(0.25));
}

TEST_CASE("labelings materialize to invariant zero-noise tasks") {
    EquivalenceRelation eq{{0, 1, 1, 2, 2, 2}, 3};
    InputDistribution px = InputDistribution::uniform(6);
    for (const auto& l : enumerate_binary_labelings(3)) {
        Task t = task_from_labeling(l, eq, px);
        CHECK(is_invariant_task(t, eq));
        CHECK(bayes_error(t) == doctest::Approx(0.0));
    }
}

TEST_CASE("invariant labels factor through the maximal invariant") {
    Rng rng(77);
    EquivalenceRelation eq{{0, 0, 1, 2, 2, 1}, 3};
    MaximalInvariant m = maximal_invariant(eq);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<int> lab(3);
        for (int c = 0; c < 3; ++c) lab[static_cast<std::size_t>(c)] =
            static_cast<int>(rng.uniform_int(2));
        Task t = task_from_labeling(InvariantLabeling(lab, 2), eq,
                                    InputDistribution::uniform(6));
        std::vector<int> labels = most_likely_label(t);
        // Build the class-level factor from the first member, then verify it
        // reproduces every input's label.
        std::vector<int> factor(static_cast<std::size_t>(m.num_classes), -1);
        for (int x = 0; x < 6; ++x) {
            int c = m.m_of[static_cast<std::size_t>(x)];
            if (factor[static_cast<std::size_t>(c)] == -1)
                factor[static_cast<std::size_t>(c)] = labels[static_cast<std::size_t>(x)];
        }
        for (int x = 0; x < 6; ++x)
            CHECK(labels[static_cast<std::size_t>(x)] ==
                  factor[static_cast<std::size_t>(m.m_of[static_cast<std::size_t>(x)])]);
    }
}

TEST_CASE("task json round trip") {
    Eigen::VectorXd px(3);
    px << 0.2, 0.3, 0.5;
    Eigen::MatrixXd cond(3, 2);
    cond << 0.9, 0.1, 0.2, 0.8, 0.4, 0.6;
    Task t(InputDistribution(px), cond);
    Task back = task_from_json(task_to_json(t));
    CHECK(back.px.pmf.isApprox(t.px.pmf));
    CHECK(back.cond.isApprox(t.cond));
}
