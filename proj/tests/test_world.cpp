#include <doctest.h>

#include <Eigen/Dense>

#include "issl/rng.hpp"
#include "issl/world.hpp"

using namespace issl;

namespace {

EquivalenceRelation make_eq(std::vector<int> ids, int c) {
    return EquivalenceRelation(std::move(ids), c);
}

Augmentor block_uniform_4() {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
    a.block(0, 0, 2, 2).setConstant(0.5);
    a.block(2, 2, 2, 2).setConstant(0.5);
    return Augmentor(a);
}

}  // namespace

TEST_CASE("maximal_invariant canonical relabeling") {
    CHECK(maximal_invariant(make_eq({0, 0, 1, 1}, 2)).m_of == std::vector<int>{0, 0, 1, 1});
    CHECK(maximal_invariant(make_eq({1, 1, 0, 0}, 2)).m_of == std::vector<int>{0, 0, 1, 1});
    CHECK(maximal_invariant(make_eq({2, 0, 2, 1}, 3)).m_of == std::vector<int>{0, 1, 0, 2});
}

TEST_CASE("maximal_invariant is stable under class-id permutation") {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        int n = 4 + static_cast<int>(rng.uniform_int(6));
        int c = 2 + static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n - 1)));
        std::vector<int> ids(static_cast<std::size_t>(n));
        for (int i = 0; i < c; ++i) ids[static_cast<std::size_t>(i)] = i;  // all classes occur
        for (int i = c; i < n; ++i)
            ids[static_cast<std::size_t>(i)] =
                static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(c)));
        std::vector<int> perm(static_cast<std::size_t>(c));
        for (int i = 0; i < c; ++i) perm[static_cast<std::size_t>(i)] = i;
        rng.shuffle(perm);
        std::vector<int> relabeled(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            relabeled[i] = perm[static_cast<std::size_t>(ids[i])];
        CHECK(maximal_invariant(make_eq(ids, c)).m_of ==
              maximal_invariant(make_eq(relabeled, c)).m_of);
    }
}

TEST_CASE("is_refinement") {
    CHECK(is_refinement(make_eq({0, 1, 2, 3}, 4), make_eq({0, 0, 1, 1}, 2)));
    CHECK_FALSE(is_refinement(make_eq({0, 0, 1, 1}, 2), make_eq({0, 1, 0, 1}, 2)));
    EquivalenceRelation eq = make_eq({0, 0, 1, 1}, 2);
    CHECK(is_refinement(eq, eq));
    CHECK_THROWS_AS((void)is_refinement(eq, make_eq({0, 1, 2, 1, 0}, 3)), SizeMismatchError);
}

TEST_CASE("equivalence_from_augmentor") {
    InputDistribution uniform4 = InputDistribution::uniform(4);

    SUBCASE("identity augmentor keeps singletons") {
        Augmentor a{Eigen::MatrixXd::Identity(4, 4)};
        EquivalenceRelation eq = equivalence_from_augmentor(a, uniform4);
        CHECK(eq.num_classes == 4);
        CHECK(eq.class_of == std::vector<int>{0, 1, 2, 3});
    }
    SUBCASE("block structure") {
        EquivalenceRelation eq = equivalence_from_augmentor(block_uniform_4(), uniform4);
        CHECK(eq.class_of == std::vector<int>{0, 0, 1, 1});
    }
    SUBCASE("chain edges merge transitively") {
        // 0->1, 1->2, 2->2; input 3 is isolated.
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(4, 4);
        a(0, 1) = 1.0;
        a(1, 2) = 1.0;
        a(2, 2) = 1.0;
        a(3, 3) = 1.0;
        EquivalenceRelation eq = equivalence_from_augmentor(Augmentor(a), uniform4);
        CHECK(eq.class_of == std::vector<int>{0, 0, 0, 1});
        CHECK(eq.num_classes == 2);
    }
    SUBCASE("zero-probability inputs stay singletons") {
        Eigen::VectorXd p(4);
        p << 0.5, 0.5, 0.0, 0.0;
        EquivalenceRelation eq =
            equivalence_from_augmentor(block_uniform_4(), InputDistribution(p));
        CHECK(eq.class_of == std::vector<int>{0, 0, 1, 2});
    }
    SUBCASE("rectangular augmentor rejected") {
        Eigen::MatrixXd a = Eigen::MatrixXd::Constant(2, 3, 1.0 / 3.0);
        CHECK_THROWS_AS((void)equivalence_from_augmentor(Augmentor(a),
                                                         InputDistribution::uniform(2)),
                        SizeMismatchError);
    }
}

TEST_CASE("identity partition refines any augmentation partition") {
    Rng rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        int n = 4 + static_cast<int>(rng.uniform_int(5));
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n, n);
        for (int r = 0; r < n; ++r) {
            a(r, r) = 0.5;
            a(r, static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(n)))) += 0.5;
        }
        try {
            EquivalenceRelation components =
                equivalence_from_augmentor(Augmentor(a), InputDistribution::uniform(n));
            if (components.num_classes == n) continue;  // all singletons: identical partitions
            CHECK(is_refinement(EquivalenceRelation::identity(n), components));
        } catch (const ValidationError&) {
            // Graph merged everything into one class; such worlds violate the
            // C >= 2 assumption and are rejected by the partition type.
        }
    }
}

TEST_CASE("check_markov_augmentor") {
    EquivalenceRelation pairs = make_eq({0, 0, 1, 1}, 2);
    CHECK(check_markov_augmentor(block_uniform_4(), pairs, 1e-12));
    CHECK_FALSE(check_markov_augmentor(Augmentor{Eigen::MatrixXd::Identity(4, 4)}, pairs, 1e-9));

    SUBCASE("differences inside tolerance pass") {
        Eigen::MatrixXd a = block_uniform_4().cond;
        a(0, 0) += 1e-12;
        a(0, 1) -= 1e-12;
        CHECK(check_markov_augmentor(Augmentor(a), pairs, 1e-9));
    }
    SUBCASE("graph connectivity does not imply identical rows") {
        Eigen::MatrixXd padded = Eigen::MatrixXd::Zero(4, 4);
        padded(0, 1) = 1.0;
        padded(1, 2) = 1.0;
        padded(2, 2) = 1.0;
        padded(3, 3) = 1.0;
        Augmentor aug(padded);
        EquivalenceRelation merged{{0, 0, 0, 1}, 2};
        CHECK(equivalence_from_augmentor(aug, InputDistribution::uniform(4)).class_of ==
              merged.class_of);
        CHECK_FALSE(check_markov_augmentor(aug, merged, 1e-9));
    }
}

TEST_CASE("class_probabilities") {
    CHECK(class_probabilities(InputDistribution::uniform(4), make_eq({0, 0, 1, 1}, 2))
              .isApprox(Eigen::Vector2d(0.5, 0.5)));
    Eigen::VectorXd p(4);
    p << 0.1, 0.2, 0.3, 0.4;
    Eigen::VectorXd got = class_probabilities(InputDistribution(p), make_eq({0, 1, 0, 1}, 2));
    CHECK(got[0] == doctest::Approx(0.4));
    CHECK(got[1] == doctest::Approx(0.6));
    CHECK(class_probabilities(InputDistribution::uniform(9),
                              make_eq({0, 0, 0, 1, 1, 1, 2, 2, 2}, 3))
              .isApprox(Eigen::Vector3d(1.0 / 3, 1.0 / 3, 1.0 / 3)));

    Rng rng(5);
    for (int trial = 0; trial < 30; ++trial) {
        int n = 3 + static_cast<int>(rng.uniform_int(8));
        Eigen::VectorXd w(n);
        for (int i = 0; i < n; ++i) w[i] = rng.uniform() + 1e-3;
        w /= w.sum();
        std::vector<int> ids(static_cast<std::size_t>(n));
        ids[0] = 0;
        ids[1] = 1;
        for (int i = 2; i < n; ++i)
            ids[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(2));
        Eigen::VectorXd cp = class_probabilities(InputDistribution(w), make_eq(ids, 2));
        CHECK(std::abs(cp.sum() - 1.0) <= 1e-9);
    }
}

TEST_CASE("type invariants") {
    CHECK_THROWS_AS(make_eq({0, 0, 0}, 1), ValidationError);  // C >= 2
    CHECK_THROWS_AS(make_eq({0, 2}, 3), ValidationError);     // C <= |X| and ids in range
    CHECK_THROWS_AS(make_eq({0, 1, 5, 0}, 3), ValidationError);
    CHECK_THROWS_AS(InputSpace(1), ValidationError);
    Eigen::MatrixXd bad = Eigen::MatrixXd::Constant(2, 2, 0.4);
    CHECK_THROWS_AS(Augmentor{bad}, ValidationError);
    Eigen::VectorXd notpmf(2);
    notpmf << 0.7, 0.7;
    CHECK_THROWS_AS(InputDistribution{notpmf}, ValidationError);
}

TEST_CASE("partition and augmentor json round trip") {
    EquivalenceRelation eq = make_eq({2, 0, 2, 1}, 3);
    EquivalenceRelation back = partition_from_json(partition_to_json(eq));
    CHECK(back.class_of == eq.class_of);
    CHECK(back.num_classes == eq.num_classes);

    Augmentor a = block_uniform_4();
    Augmentor a2 = augmentor_from_json(augmentor_to_json(a));
    CHECK(a2.cond.isApprox(a.cond));
}
