#include <doctest.h>

#include <cmath>

#include "issl/encoders.hpp"
#include "issl/metrics.hpp"
#include "issl/rng.hpp"

using namespace issl;

namespace {
Eigen::VectorXd pmf(std::initializer_list<double> v) {
    Eigen::VectorXd p(static_cast<int>(v.size()));
    int i = 0;
    for (double x : v) p[i++] = x;
    return p;
}

Eigen::VectorXd random_pmf(Rng& rng, int c) {
    Eigen::VectorXd p(c);
    for (int i = 0; i < c; ++i) p[i] = rng.uniform() + 1e-3;
    return p / p.sum();
}
}  // namespace

TEST_CASE("entropy") {
    CHECK(entropy(pmf({0.25, 0.25, 0.25, 0.25})) == doctest::Approx(std::log(4.0)));
    CHECK(entropy(pmf({1.0, 0.0, 0.0})) == doctest::Approx(0.0));
    CHECK(entropy(pmf({0.5, 0.5, 0.0, 0.0})) == doctest::Approx(std::log(2.0)));
}

TEST_CASE("marginal and conditional entropy") {
    SUBCASE("distinct one-hot rows average to uniform") {
        CategoricalBatch b{Eigen::MatrixXd::Identity(3, 3)};
        CHECK(marginal_entropy(b) == doctest::Approx(std::log(3.0)));
        CHECK(conditional_entropy(b) == doctest::Approx(0.0));
    }
    SUBCASE("identical one-hot rows collapse the marginal") {
        Eigen::MatrixXd m(3, 3);
        m << 1, 0, 0, 1, 0, 0, 1, 0, 0;
        CategoricalBatch b{m};
        CHECK(marginal_entropy(b) == doctest::Approx(0.0));
    }
    SUBCASE("uniform rows") {
        CategoricalBatch b{Eigen::MatrixXd::Constant(4, 5, 0.2)};
        CHECK(conditional_entropy(b) == doctest::Approx(std::log(5.0)));
    }
    SUBCASE("entropy-to-effective-class reading") {
        CHECK(std::exp(8.4) == doctest::Approx(4447.07).epsilon(1e-4));
        CHECK(std::exp(3.2) == doctest::Approx(24.53).epsilon(1e-3));
    }
    SUBCASE("marginal dominates conditional on random batches") {
        Rng rng(3);
        for (int trial = 0; trial < 40; ++trial) {
            int n = 2 + static_cast<int>(rng.uniform_int(6));
            int c = 2 + static_cast<int>(rng.uniform_int(5));
            Eigen::MatrixXd m(n, c);
            for (int i = 0; i < n; ++i) m.row(i) = random_pmf(rng, c).transpose();
            CategoricalBatch b{m};
            CHECK(marginal_entropy(b) >= conditional_entropy(b) - 1e-12);
            CHECK(marginal_entropy(b) <= std::log(static_cast<double>(c)) + 1e-12);
            CHECK(conditional_entropy(b) >= -1e-12);
        }
    }
}

TEST_CASE("kl") {
    Eigen::VectorXd p = pmf({0.3, 0.7});
    CHECK(kl(p, p) == doctest::Approx(0.0));
    CHECK(kl(pmf({1.0, 0.0, 0.0}), pmf({1.0 / 3, 1.0 / 3, 1.0 / 3})) ==
          doctest::Approx(std::log(3.0)));
    SUBCASE("KL to uniform is log C minus entropy") {
        Rng rng(9);
        for (int trial = 0; trial < 30; ++trial) {
            int c = 2 + static_cast<int>(rng.uniform_int(6));
            Eigen::VectorXd t = random_pmf(rng, c);
            Eigen::VectorXd unif = Eigen::VectorXd::Constant(c, 1.0 / c);
            CHECK(std::abs(kl(t, unif) - (std::log(static_cast<double>(c)) - entropy(t))) <=
                  1e-12);
        }
    }
    SUBCASE("nonnegative on random pairs") {
        Rng rng(10);
        for (int trial = 0; trial < 30; ++trial) {
            int c = 2 + static_cast<int>(rng.uniform_int(6));
            CHECK(kl(random_pmf(rng, c), random_pmf(rng, c)) >= -1e-12);
        }
    }
}

TEST_CASE("cross entropy decomposition") {
    Rng rng(21);
    for (int trial = 0; trial < 30; ++trial) {
        Eigen::VectorXd p = random_pmf(rng, 5);
        Eigen::VectorXd q = random_pmf(rng, 5);
        CeDecomposition d = cross_entropy_decomposition_check(p, q);
        CHECK(std::abs(d.residual) <= 1e-10);
    }
    Eigen::VectorXd p = random_pmf(rng, 4);
    CeDecomposition same = cross_entropy_decomposition_check(p, p);
    CHECK(same.kl == doctest::Approx(0.0));
    CHECK(same.ce == doctest::Approx(same.h));
    CeDecomposition onehot =
        cross_entropy_decomposition_check(pmf({0.0, 1.0}), pmf({0.0, 1.0}));
    CHECK(onehot.ce == doctest::Approx(0.0));
}

TEST_CASE("etf_distance") {
    SUBCASE("one point per class on an exact frame") {
        SetfFrame f = setf(3, 2);
        EtfDistance d = etf_distance(f.vertices, {0, 1, 2});
        CHECK(d.singleton_convention_used);
        CHECK(d.pos == doctest::Approx(0.0));
        CHECK(d.neg == doctest::Approx(-0.5));
    }
    SUBCASE("duplicated frame rows collapse per class") {
        SetfFrame f = setf(4, 3);
        Eigen::MatrixXd reps(8, 3);
        std::vector<int> cls;
        for (int i = 0; i < 4; ++i) {
            reps.row(2 * i) = f.vertices.row(i);
            reps.row(2 * i + 1) = f.vertices.row(i);
            cls.push_back(i);
            cls.push_back(i);
        }
        EtfDistance d = etf_distance(reps, cls);
        CHECK_FALSE(d.singleton_convention_used);
        CHECK(d.pos == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(d.neg == doctest::Approx(-1.0 / 3));
        CHECK(d.total == doctest::Approx(-1.0 / 3));
    }
    SUBCASE("identical points cannot be centered and normalized") {
        Eigen::MatrixXd reps = Eigen::MatrixXd::Ones(4, 2);
        CHECK_THROWS_AS((void)etf_distance(reps, {0, 0, 1, 1}), DegenerateClassError);
    }
    SUBCASE("empty class is rejected") {
        Eigen::MatrixXd reps = Eigen::MatrixXd::Random(3, 2);
        CHECK_THROWS_AS((void)etf_distance(reps, {0, 0, 2}), DegenerateClassError);
    }
}

TEST_CASE("cosine monitors") {
    SUBCASE("collapsed frame") {
        SetfFrame f = setf(4, 3);
        Eigen::MatrixXd reps(8, 3);
        std::vector<int> cls;
        for (int i = 0; i < 4; ++i) {
            reps.row(2 * i) = f.vertices.row(i);
            reps.row(2 * i + 1) = f.vertices.row(i);
            cls.push_back(i);
            cls.push_back(i);
        }
        CosineMonitors m = cosine_monitors(reps, cls);
        REQUIRE(m.cos_pos.has_value());
        REQUIRE(m.cos_neg.has_value());
        CHECK(*m.cos_pos == doctest::Approx(1.0));
        CHECK(*m.cos_neg == doctest::Approx(-1.0 / 3));
    }
    SUBCASE("random high-dimensional vectors have near-zero cross cosine") {
        Rng rng(4);
        int n = 40, d = 400;
        Eigen::MatrixXd reps(n, d);
        std::vector<int> cls;
        for (int i = 0; i < n; ++i) {
            reps.row(i) = rng.unit_vector(d).transpose();
            cls.push_back(i % 2);
        }
        CosineMonitors m = cosine_monitors(reps, cls);
        CHECK(std::abs(*m.cos_neg) <= 0.05);
    }
    SUBCASE("single class reports no negative cosine") {
        Eigen::MatrixXd reps = Eigen::MatrixXd::Random(3, 2);
        CosineMonitors m = cosine_monitors(reps, {0, 0, 0});
        CHECK(m.cos_pos.has_value());
        CHECK_FALSE(m.cos_neg.has_value());
    }
}
