#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

namespace issl {

// 64-bit splittable counter-based generator (splitmix64 core).
// Sub-streams come from derive(seed, index); the same (seed, index) pair
// yields the same stream on every platform and at any parallelism degree.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    static constexpr const char* algorithm() { return "splitmix64"; }

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    static std::uint64_t derive(std::uint64_t seed, std::uint64_t index) {
        return mix(mix(seed) ^ mix(index ^ 0x6a09e667f3bcc909ULL));
    }

    std::uint64_t next_u64() { return mix(state_++); }

    // Uniform in [0, 1), 53 mantissa bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Unbiased-enough integer in [0, n): fixed-point multiply, deterministic.
    std::uint64_t uniform_int(std::uint64_t n) {
        return static_cast<std::uint64_t>(
            (static_cast<unsigned __int128>(next_u64()) * n) >> 64);
    }

    // Box-Muller without cached state so draws stay counter-addressable.
    double normal() {
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586477 * u2);
    }

    Eigen::VectorXd normal_vector(int n) {
        Eigen::VectorXd v(n);
        for (int i = 0; i < n; ++i) v[i] = normal();
        return v;
    }

    Eigen::MatrixXd normal_matrix(int rows, int cols) {
        Eigen::MatrixXd m(rows, cols);
        for (int r = 0; r < rows; ++r)
            for (int c = 0; c < cols; ++c) m(r, c) = normal();
        return m;
    }

    // Uniform point on the unit sphere S^{d-1}.
    Eigen::VectorXd unit_vector(int d) {
        Eigen::VectorXd v = normal_vector(d);
        double n = v.norm();
        while (n < 1e-12) {
            v = normal_vector(d);
            n = v.norm();
        }
        return v / n;
    }

    // Index draw from a pmf by CDF inversion.
    int categorical(const Eigen::VectorXd& pmf) {
        const double u = uniform();
        double acc = 0.0;
        for (int i = 0; i < pmf.size(); ++i) {
            acc += pmf[i];
            if (u < acc) return i;
        }
        return static_cast<int>(pmf.size()) - 1;
    }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_int(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t state_;
};

}  // namespace issl
