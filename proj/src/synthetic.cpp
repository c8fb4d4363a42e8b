#include "issl/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "issl/encoders.hpp"
#include "issl/rng.hpp"

namespace issl {

void SyntheticWorldParams::validate() const {
    if (clusters < 2) throw ValidationError("SyntheticWorld: needs >= 2 clusters");
    if (points_per_cluster < 1) throw ValidationError("SyntheticWorld: empty clusters");
    if (raw_dim < 1) throw ValidationError("SyntheticWorld: raw_dim >= 1");
    if (margin <= 0.0 || center_radius <= 0.0)
        throw ValidationError("SyntheticWorld: margin and radius must be positive");
    if (spread < 0.0 || jitter_sigma < 0.0)
        throw ValidationError("SyntheticWorld: spreads must be >= 0");
}

EquivalenceRelation SyntheticWorld::partition() const {
    return EquivalenceRelation(data.class_of, params.clusters);
}

Augmentor SyntheticWorld::resample_augmentor() const {
    const int n = data.size();
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(n, n);
    std::vector<int> counts(static_cast<std::size_t>(params.clusters), 0);
    for (int c : data.class_of) counts[static_cast<std::size_t>(c)]++;
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (data.class_of[static_cast<std::size_t>(i)] ==
                data.class_of[static_cast<std::size_t>(j)])
                cond(i, j) = 1.0 / counts[static_cast<std::size_t>(
                                 data.class_of[static_cast<std::size_t>(i)])];
    return Augmentor(std::move(cond));
}

SyntheticWorld make_synthetic_world(const SyntheticWorldParams& params, std::uint64_t seed) {
    params.validate();
    SyntheticWorld world;
    world.params = params;
    Rng rng(seed);

    const int c = params.clusters;
    const int p = params.raw_dim;
    Eigen::MatrixXd centers(c, p);
    bool placed = false;
    if (params.layout == SyntheticWorldParams::Layout::Frame) {
        if (p < c - 1)
            throw ValidationError("SyntheticWorld: frame layout needs raw_dim >= C-1");
        centers = params.center_radius * setf(c, p).vertices;
        if ((centers.row(0) - centers.row(1)).norm() < params.margin)
            throw ValidationError("SyntheticWorld: radius too small for the requested margin");
        placed = true;
    }
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        for (int i = 0; i < c; ++i)
            centers.row(i) = (params.center_radius * rng.unit_vector(p)).transpose();
        placed = true;
        for (int i = 0; i < c && placed; ++i)
            for (int j = i + 1; j < c; ++j)
                if ((centers.row(i) - centers.row(j)).norm() < params.margin) {
                    placed = false;
                    break;
                }
    }
    if (!placed) {
        if (p >= c - 1) {
            // Frame vertices scaled to the radius separate maximally.
            centers = params.center_radius * setf(c, p).vertices;
            double dist = (centers.row(0) - centers.row(1)).norm();
            if (dist < params.margin)
                throw ValidationError(
                    "SyntheticWorld: radius too small for the requested margin");
        } else {
            throw ValidationError(
                "SyntheticWorld: could not place separated centers in this dimension");
        }
    }
    if (params.center_offset != 0.0)
        centers.rowwise() +=
            (params.center_offset / std::sqrt(static_cast<double>(p))) *
            Eigen::RowVectorXd::Ones(p);
    world.centers = centers;

    world.data.x.resize(c * params.points_per_cluster, p);
    world.data.class_of.reserve(static_cast<std::size_t>(c * params.points_per_cluster));
    for (int i = 0; i < c; ++i) {
        for (int k = 0; k < params.points_per_cluster; ++k) {
            world.data.x.row(i * params.points_per_cluster + k) =
                centers.row(i) + params.spread * rng.normal_vector(p).transpose();
            world.data.class_of.push_back(i);
        }
    }
    world.data.aug = params.aug;
    world.data.jitter_sigma = params.jitter_sigma;
    world.data.validate();
    return world;
}

double permutation_match_accuracy(const std::vector<int>& predicted,
                                  const std::vector<int>& truth, int num_pred,
                                  int num_true) {
    if (predicted.size() != truth.size() || predicted.empty())
        throw SizeMismatchError("permutation_match_accuracy: label vectors differ");
    const int k = std::max(num_pred, num_true);
    if (k > 9)
        throw CapacityError("permutation_match_accuracy: exhaustive matching capped at 9");
    // Square zero-padded confusion so spare classes on either side pair off
    // with phantom partners that score nothing.
    Eigen::MatrixXi confusion = Eigen::MatrixXi::Zero(k, k);
    for (std::size_t i = 0; i < predicted.size(); ++i)
        confusion(predicted[i], truth[i])++;

    std::vector<int> perm(static_cast<std::size_t>(k));
    std::iota(perm.begin(), perm.end(), 0);
    long best = -1;
    do {
        long hits = 0;
        for (int i = 0; i < k; ++i) hits += confusion(i, perm[static_cast<std::size_t>(i)]);
        best = std::max(best, hits);
    } while (std::next_permutation(perm.begin(), perm.end()));
    return static_cast<double>(best) / static_cast<double>(predicted.size());
}

}  // namespace issl
