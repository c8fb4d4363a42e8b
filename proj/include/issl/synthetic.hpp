#pragma once

#include <cstdint>

#include "issl/objectives.hpp"
#include "issl/world.hpp"

namespace issl {

// Desk-scale clustered dataset with a declared separation margin.
struct SyntheticWorldParams {
    enum class Layout { Frame, RandomSphere };

    int clusters = 8;
    int points_per_cluster = 16;
    int raw_dim = 8;
    Layout layout = Layout::Frame;  // frame centers give equal pairwise margins
    double center_radius = 3.0;
    double center_offset = 0.0;   // common shift along the all-ones direction
    double margin = 2.0;          // minimum pairwise center distance
    double spread = 0.1;          // within-cluster standard deviation
    PairedData::Aug aug = PairedData::Aug::ResampleExact;
    double jitter_sigma = 0.05;

    void validate() const;
};

struct SyntheticWorld {
    SyntheticWorldParams params;
    Eigen::MatrixXd centers;  // clusters x raw_dim
    PairedData data;

    EquivalenceRelation partition() const;
    // Row-stochastic resample-exact conditional over the point set (uniform
    // within each cluster); satisfies the Markov check exactly.
    Augmentor resample_augmentor() const;
};

SyntheticWorld make_synthetic_world(const SyntheticWorldParams& params, std::uint64_t seed);

// Best truth agreement over all relabelings of the predicted classes.
// Exhaustive over permutations; guarded at 9 predicted classes.
double permutation_match_accuracy(const std::vector<int>& predicted,
                                  const std::vector<int>& truth, int num_pred,
                                  int num_true);

}  // namespace issl
