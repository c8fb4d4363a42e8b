#pragma once

#include <cstdint>
#include <optional>
#include <utility>
#include <vector>

#include "issl/encoders.hpp"
#include "issl/tasks.hpp"
#include "issl/world.hpp"

namespace issl {

// Labeled sample: (input index, most-likely label) pairs.
struct Dataset {
    std::vector<std::pair<int, int>> items;

    int size() const { return static_cast<int>(items.size()); }
};

struct McEstimate {
    double mean = 0.0;
    double stderr_ = 0.0;
    long trials = 0;
};

struct RiskReport {
    double closed_form = 0.0;
    std::optional<McEstimate> mc_estimate;
    std::optional<InvariantLabeling> witness_erm;
};

// n iid draws from px, each labeled with the most likely label.
Dataset sample_dataset(const Task& t, int n, std::uint64_t seed);

// Bayes label on classes seen in the dataset, least likely label elsewhere
// (argmin ties break to the lowest label index).
InvariantLabeling construct_bad_erm(const Task& t, const EquivalenceRelation& eq,
                                    const Dataset& ds);

// Sum over unseen classes of p([x]) * (max_y - min_y) of the class conditional.
double excess_risk_closed_form(const Task& t, const EquivalenceRelation& eq,
                               const Dataset& ds);

// Population excess risk of predicting label_of_class everywhere.
double labeling_excess_risk(const Task& t, const EquivalenceRelation& eq,
                            const InvariantLabeling& l);

// Independent oracle: enumerates every class-labeling completion consistent
// with the seen data and maximizes population excess risk. Requires an
// invariant encoder whose class representatives are affinely shattered.
RiskReport brute_force_worst_erm(const Encoder& e, const Task& t,
                                 const EquivalenceRelation& eq, const Dataset& ds);

// Sum over classes of p * Delta * (1 - p)^n.
double expected_excess_risk_exact(const Task& t, const EquivalenceRelation& eq, long n);

// (1 - 1/C)^n, the equiprobable deterministic worst case.
double worst_case_rate(int num_classes, long n);

McEstimate mc_expected_excess_risk(const Task& t, const EquivalenceRelation& eq, int n,
                                   long trials, std::uint64_t seed);

// Exact expected draws until every class appears (inclusion-exclusion,
// compensated summation in subset-rank order). Guarded at C <= 20.
double coupon_expected_samples(const Eigen::VectorXd& class_probs);

// Sorted-probability partial-sum approximation sum_i 1/(i * p_(i)).
double coupon_weighted_asymptotic(const Eigen::VectorXd& class_probs);

McEstimate mc_coupon_waiting_time(const Eigen::VectorXd& class_probs, long trials,
                                  std::uint64_t seed);

}  // namespace issl
