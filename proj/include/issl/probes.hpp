#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "issl/encoders.hpp"
#include "issl/tasks.hpp"
#include "issl/world.hpp"

namespace issl {

// Downstream predictor family descriptor.
struct ProbeFamily {
    enum class Kind { Linear, Mlp };

    Kind kind = Kind::Linear;
    std::vector<int> hidden_widths;  // Mlp only, depth >= 1
    std::string activation = "relu";
    bool include_bias = true;

    static ProbeFamily linear(bool with_bias = true);
    static ProbeFamily mlp(std::vector<int> widths, bool with_bias = true);

    void validate() const;
    std::string describe() const;
};

// Affine map z -> W^T z + b. One column per class; binary uses a single
// column with the sign rule (label 1 iff logit >= 0).
struct LinearPredictor {
    Eigen::MatrixXd weights;  // d x k
    Eigen::VectorXd bias;     // k, zeros when the family excludes bias

    Eigen::VectorXd logits(const Eigen::VectorXd& z) const {
        return weights.transpose() * z + bias;
    }
    double binary_logit(const Eigen::VectorXd& z) const { return logits(z)[0]; }
    int predict(const Eigen::VectorXd& z) const;  // argmax
};

struct MlpPredictor {
    std::vector<Eigen::MatrixXd> weights;  // per layer, input-dim x output-dim
    std::vector<Eigen::VectorXd> biases;
    std::string activation = "relu";

    Eigen::VectorXd logits(const Eigen::VectorXd& z) const;
    int predict(const Eigen::VectorXd& z) const;
};

using Predictor = std::variant<LinearPredictor, MlpPredictor>;

Eigen::VectorXd predictor_logits(const Predictor& p, const Eigen::VectorXd& z);
int predictor_class(const Predictor& p, const Eigen::VectorXd& z);

// Perceptron search for a strictly separating hyperplane: label-1 logits > 0,
// label-0 logits < 0. Returns nullopt when `budget` epochs pass without
// convergence (not a proof of inseparability).
std::optional<LinearPredictor> linear_separate(const Eigen::MatrixXd& points,
                                               const std::vector<int>& labeling,
                                               long budget, std::uint64_t seed,
                                               bool include_bias = true);

// Exact affine-shattering criterion: rank{p_i - p_0} == C-1.
// Points must be pairwise distinct.
bool shatterable_rank(const Eigen::MatrixXd& points, double tol = 1e-8);

// Zero-training-error predictor of the maximal invariant from the
// representations, or nullopt within budget.
std::optional<Predictor> m_predictable(const Encoder& e, const MaximalInvariant& m,
                                       const ProbeFamily& fam, long budget,
                                       std::uint64_t seed);

// Composes a k-class predictor from a (k-1)-class predictor on the merged
// labeling plus two binary predictors splitting the merged pair.
// Preconditions are checked by evaluating all three parts on `reps`.
LinearPredictor kary_from_binary(const LinearPredictor& f_km1, const LinearPredictor& f2,
                                 const LinearPredictor& f2p, const Eigen::MatrixXd& reps,
                                 const std::vector<int>& labels_k, int k);

// Recursive constructive counterpart: builds the k-ary predictor from
// perceptron-found binary parts. Used by tests and sweeps.
std::optional<LinearPredictor> kary_by_recursion(const Eigen::MatrixXd& reps,
                                                 const std::vector<int>& labels_k, int k,
                                                 long budget, std::uint64_t seed);

struct OptimalityReport {
    bool invariant = false;
    bool m_predictable = false;
    bool shattered = false;
    bool shattered_empirical = false;  // Mlp verdicts come from training runs
    bool verdict = false;
    int effective_dim = 0;
    int image_card = 0;
};

std::string report_to_json(const OptimalityReport& r);

// Full three-bullet audit: invariance, M-predictability, shattering.
OptimalityReport sample_optimality_report(const Encoder& e, const EquivalenceRelation& eq,
                                          const ProbeFamily& fam, double tol, long budget,
                                          std::uint64_t seed);

// Smallest d in `d_range` whose best C-point configuration (sETF when
// d >= C-1, repulsion-spread unit points otherwise) passes the family's
// shattering check in at least one of `trials` attempts.
std::optional<int> empirical_min_dimension(const EquivalenceRelation& eq,
                                           const ProbeFamily& fam,
                                           const std::vector<int>& d_range, int trials,
                                           std::uint64_t seed);

// Repulsion descent on the unit sphere; spreads C points for d < C-1.
Eigen::MatrixXd spread_unit_points(int count, int dim, std::uint64_t seed,
                                   int steps = 600, double lr = 0.1);

// True iff every binary class labeling is realized by the family on these
// class representatives (training-based for Mlp, hence "empirical").
bool shattering_check(const Eigen::MatrixXd& points, const ProbeFamily& fam, long budget,
                      std::uint64_t seed);

// Train accuracy of a closed-form ridge-to-one-hot linear probe; the
// reporting fallback when an exact separator is not found.
double least_squares_probe_accuracy(const Eigen::MatrixXd& reps,
                                    const std::vector<int>& classes, int num_classes);

}  // namespace issl
