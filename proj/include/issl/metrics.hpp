#pragma once

#include <optional>
#include <vector>

#include <Eigen/Core>

#include "issl/errors.hpp"

namespace issl {

// Batch of categorical conditionals, one row-stochastic row per example.
struct CategoricalBatch {
    Eigen::MatrixXd probs;  // N x C

    explicit CategoricalBatch(Eigen::MatrixXd p);

    int rows() const { return static_cast<int>(probs.rows()); }
    int num_classes() const { return static_cast<int>(probs.cols()); }
};

// All entropies in nats.
double entropy(const Eigen::VectorXd& pmf);

double marginal_entropy(const CategoricalBatch& b);

double conditional_entropy(const CategoricalBatch& b);

// KL(p || q), q floored at 1e-12 inside the log.
double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q);

struct CeDecomposition {
    double ce;
    double kl;
    double h;
    double residual;  // ce - (kl + h)
};

CeDecomposition cross_entropy_decomposition_check(const Eigen::VectorXd& p,
                                                  const Eigen::VectorXd& q);

struct EtfDistance {
    double pos;    // 1 - E[cos] over same-class pairs (0 when no such pair)
    double neg;    // E[cos] over different-class pairs
    double total;  // pos + neg; -1/(C-1) at a collapsed sETF
    bool singleton_convention_used = false;
};

// Centers rows by the batch mean (or the supplied running mean), unit
// normalizes, then averages cosines over same-class / cross-class pairs.
EtfDistance etf_distance(const Eigen::MatrixXd& reps, const std::vector<int>& class_of,
                         const std::optional<Eigen::VectorXd>& running_mean = std::nullopt);

// Streaming-mean helper for etf_distance; EMA decay fixed at 0.9.
struct RunningMean {
    Eigen::VectorXd mean;
    double decay = 0.9;
    bool initialized = false;

    void update(const Eigen::MatrixXd& batch);
};

struct CosineMonitors {
    std::optional<double> cos_pos;  // absent when no same-class pair exists
    std::optional<double> cos_neg;  // absent when a single class is present
};

// Raw (uncentered) unit-normalized expected cosines.
CosineMonitors cosine_monitors(const Eigen::MatrixXd& reps, const std::vector<int>& class_of);

}  // namespace issl
