#pragma once

#include <string>

#include <Eigen/Core>

#include "issl/world.hpp"

namespace issl {

// Dense representation table: row x is the representation of input x.
struct Encoder {
    Eigen::MatrixXd reps;  // |X| x d

    explicit Encoder(Eigen::MatrixXd table);

    int size() const { return static_cast<int>(reps.rows()); }
    int dim() const { return static_cast<int>(reps.cols()); }
};

// C unit vectors with pairwise inner product -1/(C-1), summing to zero.
struct SetfFrame {
    Eigen::MatrixXd vertices;  // C x d

    int num_classes() const { return static_cast<int>(vertices.rows()); }
    int dim() const { return static_cast<int>(vertices.cols()); }
};

Encoder one_hot_encoder(const MaximalInvariant& m);

// Centered one-hot construction mapped through a fixed orthonormal basis of
// the centered hyperplane, zero-padded up to d. Deterministic.
SetfFrame setf(int num_classes, int dim);

Encoder setf_encoder(const MaximalInvariant& m, int dim);

bool is_invariant(const Encoder& e, const EquivalenceRelation& eq, double tol);

// Rank of the representation span: singular values > tol * sigma_max.
int effective_dimension(const Encoder& e, double tol = 1e-8);

// Distinct rows after snapping coordinates to a grid of pitch tol.
int image_cardinality(const Encoder& e, double tol = 1e-9);

Encoder unit_normalize(const Encoder& e);

// CSV: first line "d=<int>", then one comma-separated row per input.
std::string encoder_to_csv(const Encoder& e);
Encoder encoder_from_csv(const std::string& text);
std::string encoder_to_json(const Encoder& e);
Encoder encoder_from_json(const std::string& text);

}  // namespace issl
