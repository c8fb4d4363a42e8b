#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "issl/errors.hpp"

namespace issl {

// Finite input space: indices 0..size-1, optionally named.
struct InputSpace {
    int size = 0;
    std::vector<std::string> names;  // empty or one per input

    explicit InputSpace(int n, std::vector<std::string> element_names = {});
};

// Partition of {0..|X|-1} into num_classes blocks, stored densely.
struct EquivalenceRelation {
    std::vector<int> class_of;
    int num_classes = 0;

    EquivalenceRelation(std::vector<int> classes, int c);

    int size() const { return static_cast<int>(class_of.size()); }

    static EquivalenceRelation identity(int n);  // all singletons
};

// Canonical class indexing: constant on classes, distinct across classes.
struct MaximalInvariant {
    std::vector<int> m_of;
    int num_classes = 0;

    int size() const { return static_cast<int>(m_of.size()); }
};

// Row-stochastic conditional A(x_aug | x); square when self-augmenting.
struct Augmentor {
    Eigen::MatrixXd cond;  // |X| x |X_aug|

    explicit Augmentor(Eigen::MatrixXd conditional);

    int input_size() const { return static_cast<int>(cond.rows()); }
    int aug_space_size() const { return static_cast<int>(cond.cols()); }
};

struct InputDistribution {
    Eigen::VectorXd pmf;

    explicit InputDistribution(Eigen::VectorXd p);

    int size() const { return static_cast<int>(pmf.size()); }
    bool full_support() const;

    static InputDistribution uniform(int n);
};

MaximalInvariant maximal_invariant(const EquivalenceRelation& eq);

// True iff every class of `fine` sits inside one class of `coarse`.
bool is_refinement(const EquivalenceRelation& fine, const EquivalenceRelation& coarse);

// Connected components of the augmentation graph restricted to supp(px);
// zero-probability inputs stay singletons. Entries <= 1e-12 count as no edge.
EquivalenceRelation equivalence_from_augmentor(const Augmentor& a, const InputDistribution& px);

// True iff equivalent inputs share the augmentation row up to `tol` (max-abs).
bool check_markov_augmentor(const Augmentor& a, const EquivalenceRelation& eq, double tol);

Eigen::VectorXd class_probabilities(const InputDistribution& px, const EquivalenceRelation& eq);

// JSON file formats: partition {"size": n, "class_of": [...]};
// augmentor {"rows": r, "cols": c, "data": [row-major...]}.
std::string partition_to_json(const EquivalenceRelation& eq);
EquivalenceRelation partition_from_json(const std::string& text);
std::string augmentor_to_json(const Augmentor& a);
Augmentor augmentor_from_json(const std::string& text);

}  // namespace issl
