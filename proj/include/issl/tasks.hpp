#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include <Eigen/Core>

#include "issl/world.hpp"

namespace issl {

// Downstream prediction problem: input pmf plus label conditionals p(y|x).
// Each row must have a unique argmax.
struct Task {
    InputDistribution px;
    Eigen::MatrixXd cond;  // |X| x k, row-stochastic
    int num_labels = 0;

    Task(InputDistribution input_dist, Eigen::MatrixXd conditional);

    int size() const { return px.size(); }
};

// Class-level labeling: one label per equivalence class.
struct InvariantLabeling {
    std::vector<int> label_of_class;
    int num_labels = 0;

    InvariantLabeling(std::vector<int> labels, int k);

    int num_classes() const { return static_cast<int>(label_of_class.size()); }
};

// Per-input argmax of the conditional. Throws TieError when a row's top two
// probabilities are within 1e-12 of each other.
std::vector<int> most_likely_label(const Task& t);

bool is_invariant_task(const Task& t, const EquivalenceRelation& eq);

Task task_from_labeling(const InvariantLabeling& l, const EquivalenceRelation& eq,
                        const InputDistribution& px);

// Streams all 2^C binary class labelings in lexicographic order
// ([0,..,0] first). Guarded at C <= 24.
class BinaryLabelingStream {
public:
    explicit BinaryLabelingStream(int num_classes);

    bool next(InvariantLabeling& out);
    std::uint64_t total() const { return total_; }

private:
    int num_classes_;
    std::uint64_t code_ = 0;
    std::uint64_t total_;
    bool done_ = false;
};

// Convenience materialization for small C (C <= 16).
std::vector<InvariantLabeling> enumerate_binary_labelings(int num_classes);

double bayes_error(const Task& t);

// Per-class conditional p(y | [x]) = sum_{x in class} px(x) p(y|x) / p([x]).
// Zero-probability classes fall back to the unweighted member average.
Eigen::MatrixXd class_conditionals(const Task& t, const EquivalenceRelation& eq);

// JSON task files: {"px": [...], "cond": [[...], ...]}.
std::string task_to_json(const Task& t);
Task task_from_json(const std::string& text);

}  // namespace issl
