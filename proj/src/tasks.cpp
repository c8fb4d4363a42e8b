#include "issl/tasks.hpp"

#include <cmath>

#include <nlohmann/json.hpp>

namespace issl {

namespace {
constexpr double kRowTol = 1e-9;
constexpr double kTieTol = 1e-12;
}  // namespace

Task::Task(InputDistribution input_dist, Eigen::MatrixXd conditional)
    : px(std::move(input_dist)), cond(std::move(conditional)),
      num_labels(static_cast<int>(cond.cols())) {
    if (cond.rows() != px.size())
        throw SizeMismatchError("Task: conditional rows must match |X|");
    if (num_labels < 2) throw ValidationError("Task: needs k >= 2 labels");
    for (int r = 0; r < cond.rows(); ++r) {
        if (cond.row(r).minCoeff() < -kRowTol)
            throw ValidationError("Task: negative probability in row " + std::to_string(r));
        if (std::abs(cond.row(r).sum() - 1.0) > kRowTol)
            throw ValidationError("Task: row " + std::to_string(r) + " does not sum to 1");
    }
}

InvariantLabeling::InvariantLabeling(std::vector<int> labels, int k)
    : label_of_class(std::move(labels)), num_labels(k) {
    if (num_labels < 2) throw ValidationError("InvariantLabeling: k must be >= 2");
    for (int v : label_of_class)
        if (v < 0 || v >= num_labels)
            throw ValidationError("InvariantLabeling: label out of range");
}

std::vector<int> most_likely_label(const Task& t) {
    std::vector<int> labels(static_cast<std::size_t>(t.size()));
    for (int x = 0; x < t.size(); ++x) {
        int best = 0;
        double best_p = t.cond(x, 0);
        for (int y = 1; y < t.num_labels; ++y) {
            if (t.cond(x, y) > best_p) {
                best_p = t.cond(x, y);
                best = y;
            }
        }
        for (int y = 0; y < t.num_labels; ++y) {
            if (y != best && best_p - t.cond(x, y) <= kTieTol)
                throw TieError("most_likely_label: tie at input " + std::to_string(x));
        }
        labels[static_cast<std::size_t>(x)] = best;
    }
    return labels;
}

bool is_invariant_task(const Task& t, const EquivalenceRelation& eq) {
    if (t.size() != eq.size())
        throw SizeMismatchError("is_invariant_task: size mismatch");
    std::vector<int> labels = most_likely_label(t);
    std::vector<int> class_label(static_cast<std::size_t>(eq.num_classes), -1);
    for (int x = 0; x < t.size(); ++x) {
        int c = eq.class_of[static_cast<std::size_t>(x)];
        if (class_label[static_cast<std::size_t>(c)] == -1)
            class_label[static_cast<std::size_t>(c)] = labels[static_cast<std::size_t>(x)];
        else if (class_label[static_cast<std::size_t>(c)] != labels[static_cast<std::size_t>(x)])
            return false;
    }
    return true;
}

Task task_from_labeling(const InvariantLabeling& l, const EquivalenceRelation& eq,
                        const InputDistribution& px) {
    if (l.num_classes() != eq.num_classes)
        throw SizeMismatchError("task_from_labeling: labeling class count mismatch");
    if (px.size() != eq.size())
        throw SizeMismatchError("task_from_labeling: pmf size mismatch");
    Eigen::MatrixXd cond = Eigen::MatrixXd::Zero(eq.size(), l.num_labels);
    for (int x = 0; x < eq.size(); ++x) {
        int c = eq.class_of[static_cast<std::size_t>(x)];
        cond(x, l.label_of_class[static_cast<std::size_t>(c)]) = 1.0;
    }
    return Task(px, std::move(cond));
}

BinaryLabelingStream::BinaryLabelingStream(int num_classes) : num_classes_(num_classes) {
    if (num_classes_ < 2)
        throw ValidationError("enumerate_binary_labelings: C must be >= 2");
    if (num_classes_ > 24)
        throw CapacityError("enumerate_binary_labelings: C > 24 would enumerate 2^C labelings");
    total_ = std::uint64_t{1} << num_classes_;
}

bool BinaryLabelingStream::next(InvariantLabeling& out) {
    if (done_) return false;
    std::vector<int> labels(static_cast<std::size_t>(num_classes_));
    // Lexicographic over the label vector: class 0 is the most significant slot.
    for (int c = 0; c < num_classes_; ++c)
        labels[static_cast<std::size_t>(c)] =
            static_cast<int>((code_ >> (num_classes_ - 1 - c)) & 1u);
    out = InvariantLabeling(std::move(labels), 2);
    if (++code_ == total_) done_ = true;
    return true;
}

std::vector<InvariantLabeling> enumerate_binary_labelings(int num_classes) {
    if (num_classes > 16)
        throw CapacityError("enumerate_binary_labelings: materializing > 2^16 labelings; use the stream");
    BinaryLabelingStream stream(num_classes);
    std::vector<InvariantLabeling> all;
    all.reserve(static_cast<std::size_t>(stream.total()));
    InvariantLabeling l({0, 0}, 2);
    while (stream.next(l)) all.push_back(l);
    return all;
}

double bayes_error(const Task& t) {
    double err = 0.0;
    for (int x = 0; x < t.size(); ++x)
        err += t.px.pmf[x] * (1.0 - t.cond.row(x).maxCoeff());
    return err;
}

Eigen::MatrixXd class_conditionals(const Task& t, const EquivalenceRelation& eq) {
    if (t.size() != eq.size())
        throw SizeMismatchError("class_conditionals: size mismatch");
    Eigen::MatrixXd cc = Eigen::MatrixXd::Zero(eq.num_classes, t.num_labels);
    Eigen::VectorXd mass = Eigen::VectorXd::Zero(eq.num_classes);
    Eigen::VectorXi members = Eigen::VectorXi::Zero(eq.num_classes);
    for (int x = 0; x < t.size(); ++x) {
        int c = eq.class_of[static_cast<std::size_t>(x)];
        cc.row(c) += t.px.pmf[x] * t.cond.row(x);
        mass[c] += t.px.pmf[x];
        members[c] += 1;
    }
    for (int c = 0; c < eq.num_classes; ++c) {
        if (mass[c] > 0.0) {
            cc.row(c) /= mass[c];
        } else {
            cc.row(c).setZero();
            for (int x = 0; x < t.size(); ++x)
                if (eq.class_of[static_cast<std::size_t>(x)] == c)
                    cc.row(c) += t.cond.row(x) / members[c];
        }
    }
    return cc;
}

std::string task_to_json(const Task& t) {
    nlohmann::json j;
    j["px"] = std::vector<double>(t.px.pmf.data(), t.px.pmf.data() + t.px.pmf.size());
    std::vector<std::vector<double>> rows;
    rows.reserve(static_cast<std::size_t>(t.size()));
    for (int r = 0; r < t.cond.rows(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(t.cond.cols()));
        for (int c = 0; c < t.cond.cols(); ++c) row[static_cast<std::size_t>(c)] = t.cond(r, c);
        rows.push_back(std::move(row));
    }
    j["cond"] = rows;
    return j.dump();
}

Task task_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    std::vector<double> px = j.at("px").get<std::vector<double>>();
    auto rows = j.at("cond").get<std::vector<std::vector<double>>>();
    if (rows.empty() || rows.size() != px.size())
        throw ValidationError("task json: px and cond row counts differ");
    Eigen::VectorXd pmf(static_cast<int>(px.size()));
    for (std::size_t i = 0; i < px.size(); ++i) pmf[static_cast<int>(i)] = px[i];
    Eigen::MatrixXd cond(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (rows[r].size() != rows[0].size())
            throw ValidationError("task json: ragged cond rows");
        for (std::size_t c = 0; c < rows[r].size(); ++c)
            cond(static_cast<int>(r), static_cast<int>(c)) = rows[r][c];
    }
    return Task(InputDistribution(std::move(pmf)), std::move(cond));
}

}  // namespace issl
