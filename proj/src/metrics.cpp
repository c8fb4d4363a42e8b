#include "issl/metrics.hpp"

#include <algorithm>
#include <cmath>

namespace issl {

namespace {
constexpr double kLogFloor = 1e-12;
constexpr double kRowTol = 1e-9;

void require_pmf(const Eigen::VectorXd& p, const char* who) {
    if (p.size() < 1) throw ValidationError(std::string(who) + ": empty pmf");
    if (p.minCoeff() < -kRowTol) throw ValidationError(std::string(who) + ": negative mass");
    if (std::abs(p.sum() - 1.0) > kRowTol)
        throw ValidationError(std::string(who) + ": pmf does not sum to 1");
}
}  // namespace

CategoricalBatch::CategoricalBatch(Eigen::MatrixXd p) : probs(std::move(p)) {
    if (probs.rows() < 1 || probs.cols() < 1)
        throw ValidationError("CategoricalBatch: empty");
    for (int r = 0; r < probs.rows(); ++r) {
        if (probs.row(r).minCoeff() < -kRowTol)
            throw ValidationError("CategoricalBatch: negative probability");
        if (std::abs(probs.row(r).sum() - 1.0) > kRowTol)
            throw ValidationError("CategoricalBatch: row does not sum to 1");
    }
}

double entropy(const Eigen::VectorXd& pmf) {
    require_pmf(pmf, "entropy");
    double h = 0.0;
    for (int i = 0; i < pmf.size(); ++i)
        if (pmf[i] > 0.0) h -= pmf[i] * std::log(pmf[i]);
    return h;
}

double marginal_entropy(const CategoricalBatch& b) {
    Eigen::VectorXd mean = b.probs.colwise().mean();
    return entropy(mean);
}

double conditional_entropy(const CategoricalBatch& b) {
    double h = 0.0;
    for (int r = 0; r < b.rows(); ++r) h += entropy(b.probs.row(r).transpose());
    return h / b.rows();
}

double kl(const Eigen::VectorXd& p, const Eigen::VectorXd& q) {
    require_pmf(p, "kl");
    require_pmf(q, "kl");
    if (p.size() != q.size()) throw SizeMismatchError("kl: dimension mismatch");
    double d = 0.0;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) d += p[i] * (std::log(p[i]) - std::log(std::max(q[i], kLogFloor)));
    return d;
}

CeDecomposition cross_entropy_decomposition_check(const Eigen::VectorXd& p,
                                                  const Eigen::VectorXd& q) {
    require_pmf(p, "cross_entropy_decomposition");
    require_pmf(q, "cross_entropy_decomposition");
    double ce = 0.0;
    for (int i = 0; i < p.size(); ++i)
        if (p[i] > 0.0) ce -= p[i] * std::log(std::max(q[i], kLogFloor));
    CeDecomposition d{};
    d.ce = ce;
    d.kl = kl(p, q);
    d.h = entropy(p);
    d.residual = d.ce - (d.kl + d.h);
    return d;
}

void RunningMean::update(const Eigen::MatrixXd& batch) {
    Eigen::VectorXd m = batch.colwise().mean();
    if (!initialized) {
        mean = m;
        initialized = true;
    } else {
        mean = decay * mean + (1.0 - decay) * m;
    }
}

EtfDistance etf_distance(const Eigen::MatrixXd& reps, const std::vector<int>& class_of,
                         const std::optional<Eigen::VectorXd>& running_mean) {
    const int n = static_cast<int>(reps.rows());
    if (static_cast<int>(class_of.size()) != n)
        throw SizeMismatchError("etf_distance: class labels do not match rows");
    int num_classes = 0;
    for (int c : class_of) num_classes = std::max(num_classes, c + 1);
    if (num_classes < 2) throw DegenerateClassError("etf_distance: needs >= 2 classes");
    std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
    for (int c : class_of) counts[static_cast<std::size_t>(c)]++;
    for (int c = 0; c < num_classes; ++c)
        if (counts[static_cast<std::size_t>(c)] == 0)
            throw DegenerateClassError("etf_distance: class " + std::to_string(c) + " is empty");

    Eigen::VectorXd center =
        running_mean ? *running_mean : Eigen::VectorXd(reps.colwise().mean());
    Eigen::MatrixXd z = reps.rowwise() - center.transpose();
    for (int i = 0; i < n; ++i) {
        double norm = z.row(i).norm();
        if (norm < 1e-14)
            throw DegenerateClassError("etf_distance: row " + std::to_string(i) +
                                       " is at the center, cannot normalize");
        z.row(i) /= norm;
    }

    double pos_sum = 0.0, neg_sum = 0.0;
    long pos_n = 0, neg_n = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double cos = z.row(i).dot(z.row(j));
            if (class_of[static_cast<std::size_t>(i)] == class_of[static_cast<std::size_t>(j)]) {
                pos_sum += cos;
                ++pos_n;
            } else {
                neg_sum += cos;
                ++neg_n;
            }
        }
    }
    EtfDistance d{};
    if (pos_n == 0) {
        d.pos = 0.0;  // vacuous expectation over singleton classes
        d.singleton_convention_used = true;
    } else {
        d.pos = 1.0 - pos_sum / static_cast<double>(pos_n);
    }
    d.neg = neg_n > 0 ? neg_sum / static_cast<double>(neg_n) : 0.0;
    d.total = d.pos + d.neg;
    return d;
}

CosineMonitors cosine_monitors(const Eigen::MatrixXd& reps, const std::vector<int>& class_of) {
    const int n = static_cast<int>(reps.rows());
    if (static_cast<int>(class_of.size()) != n)
        throw SizeMismatchError("cosine_monitors: class labels do not match rows");
    Eigen::MatrixXd z = reps;
    for (int i = 0; i < n; ++i) {
        double norm = z.row(i).norm();
        if (norm > 0.0) z.row(i) /= norm;
    }
    double pos_sum = 0.0, neg_sum = 0.0;
    long pos_n = 0, neg_n = 0;
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            double cos = z.row(i).dot(z.row(j));
            if (class_of[static_cast<std::size_t>(i)] == class_of[static_cast<std::size_t>(j)]) {
                pos_sum += cos;
                ++pos_n;
            } else {
                neg_sum += cos;
                ++neg_n;
            }
        }
    }
    CosineMonitors m;
    if (pos_n > 0) m.cos_pos = pos_sum / static_cast<double>(pos_n);
    if (neg_n > 0) m.cos_neg = neg_sum / static_cast<double>(neg_n);
    return m;
}

}  // namespace issl
