#include "issl/risk.hpp"

#include <algorithm>
#include <cmath>

#include "issl/probes.hpp"
#include "issl/rng.hpp"

namespace issl {

namespace {

std::vector<bool> seen_classes(const EquivalenceRelation& eq, const Dataset& ds) {
    std::vector<bool> seen(static_cast<std::size_t>(eq.num_classes), false);
    for (const auto& [x, y] : ds.items)
        seen[static_cast<std::size_t>(eq.class_of[static_cast<std::size_t>(x)])] = true;
    return seen;
}

}  // namespace

Dataset sample_dataset(const Task& t, int n, std::uint64_t seed) {
    if (n < 0) throw ValidationError("sample_dataset: n must be >= 0");
    std::vector<int> labels = most_likely_label(t);
    Rng rng(seed);
    Dataset ds;
    ds.items.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int x = rng.categorical(t.px.pmf);
        ds.items.emplace_back(x, labels[static_cast<std::size_t>(x)]);
    }
    return ds;
}

InvariantLabeling construct_bad_erm(const Task& t, const EquivalenceRelation& eq,
                                    const Dataset& ds) {
    Eigen::MatrixXd cc = class_conditionals(t, eq);
    std::vector<bool> seen = seen_classes(eq, ds);
    std::vector<int> labels(static_cast<std::size_t>(eq.num_classes));
    for (int c = 0; c < eq.num_classes; ++c) {
        int pick = 0;
        if (seen[static_cast<std::size_t>(c)]) {
            for (int y = 1; y < t.num_labels; ++y)
                if (cc(c, y) > cc(c, pick)) pick = y;
        } else {
            for (int y = 1; y < t.num_labels; ++y)
                if (cc(c, y) < cc(c, pick)) pick = y;  // ties keep the lowest index
        }
        labels[static_cast<std::size_t>(c)] = pick;
    }
    return InvariantLabeling(std::move(labels), t.num_labels);
}

double excess_risk_closed_form(const Task& t, const EquivalenceRelation& eq,
                               const Dataset& ds) {
    Eigen::MatrixXd cc = class_conditionals(t, eq);
    Eigen::VectorXd pc = class_probabilities(t.px, eq);
    std::vector<bool> seen = seen_classes(eq, ds);
    double risk = 0.0;
    for (int c = 0; c < eq.num_classes; ++c) {
        if (seen[static_cast<std::size_t>(c)]) continue;
        risk += pc[c] * (cc.row(c).maxCoeff() - cc.row(c).minCoeff());
    }
    return risk;
}

double labeling_excess_risk(const Task& t, const EquivalenceRelation& eq,
                            const InvariantLabeling& l) {
    if (l.num_classes() != eq.num_classes)
        throw SizeMismatchError("labeling_excess_risk: class count mismatch");
    double excess = 0.0;
    for (int x = 0; x < t.size(); ++x) {
        int predicted = l.label_of_class[static_cast<std::size_t>(
            eq.class_of[static_cast<std::size_t>(x)])];
        excess += t.px.pmf[x] * (t.cond.row(x).maxCoeff() - t.cond(x, predicted));
    }
    return excess;
}

RiskReport brute_force_worst_erm(const Encoder& e, const Task& t,
                                 const EquivalenceRelation& eq, const Dataset& ds) {
    if (!is_invariant(e, eq, 1e-9))
        throw NotSampleOptimalEncoderError("brute_force_worst_erm: encoder is not invariant");
    MaximalInvariant m = maximal_invariant(eq);
    if (image_cardinality(e, 1e-9) != eq.num_classes)
        throw NotSampleOptimalEncoderError(
            "brute_force_worst_erm: encoder merges non-equivalent inputs");
    {
        Eigen::MatrixXd reps(eq.num_classes, e.dim());
        std::vector<bool> got(static_cast<std::size_t>(eq.num_classes), false);
        for (int x = 0; x < e.size(); ++x) {
            int c = m.m_of[static_cast<std::size_t>(x)];
            if (!got[static_cast<std::size_t>(c)]) {
                reps.row(c) = e.reps.row(x);
                got[static_cast<std::size_t>(c)] = true;
            }
        }
        bool shattered = false;
        try {
            shattered = shatterable_rank(reps, 1e-8);
        } catch (const DuplicatePointError&) {
            shattered = false;
        }
        if (!shattered)
            throw NotSampleOptimalEncoderError(
                "brute_force_worst_erm: class representatives are not affinely shattered");
    }

    Eigen::MatrixXd cc = class_conditionals(t, eq);
    std::vector<bool> seen = seen_classes(eq, ds);
    std::vector<int> unseen;
    std::vector<int> base(static_cast<std::size_t>(eq.num_classes), 0);
    for (int c = 0; c < eq.num_classes; ++c) {
        int bayes = 0;
        for (int y = 1; y < t.num_labels; ++y)
            if (cc(c, y) > cc(c, bayes)) bayes = y;
        base[static_cast<std::size_t>(c)] = bayes;
        if (!seen[static_cast<std::size_t>(c)]) unseen.push_back(c);
    }

    double combos = std::pow(static_cast<double>(t.num_labels),
                             static_cast<double>(unseen.size()));
    if (combos > static_cast<double>(1 << 20))
        throw CapacityError("brute_force_worst_erm: completion count exceeds 2^20");

    RiskReport report;
    report.closed_form = -1.0;
    std::vector<int> assignment(unseen.size(), 0);
    const long total = static_cast<long>(combos);
    for (long it = 0; it < total; ++it) {
        long code = it;
        std::vector<int> labels = base;
        for (std::size_t u = 0; u < unseen.size(); ++u) {
            labels[static_cast<std::size_t>(unseen[u])] =
                static_cast<int>(code % t.num_labels);
            code /= t.num_labels;
        }
        InvariantLabeling l(std::move(labels), t.num_labels);
        double excess = labeling_excess_risk(t, eq, l);
        if (excess > report.closed_form) {
            report.closed_form = excess;
            report.witness_erm = std::move(l);
        }
    }
    return report;
}

double expected_excess_risk_exact(const Task& t, const EquivalenceRelation& eq, long n) {
    if (n < 0) throw ValidationError("expected_excess_risk_exact: n must be >= 0");
    Eigen::MatrixXd cc = class_conditionals(t, eq);
    Eigen::VectorXd pc = class_probabilities(t.px, eq);
    double risk = 0.0;
    for (int c = 0; c < eq.num_classes; ++c) {
        double delta = cc.row(c).maxCoeff() - cc.row(c).minCoeff();
        risk += pc[c] * delta * std::pow(1.0 - pc[c], static_cast<double>(n));
    }
    return risk;
}

double worst_case_rate(int num_classes, long n) {
    if (num_classes < 2) throw ValidationError("worst_case_rate: C must be >= 2");
    if (n < 0) throw ValidationError("worst_case_rate: n must be >= 0");
    return std::pow(1.0 - 1.0 / num_classes, static_cast<double>(n));
}

namespace {

// Compensated accumulation; degenerate cells (constant draws) must average
// back to the constant at ulp precision.
struct KahanMoments {
    double sum = 0.0, sum_c = 0.0;
    double sumsq = 0.0, sumsq_c = 0.0;

    void add(double v) {
        double y = v - sum_c;
        double t = sum + y;
        sum_c = (t - sum) - y;
        sum = t;
        double y2 = v * v - sumsq_c;
        double t2 = sumsq + y2;
        sumsq_c = (t2 - sumsq) - y2;
        sumsq = t2;
    }

    McEstimate finish(long trials) const {
        McEstimate est;
        est.trials = trials;
        est.mean = sum / static_cast<double>(trials);
        if (trials > 1) {
            double var = (sumsq - sum * sum / static_cast<double>(trials)) /
                         static_cast<double>(trials - 1);
            est.stderr_ = std::sqrt(std::max(var, 0.0) / static_cast<double>(trials));
        }
        return est;
    }
};

}  // namespace

McEstimate mc_expected_excess_risk(const Task& t, const EquivalenceRelation& eq, int n,
                                   long trials, std::uint64_t seed) {
    if (trials < 1) throw ValidationError("mc_expected_excess_risk: trials must be >= 1");
    KahanMoments acc;
    for (long i = 0; i < trials; ++i) {
        Dataset ds = sample_dataset(t, n, Rng::derive(seed, static_cast<std::uint64_t>(i)));
        acc.add(excess_risk_closed_form(t, eq, ds));
    }
    return acc.finish(trials);
}

double coupon_expected_samples(const Eigen::VectorXd& class_probs) {
    const int c = static_cast<int>(class_probs.size());
    if (c < 2) throw ValidationError("coupon_expected_samples: needs C >= 2");
    if (c > 20) throw CapacityError("coupon_expected_samples: C > 20 (2^C subsets)");
    if (class_probs.minCoeff() <= 0.0)
        throw ValidationError("coupon_expected_samples: probabilities must be positive");
    if (std::abs(class_probs.sum() - 1.0) > 1e-9)
        throw ValidationError("coupon_expected_samples: probabilities must sum to 1");

    // E[T] = sum over nonempty S of (-1)^{|S|+1} / p(S), accumulated rank by
    // rank with Kahan compensation (the terms alternate and nearly cancel).
    const std::uint32_t full = (1u << c) - 1u;
    std::vector<double> rank_sum(static_cast<std::size_t>(c) + 1, 0.0);
    std::vector<double> rank_comp(static_cast<std::size_t>(c) + 1, 0.0);
    for (std::uint32_t s = 1; s <= full; ++s) {
        double mass = 0.0;
        for (int i = 0; i < c; ++i)
            if (s & (1u << i)) mass += class_probs[i];
        int bits = __builtin_popcount(s);
        double term = 1.0 / mass;
        double& acc = rank_sum[static_cast<std::size_t>(bits)];
        double& comp = rank_comp[static_cast<std::size_t>(bits)];
        double y = term - comp;
        double t = acc + y;
        comp = (t - acc) - y;
        acc = t;
    }
    double total = 0.0, comp = 0.0;
    for (int r = 1; r <= c; ++r) {
        double term = (r % 2 == 1 ? 1.0 : -1.0) * rank_sum[static_cast<std::size_t>(r)];
        double y = term - comp;
        double t = total + y;
        comp = (t - total) - y;
        total = t;
    }
    return total;
}

double coupon_weighted_asymptotic(const Eigen::VectorXd& class_probs) {
    std::vector<double> p(class_probs.data(), class_probs.data() + class_probs.size());
    std::sort(p.begin(), p.end(), std::greater<double>());
    double sum = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i)
        sum += 1.0 / (static_cast<double>(i + 1) * p[i]);
    return sum;
}

McEstimate mc_coupon_waiting_time(const Eigen::VectorXd& class_probs, long trials,
                                  std::uint64_t seed) {
    if (trials < 1) throw ValidationError("mc_coupon_waiting_time: trials must be >= 1");
    const int c = static_cast<int>(class_probs.size());
    KahanMoments acc;
    for (long i = 0; i < trials; ++i) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(i)));
        std::vector<bool> seen(static_cast<std::size_t>(c), false);
        int distinct = 0;
        long draws = 0;
        while (distinct < c) {
            int k = rng.categorical(class_probs);
            ++draws;
            if (!seen[static_cast<std::size_t>(k)]) {
                seen[static_cast<std::size_t>(k)] = true;
                ++distinct;
            }
        }
        acc.add(static_cast<double>(draws));
    }
    return acc.finish(trials);
}

}  // namespace issl
