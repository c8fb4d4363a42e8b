#include "issl/acceptance.hpp"

#include <chrono>
#include <cmath>
#include <functional>
#include <sstream>
#include <vector>

#include <Eigen/Dense>

#include "issl/encoders.hpp"
#include "issl/metrics.hpp"
#include "issl/objectives.hpp"
#include "issl/probes.hpp"
#include "issl/risk.hpp"
#include "issl/rng.hpp"
#include "issl/scenarios.hpp"
#include "issl/synthetic.hpp"
#include "issl/tasks.hpp"
#include "issl/world.hpp"

namespace issl::acceptance {

namespace {

constexpr std::uint64_t kSeed = 20240717ULL;

struct Criterion {
    std::ostringstream detail;
    bool ok = true;

    void expect(bool cond, const std::string& message) {
        if (!cond) {
            ok = false;
            detail << " [" << message << "]";
        }
    }
};

struct Gate {
    std::ostream& out;
    bool all_passed = true;

    void run(int number, const std::string& what, double time_limit_s,
             const std::function<void(Criterion&)>& body) {
        Criterion c;
        auto start = std::chrono::steady_clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail << " exception: " << e.what();
        }
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (time_limit_s > 0.0 && elapsed > time_limit_s) {
            c.ok = false;
            c.detail << " [time limit " << time_limit_s << "s exceeded]";
        }
        all_passed = all_passed && c.ok;
        out << (c.ok ? "[PASS]" : "[FAIL]") << " criterion " << number << ": " << what
            << " (" << std::fixed;
        out.precision(2);
        out << elapsed << "s)" << c.detail.str() << "\n";
        out.unsetf(std::ios::fixed);
    }
};

Task equiprobable_task(int c) {
    return Task(InputDistribution::uniform(c), Eigen::MatrixXd::Identity(c, c));
}

// Central finite differences over raw parameter spans.
double fd_relative_error(const std::function<double()>& loss,
                         std::vector<std::pair<double*, long>> params,
                         std::vector<std::pair<double*, long>> grads, double h = 1e-5) {
    std::vector<double> analytic, numeric;
    for (auto [g, len] : grads)
        for (long i = 0; i < len; ++i) analytic.push_back(g[i]);
    for (auto [p, len] : params) {
        for (long i = 0; i < len; ++i) {
            double saved = p[i];
            p[i] = saved + h;
            double up = loss();
            p[i] = saved - h;
            double down = loss();
            p[i] = saved;
            numeric.push_back((up - down) / (2.0 * h));
        }
    }
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
        diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
        na += analytic[i] * analytic[i];
        nb += numeric[i] * numeric[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

void criterion_prop2_law(Criterion& c_) {
    for (int c : {2, 3, 4, 8}) {
        Task t = equiprobable_task(c);
        EquivalenceRelation eq = EquivalenceRelation::identity(c);
        for (long n = 0; n <= 10; ++n) {
            double exact = expected_excess_risk_exact(t, eq, n);
            double law = worst_case_rate(c, n);
            c_.expect(std::abs(exact - law) <= 1e-12,
                   "exact != (1-1/C)^n at C=" + std::to_string(c) + " n=" + std::to_string(n));
            McEstimate mc = mc_expected_excess_risk(
                t, eq, static_cast<int>(n), 50000,
                Rng::derive(kSeed, static_cast<std::uint64_t>(100 * c + n)));
            double slack = 3.0 * mc.stderr_;
            c_.expect(std::abs(mc.mean - exact) <= slack + 1e-15,
                   "mc off by >3 stderr at C=" + std::to_string(c) + " n=" + std::to_string(n));
        }
    }
    c_.expect(expected_excess_risk_exact(equiprobable_task(4),
                                         EquivalenceRelation::identity(4), 3) == 0.421875,
           "C=4 n=3 should be exactly 0.421875");
}

void criterion_per_dataset_oracle(Criterion& c_) {
    EquivalenceRelation eq{{0, 0, 1, 1, 2, 2, 3, 3}, 4};
    MaximalInvariant m = maximal_invariant(eq);
    Encoder frame = setf_encoder(m, 3);
    InputDistribution px = InputDistribution::uniform(8);
    long checked = 0;
    for (const InvariantLabeling& l : enumerate_binary_labelings(4)) {
        Task t = task_from_labeling(l, eq, px);
        for (int n = 0; n <= 3; ++n) {
            long combos = 1;
            for (int i = 0; i < n; ++i) combos *= 8;
            for (long code = 0; code < combos; ++code) {
                Dataset ds;
                long rest = code;
                for (int i = 0; i < n; ++i) {
                    int x = static_cast<int>(rest % 8);
                    rest /= 8;
                    ds.items.emplace_back(x,
                                          l.label_of_class[static_cast<std::size_t>(
                                              eq.class_of[static_cast<std::size_t>(x)])]);
                }
                double closed = excess_risk_closed_form(t, eq, ds);
                RiskReport brute = brute_force_worst_erm(frame, t, eq, ds);
                if (brute.closed_form != closed) {
                    c_.expect(false, "brute != closed at labeling/dataset");
                    return;
                }
                if (labeling_excess_risk(t, eq, construct_bad_erm(t, eq, ds)) != closed) {
                    c_.expect(false, "bad-ERM witness does not attain the closed form");
                    return;
                }
                ++checked;
            }
        }
    }
    c_.expect(checked == 16 * (1 + 8 + 64 + 512), "exhaustive enumeration incomplete");
}

void criterion_setf_geometry(Criterion& c_) {
    for (int c = 2; c <= 12; ++c) {
        for (int dim = c - 1; dim <= 2 * c; ++dim) {
            SetfFrame f = setf(c, dim);
            for (int i = 0; i < c; ++i) {
                if (std::abs(f.vertices.row(i).norm() - 1.0) > 1e-10) {
                    c_.expect(false, "row norm off at C=" + std::to_string(c));
                    return;
                }
                for (int j = i + 1; j < c; ++j) {
                    if (std::abs(f.vertices.row(i).dot(f.vertices.row(j)) + 1.0 / (c - 1)) >
                        1e-10) {
                        c_.expect(false, "pairwise dot off at C=" + std::to_string(c));
                        return;
                    }
                }
            }
        }
    }
    SetfFrame f3 = setf(3, 2);
    for (int i = 0; i < 3; ++i)
        for (int j = i + 1; j < 3; ++j)
            c_.expect(std::abs(f3.vertices.row(i).dot(f3.vertices.row(j)) + 0.5) <= 1e-12,
                   "C=3 dot is not -0.5");
}

void criterion_collapse(Criterion& c_) {
    TrainConfig cfg;
    cfg.seed = Rng::derive(kSeed, 4);
    auto [params, trace] =
        minimize_issl_free_features(4, 3, Eigen::VectorXd::Constant(4, 0.25), cfg);
    std::vector<int> ids{0, 1, 2, 3};
    EtfDistance dist = etf_distance(params.features, ids);
    double gap = dist.pos + dist.neg + 1.0 / 3.0;
    c_.expect(gap <= 1e-3, "etf distance gap " + format_g17(gap) + " > 1e-3");

    Eigen::MatrixXd reps(8, 3);
    std::vector<int> pair_ids;
    for (int i = 0; i < 4; ++i) {
        reps.row(2 * i) = params.features.row(i);
        reps.row(2 * i + 1) = params.features.row(i);
        pair_ids.push_back(i);
        pair_ids.push_back(i);
    }
    EquivalenceRelation eq(pair_ids, 4);
    OptimalityReport r = sample_optimality_report(Encoder(reps), eq, ProbeFamily::linear(),
                                                  1e-6, 3000, Rng::derive(kSeed, 5));
    c_.expect(r.invariant && r.m_predictable && r.shattered && r.verdict,
           "trained features fail the three-part audit");

    TrainConfig low = cfg;
    low.seed = Rng::derive(kSeed, 6);
    auto [flat, flat_trace] =
        minimize_issl_free_features(4, 1, Eigen::VectorXd::Constant(4, 0.25), low);
    bool fails_rank;
    try {
        fails_rank = !shatterable_rank(flat.features);
    } catch (const DuplicatePointError&) {
        fails_rank = true;
    }
    c_.expect(fails_rank, "d=1 features should fail the rank criterion");
}

void criterion_shattering_boundary(Criterion& c_) {
    for (int c = 2; c <= 8; ++c) {
        Eigen::MatrixXd frame = setf(c, c - 1).vertices;
        c_.expect(shatterable_rank(frame), "frame rank false at C=" + std::to_string(c));
        long budget = 10L * (1L << c) * c;
        BinaryLabelingStream stream(c);
        InvariantLabeling l({0, 0}, 2);
        std::uint64_t idx = 0;
        while (stream.next(l)) {
            if (!linear_separate(frame, l.label_of_class, budget, Rng::derive(kSeed, idx++))
                     .has_value()) {
                c_.expect(false, "separable labeling missed at C=" + std::to_string(c));
                return;
            }
        }
        if (c >= 3) {
            Eigen::MatrixXd base = setf(c - 1, std::max(c - 2, 1)).vertices;
            Eigen::MatrixXd bad(c, base.cols());
            bad.topRows(c - 1) = base;
            bad.row(c - 1) = 0.5 * (base.row(0) + base.row(1));
            c_.expect(!shatterable_rank(bad),
                   "deficient configuration rank true at C=" + std::to_string(c));
            bool witnessed = false;
            BinaryLabelingStream bad_stream(c);
            idx = 0;
            while (bad_stream.next(l)) {
                if (!linear_separate(bad, l.label_of_class, budget,
                                     Rng::derive(kSeed, 5000 + idx++))
                         .has_value()) {
                    witnessed = true;
                    break;
                }
            }
            c_.expect(witnessed,
                   "no failing labeling witnessed at C=" + std::to_string(c));
        }
    }
}

void criterion_kary(Criterion& c_) {
    const int k = 5;
    std::vector<int> ids;
    for (int c = 0; c < k; ++c) {
        ids.push_back(c);
        ids.push_back(c);
    }
    MaximalInvariant m;
    m.m_of = ids;
    m.num_classes = k;
    Encoder e = setf_encoder(m, k - 1);
    Rng rng(Rng::derive(kSeed, 6));
    int mismatches = 0;
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<int> class_labels(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c)
            class_labels[static_cast<std::size_t>(c)] =
                static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(k)));
        std::vector<int> labels(ids.size());
        for (std::size_t i = 0; i < ids.size(); ++i)
            labels[i] = class_labels[static_cast<std::size_t>(ids[i])];
        auto composed = kary_by_recursion(e.reps, labels, k, 10L * (1L << k) * k,
                                          rng.next_u64());
        if (!composed) {
            c_.expect(false, "construction failed at trial " + std::to_string(trial));
            return;
        }
        for (int x = 0; x < e.size(); ++x)
            if (composed->predict(e.reps.row(x).transpose()) !=
                labels[static_cast<std::size_t>(x)])
                ++mismatches;
    }
    c_.expect(mismatches == 0, std::to_string(mismatches) + " mismatches over 200 labelings");
}

void criterion_coupon(Criterion& c_) {
    double harmonic = 0.0;
    for (int i = 1; i <= 10; ++i) harmonic += 1.0 / i;
    double exact = coupon_expected_samples(Eigen::VectorXd::Constant(10, 0.1));
    c_.expect(std::abs(exact - 10.0 * harmonic) <= 1e-9,
           "inclusion-exclusion misses 10*H10");
    McEstimate mc = mc_coupon_waiting_time(Eigen::VectorXd::Constant(10, 0.1), 100000,
                                           Rng::derive(kSeed, 7));
    c_.expect(std::abs(mc.mean - exact) <= 3.0 * mc.stderr_,
           "mc waiting time off by >3 stderr");
}

void criterion_gradients(Criterion& c_) {
    Rng rng(Rng::derive(kSeed, 8));
    for (int trial = 0; trial < 20; ++trial) {
        int c = 2 + static_cast<int>(rng.uniform_int(4));
        int dim = 1 + static_cast<int>(rng.uniform_int(4));
        SphereParams p;
        p.features.resize(c, dim);
        p.weights.resize(c, dim);
        for (int i = 0; i < c; ++i) {
            p.features.row(i) = rng.unit_vector(dim).transpose();
            p.weights.row(i) = rng.unit_vector(dim).transpose();
        }
        MaximalInvariant m;
        m.num_classes = c;
        for (int i = 0; i < c; ++i) m.m_of.push_back(i);
        Eigen::VectorXd w(c);
        for (int i = 0; i < c; ++i) w[i] = rng.uniform() + 0.1;
        InputDistribution px(w / w.sum());
        SphereParams g = grad_issl_log_loss(p, m, px);
        double err = fd_relative_error(
            [&]() { return issl_log_loss(p, m, px); },
            {{p.features.data(), p.features.size()}, {p.weights.data(), p.weights.size()}},
            {{g.features.data(), g.features.size()}, {g.weights.data(), g.weights.size()}});
        if (err > 1e-5) {
            c_.expect(false, "issl gradient err " + format_g17(err));
            return;
        }
    }
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 3, rep = 4, proj = 3, n = 4, m = 6;
        CisslModel model;
        model.encoder = DenseMap::linear(p, rep, rng.next_u64());
        model.teacher_head = DenseMap::with_hidden(rep, 5, proj, rng.next_u64());
        model.student_head = DenseMap::linear(rep, proj, rng.next_u64());
        CisslBatch batch;
        batch.anchors = rng.normal_matrix(n, p);
        batch.candidates = rng.normal_matrix(m, p);
        for (int i = 0; i < n; ++i) {
            if (trial % 2 == 0)
                batch.positive_sets.push_back({i});
            else
                batch.positive_sets.push_back({i, (i + 1) % m});
        }
        CisslModelGrad grad{DenseMap::zeros_like(model.encoder),
                            DenseMap::zeros_like(model.teacher_head),
                            DenseMap::zeros_like(model.student_head)};
        cissl_loss_grad(model, batch, 0.07, grad);
        std::vector<std::pair<double*, long>> params, gspans;
        model.encoder.collect(params);
        model.teacher_head.collect(params);
        model.student_head.collect(params);
        grad.encoder.collect(gspans);
        grad.teacher_head.collect(gspans);
        grad.student_head.collect(gspans);
        double err = fd_relative_error([&]() { return cissl_loss(model, batch, 0.07); },
                                       params, gspans);
        if (err > 1e-5) {
            c_.expect(false, "cissl gradient err " + format_g17(err));
            return;
        }
    }
    for (int trial = 0; trial < 20; ++trial) {
        const int p = 3, rep = 4, c = 3, n = 5;
        DisslModel model;
        model.encoder = DenseMap::linear(p, rep, rng.next_u64());
        model.teacher.head = DenseMap::with_hidden(rep, 5, c, rng.next_u64());
        model.teacher.temperature = 0.5;
        model.student.w = rng.normal_matrix(rep, c) * 0.7;
        Eigen::MatrixXd v1 = rng.normal_matrix(n, p);
        Eigen::MatrixXd v2 = rng.normal_matrix(n, p);
        bool sym = trial % 2 == 1;
        DisslModelGrad grad;
        grad.encoder = DenseMap::zeros_like(model.encoder);
        grad.teacher_head = DenseMap::zeros_like(model.teacher.head);
        grad.student_w = Eigen::MatrixXd::Zero(rep, c);
        dissl_loss_grad(model, v1, v2, 2.3, 0.8, grad, sym);
        std::vector<std::pair<double*, long>> params, gspans;
        model.encoder.collect(params);
        model.teacher.head.collect(params);
        params.emplace_back(model.student.w.data(), model.student.w.size());
        grad.encoder.collect(gspans);
        grad.teacher_head.collect(gspans);
        gspans.emplace_back(grad.student_w.data(), grad.student_w.size());
        double err = fd_relative_error(
            [&]() { return dissl_loss(model, v1, v2, 2.3, 0.8, sym).total; }, params,
            gspans);
        if (err > 1e-5) {
            c_.expect(false, "dissl gradient err " + format_g17(err));
            return;
        }
    }
}

void criterion_dissl(Criterion& c_) {
    nlohmann::json summary =
        dissl_scenario_summary(nlohmann::json::object(), Rng::derive(kSeed, 9));
    double log8 = std::log(8.0);
    double perm = summary["permutation_accuracy"].get<double>();
    double hm = summary["h_marginal"].get<double>();
    double hc = summary["h_conditional"].get<double>();
    double probe = summary["probe_accuracy"].get<double>();
    double control = summary["control_h_marginal"].get<double>();
    c_.expect(perm >= 0.99, "permutation accuracy " + format_g17(perm) + " < 0.99");
    c_.expect(hm >= 0.95 * log8, "marginal entropy " + format_g17(hm) + " < 0.95 log 8");
    c_.expect(hc <= 0.1, "conditional entropy " + format_g17(hc) + " > 0.1 nats");
    c_.expect(probe == 1.0, "student probe accuracy " + format_g17(probe) + " != 1");
    c_.expect(control <= 0.2 * log8,
           "lambda=0 control entropy " + format_g17(control) + " > 0.2 log 8");
}

void criterion_cissl(Criterion& c_) {
    nlohmann::json summary =
        cissl_scenario_summary(nlohmann::json::object(), Rng::derive(kSeed, 10));
    double probe = summary["probe_accuracy"].get<double>();
    c_.expect(summary["k_negatives"].get<int>() == 31, "k != 31");
    c_.expect(probe == 1.0, "frozen probe accuracy " + format_g17(probe) + " != 1");
}

void criterion_monotonicity(Criterion& c_) {
    for (int c : {2, 3, 5, 8, 12}) {
        Task t = equiprobable_task(c);
        EquivalenceRelation eq = EquivalenceRelation::identity(c);
        double prev = 2.0;
        for (long n = 0; n <= 20; ++n) {
            double r = expected_excess_risk_exact(t, eq, n);
            if (r > prev + 1e-15) {
                c_.expect(false, "risk increased in n at C=" + std::to_string(c));
                return;
            }
            prev = r;
        }
    }
    for (long n : {1L, 2L, 5L, 10L}) {
        double prev = -1.0;
        for (int c = 2; c <= 12; ++c) {
            double r = worst_case_rate(c, n);
            if (r < prev - 1e-15) {
                c_.expect(false, "rate decreased in C at n=" + std::to_string(n));
                return;
            }
            prev = r;
        }
    }
    std::vector<int> ids;
    for (int i = 0; i < 10; ++i) {
        ids.push_back(i);
        ids.push_back(i);
    }
    EquivalenceRelation eq(ids, 10);
    std::vector<int> d_range;
    for (int dim = 1; dim <= 10; ++dim) d_range.push_back(dim);
    auto lin = empirical_min_dimension(eq, ProbeFamily::linear(), d_range, 2,
                                       Rng::derive(kSeed, 11));
    auto mlp_small = empirical_min_dimension(eq, ProbeFamily::mlp({10}), d_range, 2,
                                             Rng::derive(kSeed, 12));
    auto mlp_large = empirical_min_dimension(eq, ProbeFamily::mlp({64, 64}), d_range, 2,
                                             Rng::derive(kSeed, 13));
    c_.expect(lin.has_value() && *lin == 9,
           "linear family min dimension should be 9, got " +
               (lin ? std::to_string(*lin) : std::string("none")));
    c_.expect(mlp_small.has_value() && mlp_large.has_value(),
           "mlp sweeps returned no dimension");
    if (lin && mlp_small && mlp_large) {
        c_.expect(*mlp_small <= *lin, "mlp[10] needs more dimensions than linear");
        c_.expect(*mlp_large <= *mlp_small, "mlp[64,64] needs more dimensions than mlp[10]");
    }
}

void criterion_identities(Criterion& c_) {
    Rng rng(Rng::derive(kSeed, 14));
    for (int trial = 0; trial < 50; ++trial) {
        int c = 2 + static_cast<int>(rng.uniform_int(6));
        Eigen::VectorXd p(c), q(c);
        for (int i = 0; i < c; ++i) {
            p[i] = rng.uniform() + 1e-3;
            q[i] = rng.uniform() + 1e-3;
        }
        p /= p.sum();
        q /= q.sum();
        CeDecomposition dec = cross_entropy_decomposition_check(p, q);
        if (std::abs(dec.residual) > 1e-10) {
            c_.expect(false, "decomposition residual " + format_g17(dec.residual));
            return;
        }
        Eigen::VectorXd unif = Eigen::VectorXd::Constant(c, 1.0 / c);
        double lhs = kl(p, unif);
        double rhs = std::log(static_cast<double>(c)) - entropy(p);
        if (std::abs(lhs - rhs) > 1e-12) {
            c_.expect(false, "KL-to-uniform identity off by " + format_g17(lhs - rhs));
            return;
        }
    }
    DisslModel model;
    model.encoder = DenseMap::linear(3, 4, rng.next_u64());
    model.teacher.head = DenseMap::with_hidden(4, 6, 4, rng.next_u64());
    model.teacher.temperature = 0.5;
    model.student.w = rng.normal_matrix(4, 4);
    Eigen::MatrixXd v1 = rng.normal_matrix(6, 3);
    Eigen::MatrixXd v2 = rng.normal_matrix(6, 3);
    for (bool sym : {false, true}) {
        DisslParts parts = dissl_loss(model, v1, v2, 2.3, 0.8, sym);
        c_.expect(
               std::abs(parts.total - (2.3 * parts.mxml - 0.8 * parts.det_inv - parts.dstl)) <=
                   1e-12,
               "loss parts do not recombine");
    }
}

}  // namespace

bool run_all(std::ostream& out) {
    Gate gate{out};
    gate.run(1, "closed-form risk law matches (1-1/C)^n with MC agreement", 10.0,
             criterion_prop2_law);
    gate.run(2, "per-dataset worst-ERM oracle equals the closed form exhaustively", 30.0,
             criterion_per_dataset_oracle);
    gate.run(3, "frame geometry: unit rows and -1/(C-1) pairwise dots", 0.0,
             criterion_setf_geometry);
    gate.run(4, "free-feature collapse reaches the frame and passes the audit", 60.0,
             criterion_collapse);
    gate.run(5, "rank criterion agrees with exhaustive perceptron separation", 0.0,
             criterion_shattering_boundary);
    gate.run(6, "k-ary construction reproduces 200 random 5-ary labelings", 0.0,
             criterion_kary);
    gate.run(7, "coupon-collector expectation matches 10*H10 and MC", 0.0, criterion_coupon);
    gate.run(8, "analytic gradients match finite differences (20 cases each)", 0.0,
             criterion_gradients);
    gate.run(9, "distillation training clusters 8 ground-truth classes", 120.0,
             criterion_dissl);
    gate.run(10, "contrastive training yields a perfect frozen linear probe", 120.0,
             criterion_cissl);
    gate.run(11, "monotonicity in n, C, and probe family (linear minimum = 9)", 0.0,
             criterion_monotonicity);
    gate.run(12, "information identities and loss-part recombination", 0.0,
             criterion_identities);
    out << (gate.all_passed ? "ALL CRITERIA PASSED" : "SOME CRITERIA FAILED") << "\n";
    return gate.all_passed;
}

}  // namespace issl::acceptance
