#include "issl/probes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <sstream>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "issl/rng.hpp"

namespace issl {

namespace {

constexpr double kRankTol = 1e-8;
constexpr int kMlpSteps = 5000;
constexpr double kMlpLr = 0.1;
constexpr int kMlpRestarts = 3;
// Separators must clear a relative geometric margin, not just a sign test:
// downstream compositions rescale and re-round their logits.
constexpr double kRelativeMargin = 1e-6;

Eigen::MatrixXd augment_bias(const Eigen::MatrixXd& points, bool include_bias) {
    if (!include_bias) return points;
    Eigen::MatrixXd out(points.rows(), points.cols() + 1);
    out.leftCols(points.cols()) = points;
    out.col(points.cols()).setOnes();
    return out;
}

// ----- tiny relu MLP used for probe training -------------------------------

struct MlpParams {
    std::vector<Eigen::MatrixXd> w;  // layer l: in x out
    std::vector<Eigen::VectorXd> b;
};

MlpParams init_mlp(int in_dim, const std::vector<int>& hidden, int out_dim, Rng& rng) {
    MlpParams p;
    std::vector<int> dims;
    dims.push_back(in_dim);
    for (int h : hidden) dims.push_back(h);
    dims.push_back(out_dim);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        double scale = std::sqrt(2.0 / dims[l]);
        p.w.push_back(rng.normal_matrix(dims[l], dims[l + 1]) * scale);
        p.b.push_back(Eigen::VectorXd::Zero(dims[l + 1]));
    }
    return p;
}

// Forward all points at once; returns activations per layer (post-relu).
Eigen::MatrixXd mlp_forward(const MlpParams& p, const Eigen::MatrixXd& x,
                            std::vector<Eigen::MatrixXd>* acts = nullptr) {
    Eigen::MatrixXd h = x;
    if (acts) acts->push_back(h);
    for (std::size_t l = 0; l < p.w.size(); ++l) {
        h = (h * p.w[l]).rowwise() + p.b[l].transpose();
        if (l + 1 < p.w.size()) {
            h = h.cwiseMax(0.0);
            if (acts) acts->push_back(h);
        }
    }
    return h;  // logits, one row per point
}

// One full-batch gradient step on mean softmax cross-entropy.
void mlp_step(MlpParams& p, const Eigen::MatrixXd& x, const std::vector<int>& targets,
              double lr) {
    std::vector<Eigen::MatrixXd> acts;
    Eigen::MatrixXd logits = mlp_forward(p, x, &acts);
    const int n = static_cast<int>(x.rows());

    Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
    for (int i = 0; i < n; ++i) {
        Eigen::VectorXd row = logits.row(i);
        double mx = row.maxCoeff();
        Eigen::VectorXd e = (row.array() - mx).exp();
        Eigen::VectorXd soft = e / e.sum();
        soft[targets[static_cast<std::size_t>(i)]] -= 1.0;
        dlogits.row(i) = soft.transpose() / n;
    }

    Eigen::MatrixXd grad_out = dlogits;
    for (int l = static_cast<int>(p.w.size()) - 1; l >= 0; --l) {
        const Eigen::MatrixXd& input = acts[static_cast<std::size_t>(l)];
        Eigen::MatrixXd gw = input.transpose() * grad_out;
        Eigen::VectorXd gb = grad_out.colwise().sum();
        if (l > 0) {
            Eigen::MatrixXd gin = grad_out * p.w[static_cast<std::size_t>(l)].transpose();
            gin.array() *= (acts[static_cast<std::size_t>(l)].array() > 0.0).cast<double>();
            grad_out = gin;
        }
        p.w[static_cast<std::size_t>(l)] -= lr * gw;
        p.b[static_cast<std::size_t>(l)] -= lr * gb;
    }
}

bool strict_argmax_correct(const Eigen::MatrixXd& logits, const std::vector<int>& targets) {
    for (int i = 0; i < logits.rows(); ++i) {
        int t = targets[static_cast<std::size_t>(i)];
        for (int j = 0; j < logits.cols(); ++j)
            if (j != t && logits(i, j) >= logits(i, t)) return false;
    }
    return true;
}

MlpPredictor to_predictor(const MlpParams& p, const std::string& activation) {
    MlpPredictor out;
    out.weights = p.w;
    out.biases = p.b;
    out.activation = activation;
    return out;
}

// Trains an Mlp to reproduce integer targets exactly (strict argmax), with
// seeded restarts. Binary labelings use two output logits.
std::optional<MlpPredictor> train_mlp_exact(const Eigen::MatrixXd& x,
                                            const std::vector<int>& targets, int num_out,
                                            const ProbeFamily& fam, long steps,
                                            std::uint64_t seed) {
    if (steps <= 0) steps = kMlpSteps;
    for (int restart = 0; restart < kMlpRestarts; ++restart) {
        Rng rng(Rng::derive(seed, static_cast<std::uint64_t>(restart)));
        MlpParams p = init_mlp(static_cast<int>(x.cols()), fam.hidden_widths, num_out, rng);
        for (long s = 0; s < steps; ++s) {
            Eigen::MatrixXd logits = mlp_forward(p, x);
            if (strict_argmax_correct(logits, targets)) return to_predictor(p, fam.activation);
            mlp_step(p, x, targets, kMlpLr);
        }
        Eigen::MatrixXd logits = mlp_forward(p, x);
        if (strict_argmax_correct(logits, targets)) return to_predictor(p, fam.activation);
    }
    return std::nullopt;
}

bool has_duplicate_rows(const Eigen::MatrixXd& points) {
    for (int i = 0; i < points.rows(); ++i)
        for (int j = i + 1; j < points.rows(); ++j)
            if ((points.row(i) - points.row(j)).cwiseAbs().maxCoeff() == 0.0) return true;
    return false;
}

Eigen::MatrixXd class_representatives(const Encoder& e, const MaximalInvariant& m) {
    Eigen::MatrixXd reps(m.num_classes, e.dim());
    std::vector<bool> seen(static_cast<std::size_t>(m.num_classes), false);
    for (int x = 0; x < e.size(); ++x) {
        int c = m.m_of[static_cast<std::size_t>(x)];
        if (!seen[static_cast<std::size_t>(c)]) {
            reps.row(c) = e.reps.row(x);
            seen[static_cast<std::size_t>(c)] = true;
        }
    }
    return reps;
}

}  // namespace

ProbeFamily ProbeFamily::linear(bool with_bias) {
    ProbeFamily f;
    f.kind = Kind::Linear;
    f.include_bias = with_bias;
    return f;
}

ProbeFamily ProbeFamily::mlp(std::vector<int> widths, bool with_bias) {
    ProbeFamily f;
    f.kind = Kind::Mlp;
    f.hidden_widths = std::move(widths);
    f.include_bias = with_bias;
    f.validate();
    return f;
}

void ProbeFamily::validate() const {
    if (kind == Kind::Mlp) {
        if (hidden_widths.empty())
            throw ValidationError("ProbeFamily: Mlp needs at least one hidden layer");
        for (int w : hidden_widths)
            if (w < 1) throw ValidationError("ProbeFamily: hidden widths must be positive");
        if (activation != "relu")
            throw ValidationError("ProbeFamily: unsupported activation " + activation);
    }
}

std::string ProbeFamily::describe() const {
    if (kind == Kind::Linear) return include_bias ? "linear" : "linear(no-bias)";
    std::ostringstream os;
    os << "mlp:";
    for (std::size_t i = 0; i < hidden_widths.size(); ++i)
        os << (i ? "," : "") << hidden_widths[i];
    return os.str();
}

int LinearPredictor::predict(const Eigen::VectorXd& z) const {
    Eigen::VectorXd l = logits(z);
    int best = 0;
    for (int j = 1; j < l.size(); ++j)
        if (l[j] > l[best]) best = j;
    return best;
}

Eigen::VectorXd MlpPredictor::logits(const Eigen::VectorXd& z) const {
    Eigen::VectorXd h = z;
    for (std::size_t l = 0; l < weights.size(); ++l) {
        h = weights[l].transpose() * h + biases[l];
        if (l + 1 < weights.size()) h = h.cwiseMax(0.0);
    }
    return h;
}

int MlpPredictor::predict(const Eigen::VectorXd& z) const {
    Eigen::VectorXd l = logits(z);
    int best = 0;
    for (int j = 1; j < l.size(); ++j)
        if (l[j] > l[best]) best = j;
    return best;
}

Eigen::VectorXd predictor_logits(const Predictor& p, const Eigen::VectorXd& z) {
    return std::visit([&](const auto& f) { return f.logits(z); }, p);
}

int predictor_class(const Predictor& p, const Eigen::VectorXd& z) {
    return std::visit([&](const auto& f) { return f.predict(z); }, p);
}

std::optional<LinearPredictor> linear_separate(const Eigen::MatrixXd& points,
                                               const std::vector<int>& labeling,
                                               long budget, std::uint64_t seed,
                                               bool include_bias) {
    const int n = static_cast<int>(points.rows());
    if (static_cast<int>(labeling.size()) != n)
        throw SizeMismatchError("linear_separate: labeling length mismatch");
    Eigen::MatrixXd x = augment_bias(points, include_bias);
    Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);

    auto as_predictor = [&]() {
        LinearPredictor p;
        p.weights = Eigen::MatrixXd(points.cols(), 1);
        p.weights.col(0) = w.head(points.cols());
        p.bias = Eigen::VectorXd::Zero(1);
        if (include_bias) p.bias[0] = w[points.cols()];
        return p;
    };
    // Strictness is judged through the predictor's own evaluation path; the
    // in-loop dot over the augmented vector can round differently.
    auto strict_everywhere = [&](const LinearPredictor& p) {
        for (int i = 0; i < n; ++i) {
            double g = p.binary_logit(points.row(i).transpose());
            if (labeling[static_cast<std::size_t>(i)] == 1 ? g <= 0.0 : g >= 0.0) return false;
        }
        return true;
    };

    Eigen::VectorXd xnorm(n);
    for (int i = 0; i < n; ++i) xnorm[i] = x.row(i).norm();

    for (long epoch = 0; epoch < budget; ++epoch) {
        rng.shuffle(order);
        bool updated = false;
        for (int idx : order) {
            double y = labeling[static_cast<std::size_t>(idx)] == 1 ? 1.0 : -1.0;
            double needed = kRelativeMargin * w.norm() * xnorm[idx];
            if (y * x.row(idx).dot(w) <= needed) {
                w += y * x.row(idx).transpose();
                updated = true;
            }
        }
        if (!updated) {
            LinearPredictor p = as_predictor();
            if (strict_everywhere(p)) return p;
            for (int i = 0; i < n; ++i) {
                double y = labeling[static_cast<std::size_t>(i)] == 1 ? 1.0 : -1.0;
                double g = p.binary_logit(points.row(i).transpose());
                if (y >= 0.0 ? g <= 0.0 : g >= 0.0) w += y * x.row(i).transpose();
            }
        }
    }
    return std::nullopt;
}

bool shatterable_rank(const Eigen::MatrixXd& points, double tol) {
    const int c = static_cast<int>(points.rows());
    if (c < 1) throw ValidationError("shatterable_rank: no points");
    for (int i = 0; i < c; ++i)
        for (int j = i + 1; j < c; ++j)
            if ((points.row(i) - points.row(j)).cwiseAbs().maxCoeff() == 0.0)
                throw DuplicatePointError("shatterable_rank: points " + std::to_string(i) +
                                          " and " + std::to_string(j) + " coincide");
    if (c == 1) return true;
    if (c - 1 > points.cols()) return false;
    Eigen::MatrixXd diffs(c - 1, points.cols());
    for (int i = 1; i < c; ++i) diffs.row(i - 1) = points.row(i) - points.row(0);
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(diffs);
    const auto& sv = svd.singularValues();
    double cutoff = tol * sv[0];
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff && sv[i] > 0.0) ++rank;
    return rank == c - 1;
}

std::optional<Predictor> m_predictable(const Encoder& e, const MaximalInvariant& m,
                                       const ProbeFamily& fam, long budget,
                                       std::uint64_t seed) {
    if (e.size() != m.size()) throw SizeMismatchError("m_predictable: size mismatch");
    fam.validate();
    const int n = e.size();
    const int c = m.num_classes;

    if (fam.kind == ProbeFamily::Kind::Mlp) {
        auto trained = train_mlp_exact(e.reps, m.m_of, c, fam, budget, seed);
        if (!trained) return std::nullopt;
        return Predictor(std::move(*trained));
    }

    // Multiclass perceptron on bias-augmented representations.
    Eigen::MatrixXd x = augment_bias(e.reps, fam.include_bias);
    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(x.cols(), c);
    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    Rng rng(seed);
    long epochs = budget > 0 ? budget : 1000;

    auto as_predictor = [&]() {
        LinearPredictor p;
        p.weights = w.topRows(e.dim());
        p.bias = fam.include_bias ? Eigen::VectorXd(w.row(e.dim()).transpose())
                                  : Eigen::VectorXd(Eigen::VectorXd::Zero(c));
        return p;
    };
    auto strict_everywhere = [&](const LinearPredictor& p) {
        for (int i = 0; i < n; ++i) {
            Eigen::VectorXd logits = p.logits(e.reps.row(i).transpose());
            int t = m.m_of[static_cast<std::size_t>(i)];
            for (int j = 0; j < c; ++j)
                if (j != t && logits[j] >= logits[t]) return false;
        }
        return true;
    };

    Eigen::VectorXd xnorm(n);
    for (int i = 0; i < n; ++i) xnorm[i] = x.row(i).norm();

    for (long epoch = 0; epoch < epochs; ++epoch) {
        rng.shuffle(order);
        bool updated = false;
        for (int idx : order) {
            int target = m.m_of[static_cast<std::size_t>(idx)];
            Eigen::VectorXd logits = w.transpose() * x.row(idx).transpose();
            double needed = kRelativeMargin * w.norm() * xnorm[idx];
            int rival = -1;
            double rival_logit = logits[target] - needed;
            for (int j = 0; j < c; ++j) {
                if (j == target) continue;
                if (logits[j] >= rival_logit) {
                    rival_logit = logits[j];
                    rival = j;
                }
            }
            if (rival >= 0) {
                w.col(target) += x.row(idx).transpose();
                w.col(rival) -= x.row(idx).transpose();
                updated = true;
            }
        }
        if (!updated) {
            LinearPredictor p = as_predictor();
            if (strict_everywhere(p)) return Predictor(std::move(p));
            for (int i = 0; i < n; ++i) {
                Eigen::VectorXd logits = p.logits(e.reps.row(i).transpose());
                int t = m.m_of[static_cast<std::size_t>(i)];
                for (int j = 0; j < c; ++j) {
                    if (j != t && logits[j] >= logits[t]) {
                        w.col(t) += x.row(i).transpose();
                        w.col(j) -= x.row(i).transpose();
                        break;
                    }
                }
            }
        }
    }
    return std::nullopt;
}

LinearPredictor kary_from_binary(const LinearPredictor& f_km1, const LinearPredictor& f2,
                                 const LinearPredictor& f2p, const Eigen::MatrixXd& reps,
                                 const std::vector<int>& labels_k, int k) {
    if (k < 2) throw ValidationError("kary_from_binary: k must be >= 2");
    if (static_cast<int>(labels_k.size()) != reps.rows())
        throw SizeMismatchError("kary_from_binary: labels do not match reps");
    if (k == 2) return f_km1;  // degenerate passthrough
    if (f_km1.weights.cols() != k - 1)
        throw ShapeError("kary_from_binary: merged predictor must have k-1 outputs");
    if (f2.weights.cols() != 1 || f2p.weights.cols() != 1)
        throw ShapeError("kary_from_binary: binary parts must have one logit");

    for (int i = 0; i < reps.rows(); ++i) {
        Eigen::VectorXd z = reps.row(i).transpose();
        int label = labels_k[static_cast<std::size_t>(i)];
        double g2 = f2.binary_logit(z);
        double g2p = f2p.binary_logit(z);
        if (label == k - 1 ? g2 <= 0.0 : g2 >= 0.0)
            throw PreconditionError("kary_from_binary: f2 must fire exactly on class k-1");
        if (label == k - 2 ? g2p <= 0.0 : g2p >= 0.0)
            throw PreconditionError(
                "kary_from_binary: f2p must fire exactly on class k-2 (complement within "
                "the merged pair)");
        int merged = std::min(label, k - 2);
        Eigen::VectorXd lm = f_km1.logits(z);
        for (int j = 0; j < k - 1; ++j)
            if (j != merged && lm[j] >= lm[merged])
                throw PreconditionError(
                    "kary_from_binary: merged predictor wrong on input " + std::to_string(i));
    }

    LinearPredictor out;
    out.weights = Eigen::MatrixXd(reps.cols(), k);
    out.bias = Eigen::VectorXd(k);
    for (int j = 0; j < k - 2; ++j) {
        out.weights.col(j) = f_km1.weights.col(j);
        out.bias[j] = f_km1.bias[j];
    }
    out.weights.col(k - 2) = f_km1.weights.col(k - 2) + f2p.weights.col(0);
    out.bias[k - 2] = f_km1.bias[k - 2] + f2p.bias[0];
    out.weights.col(k - 1) = f_km1.weights.col(k - 2) + f2.weights.col(0);
    out.bias[k - 1] = f_km1.bias[k - 2] + f2.bias[0];

    for (int i = 0; i < reps.rows(); ++i) {
        if (out.predict(reps.row(i).transpose()) != labels_k[static_cast<std::size_t>(i)])
            throw Error("kary_from_binary: composed predictor failed verification");
    }
    return out;
}

std::optional<LinearPredictor> kary_by_recursion(const Eigen::MatrixXd& reps,
                                                 const std::vector<int>& labels_k, int k,
                                                 long budget, std::uint64_t seed) {
    const int n = static_cast<int>(reps.rows());
    auto binary = [&](const std::vector<int>& want, std::uint64_t s) {
        return linear_separate(reps, want, budget, s);
    };
    if (k == 2) {
        auto f = binary(labels_k, seed);
        if (!f) return std::nullopt;
        // Two-logit form so argmax reproduces the sign rule.
        LinearPredictor p;
        p.weights = Eigen::MatrixXd::Zero(reps.cols(), 2);
        p.bias = Eigen::VectorXd::Zero(2);
        p.weights.col(1) = f->weights.col(0);
        p.bias[1] = f->bias[0];
        return p;
    }
    std::vector<int> merged(static_cast<std::size_t>(n));
    std::vector<int> is_last(static_cast<std::size_t>(n));
    std::vector<int> is_second(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        int l = labels_k[static_cast<std::size_t>(i)];
        merged[static_cast<std::size_t>(i)] = std::min(l, k - 2);
        is_last[static_cast<std::size_t>(i)] = l == k - 1 ? 1 : 0;
        is_second[static_cast<std::size_t>(i)] = l == k - 2 ? 1 : 0;
    }
    auto f_km1 = kary_by_recursion(reps, merged, k - 1, budget, Rng::derive(seed, 1));
    if (!f_km1) return std::nullopt;
    auto f2 = binary(is_last, Rng::derive(seed, 2));
    if (!f2) return std::nullopt;
    auto f2p = binary(is_second, Rng::derive(seed, 3));
    if (!f2p) return std::nullopt;

    // The composition is sign-driven, so any positive rescaling of a binary
    // part stays a valid part. Scale both until their smallest logit
    // magnitude dominates the merged predictor's logit range; all composed
    // comparisons then carry real margins instead of rounding-level ones.
    double range = 1.0;
    for (int i = 0; i < n; ++i)
        range = std::max(range,
                         f_km1->logits(reps.row(i).transpose()).cwiseAbs().maxCoeff());
    auto rescale = [&](LinearPredictor& f) {
        double least = std::numeric_limits<double>::infinity();
        for (int i = 0; i < n; ++i)
            least = std::min(least, std::abs(f.binary_logit(reps.row(i).transpose())));
        double s = (2.0 * range + 2.0) / least;
        f.weights *= s;
        f.bias *= s;
    };
    rescale(*f2);
    rescale(*f2p);
    return kary_from_binary(*f_km1, *f2, *f2p, reps, labels_k, k);
}

bool shattering_check(const Eigen::MatrixXd& points, const ProbeFamily& fam, long budget,
                      std::uint64_t seed) {
    fam.validate();
    const int c = static_cast<int>(points.rows());
    if (fam.kind == ProbeFamily::Kind::Linear && fam.include_bias) {
        try {
            return shatterable_rank(points, kRankTol);
        } catch (const DuplicatePointError&) {
            return false;
        }
    }
    if (has_duplicate_rows(points)) return false;

    // Exhaustive labelings. Trainability is closed under logit negation, so
    // each labeling/complement pair is checked once.
    BinaryLabelingStream stream(c);
    InvariantLabeling l({0, 0}, 2);
    std::uint64_t code = 0;
    const std::uint64_t all = stream.total() - 1;
    while (stream.next(l)) {
        std::uint64_t comp = all - code;
        std::uint64_t my_code = code;
        ++code;
        if (my_code > comp) continue;
        if (fam.kind == ProbeFamily::Kind::Linear) {
            if (!linear_separate(points, l.label_of_class, budget,
                                 Rng::derive(seed, my_code), fam.include_bias))
                return false;
        } else {
            std::vector<int> targets = l.label_of_class;
            if (!train_mlp_exact(points, targets, 2, fam, budget, Rng::derive(seed, my_code)))
                return false;
        }
    }
    return true;
}

std::string report_to_json(const OptimalityReport& r) {
    nlohmann::json j;
    j["invariant"] = r.invariant;
    j["m_predictable"] = r.m_predictable;
    if (r.shattered_empirical)
        j["shattered"] = nlohmann::json{{"empirical", r.shattered}};
    else
        j["shattered"] = r.shattered;
    j["verdict"] = r.verdict;
    return j.dump();
}

OptimalityReport sample_optimality_report(const Encoder& e, const EquivalenceRelation& eq,
                                          const ProbeFamily& fam, double tol, long budget,
                                          std::uint64_t seed) {
    if (e.size() != eq.size())
        throw SizeMismatchError("sample_optimality_report: size mismatch");
    fam.validate();
    MaximalInvariant m = maximal_invariant(eq);

    OptimalityReport r;
    r.invariant = is_invariant(e, eq, tol);
    r.effective_dim = effective_dimension(e, kRankTol);
    r.image_card = image_cardinality(e, std::max(tol, 1e-12));
    r.m_predictable = m_predictable(e, m, fam, budget, Rng::derive(seed, 7)).has_value();

    Eigen::MatrixXd reps = class_representatives(e, m);
    if (fam.kind == ProbeFamily::Kind::Mlp) r.shattered_empirical = true;
    if (has_duplicate_rows(reps)) {
        r.shattered = false;  // non-equivalent inputs merged; cannot shatter
    } else {
        r.shattered = shattering_check(reps, fam, budget, Rng::derive(seed, 13));
    }
    r.verdict = r.invariant && r.m_predictable && r.shattered;
    return r;
}

Eigen::MatrixXd spread_unit_points(int count, int dim, std::uint64_t seed, int steps,
                                   double lr) {
    if (count < 1 || dim < 1) throw ValidationError("spread_unit_points: bad shape");
    Rng rng(seed);
    Eigen::MatrixXd v(count, dim);
    for (int i = 0; i < count; ++i) v.row(i) = rng.unit_vector(dim).transpose();

    const double beta = 4.0;
    for (int s = 0; s < steps; ++s) {
        Eigen::MatrixXd grad = Eigen::MatrixXd::Zero(count, dim);
        for (int i = 0; i < count; ++i) {
            for (int j = 0; j < count; ++j) {
                if (j == i) continue;
                double w = std::exp(beta * (v.row(i).dot(v.row(j)) - 1.0));
                grad.row(i) += beta * w * v.row(j);
            }
        }
        for (int i = 0; i < count; ++i) {
            Eigen::VectorXd g = grad.row(i).transpose();
            Eigen::VectorXd vi = v.row(i).transpose();
            g -= g.dot(vi) * vi;  // tangent projection
            vi -= lr * g;
            double n = vi.norm();
            if (n > 1e-12) v.row(i) = (vi / n).transpose();
        }
    }
    return v;
}

double least_squares_probe_accuracy(const Eigen::MatrixXd& reps,
                                    const std::vector<int>& classes, int num_classes) {
    const int n = static_cast<int>(reps.rows());
    if (static_cast<int>(classes.size()) != n)
        throw SizeMismatchError("least_squares_probe_accuracy: label count mismatch");
    Eigen::MatrixXd x = augment_bias(reps, true);
    Eigen::MatrixXd y = Eigen::MatrixXd::Zero(n, num_classes);
    for (int i = 0; i < n; ++i) y(i, classes[static_cast<std::size_t>(i)]) = 1.0;
    Eigen::MatrixXd gram =
        x.transpose() * x + 1e-6 * Eigen::MatrixXd::Identity(x.cols(), x.cols());
    Eigen::MatrixXd w = gram.ldlt().solve(x.transpose() * y);
    Eigen::MatrixXd logits = x * w;
    int hits = 0;
    for (int i = 0; i < n; ++i) {
        int best = 0;
        for (int j = 1; j < num_classes; ++j)
            if (logits(i, j) > logits(i, best)) best = j;
        if (best == classes[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(n);
}

std::optional<int> empirical_min_dimension(const EquivalenceRelation& eq,
                                           const ProbeFamily& fam,
                                           const std::vector<int>& d_range, int trials,
                                           std::uint64_t seed) {
    fam.validate();
    if (trials < 1) throw ValidationError("empirical_min_dimension: trials must be >= 1");
    for (std::size_t i = 1; i < d_range.size(); ++i)
        if (d_range[i] <= d_range[i - 1])
            throw ValidationError("empirical_min_dimension: d_range must ascend");
    const int c = eq.num_classes;

    for (int d : d_range) {
        if (d < 1) continue;
        const bool deterministic_config = d >= c - 1;
        const int attempts = deterministic_config ? 1 : trials;
        for (int t = 0; t < attempts; ++t) {
            std::uint64_t s = Rng::derive(seed, static_cast<std::uint64_t>(d) * 1009 +
                                                    static_cast<std::uint64_t>(t));
            Eigen::MatrixXd config = deterministic_config
                                         ? setf(c, d).vertices
                                         : spread_unit_points(c, d, s);
            if (shattering_check(config, fam, kMlpSteps, Rng::derive(s, 1))) return d;
        }
    }
    return std::nullopt;
}

}  // namespace issl
