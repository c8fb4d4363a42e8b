#include "issl/objectives.hpp"

#include <algorithm>
#include <cmath>

#include "issl/probes.hpp"
#include "issl/rng.hpp"

namespace issl {

namespace {

constexpr double kLogFloor = 1e-12;
const double kLogFloorValue = std::log(kLogFloor);

Eigen::MatrixXd softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        double mx = logits.row(i).maxCoeff();
        Eigen::ArrayXd e = (logits.row(i).array() - mx).exp();
        out.row(i) = (e / e.sum()).matrix();
    }
    return out;
}

Eigen::MatrixXd log_softmax_rows(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd out(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        double mx = logits.row(i).maxCoeff();
        double lse = std::log((logits.row(i).array() - mx).exp().sum()) + mx;
        out.row(i) = logits.row(i).array() - lse;
    }
    return out;
}

// d(loss)/d(logits) given d(loss)/d(softmax probs).
Eigen::MatrixXd softmax_backward(const Eigen::MatrixXd& probs, const Eigen::MatrixXd& dprobs) {
    Eigen::MatrixXd dlogits(probs.rows(), probs.cols());
    for (int i = 0; i < probs.rows(); ++i) {
        double inner = probs.row(i).dot(dprobs.row(i));
        dlogits.row(i) = probs.row(i).cwiseProduct(dprobs.row(i) -
                                                   Eigen::RowVectorXd::Constant(probs.cols(), inner));
    }
    return dlogits;
}

// d(loss)/d(logits) given d(loss)/d(log softmax).
Eigen::MatrixXd log_softmax_backward(const Eigen::MatrixXd& logits,
                                     const Eigen::MatrixXd& dlog) {
    Eigen::MatrixXd probs = softmax_rows(logits);
    Eigen::MatrixXd dlogits(logits.rows(), logits.cols());
    for (int i = 0; i < logits.rows(); ++i) {
        double total = dlog.row(i).sum();
        dlogits.row(i) = dlog.row(i) - total * probs.row(i);
    }
    return dlogits;
}

Eigen::MatrixXd normalize_rows(const Eigen::MatrixXd& x, Eigen::VectorXd& norms) {
    norms.resize(x.rows());
    Eigen::MatrixXd out(x.rows(), x.cols());
    for (int i = 0; i < x.rows(); ++i) {
        double n = x.row(i).norm();
        if (n < 1e-30) throw DivergenceError("normalize_rows: vanishing row norm");
        norms[i] = n;
        out.row(i) = x.row(i) / n;
    }
    return out;
}

Eigen::MatrixXd normalize_rows_backward(const Eigen::MatrixXd& normalized,
                                        const Eigen::VectorXd& norms,
                                        const Eigen::MatrixXd& dnormalized) {
    Eigen::MatrixXd dx(normalized.rows(), normalized.cols());
    for (int i = 0; i < normalized.rows(); ++i) {
        double inner = normalized.row(i).dot(dnormalized.row(i));
        dx.row(i) = (dnormalized.row(i) - inner * normalized.row(i)) / norms[i];
    }
    return dx;
}

}  // namespace

// ----- SphereParams / DenseMap ----------------------------------------------

void SphereParams::validate_unit_rows(double tol) const {
    for (int i = 0; i < features.rows(); ++i)
        if (std::abs(features.row(i).norm() - 1.0) > tol)
            throw ValidationError("SphereParams: feature row " + std::to_string(i) +
                                  " is not unit norm");
    for (int i = 0; i < weights.rows(); ++i)
        if (std::abs(weights.row(i).norm() - 1.0) > tol)
            throw ValidationError("SphereParams: weight row " + std::to_string(i) +
                                  " is not unit norm");
}

DenseMap DenseMap::linear(int in, int out, std::uint64_t seed, double scale) {
    Rng rng(seed);
    DenseMap m;
    m.w1 = rng.normal_matrix(in, out) * (scale / std::sqrt(static_cast<double>(in)));
    m.b1 = Eigen::VectorXd::Zero(out);
    m.has_hidden = false;
    return m;
}

DenseMap DenseMap::with_hidden(int in, int hidden, int out, std::uint64_t seed, double scale) {
    Rng rng(seed);
    DenseMap m;
    m.w1 = rng.normal_matrix(in, hidden) * (scale / std::sqrt(static_cast<double>(in)));
    m.b1 = Eigen::VectorXd::Zero(hidden);
    m.w2 = rng.normal_matrix(hidden, out) * (scale / std::sqrt(static_cast<double>(hidden)));
    m.b2 = Eigen::VectorXd::Zero(out);
    m.has_hidden = true;
    return m;
}

Eigen::MatrixXd DenseMap::forward(const Eigen::MatrixXd& x, Eigen::MatrixXd* hidden_cache) const {
    if (x.cols() != w1.rows()) throw ShapeError("DenseMap: input width mismatch");
    Eigen::MatrixXd pre = (x * w1).rowwise() + b1.transpose();
    if (!has_hidden) {
        if (hidden_cache) hidden_cache->resize(0, 0);
        return pre;
    }
    Eigen::MatrixXd h = pre.array().tanh();
    if (hidden_cache) *hidden_cache = h;
    return (h * w2).rowwise() + b2.transpose();
}

Eigen::MatrixXd DenseMap::backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& hidden_cache,
                                   const Eigen::MatrixXd& dout, DenseMap& grad) const {
    if (!has_hidden) {
        grad.w1 += x.transpose() * dout;
        grad.b1 += dout.colwise().sum();
        return dout * w1.transpose();
    }
    grad.w2 += hidden_cache.transpose() * dout;
    grad.b2 += dout.colwise().sum();
    Eigen::MatrixXd dh = dout * w2.transpose();
    dh.array() *= 1.0 - hidden_cache.array().square();  // tanh'
    grad.w1 += x.transpose() * dh;
    grad.b1 += dh.colwise().sum();
    return dh * w1.transpose();
}

DenseMap DenseMap::zeros_like(const DenseMap& m) {
    DenseMap g;
    g.w1 = Eigen::MatrixXd::Zero(m.w1.rows(), m.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(m.b1.size());
    g.has_hidden = m.has_hidden;
    if (m.has_hidden) {
        g.w2 = Eigen::MatrixXd::Zero(m.w2.rows(), m.w2.cols());
        g.b2 = Eigen::VectorXd::Zero(m.b2.size());
    }
    return g;
}

void DenseMap::collect(std::vector<std::pair<double*, long>>& spans) {
    spans.emplace_back(w1.data(), w1.size());
    spans.emplace_back(b1.data(), b1.size());
    if (has_hidden) {
        spans.emplace_back(w2.data(), w2.size());
        spans.emplace_back(b2.data(), b2.size());
    }
}

void DenseMap::axpy(double step, const DenseMap& g) {
    w1 += step * g.w1;
    b1 += step * g.b1;
    if (has_hidden) {
        w2 += step * g.w2;
        b2 += step * g.b2;
    }
}

void TrainConfig::validate() const {
    if (learning_rate <= 0.0) throw ValidationError("TrainConfig: learning rate must be positive");
    if (steps < 1) throw ValidationError("TrainConfig: steps must be >= 1");
    if (batch_size != 0 && batch_size < 2) throw ValidationError("TrainConfig: batch size >= 2");
    if (lambda < 0.0 || beta < 0.0) throw ValidationError("TrainConfig: lambda/beta must be >= 0");
    if (teacher_temp <= 0.0 || cissl_temp <= 0.0)
        throw ValidationError("TrainConfig: temperatures must be positive");
    if (k_negatives < 1) throw ValidationError("TrainConfig: k negatives must be >= 1");
    if (rep_dim < 1 || proj_dim < 1 || teacher_classes < 2)
        throw ValidationError("TrainConfig: bad model dimensions");
    if (head_init_scale <= 0.0)
        throw ValidationError("TrainConfig: head init scale must be positive");
    if (momentum < 0.0 || momentum >= 1.0)
        throw ValidationError("TrainConfig: momentum must lie in [0, 1)");
    if (log_interval < 1) throw ValidationError("TrainConfig: log interval must be >= 1");
}

// ----- ISSL log loss ----------------------------------------------------------

namespace {
void check_issl_shapes(const SphereParams& p, const MaximalInvariant& m,
                       const InputDistribution& px) {
    if (p.features.rows() != m.size())
        throw ShapeError("issl_log_loss: one feature row per input required");
    if (px.size() != m.size()) throw ShapeError("issl_log_loss: pmf size mismatch");
    if (p.weights.rows() != m.num_classes)
        throw ShapeError("issl_log_loss: one weight row per class required");
    if (p.weights.cols() != p.features.cols())
        throw ShapeError("issl_log_loss: feature/weight dimension mismatch");
}
}  // namespace

double issl_log_loss(const SphereParams& p, const MaximalInvariant& m,
                     const InputDistribution& px) {
    check_issl_shapes(p, m, px);
    Eigen::MatrixXd logits = p.features * p.weights.transpose();  // |X| x C
    Eigen::MatrixXd logsm = log_softmax_rows(logits);
    double loss = 0.0;
    for (int x = 0; x < m.size(); ++x)
        loss -= px.pmf[x] * logsm(x, m.m_of[static_cast<std::size_t>(x)]);
    return loss;
}

SphereParams grad_issl_log_loss(const SphereParams& p, const MaximalInvariant& m,
                                const InputDistribution& px) {
    check_issl_shapes(p, m, px);
    Eigen::MatrixXd logits = p.features * p.weights.transpose();
    Eigen::MatrixXd probs = softmax_rows(logits);
    Eigen::MatrixXd dlogits = probs;
    for (int x = 0; x < m.size(); ++x) {
        dlogits(x, m.m_of[static_cast<std::size_t>(x)]) -= 1.0;
        dlogits.row(x) *= px.pmf[x];
    }
    SphereParams g;
    g.features = dlogits * p.weights;             // |X| x d
    g.weights = dlogits.transpose() * p.features; // C x d
    return g;
}

SphereParams tangent_project(const SphereParams& p, const SphereParams& g) {
    SphereParams out = g;
    for (int i = 0; i < p.features.rows(); ++i) {
        double r = p.features.row(i).dot(g.features.row(i));
        out.features.row(i) -= r * p.features.row(i);
    }
    for (int i = 0; i < p.weights.rows(); ++i) {
        double r = p.weights.row(i).dot(g.weights.row(i));
        out.weights.row(i) -= r * p.weights.row(i);
    }
    return out;
}

std::pair<SphereParams, Trace> minimize_issl_free_features(int num_classes, int dim,
                                                           const Eigen::VectorXd& px_class,
                                                           const TrainConfig& cfg) {
    if (num_classes < 2) throw ValidationError("minimize_issl_free_features: C >= 2");
    if (dim < 1) throw ValidationError("minimize_issl_free_features: d >= 1");
    cfg.validate();
    InputDistribution px(px_class);
    MaximalInvariant m;
    m.num_classes = num_classes;
    m.m_of.resize(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) m.m_of[static_cast<std::size_t>(c)] = c;

    Rng rng(cfg.seed);
    SphereParams p;
    p.features.resize(num_classes, dim);
    p.weights.resize(num_classes, dim);
    for (int c = 0; c < num_classes; ++c) {
        p.features.row(c) = rng.unit_vector(dim).transpose();
        p.weights.row(c) = rng.unit_vector(dim).transpose();
    }

    std::vector<int> identity_classes(static_cast<std::size_t>(num_classes));
    for (int c = 0; c < num_classes; ++c) identity_classes[static_cast<std::size_t>(c)] = c;

    Trace trace;
    auto log_row = [&](long step, double loss) {
        TraceRow row;
        row.step = step;
        row.loss = loss;
        try {
            EtfDistance d = etf_distance(p.features, identity_classes);
            row.etf_distance = d.total;
        } catch (const DegenerateClassError&) {
        }
        trace.push_back(row);
    };

    for (long s = 0; s < cfg.steps; ++s) {
        if (s % cfg.log_interval == 0) log_row(s, issl_log_loss(p, m, px));
        SphereParams g = tangent_project(p, grad_issl_log_loss(p, m, px));
        p.features -= cfg.learning_rate * g.features;
        p.weights -= cfg.learning_rate * g.weights;
        for (int c = 0; c < num_classes; ++c) {
            p.features.row(c) /= p.features.row(c).norm();
            p.weights.row(c) /= p.weights.row(c).norm();
        }
    }
    log_row(cfg.steps, issl_log_loss(p, m, px));
    return {std::move(p), std::move(trace)};
}

// ----- CISSL ------------------------------------------------------------------

void CisslBatch::validate() const {
    const int n = static_cast<int>(anchors.rows());
    const int m = static_cast<int>(candidates.rows());
    if (n < 1 || m < 2) throw ShapeError("CisslBatch: needs anchors and >= 2 candidates");
    if (anchors.cols() != candidates.cols())
        throw ShapeError("CisslBatch: anchor/candidate feature width mismatch");
    if (static_cast<int>(positive_sets.size()) != n)
        throw ShapeError("CisslBatch: one positive set per anchor");
    for (const auto& set : positive_sets) {
        if (set.empty()) throw ShapeError("CisslBatch: empty positive set");
        for (int j : set)
            if (j < 0 || j >= m) throw ShapeError("CisslBatch: positive index out of range");
        if (m - static_cast<int>(set.size()) < 1)
            throw ValidationError("CisslBatch: needs k >= 1 negatives per anchor");
    }
}

namespace {

struct CisslForward {
    Eigen::MatrixXd za, zc;            // encoder outputs
    Eigen::MatrixXd enc_ha, enc_hc;    // encoder hidden caches
    Eigen::MatrixXd hs, gt;            // head outputs
    Eigen::MatrixXd head_hs, head_ht;  // head hidden caches
    Eigen::MatrixXd hn, gn;            // normalized head outputs
    Eigen::VectorXd hnorm, gnorm;
    Eigen::MatrixXd probs;             // N x M softmax rows
    double loss = 0.0;
};

CisslForward cissl_forward(const CisslModel& model, const CisslBatch& batch, double tau) {
    if (tau <= 0.0) throw ValidationError("cissl_loss: tau must be positive");
    batch.validate();
    CisslForward f;
    f.za = model.encoder.forward(batch.anchors, &f.enc_ha);
    f.hs = model.student_head.forward(f.za, &f.head_hs);
    f.zc = model.encoder.forward(batch.candidates, &f.enc_hc);
    f.gt = model.teacher_head.forward(f.zc, &f.head_ht);
    f.hn = normalize_rows(f.hs, f.hnorm);
    f.gn = normalize_rows(f.gt, f.gnorm);
    Eigen::MatrixXd logits = (f.hn * f.gn.transpose()) / tau;
    Eigen::MatrixXd logsm = log_softmax_rows(logits);
    f.probs = softmax_rows(logits);
    double total = 0.0;
    for (int i = 0; i < logits.rows(); ++i) {
        const auto& set = batch.positive_sets[static_cast<std::size_t>(i)];
        double s = 0.0;
        for (int j : set) s += logsm(i, j);
        total -= s / static_cast<double>(set.size());
    }
    f.loss = total / static_cast<double>(logits.rows());
    return f;
}

}  // namespace

double cissl_loss(const CisslModel& model, const CisslBatch& batch, double tau) {
    return cissl_forward(model, batch, tau).loss;
}

double cissl_loss_grad(const CisslModel& model, const CisslBatch& batch, double tau,
                       CisslModelGrad& grad) {
    CisslForward f = cissl_forward(model, batch, tau);
    const int n = static_cast<int>(batch.anchors.rows());

    Eigen::MatrixXd dlogits = f.probs;
    for (int i = 0; i < n; ++i) {
        const auto& set = batch.positive_sets[static_cast<std::size_t>(i)];
        double w = 1.0 / static_cast<double>(set.size());
        for (int j : set) dlogits(i, j) -= w;
    }
    dlogits /= static_cast<double>(n);

    Eigen::MatrixXd dhn = (dlogits * f.gn) / tau;
    Eigen::MatrixXd dgn = (dlogits.transpose() * f.hn) / tau;
    Eigen::MatrixXd dhs = normalize_rows_backward(f.hn, f.hnorm, dhn);
    Eigen::MatrixXd dgt = normalize_rows_backward(f.gn, f.gnorm, dgn);

    Eigen::MatrixXd dza = model.student_head.backward(f.za, f.head_hs, dhs, grad.student_head);
    Eigen::MatrixXd dzc = model.teacher_head.backward(f.zc, f.head_ht, dgt, grad.teacher_head);
    model.encoder.backward(batch.anchors, f.enc_ha, dza, grad.encoder);
    model.encoder.backward(batch.candidates, f.enc_hc, dzc, grad.encoder);
    return f.loss;
}

// ----- DISSL ------------------------------------------------------------------

namespace {

// One direction of the loss; gradients scaled by `scale` when grad != nullptr.
DisslParts dissl_asym(const DisslModel& model, const Eigen::MatrixXd& va,
                      const Eigen::MatrixXd& vb, double lambda, double beta, double scale,
                      DisslModelGrad* grad) {
    const double tau = model.teacher.temperature;
    if (tau <= 0.0) throw ValidationError("dissl_loss: teacher temperature must be positive");
    if (va.rows() != vb.rows() || va.cols() != vb.cols())
        throw ShapeError("dissl_loss: view shapes differ");
    const int n = static_cast<int>(va.rows());

    Eigen::MatrixXd enc_ha, enc_hb, head_ha, head_hb;
    Eigen::MatrixXd za = model.encoder.forward(va, &enc_ha);
    Eigen::MatrixXd zb = model.encoder.forward(vb, &enc_hb);
    Eigen::MatrixXd la = model.teacher.head.forward(za, &head_ha) / tau;
    Eigen::MatrixXd lb = model.teacher.head.forward(zb, &head_hb) / tau;
    if (model.student.w.rows() != za.cols())
        throw ShapeError("dissl_loss: student head width mismatch");
    Eigen::MatrixXd ls = zb * model.student.w;
    if (la.cols() != ls.cols())
        throw ShapeError("dissl_loss: teacher/student class count mismatch");

    Eigen::MatrixXd t1 = softmax_rows(la);
    Eigen::MatrixXd logt2 = log_softmax_rows(lb);
    Eigen::MatrixXd logs = log_softmax_rows(ls);

    DisslParts parts;
    Eigen::VectorXd tbar = t1.colwise().mean();
    for (int m = 0; m < tbar.size(); ++m) {
        double v = tbar[m];
        if (v < kLogFloor) parts.log_floor_hit = true;
        parts.mxml += v * std::log(std::max(v, kLogFloor));
    }
    Eigen::MatrixXd logt2c = logt2.cwiseMax(kLogFloorValue);
    Eigen::MatrixXd logsc = logs.cwiseMax(kLogFloorValue);
    if ((logt2.array() < kLogFloorValue).any() || (logs.array() < kLogFloorValue).any())
        parts.log_floor_hit = true;
    parts.det_inv = (t1.array() * logt2c.array()).sum() / n;
    parts.dstl = (t1.array() * logsc.array()).sum() / n;
    parts.total = lambda * parts.mxml - beta * parts.det_inv - parts.dstl;

    if (grad) {
        Eigen::MatrixXd dt1(n, t1.cols());
        for (int i = 0; i < n; ++i)
            for (int m = 0; m < t1.cols(); ++m)
                dt1(i, m) = scale * (lambda * (std::log(std::max(tbar[m], kLogFloor)) + 1.0) -
                                     beta * logt2c(i, m) - logsc(i, m)) /
                            n;
        // Floored entries contribute no gradient through their log.
        Eigen::MatrixXd dlogt2 =
            ((logt2.array() >= kLogFloorValue).cast<double>() * t1.array() * (-beta * scale / n))
                .matrix();
        Eigen::MatrixXd dlogs =
            ((logs.array() >= kLogFloorValue).cast<double>() * t1.array() * (-scale / n)).matrix();

        Eigen::MatrixXd dla = softmax_backward(t1, dt1) / tau;
        Eigen::MatrixXd dlb = log_softmax_backward(lb, dlogt2) / tau;
        Eigen::MatrixXd dls = log_softmax_backward(ls, dlogs);

        grad->student_w += zb.transpose() * dls;
        Eigen::MatrixXd dzb = dls * model.student.w.transpose();
        Eigen::MatrixXd dza = model.teacher.head.backward(za, head_ha, dla, grad->teacher_head);
        dzb += model.teacher.head.backward(zb, head_hb, dlb, grad->teacher_head);
        model.encoder.backward(va, enc_ha, dza, grad->encoder);
        model.encoder.backward(vb, enc_hb, dzb, grad->encoder);
    }
    return parts;
}

DisslParts average_parts(const DisslParts& a, const DisslParts& b) {
    DisslParts p;
    p.mxml = 0.5 * (a.mxml + b.mxml);
    p.det_inv = 0.5 * (a.det_inv + b.det_inv);
    p.dstl = 0.5 * (a.dstl + b.dstl);
    p.total = 0.5 * (a.total + b.total);
    p.log_floor_hit = a.log_floor_hit || b.log_floor_hit;
    return p;
}

}  // namespace

DisslParts dissl_loss(const DisslModel& model, const Eigen::MatrixXd& view1,
                      const Eigen::MatrixXd& view2, double lambda, double beta,
                      bool symmetrized) {
    if (!symmetrized) return dissl_asym(model, view1, view2, lambda, beta, 1.0, nullptr);
    return average_parts(dissl_asym(model, view1, view2, lambda, beta, 1.0, nullptr),
                         dissl_asym(model, view2, view1, lambda, beta, 1.0, nullptr));
}

DisslParts dissl_loss_grad(const DisslModel& model, const Eigen::MatrixXd& view1,
                           const Eigen::MatrixXd& view2, double lambda, double beta,
                           DisslModelGrad& grad, bool symmetrized) {
    if (!symmetrized) return dissl_asym(model, view1, view2, lambda, beta, 1.0, &grad);
    return average_parts(dissl_asym(model, view1, view2, lambda, beta, 0.5, &grad),
                         dissl_asym(model, view2, view1, lambda, beta, 0.5, &grad));
}

// ----- trainers -----------------------------------------------------------------

int PairedData::num_classes() const {
    int c = 0;
    for (int id : class_of) c = std::max(c, id + 1);
    return c;
}

void PairedData::validate() const {
    if (x.rows() < 2) throw ValidationError("PairedData: needs >= 2 points");
    if (static_cast<int>(class_of.size()) != x.rows())
        throw ValidationError("PairedData: class labels do not match rows");
    const int c = num_classes();
    std::vector<int> counts(static_cast<std::size_t>(c), 0);
    for (int id : class_of) {
        if (id < 0) throw ValidationError("PairedData: negative class id");
        counts[static_cast<std::size_t>(id)]++;
    }
    for (int i = 0; i < c; ++i)
        if (counts[static_cast<std::size_t>(i)] == 0)
            throw ValidationError("PairedData: class " + std::to_string(i) + " empty");
    if (jitter_sigma < 0.0) throw ValidationError("PairedData: jitter sigma must be >= 0");
}

namespace {

std::vector<std::vector<int>> class_pools(const PairedData& data) {
    std::vector<std::vector<int>> pools(static_cast<std::size_t>(data.num_classes()));
    for (int i = 0; i < data.size(); ++i)
        pools[static_cast<std::size_t>(data.class_of[static_cast<std::size_t>(i)])].push_back(i);
    return pools;
}

// Draws one equivalent view per listed index.
Eigen::MatrixXd sample_views(const PairedData& data, const std::vector<std::vector<int>>& pools,
                             const std::vector<int>& indices, Rng& rng) {
    Eigen::MatrixXd out(static_cast<int>(indices.size()), data.x.cols());
    for (std::size_t r = 0; r < indices.size(); ++r) {
        int idx = indices[r];
        if (data.aug == PairedData::Aug::ResampleExact) {
            const auto& pool = pools[static_cast<std::size_t>(
                data.class_of[static_cast<std::size_t>(idx)])];
            int pick = pool[static_cast<std::size_t>(rng.uniform_int(pool.size()))];
            out.row(static_cast<int>(r)) = data.x.row(pick);
        } else {
            out.row(static_cast<int>(r)) =
                data.x.row(idx) +
                data.jitter_sigma * rng.normal_vector(static_cast<int>(data.x.cols())).transpose();
        }
    }
    return out;
}

std::vector<int> batch_indices(int n, int batch_size, Rng& rng) {
    std::vector<int> idx;
    if (batch_size <= 0 || batch_size >= n) {
        idx.resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) idx[static_cast<std::size_t>(i)] = i;
    } else {
        idx.resize(static_cast<std::size_t>(batch_size));
        for (int i = 0; i < batch_size; ++i)
            idx[static_cast<std::size_t>(i)] = static_cast<int>(rng.uniform_int(n));
    }
    return idx;
}

double mean_rowwise_kl(const Eigen::MatrixXd& p, const Eigen::MatrixXd& q) {
    double total = 0.0;
    for (int i = 0; i < p.rows(); ++i) {
        for (int j = 0; j < p.cols(); ++j)
            if (p(i, j) > 0.0)
                total += p(i, j) * (std::log(p(i, j)) - std::log(std::max(q(i, j), kLogFloor)));
    }
    return total / p.rows();
}

}  // namespace

DisslRun train_dissl(const PairedData& data, const TrainConfig& cfg) {
    data.validate();
    cfg.validate();
    const int p = static_cast<int>(data.x.cols());
    const int ct = cfg.teacher_classes;

    DisslModel model;
    model.encoder = cfg.encoder_hidden > 0
                        ? DenseMap::with_hidden(p, cfg.encoder_hidden, cfg.rep_dim,
                                                Rng::derive(cfg.seed, 1))
                        : DenseMap::linear(p, cfg.rep_dim, Rng::derive(cfg.seed, 1));
    model.teacher.head =
        cfg.teacher_hidden > 0
            ? DenseMap::with_hidden(cfg.rep_dim, cfg.teacher_hidden, ct,
                                    Rng::derive(cfg.seed, 2), cfg.head_init_scale)
            : DenseMap::linear(cfg.rep_dim, ct, Rng::derive(cfg.seed, 2),
                               cfg.head_init_scale);
    model.teacher.temperature = cfg.teacher_temp;
    {
        Rng wrng(Rng::derive(cfg.seed, 3));
        model.student.w = wrng.normal_matrix(cfg.rep_dim, ct) * 0.1;
    }

    auto pools = class_pools(data);
    Rng rng(Rng::derive(cfg.seed, 4));
    Rng monitor_rng(Rng::derive(cfg.seed, 5));
    Trace trace;

    auto log_monitors = [&](long step, const DisslParts& parts) {
        TraceRow row;
        row.step = step;
        row.loss = parts.total;
        row.mxml = parts.mxml;
        row.det_inv = parts.det_inv;
        row.dstl = parts.dstl;
        row.log_floor_hit = parts.log_floor_hit;
        Eigen::MatrixXd z = model.encoder.forward(data.x);
        Eigen::MatrixXd t_clean =
            softmax_rows(model.teacher.head.forward(z) / model.teacher.temperature);
        CategoricalBatch batch(t_clean);
        row.h_marginal = marginal_entropy(batch);
        row.h_conditional = conditional_entropy(batch);
        std::vector<int> all(static_cast<std::size_t>(data.size()));
        for (int i = 0; i < data.size(); ++i) all[static_cast<std::size_t>(i)] = i;
        Eigen::MatrixXd v1 = sample_views(data, pools, all, monitor_rng);
        Eigen::MatrixXd v2 = sample_views(data, pools, all, monitor_rng);
        Eigen::MatrixXd t1 =
            softmax_rows(model.teacher.head.forward(model.encoder.forward(v1)) /
                         model.teacher.temperature);
        Eigen::MatrixXd t2 =
            softmax_rows(model.teacher.head.forward(model.encoder.forward(v2)) /
                         model.teacher.temperature);
        row.kl_invariance = mean_rowwise_kl(t1, t2);
        Eigen::MatrixXd s_clean = softmax_rows(z * model.student.w);
        row.kl_distill = mean_rowwise_kl(t_clean, s_clean);
        CosineMonitors cm = cosine_monitors(z, data.class_of);
        if (cm.cos_pos) row.cos_pos = *cm.cos_pos;
        if (cm.cos_neg) row.cos_neg = *cm.cos_neg;
        try {
            row.etf_distance = etf_distance(z, data.class_of).total;
        } catch (const DegenerateClassError&) {
        }
        trace.push_back(row);
    };

    DisslParts last;
    DisslModelGrad velocity;
    velocity.encoder = DenseMap::zeros_like(model.encoder);
    velocity.teacher_head = DenseMap::zeros_like(model.teacher.head);
    velocity.student_w = Eigen::MatrixXd::Zero(cfg.rep_dim, ct);
    for (long s = 0; s < cfg.steps; ++s) {
        std::vector<int> idx = batch_indices(data.size(), cfg.batch_size, rng);
        Eigen::MatrixXd v1 = sample_views(data, pools, idx, rng);
        Eigen::MatrixXd v2 = sample_views(data, pools, idx, rng);
        DisslModelGrad grad;
        grad.encoder = DenseMap::zeros_like(model.encoder);
        grad.teacher_head = DenseMap::zeros_like(model.teacher.head);
        grad.student_w = Eigen::MatrixXd::Zero(cfg.rep_dim, ct);
        last = dissl_loss_grad(model, v1, v2, cfg.lambda, cfg.beta, grad, cfg.symmetrized);
        if (!std::isfinite(last.total))
            throw DivergenceError("train_dissl: loss diverged at step " + std::to_string(s));
        velocity.encoder.axpy(cfg.momentum - 1.0, velocity.encoder);  // v *= momentum
        velocity.encoder.axpy(1.0, grad.encoder);
        velocity.teacher_head.axpy(cfg.momentum - 1.0, velocity.teacher_head);
        velocity.teacher_head.axpy(1.0, grad.teacher_head);
        velocity.student_w = cfg.momentum * velocity.student_w + grad.student_w;
        model.encoder.axpy(-cfg.learning_rate, velocity.encoder);
        model.teacher.head.axpy(-cfg.learning_rate, velocity.teacher_head);
        model.student.w -= cfg.learning_rate * velocity.student_w;
        if (s % cfg.log_interval == 0) log_monitors(s, last);
    }
    log_monitors(cfg.steps, last);

    DisslRun run;
    Eigen::MatrixXd z = model.encoder.forward(data.x);
    run.teacher_probs = softmax_rows(model.teacher.head.forward(z) / model.teacher.temperature);
    run.teacher_assignment.resize(static_cast<std::size_t>(data.size()));
    for (int i = 0; i < data.size(); ++i) {
        int best = 0;
        for (int m = 1; m < ct; ++m)
            if (run.teacher_probs(i, m) > run.teacher_probs(i, best)) best = m;
        run.teacher_assignment[static_cast<std::size_t>(i)] = best;
    }
    run.model = std::move(model);
    run.trace = std::move(trace);
    return run;
}

CisslRun train_cissl(const PairedData& data, const TrainConfig& cfg) {
    data.validate();
    cfg.validate();
    const int p = static_cast<int>(data.x.cols());
    const int bs = cfg.batch_size > 0 ? std::min(cfg.batch_size, data.size())
                                      : std::min(cfg.k_negatives + 1, data.size());
    if (bs < 2) throw ValidationError("train_cissl: batch must hold >= 1 negative");

    CisslModel model;
    model.encoder = cfg.encoder_hidden > 0
                        ? DenseMap::with_hidden(p, cfg.encoder_hidden, cfg.rep_dim,
                                                Rng::derive(cfg.seed, 1))
                        : DenseMap::linear(p, cfg.rep_dim, Rng::derive(cfg.seed, 1));
    model.teacher_head = cfg.teacher_hidden > 0
                             ? DenseMap::with_hidden(cfg.rep_dim, cfg.teacher_hidden,
                                                     cfg.proj_dim, Rng::derive(cfg.seed, 2))
                             : DenseMap::linear(cfg.rep_dim, cfg.proj_dim,
                                                Rng::derive(cfg.seed, 2));
    model.student_head = DenseMap::linear(cfg.rep_dim, cfg.proj_dim, Rng::derive(cfg.seed, 3));

    auto pools = class_pools(data);
    Rng rng(Rng::derive(cfg.seed, 4));
    Trace trace;
    CisslModelGrad velocity{DenseMap::zeros_like(model.encoder),
                            DenseMap::zeros_like(model.teacher_head),
                            DenseMap::zeros_like(model.student_head)};

    auto log_monitors = [&](long step, double loss) {
        TraceRow row;
        row.step = step;
        row.loss = loss;
        Eigen::MatrixXd z = model.encoder.forward(data.x);
        CosineMonitors cm = cosine_monitors(z, data.class_of);
        if (cm.cos_pos) row.cos_pos = *cm.cos_pos;
        if (cm.cos_neg) row.cos_neg = *cm.cos_neg;
        try {
            row.etf_distance = etf_distance(z, data.class_of).total;
        } catch (const DegenerateClassError&) {
        }
        trace.push_back(row);
    };

    double last_loss = 0.0;
    for (long s = 0; s < cfg.steps; ++s) {
        std::vector<int> idx = batch_indices(data.size(), bs, rng);
        Eigen::MatrixXd v1 = sample_views(data, pools, idx, rng);
        Eigen::MatrixXd v2 = sample_views(data, pools, idx, rng);

        CisslBatch batch;
        const int n = static_cast<int>(idx.size());
        if (cfg.two_positives) {
            batch.anchors.resize(2 * n, p);
            batch.anchors << v1, v2;
            batch.candidates = batch.anchors;
            batch.positive_sets.resize(static_cast<std::size_t>(2 * n));
            for (int i = 0; i < n; ++i) {
                batch.positive_sets[static_cast<std::size_t>(i)] = {i, i + n};
                batch.positive_sets[static_cast<std::size_t>(i + n)] = {i + n, i};
            }
        } else {
            batch.anchors = v1;
            batch.candidates = v2;
            batch.positive_sets.resize(static_cast<std::size_t>(n));
            for (int i = 0; i < n; ++i) batch.positive_sets[static_cast<std::size_t>(i)] = {i};
        }

        CisslModelGrad grad;
        grad.encoder = DenseMap::zeros_like(model.encoder);
        grad.teacher_head = DenseMap::zeros_like(model.teacher_head);
        grad.student_head = DenseMap::zeros_like(model.student_head);
        last_loss = cissl_loss_grad(model, batch, cfg.cissl_temp, grad);
        if (!std::isfinite(last_loss))
            throw DivergenceError("train_cissl: loss diverged at step " + std::to_string(s));
        velocity.encoder.axpy(cfg.momentum - 1.0, velocity.encoder);
        velocity.encoder.axpy(1.0, grad.encoder);
        velocity.teacher_head.axpy(cfg.momentum - 1.0, velocity.teacher_head);
        velocity.teacher_head.axpy(1.0, grad.teacher_head);
        velocity.student_head.axpy(cfg.momentum - 1.0, velocity.student_head);
        velocity.student_head.axpy(1.0, grad.student_head);
        model.encoder.axpy(-cfg.learning_rate, velocity.encoder);
        model.teacher_head.axpy(-cfg.learning_rate, velocity.teacher_head);
        model.student_head.axpy(-cfg.learning_rate, velocity.student_head);
        if (s % cfg.log_interval == 0) log_monitors(s, last_loss);
    }
    log_monitors(cfg.steps, last_loss);

    CisslRun run;
    run.representations = model.encoder.forward(data.x);
    run.model = std::move(model);
    run.trace = std::move(trace);
    return run;
}

}  // namespace issl
