#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "issl/metrics.hpp"
#include "issl/world.hpp"

namespace issl {

// ----- shared containers ----------------------------------------------------

// Free features on the unit sphere plus class weights, one row each.
struct SphereParams {
    Eigen::MatrixXd features;  // |X| x d (per-class runs use |X| = C)
    Eigen::MatrixXd weights;   // C x d

    void validate_unit_rows(double tol = 1e-9) const;
};

// Affine map, optionally with one tanh hidden layer. Batched row convention:
// rows in, rows out.
struct DenseMap {
    Eigen::MatrixXd w1;  // in x out (or in x hidden)
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;  // hidden x out; empty when !has_hidden
    Eigen::VectorXd b2;
    bool has_hidden = false;

    static DenseMap linear(int in, int out, std::uint64_t seed, double scale = 0.5);
    static DenseMap with_hidden(int in, int hidden, int out, std::uint64_t seed,
                                double scale = 0.5);

    int in_dim() const { return static_cast<int>(w1.rows()); }
    int out_dim() const {
        return has_hidden ? static_cast<int>(w2.cols()) : static_cast<int>(w1.cols());
    }

    Eigen::MatrixXd forward(const Eigen::MatrixXd& x,
                            Eigen::MatrixXd* hidden_cache = nullptr) const;
    // Returns d(loss)/d(x); accumulates parameter gradients into `grad`.
    Eigen::MatrixXd backward(const Eigen::MatrixXd& x, const Eigen::MatrixXd& hidden_cache,
                             const Eigen::MatrixXd& dout, DenseMap& grad) const;

    static DenseMap zeros_like(const DenseMap& m);
    void collect(std::vector<std::pair<double*, long>>& spans);
    void axpy(double step, const DenseMap& g);  // *this += step * g
};

struct TeacherState {
    DenseMap head;  // rep -> C logits
    double temperature = 0.5;
};

struct StudentState {
    Eigen::MatrixXd w;  // rep_dim x C, linear head without bias
};

struct TrainConfig {
    double learning_rate = 0.05;
    long steps = 3000;
    int batch_size = 0;  // 0 = full batch
    double lambda = 2.3;
    double beta = 0.8;
    double teacher_temp = 0.5;
    double cissl_temp = 0.07;
    int k_negatives = 31;
    std::uint64_t seed = 0;
    long log_interval = 50;
    bool symmetrized = true;      // DISSL loss direction averaging
    bool two_positives = false;   // CISSL self-contrastive mode
    int rep_dim = 8;
    int proj_dim = 8;
    int teacher_classes = 8;
    int encoder_hidden = 0;   // 0 = linear encoder
    int teacher_hidden = 32;  // 0 = linear teacher head
    double head_init_scale = 0.5;
    double momentum = 0.9;

    void validate() const;
};

// One monitor row; NaN marks columns a trainer does not produce.
struct TraceRow {
    long step = 0;
    double loss = std::nan("");
    double mxml = std::nan("");
    double det_inv = std::nan("");
    double dstl = std::nan("");
    double h_marginal = std::nan("");
    double h_conditional = std::nan("");
    double kl_invariance = std::nan("");
    double kl_distill = std::nan("");
    double cos_pos = std::nan("");
    double cos_neg = std::nan("");
    double etf_distance = std::nan("");
    bool log_floor_hit = false;
};

using Trace = std::vector<TraceRow>;

// ----- ISSL log loss over free features ------------------------------------

double issl_log_loss(const SphereParams& p, const MaximalInvariant& m,
                     const InputDistribution& px);

// Euclidean gradient with the same shapes as the parameters.
SphereParams grad_issl_log_loss(const SphereParams& p, const MaximalInvariant& m,
                                const InputDistribution& px);

// Per-row projection of g onto the tangent space of the sphere at p.
SphereParams tangent_project(const SphereParams& p, const SphereParams& g);

// Riemannian projected gradient descent over per-class features and weights.
// px_class holds class probabilities; rows stay unit-norm throughout.
std::pair<SphereParams, Trace> minimize_issl_free_features(int num_classes, int dim,
                                                           const Eigen::VectorXd& px_class,
                                                           const TrainConfig& cfg);

// ----- CISSL ----------------------------------------------------------------

struct CisslModel {
    DenseMap encoder;       // raw -> rep
    DenseMap teacher_head;  // rep -> proj (expressive side g)
    DenseMap student_head;  // rep -> proj (linear side h)
};

struct CisslModelGrad {
    DenseMap encoder, teacher_head, student_head;
};

// Anchors score candidates; `positive_sets[i]` indexes each anchor's
// positives among the candidate rows (uniform target over the set).
struct CisslBatch {
    Eigen::MatrixXd anchors;     // N x p
    Eigen::MatrixXd candidates;  // M x p
    std::vector<std::vector<int>> positive_sets;

    void validate() const;  // requires >= 1 negative per anchor
};

double cissl_loss(const CisslModel& model, const CisslBatch& batch, double tau);
double cissl_loss_grad(const CisslModel& model, const CisslBatch& batch, double tau,
                       CisslModelGrad& grad);

// ----- DISSL ----------------------------------------------------------------

struct DisslParts {
    double total = 0.0;
    double mxml = 0.0;     // sum_m t(m) log t(m) = -H[teacher marginal]
    double det_inv = 0.0;  // E_x sum_m t(m|v1) log t(m|v2)
    double dstl = 0.0;     // E_x sum_m t(m|v1) log s(m|v2)
    bool log_floor_hit = false;
};

struct DisslModel {
    DenseMap encoder;  // raw -> rep
    TeacherState teacher;
    StudentState student;
};

struct DisslModelGrad {
    DenseMap encoder, teacher_head;
    Eigen::MatrixXd student_w;
};

// Batched loss per the training loop: teacher on both views (temperature
// divided), student on the second view, marginal from the first-view batch,
// gradients through every term. `symmetrized` averages both directions.
DisslParts dissl_loss(const DisslModel& model, const Eigen::MatrixXd& view1,
                      const Eigen::MatrixXd& view2, double lambda, double beta,
                      bool symmetrized = true);
DisslParts dissl_loss_grad(const DisslModel& model, const Eigen::MatrixXd& view1,
                           const Eigen::MatrixXd& view2, double lambda, double beta,
                           DisslModelGrad& grad, bool symmetrized = true);

// ----- trainers over paired synthetic data ----------------------------------

// Finite dataset with an equivalence used to draw positive pairs.
struct PairedData {
    enum class Aug { ResampleExact, Jitter };

    Eigen::MatrixXd x;          // n x p
    std::vector<int> class_of;  // equivalence of the augmentation graph
    Aug aug = Aug::ResampleExact;
    double jitter_sigma = 0.0;

    int size() const { return static_cast<int>(x.rows()); }
    int num_classes() const;
    void validate() const;
};

struct DisslRun {
    DisslModel model;
    Trace trace;
    Eigen::MatrixXd teacher_probs;  // n x C on the clean inputs
    std::vector<int> teacher_assignment;
};

struct CisslRun {
    CisslModel model;
    Trace trace;
    Eigen::MatrixXd representations;  // n x rep_dim, frozen encoder outputs
};

DisslRun train_dissl(const PairedData& data, const TrainConfig& cfg);
CisslRun train_cissl(const PairedData& data, const TrainConfig& cfg);

}  // namespace issl
