#include "issl/world.hpp"

#include <algorithm>
#include <numeric>

#include <nlohmann/json.hpp>

namespace issl {

namespace {

constexpr double kEdgeTol = 1e-12;   // augmentation-graph "nonzero"
constexpr double kPmfTol = 1e-9;

// Path-compressing union-find over dense indices.
class UnionFind {
public:
    explicit UnionFind(int n) : parent_(n) {
        std::iota(parent_.begin(), parent_.end(), 0);
    }
    int find(int x) {
        while (parent_[x] != x) {
            parent_[x] = parent_[parent_[x]];
            x = parent_[x];
        }
        return x;
    }
    void unite(int a, int b) {
        a = find(a);
        b = find(b);
        if (a != b) parent_[std::max(a, b)] = std::min(a, b);
    }

private:
    std::vector<int> parent_;
};

// Relabel class ids so that ids ascend with the smallest member input index.
std::vector<int> canonical_relabel(const std::vector<int>& raw, int* out_count) {
    std::vector<int> remap(raw.size(), -1);
    std::vector<int> result(raw.size());
    int next_id = 0;
    for (std::size_t x = 0; x < raw.size(); ++x) {
        int c = raw[x];
        if (remap[static_cast<std::size_t>(c)] == -1) remap[static_cast<std::size_t>(c)] = next_id++;
        result[x] = remap[static_cast<std::size_t>(c)];
    }
    if (out_count) *out_count = next_id;
    return result;
}

}  // namespace

InputSpace::InputSpace(int n, std::vector<std::string> element_names)
    : size(n), names(std::move(element_names)) {
    if (size < 2) throw ValidationError("InputSpace: |X| must be >= 2");
    if (!names.empty() && static_cast<int>(names.size()) != size)
        throw ValidationError("InputSpace: names must be empty or one per input");
}

EquivalenceRelation::EquivalenceRelation(std::vector<int> classes, int c)
    : class_of(std::move(classes)), num_classes(c) {
    const int n = static_cast<int>(class_of.size());
    if (num_classes < 2) throw ValidationError("EquivalenceRelation: C must be >= 2");
    if (num_classes > n) throw ValidationError("EquivalenceRelation: C must be <= |X|");
    std::vector<bool> seen(static_cast<std::size_t>(num_classes), false);
    for (int id : class_of) {
        if (id < 0 || id >= num_classes)
            throw ValidationError("EquivalenceRelation: class id out of range");
        seen[static_cast<std::size_t>(id)] = true;
    }
    for (bool s : seen)
        if (!s) throw ValidationError("EquivalenceRelation: some class id never occurs");
}

EquivalenceRelation EquivalenceRelation::identity(int n) {
    std::vector<int> ids(static_cast<std::size_t>(n));
    std::iota(ids.begin(), ids.end(), 0);
    return EquivalenceRelation(std::move(ids), n);
}

Augmentor::Augmentor(Eigen::MatrixXd conditional) : cond(std::move(conditional)) {
    if (cond.rows() < 1 || cond.cols() < 1) throw ValidationError("Augmentor: empty matrix");
    for (int r = 0; r < cond.rows(); ++r) {
        if (cond.row(r).minCoeff() < -kPmfTol)
            throw ValidationError("Augmentor: negative entry in row " + std::to_string(r));
        if (std::abs(cond.row(r).sum() - 1.0) > kPmfTol)
            throw ValidationError("Augmentor: row " + std::to_string(r) + " does not sum to 1");
    }
}

InputDistribution::InputDistribution(Eigen::VectorXd p) : pmf(std::move(p)) {
    if (pmf.size() < 1) throw ValidationError("InputDistribution: empty pmf");
    if (pmf.minCoeff() < -kPmfTol) throw ValidationError("InputDistribution: negative mass");
    if (std::abs(pmf.sum() - 1.0) > kPmfTol)
        throw ValidationError("InputDistribution: pmf does not sum to 1");
}

bool InputDistribution::full_support() const { return pmf.minCoeff() > 0.0; }

InputDistribution InputDistribution::uniform(int n) {
    return InputDistribution(Eigen::VectorXd::Constant(n, 1.0 / n));
}

MaximalInvariant maximal_invariant(const EquivalenceRelation& eq) {
    int count = 0;
    MaximalInvariant m;
    m.m_of = canonical_relabel(eq.class_of, &count);
    m.num_classes = count;
    return m;
}

bool is_refinement(const EquivalenceRelation& fine, const EquivalenceRelation& coarse) {
    if (fine.size() != coarse.size())
        throw SizeMismatchError("is_refinement: partitions over different input spaces");
    std::vector<int> image(static_cast<std::size_t>(fine.num_classes), -1);
    for (int x = 0; x < fine.size(); ++x) {
        int f = fine.class_of[static_cast<std::size_t>(x)];
        int c = coarse.class_of[static_cast<std::size_t>(x)];
        if (image[static_cast<std::size_t>(f)] == -1)
            image[static_cast<std::size_t>(f)] = c;
        else if (image[static_cast<std::size_t>(f)] != c)
            return false;
    }
    return true;
}

EquivalenceRelation equivalence_from_augmentor(const Augmentor& a, const InputDistribution& px) {
    const int n = a.input_size();
    if (a.aug_space_size() != n)
        throw SizeMismatchError("equivalence_from_augmentor: augmented space must equal input space");
    if (px.size() != n)
        throw SizeMismatchError("equivalence_from_augmentor: pmf size mismatch");

    UnionFind uf(n);
    for (int x = 0; x < n; ++x) {
        if (px.pmf[x] <= 0.0) continue;
        for (int y = 0; y < n; ++y) {
            if (y == x || px.pmf[y] <= 0.0) continue;
            if (a.cond(x, y) > kEdgeTol) uf.unite(x, y);
        }
    }
    std::vector<int> roots(static_cast<std::size_t>(n));
    for (int x = 0; x < n; ++x) roots[static_cast<std::size_t>(x)] = uf.find(x);
    int count = 0;
    std::vector<int> ids = canonical_relabel(roots, &count);
    return EquivalenceRelation(std::move(ids), count);
}

bool check_markov_augmentor(const Augmentor& a, const EquivalenceRelation& eq, double tol) {
    if (a.input_size() != eq.size())
        throw SizeMismatchError("check_markov_augmentor: size mismatch");
    for (int x = 0; x < eq.size(); ++x) {
        for (int y = x + 1; y < eq.size(); ++y) {
            if (eq.class_of[static_cast<std::size_t>(x)] != eq.class_of[static_cast<std::size_t>(y)])
                continue;
            double diff = (a.cond.row(x) - a.cond.row(y)).cwiseAbs().maxCoeff();
            if (diff > tol) return false;
        }
    }
    return true;
}

Eigen::VectorXd class_probabilities(const InputDistribution& px, const EquivalenceRelation& eq) {
    if (px.size() != eq.size())
        throw SizeMismatchError("class_probabilities: size mismatch");
    Eigen::VectorXd p = Eigen::VectorXd::Zero(eq.num_classes);
    for (int x = 0; x < eq.size(); ++x)
        p[eq.class_of[static_cast<std::size_t>(x)]] += px.pmf[x];
    return p;
}

std::string partition_to_json(const EquivalenceRelation& eq) {
    nlohmann::json j;
    j["size"] = eq.size();
    j["class_of"] = eq.class_of;
    return j.dump();
}

EquivalenceRelation partition_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    if (!j.contains("size") || !j.contains("class_of"))
        throw ValidationError("partition json: needs \"size\" and \"class_of\"");
    std::vector<int> classes = j["class_of"].get<std::vector<int>>();
    if (static_cast<int>(classes.size()) != j["size"].get<int>())
        throw ValidationError("partition json: size field does not match class_of length");
    int c = classes.empty() ? 0 : *std::max_element(classes.begin(), classes.end()) + 1;
    return EquivalenceRelation(std::move(classes), c);
}

std::string augmentor_to_json(const Augmentor& a) {
    nlohmann::json j;
    j["rows"] = a.input_size();
    j["cols"] = a.aug_space_size();
    std::vector<double> data;
    data.reserve(static_cast<std::size_t>(a.cond.size()));
    for (int r = 0; r < a.cond.rows(); ++r)
        for (int c = 0; c < a.cond.cols(); ++c) data.push_back(a.cond(r, c));
    j["data"] = data;
    return j.dump();
}

Augmentor augmentor_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int rows = j.at("rows").get<int>();
    const int cols = j.at("cols").get<int>();
    std::vector<double> data = j.at("data").get<std::vector<double>>();
    if (static_cast<int>(data.size()) != rows * cols)
        throw ValidationError("augmentor json: data length != rows*cols");
    Eigen::MatrixXd m(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = data[static_cast<std::size_t>(r * cols + c)];
    return Augmentor(std::move(m));
}

}  // namespace issl
