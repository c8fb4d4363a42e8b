#include "issl/encoders.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>
#include <unordered_set>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

namespace issl {

Encoder::Encoder(Eigen::MatrixXd table) : reps(std::move(table)) {
    if (reps.rows() < 1 || reps.cols() < 1)
        throw ValidationError("Encoder: empty representation table");
    if (!reps.allFinite()) throw ValidationError("Encoder: non-finite entry");
}

Encoder one_hot_encoder(const MaximalInvariant& m) {
    Eigen::MatrixXd reps = Eigen::MatrixXd::Zero(m.size(), m.num_classes);
    for (int x = 0; x < m.size(); ++x)
        reps(x, m.m_of[static_cast<std::size_t>(x)]) = 1.0;
    return Encoder(std::move(reps));
}

SetfFrame setf(int num_classes, int dim) {
    if (num_classes < 2) throw ValidationError("setf: C must be >= 2");
    if (dim < num_classes - 1)
        throw DimensionError("setf: need d >= C-1, got d=" + std::to_string(dim) +
                             " for C=" + std::to_string(num_classes));
    const int c = num_classes;

    // Centered one-hots all live in the hyperplane orthogonal to the all-ones
    // vector. Build an orthonormal basis of that hyperplane by Gram-Schmidt
    // over the projected canonical vectors (fixed order, double pass).
    Eigen::MatrixXd basis(c, c - 1);
    for (int j = 0; j < c - 1; ++j) {
        Eigen::VectorXd v = Eigen::VectorXd::Constant(c, -1.0 / c);
        v[j] += 1.0;
        for (int pass = 0; pass < 2; ++pass)
            for (int k = 0; k < j; ++k) v -= basis.col(k).dot(v) * basis.col(k);
        basis.col(j) = v / v.norm();
    }

    Eigen::MatrixXd vertices = Eigen::MatrixXd::Zero(c, dim);
    const double scale = 1.0 / std::sqrt(1.0 - 1.0 / c);  // centered one-hot norm
    for (int i = 0; i < c; ++i) {
        Eigen::VectorXd u = Eigen::VectorXd::Constant(c, -1.0 / c);
        u[i] += 1.0;
        vertices.row(i).head(c - 1) = (basis.transpose() * u).transpose() * scale;
    }
    SetfFrame frame;
    frame.vertices = std::move(vertices);
    return frame;
}

Encoder setf_encoder(const MaximalInvariant& m, int dim) {
    SetfFrame frame = setf(m.num_classes, dim);
    Eigen::MatrixXd reps(m.size(), dim);
    for (int x = 0; x < m.size(); ++x)
        reps.row(x) = frame.vertices.row(m.m_of[static_cast<std::size_t>(x)]);
    return Encoder(std::move(reps));
}

bool is_invariant(const Encoder& e, const EquivalenceRelation& eq, double tol) {
    if (e.size() != eq.size()) throw SizeMismatchError("is_invariant: size mismatch");
    for (int x = 0; x < e.size(); ++x) {
        for (int y = x + 1; y < e.size(); ++y) {
            if (eq.class_of[static_cast<std::size_t>(x)] != eq.class_of[static_cast<std::size_t>(y)])
                continue;
            if ((e.reps.row(x) - e.reps.row(y)).cwiseAbs().maxCoeff() > tol) return false;
        }
    }
    return true;
}

int effective_dimension(const Encoder& e, double tol) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(e.reps);
    const auto& sv = svd.singularValues();
    if (sv.size() == 0) return 0;
    const double cutoff = tol * sv[0];
    int rank = 0;
    for (int i = 0; i < sv.size(); ++i)
        if (sv[i] > cutoff && sv[i] > 0.0) ++rank;
    return rank;
}

int image_cardinality(const Encoder& e, double tol) {
    std::unordered_set<std::string> keys;
    std::string key;
    for (int x = 0; x < e.size(); ++x) {
        key.clear();
        for (int j = 0; j < e.dim(); ++j) {
            double v = e.reps(x, j);
            std::int64_t cell =
                tol > 0.0 ? static_cast<std::int64_t>(std::llround(v / tol)) : 0;
            if (tol > 0.0) {
                key.append(reinterpret_cast<const char*>(&cell), sizeof(cell));
            } else {
                key.append(reinterpret_cast<const char*>(&v), sizeof(v));
            }
        }
        keys.insert(key);
    }
    return static_cast<int>(keys.size());
}

Encoder unit_normalize(const Encoder& e) {
    Eigen::MatrixXd out = e.reps;
    for (int x = 0; x < out.rows(); ++x) {
        double n = out.row(x).norm();
        if (n == 0.0) throw ZeroRowError("unit_normalize: zero row " + std::to_string(x));
        out.row(x) /= n;
    }
    return Encoder(std::move(out));
}

std::string encoder_to_csv(const Encoder& e) {
    std::ostringstream os;
    os << "d=" << e.dim() << "\n";
    char buf[40];
    for (int x = 0; x < e.size(); ++x) {
        for (int j = 0; j < e.dim(); ++j) {
            std::snprintf(buf, sizeof(buf), "%.17g", e.reps(x, j));
            os << (j ? "," : "") << buf;
        }
        os << "\n";
    }
    return os.str();
}

Encoder encoder_from_csv(const std::string& text) {
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line) || line.rfind("d=", 0) != 0)
        throw ValidationError("encoder csv: missing d=<int> header");
    const int d = std::stoi(line.substr(2));
    if (d < 1) throw ValidationError("encoder csv: d must be >= 1");
    std::vector<double> values;
    int rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string cell;
        int cols = 0;
        while (std::getline(ls, cell, ',')) {
            values.push_back(std::stod(cell));
            ++cols;
        }
        if (cols != d) throw ValidationError("encoder csv: row width != d");
        ++rows;
    }
    if (rows == 0) throw ValidationError("encoder csv: no rows");
    Eigen::MatrixXd reps(rows, d);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < d; ++c) reps(r, c) = values[static_cast<std::size_t>(r * d + c)];
    return Encoder(std::move(reps));
}

std::string encoder_to_json(const Encoder& e) {
    nlohmann::json j;
    j["d"] = e.dim();
    std::vector<std::vector<double>> rows;
    for (int r = 0; r < e.size(); ++r) {
        std::vector<double> row(static_cast<std::size_t>(e.dim()));
        for (int c = 0; c < e.dim(); ++c) row[static_cast<std::size_t>(c)] = e.reps(r, c);
        rows.push_back(std::move(row));
    }
    j["reps"] = rows;
    return j.dump();
}

Encoder encoder_from_json(const std::string& text) {
    nlohmann::json j = nlohmann::json::parse(text);
    const int d = j.at("d").get<int>();
    auto rows = j.at("reps").get<std::vector<std::vector<double>>>();
    if (rows.empty()) throw ValidationError("encoder json: no rows");
    Eigen::MatrixXd reps(static_cast<int>(rows.size()), d);
    for (std::size_t r = 0; r < rows.size(); ++r) {
        if (static_cast<int>(rows[r].size()) != d)
            throw ValidationError("encoder json: row width != d");
        for (int c = 0; c < d; ++c) reps(static_cast<int>(r), c) = rows[r][static_cast<std::size_t>(c)];
    }
    return Encoder(std::move(reps));
}

}  // namespace issl
