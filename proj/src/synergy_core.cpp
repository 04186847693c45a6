#include "ksyn/synergy_core.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"

namespace ksyn {

ConfigurationMatrix build_config_matrix(const std::vector<JointConfig>& demos, const JointConfig& q0) {
    if (demos.empty()) throw InvalidInput("configuration matrix needs at least one demonstration");
    if (!q0.angles.allFinite()) throw InvalidInput("nominal posture must be finite");
    ConfigurationMatrix c;
    c.rows.resize(static_cast<Eigen::Index>(demos.size()), HandModel::kJointCount);
    c.q0 = q0.angles;
    c.demo_ids.reserve(demos.size());
    for (std::size_t k = 0; k < demos.size(); ++k) {
        if (!demos[k].angles.allFinite())
            throw InvalidInput("demonstration " + std::to_string(k) + " has non-finite angles");
        c.rows.row(static_cast<Eigen::Index>(k)) = (demos[k].angles - q0.angles).transpose();
        c.demo_ids.push_back("demo_" + std::to_string(k));
    }
    return c;
}

namespace {

void sign_normalize_columns(Mat& m) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
        Eigen::Index imax = 0;
        m.col(c).cwiseAbs().maxCoeff(&imax);
        if (m(imax, c) < 0.0) m.col(c) = -m.col(c);
    }
}

} // namespace

SynergySubspace extract_synergies(const ConfigurationMatrix& c, int s, bool mean_center) {
    const int dim = HandModel::kJointCount;
    if (s < 1 || s > dim) throw InvalidInput("component count must be in [1, 6]");
    if (c.rows.rows() < 1 || c.rows.cols() != dim) throw InvalidInput("malformed configuration matrix");
    if (!c.rows.allFinite()) throw InvalidInput("configuration matrix has non-finite entries");

    Mat data = c.rows;
    if (mean_center) data.rowwise() -= data.colwise().mean();

    const Mat gram = data.transpose() * data; // 6x6
    Eigen::SelfAdjointEigenSolver<Mat> eig(gram);
    if (eig.info() != Eigen::Success) throw NumericError("eigendecomposition failed");

    // Ascending from Eigen; flip to descending.
    Vec evals(dim);
    Mat evecs(dim, dim);
    for (int i = 0; i < dim; ++i) {
        evals[i] = std::max(eig.eigenvalues()[dim - 1 - i], 0.0);
        evecs.col(i) = eig.eigenvectors().col(dim - 1 - i);
    }

    const double scale = evals[0];
    int rank = 0;
    for (int i = 0; i < dim; ++i)
        if (evals[i] > scale * 1e-12 && evals[i] > 1e-300) ++rank;
    if (rank < s)
        throw DataError("degenerate demonstration data: variance rank " + std::to_string(rank) +
                        " < requested " + std::to_string(s) + " components");

    SynergySubspace sub;
    sub.basis = evecs.leftCols(s);
    sign_normalize_columns(sub.basis);
    sub.q0 = c.q0;
    sub.singular_values = evals.head(s).cwiseSqrt();
    const double total = evals.sum();
    sub.explained_variance_ratio = total > 0.0 ? Vec(evals.head(s) / total) : Vec(Vec::Zero(s));
    return sub;
}

SynergyCoeffs project(const SynergySubspace& sub, const JointConfig& theta) {
    if (!theta.angles.allFinite()) throw InvalidInput("posture must be finite");
    if (sub.basis.rows() != HandModel::kJointCount) throw InvalidInput("subspace dimension mismatch");
    SynergyCoeffs out;
    out.e = sub.basis.transpose() * (theta.angles - sub.q0);
    return out;
}

JointConfig reconstruct(const SynergySubspace& sub, const Vec& e, const JointConfig& theta0) {
    if (e.size() != sub.basis.cols()) throw InvalidInput("coefficient length does not match subspace");
    if (!e.allFinite() || !theta0.angles.allFinite()) throw InvalidInput("inputs must be finite");
    JointConfig q;
    q.angles = theta0.angles + sub.basis * e;
    q.timestamp = theta0.timestamp;
    return q;
}

void SynergySubspace::validate() const {
    const int s = components();
    if (s < 1 || s > HandModel::kJointCount) throw InvalidInput("subspace must have 1..6 components");
    const Mat gram = basis.transpose() * basis;
    if ((gram - Mat::Identity(s, s)).cwiseAbs().maxCoeff() > 1e-10)
        throw InvalidInput("subspace basis is not orthonormal");
    for (int i = 0; i + 1 < s; ++i)
        if (singular_values[i] + 1e-12 < singular_values[i + 1])
            throw InvalidInput("singular values must be non-increasing");
    if (singular_values.minCoeff() < 0.0) throw InvalidInput("singular values must be non-negative");
    if (explained_variance_ratio.sum() > 1.0 + 1e-12)
        throw InvalidInput("explained variance ratios exceed 1");
}

void SynergySubspace::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["basis"] = to_json(basis);
    j["q0"] = to_json(Vec(q0));
    j["singular_values"] = to_json(singular_values);
    j["explained_variance_ratio"] = to_json(explained_variance_ratio);
    save_model_file(path, "synergy.v1", std::move(j));
}

SynergySubspace SynergySubspace::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "synergy.v1");
    SynergySubspace sub;
    try {
        sub.basis = mat_from_json(j.at("basis"));
        const Vec q0 = vec_from_json(j.at("q0"));
        if (q0.size() != HandModel::kJointCount) throw DataError("q0 must have 6 entries");
        sub.q0 = Vec6(q0);
        sub.singular_values = vec_from_json(j.at("singular_values"));
        sub.explained_variance_ratio = vec_from_json(j.at("explained_variance_ratio"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    sub.validate();
    return sub;
}

std::vector<JointConfig> load_demos_csv(const std::filesystem::path& path) {
    const Csv csv = read_csv(path);
    const std::vector<std::string> expected = {"t", "q1", "q2", "q3", "q4", "q5", "q6"};
    if (csv.header != expected)
        throw DataError(path.string() + ": expected header t,q1,...,q6");
    std::vector<JointConfig> demos;
    demos.reserve(csv.rows.size());
    for (const auto& row : csv.rows) {
        Vec6 q;
        for (int j = 0; j < HandModel::kJointCount; ++j) q[j] = row[static_cast<std::size_t>(j) + 1];
        demos.emplace_back(q, row[0]);
    }
    return demos;
}

void save_demos_csv(const std::filesystem::path& path, const std::vector<JointConfig>& demos) {
    std::vector<std::vector<double>> rows;
    rows.reserve(demos.size());
    double t_fallback = 0.0;
    for (const auto& d : demos) {
        std::vector<double> row(7);
        row[0] = d.timestamp.value_or(t_fallback);
        t_fallback += 1.0;
        for (int j = 0; j < HandModel::kJointCount; ++j) row[static_cast<std::size_t>(j) + 1] = d.angles[j];
        rows.push_back(std::move(row));
    }
    write_csv(path, {"t", "q1", "q2", "q3", "q4", "q5", "q6"}, rows);
}

} // namespace ksyn
