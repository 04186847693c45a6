#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "ksyn/hand_model.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

enum class Phase { Grasp, Manipulation };

// Mean-shifted demonstration postures, one row per sample.
struct ConfigurationMatrix {
    Mat rows;                          // K x 6, row k = demos[k] - q0
    Vec6 q0 = Vec6::Zero();            // centering reference
    std::vector<std::string> demo_ids; // provenance tag per row
};

// Orthonormal postural-synergy basis extracted from demonstrations.
struct SynergySubspace {
    Mat basis;                    // 6 x S, orthonormal columns
    Vec6 q0 = Vec6::Zero();
    Vec singular_values;          // S, non-negative, non-increasing
    Vec explained_variance_ratio; // S, each in [0,1], prefix sums <= 1

    int components() const { return static_cast<int>(basis.cols()); }

    static SynergySubspace load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    void validate() const;
};

struct SynergyCoeffs {
    Vec e;
    std::optional<Phase> phase;

    SynergyCoeffs() = default;
    explicit SynergyCoeffs(Vec values) : e(std::move(values)) {}
};

ConfigurationMatrix build_config_matrix(const std::vector<JointConfig>& demos, const JointConfig& q0);

// Top-S principal directions of the configuration matrix, computed from the
// 6x6 Gram matrix. Columns are sign-normalized so the largest-magnitude
// entry is positive. mean_center subtracts the dataset mean before the
// decomposition (comparison mode; the default centers at q0 only).
SynergySubspace extract_synergies(const ConfigurationMatrix& c, int s, bool mean_center = false);

// e = basis^T (theta - q0); the pseudo-inverse collapses to the transpose
// because the basis is orthonormal.
SynergyCoeffs project(const SynergySubspace& sub, const JointConfig& theta);

// theta = basis e + theta0.
JointConfig reconstruct(const SynergySubspace& sub, const Vec& e, const JointConfig& theta0);

// CSV ingestion/emission with header t,q1,...,q6.
std::vector<JointConfig> load_demos_csv(const std::filesystem::path& path);
void save_demos_csv(const std::filesystem::path& path, const std::vector<JointConfig>& demos);

} // namespace ksyn
