#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ksyn/types.hpp"

namespace ksyn {

// Synergy coefficients sampled over time; t strictly increasing.
struct SynergyTrajectory {
    std::vector<double> t;
    Mat e; // T x S

    int samples() const { return static_cast<int>(t.size()); }
    int synergy_dim() const { return static_cast<int>(e.cols()); }
    void validate() const;

    static SynergyTrajectory load_csv(const std::filesystem::path& path);
    void save_csv(const std::filesystem::path& path) const;
};

// Gaussian mixture over joint (t, e) space.
struct GmmModel {
    std::vector<double> priors;
    std::vector<Vec> means; // each (1+S)
    std::vector<Mat> covs;  // each (1+S)x(1+S), SPD

    int components() const { return static_cast<int>(priors.size()); }
    int dim() const { return static_cast<int>(means.empty() ? 0 : means.front().size()); }
    int synergy_dim() const { return dim() - 1; }
    double log_likelihood = 0.0;               // at convergence
    std::vector<double> log_likelihood_history; // per EM iteration, not serialized

    static GmmModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
    void validate() const;
};

struct GmmFitOptions {
    int max_iterations = 500;
    double tolerance = 1e-8;   // relative log-likelihood change
    int restarts = 1;
    double covariance_floor = 1e-8; // eigenvalue floor
    int kmeans_iterations = 25;
};

GmmModel fit_gmm(const std::vector<SynergyTrajectory>& trajectories, int n_components,
                 std::uint64_t seed, const GmmFitOptions& options = {});

struct GmrResult {
    Vec mean;
    Mat cov;
};

// Condition the mixture on time: responsibilities from the t-marginals,
// per-component conditional Gaussians, then moment matching.
GmrResult gmr_condition(const GmmModel& gmm, double t);

struct KmpReferencePoint {
    double t = 0.0;
    Vec mean;
    Mat cov; // S x S SPD
};

// Kernel predictor over a GMR reference database. The squared-exponential
// kernel and both regularizers are stored with the model.
struct KmpModel {
    std::vector<KmpReferencePoint> reference;
    double length_scale = 0.1;
    double amplitude = 1.0;  // sigma^2
    double lambda = 1.0;     // mean regularizer
    double lambda_cov = 10.0;

    int synergy_dim() const {
        return reference.empty() ? 0 : static_cast<int>(reference.front().mean.size());
    }
    double kernel(double a, double b) const;
    void validate() const;

    static KmpModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct KmpParams {
    double length_scale = 0.0; // <= 0: 0.1 * reference time span
    double amplitude = 1.0;
    double lambda = 1.0;
    double lambda_cov = 10.0;
    // Eigenvalue floor applied to the conditioned reference covariances;
    // keeps the kernel system well conditioned when the mixture is fitted
    // on noiseless demonstrations.
    double reference_cov_floor = 1e-4;
};

KmpModel build_reference(const GmmModel& gmm, const std::vector<double>& times,
                         const KmpParams& params = {});

struct KmpPrediction {
    Vec mean;
    Mat cov;
};

KmpPrediction kmp_predict(const KmpModel& kmp, double t_star);

// Insert (or replace, when closer than half the minimum reference spacing)
// a desired (time, mean, covariance) point. Returns a new model.
KmpModel insert_via_point(const KmpModel& kmp, double t_star, const Vec& mean, const Mat& cov);

struct PrioritizedGaussian {
    Vec mean;
    Mat cov;
    double priority = 1.0; // in (0, 1]
};

// Precision-weighted product of Gaussians with priority exponents.
GmrResult fuse_priorities(const std::vector<PrioritizedGaussian>& components);

} // namespace ksyn
