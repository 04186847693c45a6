#include "ksyn/trajectory_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/rng.hpp"

namespace ksyn {

void SynergyTrajectory::validate() const {
    if (samples() < 2) throw InvalidInput("trajectory needs at least two samples");
    if (static_cast<Eigen::Index>(t.size()) != e.rows())
        throw InvalidInput("trajectory time/value length mismatch");
    for (std::size_t i = 1; i < t.size(); ++i)
        if (!(t[i] > t[i - 1])) throw InvalidInput("trajectory times must be strictly increasing");
    if (!e.allFinite()) throw InvalidInput("trajectory values must be finite");
}

SynergyTrajectory SynergyTrajectory::load_csv(const std::filesystem::path& path) {
    const Csv csv = read_csv(path);
    if (csv.columns() < 2 || csv.header[0] != "t")
        throw DataError(path.string() + ": expected header t,e1,...,eS");
    for (int c = 1; c < csv.columns(); ++c)
        if (csv.header[static_cast<std::size_t>(c)] != "e" + std::to_string(c))
            throw DataError(path.string() + ": expected header t,e1,...,eS");
    SynergyTrajectory traj;
    const int s = csv.columns() - 1;
    traj.e.resize(static_cast<Eigen::Index>(csv.rows.size()), s);
    traj.t.reserve(csv.rows.size());
    for (std::size_t r = 0; r < csv.rows.size(); ++r) {
        traj.t.push_back(csv.rows[r][0]);
        for (int c = 0; c < s; ++c) traj.e(static_cast<Eigen::Index>(r), c) = csv.rows[r][static_cast<std::size_t>(c) + 1];
    }
    traj.validate();
    return traj;
}

void SynergyTrajectory::save_csv(const std::filesystem::path& path) const {
    std::vector<std::string> header = {"t"};
    for (int c = 1; c <= synergy_dim(); ++c) header.push_back("e" + std::to_string(c));
    std::vector<std::vector<double>> rows;
    rows.reserve(t.size());
    for (int r = 0; r < samples(); ++r) {
        std::vector<double> row;
        row.push_back(t[static_cast<std::size_t>(r)]);
        for (int c = 0; c < synergy_dim(); ++c) row.push_back(e(r, c));
        rows.push_back(std::move(row));
    }
    write_csv(path, header, rows);
}

namespace {

// Clamp eigenvalues from below; keeps covariances SPD through EM updates.
Mat floor_spd(const Mat& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Mat> eig(0.5 * (m + m.transpose()));
    Vec evals = eig.eigenvalues().cwiseMax(floor);
    return eig.eigenvectors() * evals.asDiagonal() * eig.eigenvectors().transpose();
}

double log_gaussian(const Vec& x, const Vec& mean, const Eigen::LDLT<Mat>& ldlt, double log_det) {
    const Vec d = x - mean;
    const double quad = d.dot(ldlt.solve(d));
    const double dim = static_cast<double>(x.size());
    return -0.5 * (quad + log_det + dim * std::log(2.0 * M_PI));
}

double log_det_from_ldlt(const Eigen::LDLT<Mat>& ldlt) {
    return ldlt.vectorD().array().log().sum();
}

struct EmResult {
    GmmModel model;
    double log_likelihood = -std::numeric_limits<double>::infinity();
};

EmResult run_em(const Mat& data, int n, Rng rng, const GmmFitOptions& opt) {
    const Eigen::Index m = data.rows();
    const Eigen::Index d = data.cols();

    // k-means++ seeding followed by a few Lloyd iterations.
    std::vector<Vec> centers;
    centers.reserve(static_cast<std::size_t>(n));
    centers.push_back(data.row(rng.uniform_int(static_cast<int>(m))).transpose());
    Vec dist2 = Vec::Constant(m, std::numeric_limits<double>::infinity());
    while (static_cast<int>(centers.size()) < n) {
        for (Eigen::Index i = 0; i < m; ++i) {
            const double d2 = (data.row(i).transpose() - centers.back()).squaredNorm();
            dist2[i] = std::min(dist2[i], d2);
        }
        const double total = dist2.sum();
        if (total <= 0.0) {
            centers.push_back(data.row(rng.uniform_int(static_cast<int>(m))).transpose());
            continue;
        }
        double pick = rng.uniform() * total;
        Eigen::Index chosen = m - 1;
        for (Eigen::Index i = 0; i < m; ++i) {
            pick -= dist2[i];
            if (pick <= 0.0) {
                chosen = i;
                break;
            }
        }
        centers.push_back(data.row(chosen).transpose());
    }
    std::vector<int> assign(static_cast<std::size_t>(m), 0);
    for (int it = 0; it < opt.kmeans_iterations; ++it) {
        bool changed = false;
        for (Eigen::Index i = 0; i < m; ++i) {
            int best = 0;
            double best_d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < n; ++k) {
                const double d2 = (data.row(i).transpose() - centers[static_cast<std::size_t>(k)]).squaredNorm();
                if (d2 < best_d) {
                    best_d = d2;
                    best = k;
                }
            }
            if (assign[static_cast<std::size_t>(i)] != best) {
                assign[static_cast<std::size_t>(i)] = best;
                changed = true;
            }
        }
        std::vector<Vec> sums(static_cast<std::size_t>(n), Vec::Zero(d));
        std::vector<int> counts(static_cast<std::size_t>(n), 0);
        for (Eigen::Index i = 0; i < m; ++i) {
            sums[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])] += data.row(i).transpose();
            ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        }
        for (int k = 0; k < n; ++k) {
            if (counts[static_cast<std::size_t>(k)] > 0)
                centers[static_cast<std::size_t>(k)] = sums[static_cast<std::size_t>(k)] / counts[static_cast<std::size_t>(k)];
            else
                centers[static_cast<std::size_t>(k)] = data.row(rng.uniform_int(static_cast<int>(m))).transpose();
        }
        if (!changed && it > 0) break;
    }

    GmmModel gmm;
    gmm.priors.assign(static_cast<std::size_t>(n), 1.0 / n);
    gmm.means.resize(static_cast<std::size_t>(n));
    gmm.covs.resize(static_cast<std::size_t>(n));
    {
        std::vector<int> counts(static_cast<std::size_t>(n), 0);
        for (Eigen::Index i = 0; i < m; ++i) ++counts[static_cast<std::size_t>(assign[static_cast<std::size_t>(i)])];
        for (int k = 0; k < n; ++k) {
            gmm.means[static_cast<std::size_t>(k)] = centers[static_cast<std::size_t>(k)];
            Mat cov = Mat::Zero(d, d);
            if (counts[static_cast<std::size_t>(k)] > 1) {
                for (Eigen::Index i = 0; i < m; ++i) {
                    if (assign[static_cast<std::size_t>(i)] != k) continue;
                    const Vec diff = data.row(i).transpose() - centers[static_cast<std::size_t>(k)];
                    cov += diff * diff.transpose();
                }
                cov /= counts[static_cast<std::size_t>(k)];
            }
            gmm.covs[static_cast<std::size_t>(k)] = floor_spd(cov, std::max(opt.covariance_floor, 1e-6));
            gmm.priors[static_cast<std::size_t>(k)] =
                std::max(1, counts[static_cast<std::size_t>(k)]) / static_cast<double>(m);
        }
        const double prior_sum = std::accumulate(gmm.priors.begin(), gmm.priors.end(), 0.0);
        for (auto& p : gmm.priors) p /= prior_sum;
    }

    // EM with log-domain responsibilities.
    Mat log_resp(m, n);
    double prev_ll = -std::numeric_limits<double>::infinity();
    std::vector<double> ll_history;
    for (int iter = 0; iter < opt.max_iterations; ++iter) {
        std::vector<Eigen::LDLT<Mat>> ldlts;
        std::vector<double> log_dets;
        ldlts.reserve(static_cast<std::size_t>(n));
        for (int k = 0; k < n; ++k) {
            ldlts.emplace_back(gmm.covs[static_cast<std::size_t>(k)]);
            if (ldlts.back().info() != Eigen::Success)
                throw NumericError("EM covariance factorization failed");
            log_dets.push_back(log_det_from_ldlt(ldlts.back()));
        }
        double ll = 0.0;
        for (Eigen::Index i = 0; i < m; ++i) {
            double max_term = -std::numeric_limits<double>::infinity();
            for (int k = 0; k < n; ++k) {
                const double term =
                    std::log(gmm.priors[static_cast<std::size_t>(k)]) +
                    log_gaussian(data.row(i).transpose(), gmm.means[static_cast<std::size_t>(k)],
                                 ldlts[static_cast<std::size_t>(k)], log_dets[static_cast<std::size_t>(k)]);
                log_resp(i, k) = term;
                max_term = std::max(max_term, term);
            }
            double sum = 0.0;
            for (int k = 0; k < n; ++k) sum += std::exp(log_resp(i, k) - max_term);
            const double log_norm = max_term + std::log(sum);
            ll += log_norm;
            for (int k = 0; k < n; ++k) log_resp(i, k) -= log_norm;
        }

        // M-step.
        for (int k = 0; k < n; ++k) {
            double nk = 0.0;
            Vec mean = Vec::Zero(d);
            for (Eigen::Index i = 0; i < m; ++i) {
                const double r = std::exp(log_resp(i, k));
                nk += r;
                mean += r * data.row(i).transpose();
            }
            nk = std::max(nk, 1e-300);
            mean /= nk;
            Mat cov = Mat::Zero(d, d);
            for (Eigen::Index i = 0; i < m; ++i) {
                const double r = std::exp(log_resp(i, k));
                const Vec diff = data.row(i).transpose() - mean;
                cov += r * diff * diff.transpose();
            }
            cov /= nk;
            gmm.priors[static_cast<std::size_t>(k)] = nk / static_cast<double>(m);
            gmm.means[static_cast<std::size_t>(k)] = mean;
            gmm.covs[static_cast<std::size_t>(k)] = floor_spd(cov, opt.covariance_floor);
        }

        ll_history.push_back(ll);
        if (std::isfinite(prev_ll)) {
            const double rel = std::abs(ll - prev_ll) / std::max(1.0, std::abs(prev_ll));
            if (rel < opt.tolerance) {
                prev_ll = ll;
                break;
            }
        }
        prev_ll = ll;
    }
    EmResult result;
    result.model = std::move(gmm);
    result.log_likelihood = prev_ll;
    result.model.log_likelihood = prev_ll;
    result.model.log_likelihood_history = std::move(ll_history);
    return result;
}

} // namespace

GmmModel fit_gmm(const std::vector<SynergyTrajectory>& trajectories, int n_components,
                 std::uint64_t seed, const GmmFitOptions& options) {
    if (n_components < 1) throw InvalidInput("component count must be >= 1");
    if (trajectories.empty()) throw InvalidInput("no trajectories given");
    int s = trajectories.front().synergy_dim();
    int total = 0;
    for (const auto& traj : trajectories) {
        traj.validate();
        if (traj.synergy_dim() != s) throw InvalidInput("trajectories must share the synergy dimension");
        total += traj.samples();
    }
    if (total < 10 * n_components)
        throw InvalidInput("too few samples: " + std::to_string(total) + " < 10 * " +
                           std::to_string(n_components));

    Mat data(total, 1 + s);
    Eigen::Index row = 0;
    for (const auto& traj : trajectories) {
        for (int i = 0; i < traj.samples(); ++i) {
            data(row, 0) = traj.t[static_cast<std::size_t>(i)];
            data.block(row, 1, 1, s) = traj.e.row(i);
            ++row;
        }
    }
    if (!data.allFinite()) throw InvalidInput("trajectory data must be finite");

    EmResult best;
    for (int r = 0; r < std::max(1, options.restarts); ++r) {
        EmResult attempt = run_em(data, n_components, Rng(seed, static_cast<std::uint64_t>(r)), options);
        if (attempt.log_likelihood > best.log_likelihood) best = std::move(attempt);
    }
    best.model.validate();
    return best.model;
}

void GmmModel::validate() const {
    if (components() < 1) throw InvalidInput("mixture needs at least one component");
    double sum = 0.0;
    for (double p : priors) sum += p;
    if (std::abs(sum - 1.0) > 1e-9) throw InvalidInput("mixture priors must sum to 1");
    for (const auto& cov : covs) {
        Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
        if (eig.eigenvalues().minCoeff() <= 0.0)
            throw InvalidInput("mixture covariance is not positive definite");
    }
}

GmrResult gmr_condition(const GmmModel& gmm, double t) {
    if (!std::isfinite(t)) throw InvalidInput("query time must be finite");
    const int n = gmm.components();
    const int s = gmm.synergy_dim();

    // Responsibilities from the t-marginals, in the log domain.
    Vec log_h(n);
    for (int k = 0; k < n; ++k) {
        const double mu_t = gmm.means[static_cast<std::size_t>(k)][0];
        const double var_t = gmm.covs[static_cast<std::size_t>(k)](0, 0);
        log_h[k] = std::log(gmm.priors[static_cast<std::size_t>(k)]) -
                   0.5 * (std::log(2.0 * M_PI * var_t) + (t - mu_t) * (t - mu_t) / var_t);
    }
    const double max_term = log_h.maxCoeff();
    Vec h = (log_h.array() - max_term).exp();
    h /= h.sum();

    Vec mean = Vec::Zero(s);
    std::vector<Vec> cond_means(static_cast<std::size_t>(n));
    std::vector<Mat> cond_covs(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const auto& mu = gmm.means[static_cast<std::size_t>(k)];
        const auto& cov = gmm.covs[static_cast<std::size_t>(k)];
        const double var_t = cov(0, 0);
        const Vec cross = cov.block(1, 0, s, 1); // Sigma_et
        Vec cm = mu.tail(s) + cross * ((t - mu[0]) / var_t);
        Mat cc = cov.block(1, 1, s, s) - cross * cross.transpose() / var_t;
        mean += h[k] * cm;
        cond_means[static_cast<std::size_t>(k)] = std::move(cm);
        cond_covs[static_cast<std::size_t>(k)] = std::move(cc);
    }
    Mat cov = Mat::Zero(s, s);
    for (int k = 0; k < n; ++k) {
        const Vec& cm = cond_means[static_cast<std::size_t>(k)];
        cov += h[k] * (cond_covs[static_cast<std::size_t>(k)] + cm * cm.transpose());
    }
    cov -= mean * mean.transpose();
    cov = floor_spd(0.5 * (cov + cov.transpose()), 1e-10);
    return {std::move(mean), std::move(cov)};
}

KmpModel build_reference(const GmmModel& gmm, const std::vector<double>& times, const KmpParams& params) {
    if (times.empty()) throw InvalidInput("reference times must be non-empty");
    for (std::size_t i = 1; i < times.size(); ++i)
        if (!(times[i] > times[i - 1])) throw InvalidInput("reference times must be strictly increasing");
    KmpModel kmp;
    kmp.reference.reserve(times.size());
    for (double t : times) {
        GmrResult g = gmr_condition(gmm, t);
        Mat cov = params.reference_cov_floor > 0.0 ? floor_spd(g.cov, params.reference_cov_floor)
                                                   : std::move(g.cov);
        kmp.reference.push_back({t, std::move(g.mean), std::move(cov)});
    }
    const double span = times.back() - times.front();
    kmp.length_scale = params.length_scale > 0.0 ? params.length_scale : std::max(0.1 * span, 1e-6);
    kmp.amplitude = params.amplitude;
    kmp.lambda = params.lambda;
    kmp.lambda_cov = params.lambda_cov;
    kmp.validate();
    return kmp;
}

double KmpModel::kernel(double a, double b) const {
    const double d = a - b;
    return amplitude * std::exp(-d * d / (2.0 * length_scale * length_scale));
}

void KmpModel::validate() const {
    if (reference.empty()) throw InvalidInput("KMP reference must be non-empty");
    if (!(lambda > 0.0) || !(lambda_cov > 0.0) || !(length_scale > 0.0) || !(amplitude > 0.0))
        throw InvalidInput("KMP parameters must be positive");
    for (std::size_t i = 1; i < reference.size(); ++i)
        if (!(reference[i].t > reference[i - 1].t))
            throw InvalidInput("KMP reference times must be strictly increasing");
}

namespace {

// Block system shared by the mean and covariance predictors: K + lambda *
// blkdiag(Sigma_1..Sigma_N), rows/cols are reference points x synergy dims.
Mat kmp_block_matrix(const KmpModel& kmp, double lambda) {
    const int n = static_cast<int>(kmp.reference.size());
    const int s = kmp.synergy_dim();
    Mat big = Mat::Zero(n * s, n * s);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double k = kmp.kernel(kmp.reference[static_cast<std::size_t>(i)].t,
                                        kmp.reference[static_cast<std::size_t>(j)].t);
            for (int d = 0; d < s; ++d) big(i * s + d, j * s + d) = k;
        }
        big.block(i * s, i * s, s, s) += lambda * kmp.reference[static_cast<std::size_t>(i)].cov;
    }
    return big;
}

} // namespace

KmpPrediction kmp_predict(const KmpModel& kmp, double t_star) {
    kmp.validate();
    if (!std::isfinite(t_star)) throw InvalidInput("query time must be finite");
    const int n = static_cast<int>(kmp.reference.size());
    const int s = kmp.synergy_dim();

    Mat k_star = Mat::Zero(s, n * s); // [k(t*,t1) I ... k(t*,tN) I]
    Vec mu(n * s);
    for (int i = 0; i < n; ++i) {
        const double k = kmp.kernel(t_star, kmp.reference[static_cast<std::size_t>(i)].t);
        for (int d = 0; d < s; ++d) k_star(d, i * s + d) = k;
        mu.segment(i * s, s) = kmp.reference[static_cast<std::size_t>(i)].mean;
    }

    const Mat mean_system = kmp_block_matrix(kmp, kmp.lambda);
    Eigen::LDLT<Mat> mean_ldlt(mean_system);
    if (mean_ldlt.info() != Eigen::Success)
        throw NumericError("KMP mean system factorization failed (lambda=" +
                           format_double(kmp.lambda) + ", N=" + std::to_string(n) + ")");
    KmpPrediction out;
    out.mean = k_star * mean_ldlt.solve(mu);

    const Mat cov_system = kmp_block_matrix(kmp, kmp.lambda_cov);
    Eigen::LDLT<Mat> cov_ldlt(cov_system);
    if (cov_ldlt.info() != Eigen::Success)
        throw NumericError("KMP covariance system factorization failed (lambda_cov=" +
                           format_double(kmp.lambda_cov) + ", N=" + std::to_string(n) + ")");
    const Mat solved = cov_ldlt.solve(k_star.transpose()); // (n s) x s
    Mat cov = (static_cast<double>(n) / kmp.lambda_cov) *
              (kmp.kernel(t_star, t_star) * Mat::Identity(s, s) - k_star * solved);
    cov = 0.5 * (cov + cov.transpose());
    // PSD floor: clip tiny negative eigenvalues introduced by the subtraction.
    Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
    out.cov = eig.eigenvectors() * eig.eigenvalues().cwiseMax(0.0).asDiagonal() *
              eig.eigenvectors().transpose();
    return out;
}

KmpModel insert_via_point(const KmpModel& kmp, double t_star, const Vec& mean, const Mat& cov) {
    kmp.validate();
    if (!std::isfinite(t_star) || !mean.allFinite() || !cov.allFinite())
        throw InvalidInput("via-point values must be finite");
    if (mean.size() != kmp.synergy_dim() || cov.rows() != cov.cols() || cov.rows() != mean.size())
        throw InvalidInput("via-point dimensions do not match the model");
    if ((cov - cov.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw InvalidInput("via-point covariance must be symmetric");
    {
        Eigen::SelfAdjointEigenSolver<Mat> eig(cov);
        if (eig.eigenvalues().minCoeff() <= 0.0)
            throw InvalidInput("via-point covariance must be positive definite");
    }

    double min_spacing = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < kmp.reference.size(); ++i)
        min_spacing = std::min(min_spacing, kmp.reference[i].t - kmp.reference[i - 1].t);
    const double t_merge = std::isfinite(min_spacing) ? 0.5 * min_spacing : 0.0;

    KmpModel out = kmp;
    int nearest = -1;
    double nearest_dist = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < out.reference.size(); ++i) {
        const double dist = std::abs(out.reference[i].t - t_star);
        if (dist < nearest_dist) {
            nearest_dist = dist;
            nearest = static_cast<int>(i);
        }
    }
    if (nearest >= 0 && nearest_dist < t_merge) {
        out.reference[static_cast<std::size_t>(nearest)] = {t_star, mean, cov};
        std::sort(out.reference.begin(), out.reference.end(),
                  [](const KmpReferencePoint& a, const KmpReferencePoint& b) { return a.t < b.t; });
    } else {
        KmpReferencePoint p{t_star, mean, cov};
        auto it = std::upper_bound(out.reference.begin(), out.reference.end(), p,
                                   [](const KmpReferencePoint& a, const KmpReferencePoint& b) {
                                       return a.t < b.t;
                                   });
        out.reference.insert(it, std::move(p));
    }
    out.validate();
    return out;
}

GmrResult fuse_priorities(const std::vector<PrioritizedGaussian>& components) {
    if (components.empty()) throw InvalidInput("priority fusion needs at least one component");
    const Eigen::Index s = components.front().mean.size();
    Mat precision = Mat::Zero(s, s);
    Vec weighted = Vec::Zero(s);
    for (const auto& c : components) {
        if (c.mean.size() != s || c.cov.rows() != s || c.cov.cols() != s)
            throw InvalidInput("priority fusion dimension mismatch");
        if (!(c.priority > 0.0) || c.priority > 1.0)
            throw InvalidInput("priorities must lie in (0, 1]");
        Eigen::LDLT<Mat> ldlt(c.cov);
        if (ldlt.info() != Eigen::Success || (ldlt.vectorD().array() <= 0.0).any())
            throw InvalidInput("priority fusion covariance must be positive definite");
        precision += c.priority * ldlt.solve(Mat::Identity(s, s));
        weighted += c.priority * ldlt.solve(c.mean);
    }
    Eigen::LDLT<Mat> total(precision);
    if (total.info() != Eigen::Success || (total.vectorD().array() <= 0.0).any())
        throw NumericError("fused precision matrix is singular");
    GmrResult out;
    out.cov = total.solve(Mat::Identity(s, s));
    out.cov = 0.5 * (out.cov + out.cov.transpose());
    out.mean = total.solve(weighted);
    return out;
}

void GmmModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["priors"] = priors;
    nlohmann::json means_json = nlohmann::json::array();
    for (const auto& m : means) means_json.push_back(to_json(m));
    j["means"] = std::move(means_json);
    nlohmann::json covs_json = nlohmann::json::array();
    for (const auto& c : covs) covs_json.push_back(to_json(c));
    j["covariances"] = std::move(covs_json);
    j["log_likelihood"] = log_likelihood;
    save_model_file(path, "gmm.v1", std::move(j));
}

GmmModel GmmModel::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "gmm.v1");
    GmmModel gmm;
    try {
        gmm.priors = j.at("priors").get<std::vector<double>>();
        for (const auto& m : j.at("means")) gmm.means.push_back(vec_from_json(m));
        for (const auto& c : j.at("covariances")) gmm.covs.push_back(mat_from_json(c));
        gmm.log_likelihood = j.value("log_likelihood", 0.0);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    gmm.validate();
    return gmm;
}

void KmpModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["length_scale"] = length_scale;
    j["amplitude"] = amplitude;
    j["lambda"] = lambda;
    j["lambda_cov"] = lambda_cov;
    nlohmann::json ref = nlohmann::json::array();
    for (const auto& p : reference)
        ref.push_back({{"t", p.t}, {"mean", to_json(p.mean)}, {"cov", to_json(p.cov)}});
    j["reference"] = std::move(ref);
    save_model_file(path, "kmp.v1", std::move(j));
}

KmpModel KmpModel::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "kmp.v1");
    KmpModel kmp;
    try {
        kmp.length_scale = j.at("length_scale").get<double>();
        kmp.amplitude = j.at("amplitude").get<double>();
        kmp.lambda = j.at("lambda").get<double>();
        kmp.lambda_cov = j.at("lambda_cov").get<double>();
        for (const auto& p : j.at("reference"))
            kmp.reference.push_back({p.at("t").get<double>(), vec_from_json(p.at("mean")),
                                     mat_from_json(p.at("cov"))});
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    kmp.validate();
    return kmp;
}

} // namespace ksyn
