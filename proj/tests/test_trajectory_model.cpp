#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include <Eigen/Eigenvalues>

#include "ksyn/errors.hpp"
#include "ksyn/rng.hpp"
#include "ksyn/trajectory_model.hpp"
#include "oracles.hpp"

using namespace ksyn;

namespace {

SynergyTrajectory line_trajectory(int samples, double slope, double noise, Rng& rng) {
    SynergyTrajectory traj;
    traj.e.resize(samples, 2);
    for (int k = 0; k < samples; ++k) {
        const double t = k / static_cast<double>(samples - 1);
        traj.t.push_back(t);
        traj.e(k, 0) = slope * t + noise * rng.normal();
        traj.e(k, 1) = -0.5 * slope * t + noise * rng.normal();
    }
    return traj;
}

GmmModel random_gmm(int components, int synergy_dim, Rng& rng) {
    GmmModel gmm;
    double prior_sum = 0.0;
    for (int k = 0; k < components; ++k) {
        gmm.priors.push_back(0.2 + rng.uniform());
        prior_sum += gmm.priors.back();
        Vec mean(1 + synergy_dim);
        for (int d = 0; d <= synergy_dim; ++d) mean[d] = rng.uniform(-1.0, 1.0);
        gmm.means.push_back(mean);
        Mat a(1 + synergy_dim, 1 + synergy_dim);
        for (int r = 0; r < a.rows(); ++r)
            for (int c = 0; c < a.cols(); ++c) a(r, c) = 0.4 * rng.normal();
        gmm.covs.push_back(a * a.transpose() + 0.05 * Mat::Identity(a.rows(), a.cols()));
    }
    for (auto& p : gmm.priors) p /= prior_sum;
    return gmm;
}

// Direct conditional-Gaussian + moment-matching recomputation.
GmrResult gmr_oracle(const GmmModel& gmm, double t) {
    const int n = gmm.components();
    const int s = gmm.synergy_dim();
    std::vector<double> weights(static_cast<std::size_t>(n));
    double total = 0.0;
    for (int k = 0; k < n; ++k) {
        const double mu = gmm.means[static_cast<std::size_t>(k)][0];
        const double var = gmm.covs[static_cast<std::size_t>(k)](0, 0);
        const double density =
            std::exp(-0.5 * (t - mu) * (t - mu) / var) / std::sqrt(2.0 * M_PI * var);
        weights[static_cast<std::size_t>(k)] = gmm.priors[static_cast<std::size_t>(k)] * density;
        total += weights[static_cast<std::size_t>(k)];
    }
    Vec mean = Vec::Zero(s);
    std::vector<Vec> cm(static_cast<std::size_t>(n));
    std::vector<Mat> cc(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double h = weights[static_cast<std::size_t>(k)] / total;
        const auto& mu = gmm.means[static_cast<std::size_t>(k)];
        const auto& cov = gmm.covs[static_cast<std::size_t>(k)];
        Vec m = mu.tail(s) + cov.block(1, 0, s, 1) * ((t - mu[0]) / cov(0, 0));
        Mat c = cov.block(1, 1, s, s) -
                cov.block(1, 0, s, 1) * cov.block(0, 1, 1, s) / cov(0, 0);
        mean += h * m;
        cm[static_cast<std::size_t>(k)] = std::move(m);
        cc[static_cast<std::size_t>(k)] = std::move(c);
    }
    Mat cov = Mat::Zero(s, s);
    for (int k = 0; k < n; ++k) {
        const double h = weights[static_cast<std::size_t>(k)] / total;
        cov += h * (cc[static_cast<std::size_t>(k)] +
                    cm[static_cast<std::size_t>(k)] * cm[static_cast<std::size_t>(k)].transpose());
    }
    cov -= mean * mean.transpose();
    return {std::move(mean), std::move(cov)};
}

// Mean prediction by assembling the block system and eliminating densely.
Vec kmp_mean_oracle(const KmpModel& kmp, double t_star) {
    const int n = static_cast<int>(kmp.reference.size());
    const int s = kmp.synergy_dim();
    Mat system = Mat::Zero(n * s, n * s);
    Vec mu(n * s);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < n; ++j) {
            const double k = kmp.kernel(kmp.reference[static_cast<std::size_t>(i)].t,
                                        kmp.reference[static_cast<std::size_t>(j)].t);
            for (int d = 0; d < s; ++d) system(i * s + d, j * s + d) = k;
        }
        system.block(i * s, i * s, s, s) += kmp.lambda * kmp.reference[static_cast<std::size_t>(i)].cov;
        mu.segment(i * s, s) = kmp.reference[static_cast<std::size_t>(i)].mean;
    }
    const Vec x = oracles::solve_dense(system, mu);
    Vec mean = Vec::Zero(s);
    for (int i = 0; i < n; ++i)
        mean += kmp.kernel(t_star, kmp.reference[static_cast<std::size_t>(i)].t) * x.segment(i * s, s);
    return mean;
}

KmpModel random_kmp(int n, int s, Rng& rng, bool identity_cov) {
    KmpModel kmp;
    double t = 0.0;
    for (int i = 0; i < n; ++i) {
        t += 0.05 + rng.uniform();
        KmpReferencePoint p;
        p.t = t;
        p.mean = Vec(s);
        for (int d = 0; d < s; ++d) p.mean[d] = rng.uniform(-1.0, 1.0);
        if (identity_cov) {
            p.cov = Mat::Identity(s, s);
        } else {
            Mat a(s, s);
            for (int r = 0; r < s; ++r)
                for (int c = 0; c < s; ++c) a(r, c) = 0.3 * rng.normal();
            p.cov = a * a.transpose() + 0.02 * Mat::Identity(s, s);
        }
        kmp.reference.push_back(std::move(p));
    }
    kmp.length_scale = 0.4;
    kmp.amplitude = 1.0;
    kmp.lambda = 1.0;
    kmp.lambda_cov = 10.0;
    return kmp;
}

} // namespace

TEST_CASE("single-component EM lands on the sample moments") {
    Rng rng(1, 0);
    const auto traj = line_trajectory(60, 1.0, 0.05, rng);
    const auto gmm = fit_gmm({traj}, 1, 0);
    REQUIRE(gmm.components() == 1);

    Vec mean = Vec::Zero(3);
    for (int k = 0; k < traj.samples(); ++k) {
        mean[0] += traj.t[static_cast<std::size_t>(k)];
        mean[1] += traj.e(k, 0);
        mean[2] += traj.e(k, 1);
    }
    mean /= traj.samples();
    CHECK((gmm.means[0] - mean).cwiseAbs().maxCoeff() < 1e-9);

    Mat cov = Mat::Zero(3, 3);
    for (int k = 0; k < traj.samples(); ++k) {
        Vec x(3);
        x << traj.t[static_cast<std::size_t>(k)], traj.e(k, 0), traj.e(k, 1);
        cov += (x - mean) * (x - mean).transpose();
    }
    cov /= traj.samples();
    CHECK((gmm.covs[0] - cov).cwiseAbs().maxCoeff() < 1e-6);
}

TEST_CASE("two separated blobs are recovered") {
    Rng rng(2, 0);
    SynergyTrajectory traj;
    const int half = 60;
    traj.e.resize(2 * half, 1);
    for (int k = 0; k < half; ++k) {
        traj.t.push_back(k * 0.01);
        traj.e(k, 0) = 2.0 + 0.03 * rng.normal();
    }
    for (int k = 0; k < half; ++k) {
        traj.t.push_back(5.0 + k * 0.01);
        traj.e(half + k, 0) = -2.0 + 0.03 * rng.normal();
    }
    const auto gmm = fit_gmm({traj}, 2, 3);
    REQUIRE(gmm.components() == 2);
    std::vector<double> centers = {gmm.means[0][1], gmm.means[1][1]};
    std::sort(centers.begin(), centers.end());
    CHECK(centers[0] == doctest::Approx(-2.0).epsilon(0.05));
    CHECK(centers[1] == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("EM input contracts") {
    Rng rng(3, 0);
    const auto traj = line_trajectory(25, 1.0, 0.02, rng);
    CHECK_THROWS_AS(fit_gmm({traj}, 3, 0), InvalidInput); // 25 < 30 samples
    CHECK_THROWS_AS(fit_gmm({}, 1, 0), InvalidInput);
    CHECK_THROWS_AS(fit_gmm({traj}, 0, 0), InvalidInput);
}

TEST_CASE("EM log-likelihood is non-decreasing per iteration") {
    Rng rng(4, 0);
    for (int trial = 0; trial < 10; ++trial) {
        const auto traj = line_trajectory(80, rng.uniform(0.5, 2.0), 0.1, rng);
        const auto gmm = fit_gmm({traj}, 3, static_cast<std::uint64_t>(trial));
        REQUIRE(gmm.log_likelihood_history.size() >= 2);
        for (std::size_t i = 1; i < gmm.log_likelihood_history.size(); ++i)
            CHECK(gmm.log_likelihood_history[i] >= gmm.log_likelihood_history[i - 1] - 1e-9);
    }
}

TEST_CASE("EM is deterministic per seed") {
    Rng rng(5, 0);
    const auto traj = line_trajectory(70, 1.2, 0.08, rng);
    const auto a = fit_gmm({traj}, 3, 42);
    const auto b = fit_gmm({traj}, 3, 42);
    for (int k = 0; k < 3; ++k) {
        CHECK(a.priors[static_cast<std::size_t>(k)] == b.priors[static_cast<std::size_t>(k)]);
        CHECK((a.means[static_cast<std::size_t>(k)] - b.means[static_cast<std::size_t>(k)]).norm() == 0.0);
        CHECK((a.covs[static_cast<std::size_t>(k)] - b.covs[static_cast<std::size_t>(k)]).norm() == 0.0);
    }
}

TEST_CASE("conditioning a single component") {
    Rng rng(6, 0);
    GmmModel gmm = random_gmm(1, 2, rng);

    SUBCASE("zero cross-covariance makes the mean time-independent") {
        gmm.covs[0](0, 1) = gmm.covs[0](1, 0) = 0.0;
        gmm.covs[0](0, 2) = gmm.covs[0](2, 0) = 0.0;
        for (double t : {-3.0, 0.0, 1.7}) {
            const auto out = gmr_condition(gmm, t);
            CHECK((out.mean - gmm.means[0].tail(2)).cwiseAbs().maxCoeff() < 1e-12);
        }
    }
    SUBCASE("conditioning at the component's time mean") {
        const auto out = gmr_condition(gmm, gmm.means[0][0]);
        CHECK((out.mean - gmm.means[0].tail(2)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("conditioning matches the direct-formula oracle") {
    Rng rng(7, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 50; ++trial) {
        const GmmModel gmm = random_gmm(3, 2, rng);
        for (int q = 0; q < 4; ++q) {
            const double t = rng.uniform(-2.0, 2.0);
            const auto fast = gmr_condition(gmm, t);
            const auto slow = gmr_oracle(gmm, t);
            worst = std::max(worst, (fast.mean - slow.mean).cwiseAbs().maxCoeff());
            worst = std::max(worst, (fast.cov - slow.cov).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("reference construction") {
    Rng rng(8, 0);
    const GmmModel gmm = random_gmm(2, 2, rng);

    SUBCASE("singleton grid") {
        const auto kmp = build_reference(gmm, {0.4});
        REQUIRE(kmp.reference.size() == 1);
        const auto direct = gmr_condition(gmm, 0.4);
        CHECK((kmp.reference[0].mean - direct.mean).norm() < 1e-15);
    }
    SUBCASE("uniform grid is pointwise equal to conditioning") {
        std::vector<double> times;
        for (int k = 0; k < 100; ++k) times.push_back(k * 0.01);
        const auto kmp = build_reference(gmm, times);
        for (std::size_t k = 0; k < times.size(); ++k) {
            const auto direct = gmr_condition(gmm, times[k]);
            CHECK((kmp.reference[k].mean - direct.mean).norm() == 0.0);
            // covariances pass through the reference floor once more
            CHECK((kmp.reference[k].cov - direct.cov).norm() < 1e-12);
        }
    }
    SUBCASE("non-increasing times are rejected") {
        CHECK_THROWS_AS(build_reference(gmm, {0.2, 0.2}), InvalidInput);
        CHECK_THROWS_AS(build_reference(gmm, std::vector<double>{}), InvalidInput);
    }
}

TEST_CASE("prediction interpolates the reference at small lambda") {
    Rng rng(9, 0);
    KmpModel kmp = random_kmp(8, 2, rng, true);
    kmp.lambda = 1e-8;
    kmp.length_scale = 0.15; // well-separated relative to spacing >= 0.05
    for (const auto& p : kmp.reference) {
        const auto out = kmp_predict(kmp, p.t);
        CHECK((out.mean - p.mean).cwiseAbs().maxCoeff() < 1e-3);
    }
}

TEST_CASE("mean prediction matches the dense-solve oracle") {
    Rng rng(10, 0);
    double worst = 0.0;
    for (int trial = 0; trial < 25; ++trial) {
        // Identity covariances: the system is exactly K + lambda I.
        const bool identity = trial % 2 == 0;
        const KmpModel kmp = random_kmp(6 + trial % 5, 2, rng, identity);
        for (int q = 0; q < 3; ++q) {
            const double t = rng.uniform(kmp.reference.front().t - 1.0, kmp.reference.back().t + 1.0);
            const Vec fast = kmp_predict(kmp, t).mean;
            const Vec slow = kmp_mean_oracle(kmp, t);
            worst = std::max(worst, (fast - slow).cwiseAbs().maxCoeff());
        }
    }
    CHECK(worst < 1e-8);
}

TEST_CASE("far outside the support the prediction decays to the prior") {
    Rng rng(11, 0);
    const KmpModel kmp = random_kmp(6, 2, rng, false);
    const double far = kmp.reference.back().t + 50.0 * kmp.length_scale;
    const auto out = kmp_predict(kmp, far);
    CHECK(out.mean.cwiseAbs().maxCoeff() < 1e-9);
    const int n = static_cast<int>(kmp.reference.size());
    const Mat expected = (n / kmp.lambda_cov) * kmp.kernel(far, far) * Mat::Identity(2, 2);
    CHECK((out.cov - expected).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("covariance output is symmetric PSD") {
    Rng rng(12, 0);
    for (int trial = 0; trial < 30; ++trial) {
        const KmpModel kmp = random_kmp(7, 2, rng, false);
        const double t = rng.uniform(-1.0, kmp.reference.back().t + 1.0);
        const auto out = kmp_predict(kmp, t);
        CHECK((out.cov - out.cov.transpose()).cwiseAbs().maxCoeff() < 1e-12);
        Eigen::SelfAdjointEigenSolver<Mat> eig(out.cov);
        CHECK(eig.eigenvalues().minCoeff() >= -1e-12);
    }
}

TEST_CASE("via-point insertion") {
    Rng rng(13, 0);
    const KmpModel kmp = random_kmp(9, 2, rng, false);

    SUBCASE("re-inserting an existing reference leaves predictions unchanged") {
        const auto& p = kmp.reference[4];
        const KmpModel same = insert_via_point(kmp, p.t, p.mean, p.cov);
        for (double t = kmp.reference.front().t; t <= kmp.reference.back().t; t += 0.17) {
            const Vec a = kmp_predict(kmp, t).mean;
            const Vec b = kmp_predict(same, t).mean;
            CHECK((a - b).cwiseAbs().maxCoeff() < 1e-10);
        }
    }
    SUBCASE("a tight via-point dominates the prediction") {
        Vec target(2);
        target << 0.7, -0.4;
        const double t_star = 0.5 * (kmp.reference[3].t + kmp.reference[4].t);
        const KmpModel adapted = insert_via_point(kmp, t_star, target, 1e-6 * Mat::Identity(2, 2));
        CHECK((kmp_predict(adapted, t_star).mean - target).cwiseAbs().maxCoeff() < 1e-3);
    }
    SUBCASE("dominance improves monotonically as the covariance shrinks") {
        Vec target(2);
        target << -0.9, 0.3;
        const double t_star = 0.5 * (kmp.reference[5].t + kmp.reference[6].t);
        double prev = std::numeric_limits<double>::infinity();
        for (double cov : {1.0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
            const KmpModel adapted = insert_via_point(kmp, t_star, target, cov * Mat::Identity(2, 2));
            const double dist = (kmp_predict(adapted, t_star).mean - target).norm();
            CHECK(dist <= prev + 1e-12);
            prev = dist;
        }
        CHECK(prev < 1e-3);
    }
    SUBCASE("non-SPD covariance is rejected") {
        Mat bad = Mat::Zero(2, 2);
        bad(0, 0) = 1.0; // singular
        CHECK_THROWS_AS(insert_via_point(kmp, 0.5, Vec::Zero(2), bad), InvalidInput);
    }
}

TEST_CASE("end-point adaptation moves the terminal mean between grasp targets") {
    // Reference trajectory ends at the first target; adapting the end-point
    // re-aims the terminal prediction at the second.
    KmpModel kmp;
    const int n = 40;
    for (int i = 0; i < n; ++i) {
        const double t = i / static_cast<double>(n - 1);
        KmpReferencePoint p;
        p.t = t;
        p.mean = Vec::Constant(1, -0.18 * t); // ends at -0.18
        p.cov = 0.01 * Mat::Identity(1, 1);
        kmp.reference.push_back(std::move(p));
    }
    kmp.length_scale = 0.1;
    kmp.amplitude = 1.0;
    kmp.lambda = 1.0;
    kmp.lambda_cov = 10.0;

    CHECK(kmp_predict(kmp, 1.0).mean[0] == doctest::Approx(-0.18).epsilon(0.02));
    const KmpModel adapted =
        insert_via_point(kmp, 1.0, Vec::Constant(1, 0.12), 1e-6 * Mat::Identity(1, 1));
    CHECK(std::abs(kmp_predict(adapted, 1.0).mean[0] - 0.12) < 1e-3);
}

TEST_CASE("priority fusion") {
    SUBCASE("single component with full priority is the identity") {
        PrioritizedGaussian g;
        g.mean = Vec::Constant(2, 0.4);
        g.cov = 0.3 * Mat::Identity(2, 2);
        g.priority = 1.0;
        const auto out = fuse_priorities({g});
        CHECK((out.mean - g.mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((out.cov - g.cov).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("two identical components at half priority return the shared moments") {
        PrioritizedGaussian g;
        g.mean = Vec(2);
        g.mean << -0.11, 0.38;
        g.cov = Mat(2, 2);
        g.cov << 0.04, 0.01, 0.01, 0.09;
        g.priority = 0.5;
        const auto out = fuse_priorities({g, g});
        CHECK((out.mean - g.mean).cwiseAbs().maxCoeff() < 1e-12);
        CHECK((out.cov - g.cov).cwiseAbs().maxCoeff() < 1e-12);
    }
    SUBCASE("1-D closed form") {
        PrioritizedGaussian a, b;
        a.mean = Vec::Constant(1, 0.0);
        a.cov = Mat::Identity(1, 1);
        a.priority = 1.0;
        b.mean = Vec::Constant(1, 2.0);
        b.cov = Mat::Identity(1, 1);
        b.priority = 1.0;
        const auto out = fuse_priorities({a, b});
        CHECK(out.mean[0] == doctest::Approx(1.0).epsilon(1e-10));
        CHECK(out.cov(0, 0) == doctest::Approx(0.5).epsilon(1e-10));
    }
    SUBCASE("permutation invariance and priority scaling") {
        Rng rng(14, 0);
        std::vector<PrioritizedGaussian> parts(3);
        for (auto& p : parts) {
            p.mean = Vec(2);
            p.mean << rng.normal(), rng.normal();
            Mat a(2, 2);
            a << 0.5 + rng.uniform(), 0.1 * rng.normal(), 0.1 * rng.normal(), 0.5 + rng.uniform();
            p.cov = a * a.transpose() + 0.1 * Mat::Identity(2, 2);
            p.priority = 0.8;
        }
        const auto fwd = fuse_priorities(parts);
        std::swap(parts[0], parts[2]);
        const auto rev = fuse_priorities(parts);
        CHECK((fwd.mean - rev.mean).cwiseAbs().maxCoeff() < 1e-12);

        for (auto& p : parts) p.priority = 0.4; // common rescale
        const auto scaled = fuse_priorities(parts);
        CHECK((scaled.mean - fwd.mean).cwiseAbs().maxCoeff() < 1e-10);
    }
    SUBCASE("contract violations") {
        CHECK_THROWS_AS(fuse_priorities({}), InvalidInput);
        PrioritizedGaussian g;
        g.mean = Vec::Zero(2);
        g.cov = Mat::Identity(2, 2);
        g.priority = 1.5;
        CHECK_THROWS_AS(fuse_priorities({g}), InvalidInput);
    }
}

TEST_CASE("model files round trip") {
    Rng rng(15, 0);
    const auto dir = std::filesystem::temp_directory_path();
    {
        const GmmModel gmm = random_gmm(3, 2, rng);
        const auto path = dir / "ksyn_gmm_test.v1";
        gmm.save(path);
        const auto loaded = GmmModel::load(path);
        for (int k = 0; k < 3; ++k) {
            CHECK(loaded.priors[static_cast<std::size_t>(k)] == gmm.priors[static_cast<std::size_t>(k)]);
            CHECK((loaded.means[static_cast<std::size_t>(k)] - gmm.means[static_cast<std::size_t>(k)]).norm() == 0.0);
            CHECK((loaded.covs[static_cast<std::size_t>(k)] - gmm.covs[static_cast<std::size_t>(k)]).norm() == 0.0);
        }
        std::filesystem::remove(path);
    }
    {
        const KmpModel kmp = random_kmp(6, 2, rng, false);
        const auto path = dir / "ksyn_kmp_test.v1";
        kmp.save(path);
        const auto loaded = KmpModel::load(path);
        REQUIRE(loaded.reference.size() == kmp.reference.size());
        for (std::size_t k = 0; k < kmp.reference.size(); ++k) {
            CHECK(loaded.reference[k].t == kmp.reference[k].t);
            CHECK((loaded.reference[k].mean - kmp.reference[k].mean).norm() == 0.0);
            CHECK((loaded.reference[k].cov - kmp.reference[k].cov).norm() == 0.0);
        }
        std::filesystem::remove(path);
    }
}
