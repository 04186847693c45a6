#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>

#include "ksyn/errors.hpp"
#include "ksyn/evaluation.hpp"
#include "ksyn/rng.hpp"

using namespace ksyn;

namespace {

std::vector<JointConfig> constant_trajectory(const Vec6& q, int samples) {
    return std::vector<JointConfig>(static_cast<std::size_t>(samples), JointConfig(q));
}

} // namespace

TEST_CASE("normalized square error") {
    const JointConfig q0(Vec6::Zero());
    Vec6 g;
    g << 0.2, -0.1, 0.3, 0.0, 0.1, -0.2;

    SUBCASE("identical trajectories score zero") {
        const auto ground = constant_trajectory(g, 5);
        CHECK(nse(ground, ground, q0).value == 0.0);
    }
    SUBCASE("staying at q0 scores one") {
        const auto ground = constant_trajectory(g, 5);
        const auto achieved = constant_trajectory(Vec6::Zero(), 5);
        CHECK(nse(ground, achieved, q0).value == 1.0);
    }
    SUBCASE("hand-computed two-sample case") {
        // Sample 1: |d|^2/|g|^2 = 0.25; sample 2: 0.75.
        Vec6 g1 = Vec6::Zero(), g2 = Vec6::Zero();
        g1[0] = 2.0;
        g2[1] = 2.0;
        Vec6 a1 = g1, a2 = g2;
        a1[0] -= 1.0;               // |d|^2 = 1, |g|^2 = 4
        a2[1] -= std::sqrt(3.0);    // |d|^2 = 3, |g|^2 = 4
        const auto value = nse({JointConfig(g1), JointConfig(g2)},
                               {JointConfig(a1), JointConfig(a2)}, q0);
        CHECK(value.value == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("samples at q0 are skipped and flagged") {
        const std::vector<JointConfig> ground = {JointConfig(g), q0};
        const std::vector<JointConfig> achieved = {JointConfig(g), JointConfig(g)};
        const auto value = nse(ground, achieved, q0);
        CHECK(value.skipped_samples == 1);
        CHECK(value.value == 0.0);
    }
    SUBCASE("length mismatch is rejected") {
        CHECK_THROWS_AS(nse(constant_trajectory(g, 3), constant_trajectory(g, 4), q0), InvalidInput);
    }
}

TEST_CASE("primitive accuracy") {
    Vec6 g;
    g << 0.2, -0.1, 0.3, 0.0, 0.1, -0.2;
    const double tol = 0.05;

    SUBCASE("identical trajectories score one") {
        const auto ground = constant_trajectory(g, 4);
        CHECK(primitive_accuracy(ground, ground, tol) == 1.0);
    }
    SUBCASE("half the joint-samples off by ten tolerances scores one half") {
        const auto ground = constant_trajectory(g, 2);
        Vec6 a = g;
        for (int j = 0; j < 3; ++j) a[j] += 10.0 * tol;
        const std::vector<JointConfig> achieved = {JointConfig(a), JointConfig(a)};
        CHECK(primitive_accuracy(ground, achieved, tol) == doctest::Approx(0.5).epsilon(1e-12));
    }
    SUBCASE("a tolerance sweep is non-decreasing") {
        Rng rng(1, 0);
        std::vector<JointConfig> ground, achieved;
        for (int k = 0; k < 20; ++k) {
            Vec6 q, a;
            for (int j = 0; j < 6; ++j) {
                q[j] = rng.normal();
                a[j] = q[j] + 0.08 * rng.normal();
            }
            ground.emplace_back(q);
            achieved.emplace_back(a);
        }
        double prev = 0.0;
        for (double t = 0.01; t <= 0.4; t += 0.01) {
            const double pa = primitive_accuracy(ground, achieved, t);
            CHECK(pa >= prev);
            prev = pa;
        }
    }
}

TEST_CASE("benchmark generation is deterministic with structured truth") {
    const BenchmarkDataset a = generate_benchmark(BenchmarkParams{}, 5);
    const BenchmarkDataset b = generate_benchmark(BenchmarkParams{}, 5);
    REQUIRE(a.test.size() == b.test.size());
    for (std::size_t i = 0; i < a.test.size(); ++i) {
        CHECK(a.test[i].radius == b.test[i].radius);
        for (std::size_t k = 0; k < a.test[i].ground_truth.size(); ++k)
            CHECK((a.test[i].ground_truth[k].angles - b.test[i].ground_truth[k].angles).norm() ==
                  0.0);
    }
    // Larger objects need a wider pinch: the aperture (first generator
    // coefficient at the grasp time) decreases with the radius.
    const Mat& basis = a.generator_basis;
    double prev = 1e9;
    for (const auto& obj : a.train) {
        const double aperture =
            basis.col(0).dot(obj.ground_truth[40].angles - a.q0); // tau = 1
        CHECK(aperture < prev);
        prev = aperture;
    }
}

TEST_CASE("comparison harness") {
    const BenchmarkDataset dataset = generate_benchmark(BenchmarkParams{}, 0);
    CompareOptions options;
    options.seed = 0;

    SUBCASE("self-consistency upper bound on the training objects") {
        // Reproducing the training objects themselves bounds the pipeline's
        // fidelity on this synthetic stand-in.
        BenchmarkDataset self = dataset;
        self.test = dataset.train;
        const auto reports = compare_methods(self, {"kernelized"}, {2}, options);
        REQUIRE(reports.size() == 1);
        CHECK(reports[0].nse < 0.15);
        CHECK(reports[0].pa > 0.85);
    }
    SUBCASE("kernelized beats the retrained baseline at two components") {
        const auto reports =
            compare_methods(dataset, {"kernelized", "retrained_pca"}, {2}, options);
        REQUIRE(reports.size() == 2);
        CHECK(reports[0].nse <= reports[1].nse);
        CHECK(reports[0].pa >= reports[1].pa);
    }
    SUBCASE("the retrained baseline sweep is monotone") {
        const auto reports =
            compare_methods(dataset, {"retrained_pca"}, {2, 3, 4, 5, 6}, options);
        for (std::size_t i = 1; i < reports.size(); ++i) {
            CHECK(reports[i].nse <= reports[i - 1].nse + 1e-12);
            CHECK(reports[i].pa >= reports[i - 1].pa - 1e-12);
        }
    }
    SUBCASE("headline numbers are the mean of the breakdown") {
        const auto reports = compare_methods(dataset, {"fixed_plus_appended"}, {3}, options);
        REQUIRE(reports.size() == 1);
        double nse_sum = 0.0, pa_sum = 0.0;
        for (const auto& b : reports[0].breakdown) {
            nse_sum += b.nse;
            pa_sum += b.pa;
        }
        CHECK(reports[0].nse ==
              doctest::Approx(nse_sum / reports[0].breakdown.size()).epsilon(1e-12));
        CHECK(reports[0].pa == doctest::Approx(pa_sum / reports[0].breakdown.size()).epsilon(1e-12));
    }
    SUBCASE("unknown methods are rejected") {
        CHECK_THROWS_AS(compare_methods(dataset, {"nonsense"}, {2}, options), InvalidInput);
    }
    SUBCASE("reports serialize to CSV and SVG") {
        const auto reports =
            compare_methods(dataset, {"retrained_pca", "fixed_plus_appended"}, {2, 3}, options);
        const auto dir = std::filesystem::temp_directory_path();
        save_report_csv(dir / "ksyn_report_test.csv", reports);
        save_report_svg(dir / "ksyn_report_test.svg", reports);
        CHECK(std::filesystem::file_size(dir / "ksyn_report_test.csv") > 0);
        CHECK(std::filesystem::file_size(dir / "ksyn_report_test.svg") > 0);
        std::filesystem::remove(dir / "ksyn_report_test.csv");
        std::filesystem::remove(dir / "ksyn_report_test.svg");
    }
}

TEST_CASE("task scripts round trip") {
    const auto scripts = default_task_scripts();
    REQUIRE(scripts.size() == 3);
    const auto path = std::filesystem::temp_directory_path() / "ksyn_task_test.v1";
    for (const auto& script : scripts) {
        script.save(path);
        const TaskScript loaded = TaskScript::load(path);
        CHECK(loaded.name == script.name);
        CHECK(loaded.object_class == script.object_class);
        CHECK((loaded.grasp_coeffs - script.grasp_coeffs).norm() == 0.0);
        CHECK((loaded.manipulation_end - script.manipulation_end).norm() == 0.0);
        CHECK(loaded.priorities == script.priorities);
        CHECK(loaded.force_max == script.force_max);
    }
    std::filesystem::remove(path);
}

TEST_CASE("task replay on the scripted scenarios") {
    const ReplayModels models = default_replay_models(0);
    const auto scripts = default_task_scripts();

    for (const auto& script : scripts) {
        CAPTURE(script.name);
        const SceneSpec scene = default_task_scene(script.name);
        const TaskTrace trace = replay_task(script, scene, models, 0);
        CHECK(trace.success);
        CHECK(trace.failure_stage.empty());
        CHECK((trace.final_coeffs - script.manipulation_end).cwiseAbs().maxCoeff() <= 0.02);
        CHECK(trace.final_force >= 0.95 * script.force_max);
        CHECK(trace.final_force <= 1.05 * script.force_max);
        // Detection found the scripted class with an accepted confidence.
        bool found = false;
        for (const auto& d : trace.detections) found |= d.label == script.object_class;
        CHECK(found);
    }
}

TEST_CASE("replay reports a detection failure stage") {
    const ReplayModels models = default_replay_models(0);
    TaskScript script = default_task_scripts()[0];
    script.object_class = "lemon"; // not present in the bulb scene
    const SceneSpec scene = default_task_scene("bulb");
    const TaskTrace trace = replay_task(script, scene, models, 0);
    CHECK_FALSE(trace.success);
    CHECK(trace.failure_stage == "detection");
}
