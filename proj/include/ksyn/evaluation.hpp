#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "ksyn/frames_mapping.hpp"
#include "ksyn/grasp_model.hpp"
#include "ksyn/hand_model.hpp"
#include "ksyn/perception.hpp"
#include "ksyn/synergy_core.hpp"
#include "ksyn/trajectory_model.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

// ---------------------------------------------------------------------------
// Metrics.

struct MetricValue {
    double value = 0.0;
    int skipped_samples = 0; // samples with ground truth at q0
};

// Mean over samples of |g - a|^2 / |g - q0|^2, clipped to [0, 1].
MetricValue nse(const std::vector<JointConfig>& ground, const std::vector<JointConfig>& achieved,
                const JointConfig& q0);

// Fraction of joint-samples within tol_rad of the ground truth.
double primitive_accuracy(const std::vector<JointConfig>& ground,
                          const std::vector<JointConfig>& achieved, double tol_rad);

// ---------------------------------------------------------------------------
// Synthetic demonstration benchmark over parametric spheres.

struct BenchmarkObject {
    double radius = 0.03;
    std::vector<JointConfig> ground_truth;              // clean trajectory
    std::vector<std::vector<JointConfig>> replicates;   // noisy demonstrations
};

struct BenchmarkParams {
    std::vector<double> train_radii = {0.022, 0.0245, 0.027, 0.0295, 0.032, 0.0345, 0.037, 0.0395};
    std::vector<double> test_radii = {0.0235, 0.0285, 0.0335, 0.0385};
    int train_replicates = 3;
    int test_replicates = 2;
    int samples_per_trajectory = 81; // over tau in [0, 2]
    double demo_noise_sigma = 0.02;  // [rad]
    double wiggle_sigma = 0.03;
};

struct BenchmarkDataset {
    HandModel hand;
    Vec6 q0;
    Mat generator_basis; // 6 x 2 used to synthesize the data
    Vec3 grasp_center;   // canonical virtual-object location, hand frame
    std::vector<double> times;
    std::vector<BenchmarkObject> train;
    std::vector<BenchmarkObject> test;
    BenchmarkParams params;
};

BenchmarkDataset generate_benchmark(const BenchmarkParams& params, std::uint64_t seed);

// Subspace + mixture trained on the pooled demonstrations (the front half of
// the adaptation pipeline, shared by the comparison harness and task replay).
struct TrainedPipeline {
    SynergySubspace subspace;
    GmmModel gmm;
    std::vector<double> times;
};

TrainedPipeline train_synergy_pipeline(const BenchmarkDataset& dataset, int components,
                                       int gmm_components, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Method comparison.

struct PerObjectMetrics {
    double radius = 0.0;
    double nse = 0.0;
    double pa = 0.0;
};

struct MetricReport {
    std::string method; // "kernelized", "retrained_pca", "fixed_plus_appended"
    int components = 0;
    double nse = 0.0;
    double pa = 0.0;
    std::vector<PerObjectMetrics> breakdown;
    double runtime_ms = 0.0;
};

struct CompareOptions {
    double pa_tolerance = 0.05; // [rad]
    int gmm_components = 5;
    std::uint64_t seed = 0;
};

// methods: subset of {"kernelized", "retrained_pca", "fixed_plus_appended"};
// component counts above the joint dimension saturate at full rank.
std::vector<MetricReport> compare_methods(const BenchmarkDataset& dataset,
                                          const std::vector<std::string>& methods,
                                          const std::vector<int>& component_counts,
                                          const CompareOptions& options = {});

void save_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports);
void save_report_svg(const std::filesystem::path& path, const std::vector<MetricReport>& reports);

// ---------------------------------------------------------------------------
// Task replay.

struct TaskScript {
    std::string name;
    std::string object_class;       // expected detection label
    ObjectPrimitive::Kind object_kind = ObjectPrimitive::Kind::Sphere;
    Vec grasp_coeffs;               // e_g
    Vec manipulation_start;         // e_m ramp start
    Vec manipulation_end;           // e_m ramp end
    std::vector<double> priorities; // one entry = direct command, two = fused hold/press
    double force_min = 2.38;        // [N]
    double force_max = 3.57;        // [N]

    static TaskScript load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

struct Detection {
    std::string label;
    double confidence = 0.0;
    int cluster_size = 0;
    Pose pose_base;
    Vec3 oriented_extents = Vec3::Zero();
};

struct PerceptionParams {
    double voxel_leaf = 0.005;
    int ransac_iters = 200;
    double ransac_dist = 0.008;
    double cluster_epsilon = 0.02;
    int cluster_min_pts = 30;
    double reject_threshold = 0.35;
};

// Full detection pipeline on a camera-frame cloud; poses in the base frame.
std::vector<Detection> detect_objects(const PointCloud& camera_cloud, const SvmModel& svm,
                                      const FrameCalibration& frames, std::uint64_t seed,
                                      const PerceptionParams& params = {});

struct ReplayModels {
    HandModel hand;
    SynergySubspace subspace;
    GmmModel gmm;
    SvmModel scene_svm;
    FrameCalibration frames;
};

// Deterministic default models: subspace/GMM from the synthetic benchmark,
// scene SVM from the four scene classes, fixed calibration.
ReplayModels default_replay_models(std::uint64_t seed);

struct TaskTrace {
    bool success = false;
    std::string failure_stage; // empty on success
    std::vector<Detection> detections;
    SynergyTrajectory adapted;        // grasp-phase trajectory after KMP adaptation
    std::vector<GraspTraceRow> grasp_trace;
    SynergyTrajectory manipulation;   // commanded manipulation ramp
    Vec final_coeffs;
    double final_force = 0.0; // mean per-contact [N]
};

TaskTrace replay_task(const TaskScript& script, const SceneSpec& scene, const ReplayModels& models,
                      std::uint64_t seed, const PerceptionParams& params = {});

// The three scripted tasks and their scenes.
std::vector<TaskScript> default_task_scripts();
SceneSpec default_task_scene(const std::string& task_name);
std::vector<CorpusClassSpec> scene_corpus_classes(); // 4 scene classes

} // namespace ksyn
