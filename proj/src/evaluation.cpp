#include "ksyn/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>
#include <Eigen/QR>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/rng.hpp"
#include "ksyn/svg.hpp"

namespace ksyn {

using Vec2 = Eigen::Vector2d;

MetricValue nse(const std::vector<JointConfig>& ground, const std::vector<JointConfig>& achieved,
                const JointConfig& q0) {
    if (ground.size() != achieved.size()) throw InvalidInput("NSE input length mismatch");
    if (ground.empty()) throw InvalidInput("NSE needs at least one sample");
    MetricValue out;
    double sum = 0.0;
    int used = 0;
    for (std::size_t k = 0; k < ground.size(); ++k) {
        const double denom = (ground[k].angles - q0.angles).squaredNorm();
        if (denom == 0.0) {
            ++out.skipped_samples;
            continue;
        }
        const double err = (ground[k].angles - achieved[k].angles).squaredNorm() / denom;
        sum += std::clamp(err, 0.0, 1.0);
        ++used;
    }
    out.value = used > 0 ? sum / used : 0.0;
    return out;
}

double primitive_accuracy(const std::vector<JointConfig>& ground,
                          const std::vector<JointConfig>& achieved, double tol_rad) {
    if (ground.size() != achieved.size()) throw InvalidInput("PA input length mismatch");
    if (ground.empty()) throw InvalidInput("PA needs at least one sample");
    if (!(tol_rad > 0.0)) throw InvalidInput("PA tolerance must be positive");
    long long hits = 0, total = 0;
    for (std::size_t k = 0; k < ground.size(); ++k) {
        for (int j = 0; j < HandModel::kJointCount; ++j) {
            ++total;
            if (std::abs(ground[k].angles[j] - achieved[k].angles[j]) <= tol_rad) ++hits;
        }
    }
    return static_cast<double>(hits) / static_cast<double>(total);
}

// ---------------------------------------------------------------------------
// Benchmark generation.

namespace {

double min_jerk(double tau) {
    tau = std::clamp(tau, 0.0, 1.0);
    return tau * tau * tau * (10.0 + tau * (-15.0 + 6.0 * tau));
}

Mat generator_basis_6x2() {
    Vec6 c0, c1;
    c0 << 0.9, 0.9, 0.9, 0.9, 0.9, 1.8;   // flexion plus thumb swing: closes the pinch
    c1 << 0.7, -0.7, 0.0, 0.0, 0.0, 0.4;  // index/thumb relative motion
    c0.normalize();
    c1 -= c0 * c0.dot(c1);
    c1.normalize();
    Mat basis(6, 2);
    basis.col(0) = c0;
    basis.col(1) = c1;
    return basis;
}

SynergySubspace subspace_from_basis(const Mat& basis, const Vec6& q0) {
    SynergySubspace sub;
    sub.basis = basis;
    sub.q0 = q0;
    sub.singular_values = Vec::Ones(basis.cols());
    sub.explained_variance_ratio = Vec::Constant(basis.cols(), 1.0 / 6.0);
    return sub;
}

// Closure progress along the first generator component at which the
// thumb-index pinch gap matches the sphere diameter. The gap shrinks
// monotonically from about 10 cm to 4 cm over s in [0, 1.3] on this hand.
double aperture_for_radius(const HandModel& hand, const Mat& basis, const Vec6& q0, double radius) {
    auto gap = [&](double s) {
        const auto tips = forward_kinematics(hand, JointConfig(Vec6(q0 + basis.col(0) * s)));
        return (tips[0] - tips[1]).norm();
    };
    const double target = 2.0 * radius;
    double lo = 0.0, hi = 1.3;
    if (gap(lo) <= target) return lo;
    if (gap(hi) >= target) return hi;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (gap(mid) > target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

// Orthonormal complement of the generator columns (wiggle directions).
Mat complement_directions(const Mat& basis) {
    Mat full(6, 8);
    full.leftCols(2) = basis;
    full.rightCols(6) = Mat::Identity(6, 6);
    Eigen::HouseholderQR<Mat> qr(full);
    Mat q = qr.householderQ() * Mat::Identity(6, 6);
    return q.rightCols(4);
}

} // namespace

BenchmarkDataset generate_benchmark(const BenchmarkParams& params, std::uint64_t seed) {
    if (params.samples_per_trajectory < 2) throw InvalidInput("trajectory needs >= 2 samples");
    BenchmarkDataset data;
    data.params = params;
    data.hand = HandModel::default_model();
    data.q0 = data.hand.nominal_posture.angles;
    data.generator_basis = generator_basis_6x2();
    const Mat wiggle_dirs = complement_directions(data.generator_basis);

    data.times.resize(static_cast<std::size_t>(params.samples_per_trajectory));
    for (int k = 0; k < params.samples_per_trajectory; ++k)
        data.times[static_cast<std::size_t>(k)] =
            2.0 * k / static_cast<double>(params.samples_per_trajectory - 1);

    const Vec2 manipulation_delta(-0.06, 0.10);
    const double mid_radius = 0.031;

    auto make_object = [&](double radius, int replicates, std::uint64_t stream) {
        BenchmarkObject obj;
        obj.radius = radius;
        const double a1 = aperture_for_radius(data.hand, data.generator_basis, data.q0, radius);
        const double a2 = 1.5 * (radius - mid_radius);
        obj.ground_truth.reserve(data.times.size());
        for (double t : data.times) {
            Vec2 e;
            if (t <= 1.0) {
                e = min_jerk(t) * Vec2(a1, a2);
            } else {
                e = Vec2(a1, a2) + min_jerk(t - 1.0) * manipulation_delta;
            }
            JointConfig q(Vec6(data.q0 + data.generator_basis * e), t);
            obj.ground_truth.push_back(q);
        }
        for (int r = 0; r < replicates; ++r) {
            Rng rng(seed, stream * 101 + static_cast<std::uint64_t>(r));
            Vec wiggle_amp(2);
            wiggle_amp << params.wiggle_sigma * rng.normal(), params.wiggle_sigma * rng.normal();
            std::vector<JointConfig> rep;
            rep.reserve(data.times.size());
            for (std::size_t k = 0; k < data.times.size(); ++k) {
                const double t = data.times[k];
                Vec6 q = obj.ground_truth[k].angles;
                q += wiggle_amp[0] * std::sin(M_PI * t / 2.0) * wiggle_dirs.col(0);
                q += wiggle_amp[1] * std::sin(M_PI * t) * wiggle_dirs.col(1);
                for (int j = 0; j < 6; ++j) q[j] += params.demo_noise_sigma * rng.normal();
                rep.emplace_back(q, t);
            }
            obj.replicates.push_back(std::move(rep));
        }
        return obj;
    };

    std::uint64_t stream = 1;
    for (double r : params.train_radii) data.train.push_back(make_object(r, params.train_replicates, stream++));
    for (double r : params.test_radii) data.test.push_back(make_object(r, params.test_replicates, 1000 + stream++));

    // Canonical virtual-object location: sphere of the mid radius pinched
    // between thumb and index at its own closure aperture.
    const double a1 = aperture_for_radius(data.hand, data.generator_basis, data.q0, mid_radius);
    Vec e_mid(2);
    e_mid << a1, 0.0;
    const SynergySubspace gen_sub = subspace_from_basis(data.generator_basis, data.q0);
    const ObjectPrimitive sphere =
        fit_sphere_to_fingers(data.hand, gen_sub, e_mid, {0, 1}, mid_radius);
    data.grasp_center = sphere.pose.translation;
    return data;
}

TrainedPipeline train_synergy_pipeline(const BenchmarkDataset& dataset, int components,
                                       int gmm_components, std::uint64_t seed) {
    std::vector<JointConfig> pooled;
    for (const auto& obj : dataset.train)
        for (const auto& rep : obj.replicates)
            for (const auto& q : rep) pooled.push_back(q);
    if (pooled.empty()) throw InvalidInput("benchmark has no training demonstrations");

    TrainedPipeline out;
    const ConfigurationMatrix c = build_config_matrix(pooled, JointConfig(dataset.q0));
    out.subspace = extract_synergies(c, components);

    std::vector<SynergyTrajectory> trajs;
    for (const auto& obj : dataset.train) {
        for (const auto& rep : obj.replicates) {
            SynergyTrajectory traj;
            traj.t = dataset.times;
            traj.e.resize(static_cast<Eigen::Index>(rep.size()), components);
            for (std::size_t k = 0; k < rep.size(); ++k)
                traj.e.row(static_cast<Eigen::Index>(k)) = project(out.subspace, rep[k]).e.transpose();
            trajs.push_back(std::move(traj));
        }
    }
    out.gmm = fit_gmm(trajs, gmm_components, seed);
    out.times = dataset.times;
    return out;
}

// ---------------------------------------------------------------------------
// Method comparison.

namespace {

std::vector<JointConfig> project_onto(const Mat& basis, const Vec6& q0,
                                      const std::vector<JointConfig>& configs) {
    std::vector<JointConfig> out;
    out.reserve(configs.size());
    for (const auto& q : configs) {
        const Vec6 d = q.angles - q0;
        out.emplace_back(Vec6(q0 + basis * (basis.transpose() * d)));
    }
    return out;
}

struct MethodScore {
    std::vector<PerObjectMetrics> breakdown;
    double nse_mean = 0.0;
    double pa_mean = 0.0;
};

MethodScore score_per_object(const BenchmarkDataset& dataset,
                             const std::vector<std::vector<JointConfig>>& achieved_per_object,
                             double pa_tol) {
    MethodScore score;
    const JointConfig q0(dataset.q0);
    for (std::size_t i = 0; i < dataset.test.size(); ++i) {
        PerObjectMetrics m;
        m.radius = dataset.test[i].radius;
        m.nse = nse(dataset.test[i].ground_truth, achieved_per_object[i], q0).value;
        m.pa = primitive_accuracy(dataset.test[i].ground_truth, achieved_per_object[i], pa_tol);
        score.breakdown.push_back(m);
    }
    for (const auto& m : score.breakdown) {
        score.nse_mean += m.nse;
        score.pa_mean += m.pa;
    }
    score.nse_mean /= static_cast<double>(score.breakdown.size());
    score.pa_mean /= static_cast<double>(score.breakdown.size());
    return score;
}

// Method (a): the adaptation pipeline itself. Test demonstrations are never
// touched: the end-point comes from the virtual-object chain and the
// approach via-points from the learned progress profile scaled to it.
std::vector<std::vector<JointConfig>> run_kernelized(const BenchmarkDataset& dataset, int components,
                                                     const CompareOptions& options) {
    const int s = std::min(components, HandModel::kJointCount);
    const TrainedPipeline pipe =
        train_synergy_pipeline(dataset, s, options.gmm_components, options.seed);
    const KmpModel kmp = build_reference(pipe.gmm, pipe.times);

    const GmrResult ref_grasp = gmr_condition(pipe.gmm, 1.0);
    const double ref_grasp_norm = std::max(ref_grasp.mean.norm(), 1e-9);
    const JointConfig q0(dataset.q0);

    std::vector<std::vector<JointConfig>> achieved;
    for (const auto& obj : dataset.test) {
        ObjectPrimitive sphere;
        sphere.kind = ObjectPrimitive::Kind::Sphere;
        sphere.dims = Vec3::Constant(obj.radius);
        sphere.pose.translation = dataset.grasp_center;

        const JointConfig q_ref =
            clamp_to_limits(dataset.hand, reconstruct(pipe.subspace, ref_grasp.mean, q0)).config;
        MappingConfig cfg = make_mapping_config(dataset.hand, pipe.subspace, q_ref, Mat6::Identity());
        EndpointOptions ep;
        ep.contact_fingers = {0, 1}; // the demonstrations use the pinch aperture
        const auto endpoints =
            virtual_object_endpoints(cfg, dataset.hand, sphere, ref_grasp.mean, 1.0, ep);
        const Vec e_grasp = endpoints.back().mean;

        KmpModel adapted = kmp;
        // Approach via-points: learned progress profile rescaled to the new
        // grasp aperture.
        for (double tau : {0.25, 0.5, 0.75}) {
            const double progress = gmr_condition(pipe.gmm, tau).mean.norm() / ref_grasp_norm;
            adapted = insert_via_point(adapted, tau, Vec(progress * e_grasp),
                                       1e-3 * Mat::Identity(s, s));
        }
        adapted = insert_via_point(adapted, 1.0, e_grasp, 1e-4 * Mat::Identity(s, s));
        // Manipulation: learned displacement relative to the grasp posture.
        for (double tau : {1.25, 1.5, 1.75, 2.0}) {
            const Vec delta = gmr_condition(pipe.gmm, tau).mean - ref_grasp.mean;
            adapted = insert_via_point(adapted, tau, Vec(e_grasp + delta),
                                       1e-4 * Mat::Identity(s, s));
        }

        std::vector<JointConfig> traj;
        traj.reserve(dataset.times.size());
        for (double t : dataset.times) {
            const KmpPrediction p = kmp_predict(adapted, t);
            traj.push_back(reconstruct(pipe.subspace, p.mean, q0));
        }
        achieved.push_back(std::move(traj));
    }
    return achieved;
}

std::vector<JointConfig> manipulation_phase_rows(const BenchmarkObject& obj) {
    std::vector<JointConfig> rows;
    for (const auto& rep : obj.replicates)
        for (const auto& q : rep)
            if (q.timestamp.value_or(0.0) > 1.0) rows.push_back(q);
    return rows;
}

// Method (b): recompute the whole subspace from the new task's recordings
// (classic mean-centered PCA on the manipulation-phase demonstrations) and
// reproduce the task through it. The retrained basis loses the grasping
// structure at low component counts.
std::vector<std::vector<JointConfig>> run_retrained_pca(const BenchmarkDataset& dataset,
                                                        int components) {
    const int s = std::min(components, HandModel::kJointCount);
    std::vector<std::vector<JointConfig>> achieved;
    for (const auto& obj : dataset.test) {
        const auto rows = manipulation_phase_rows(obj);
        const ConfigurationMatrix c = build_config_matrix(rows, JointConfig(dataset.q0));
        const SynergySubspace sub = extract_synergies(c, s, /*mean_center=*/true);
        Vec6 data_mean = Vec6::Zero();
        for (const auto& q : rows) data_mean += q.angles;
        data_mean /= static_cast<double>(rows.size());

        std::vector<JointConfig> traj;
        traj.reserve(obj.ground_truth.size());
        for (const auto& q : obj.ground_truth) {
            const Vec6 d = q.angles - data_mean;
            traj.emplace_back(Vec6(data_mean + sub.basis * (sub.basis.transpose() * d)));
        }
        achieved.push_back(std::move(traj));
    }
    return achieved;
}

// Method (c): keep the fixed grasp basis from training and append per-object
// correction components fitted to the residuals of the new recordings.
std::vector<std::vector<JointConfig>> run_fixed_plus_appended(const BenchmarkDataset& dataset,
                                                              int components,
                                                              const CompareOptions& options) {
    (void)options;
    // Fixed part: top-2 directions of the pooled grasp-phase training samples.
    std::vector<JointConfig> grasp_samples;
    for (const auto& obj : dataset.train)
        for (const auto& rep : obj.replicates)
            for (const auto& q : rep)
                if (q.timestamp.value_or(0.0) <= 1.0) grasp_samples.push_back(q);
    const ConfigurationMatrix cg = build_config_matrix(grasp_samples, JointConfig(dataset.q0));
    const Mat grasp_basis = extract_synergies(cg, 2, false).basis;

    const int total = std::min(components, HandModel::kJointCount);
    const int fixed = std::min(total, 2);
    const int appended = total - fixed;

    std::vector<std::vector<JointConfig>> achieved;
    for (const auto& obj : dataset.test) {
        Mat basis = grasp_basis.leftCols(fixed);
        if (appended > 0) {
            const auto rows = manipulation_phase_rows(obj);
            Mat residuals(static_cast<Eigen::Index>(rows.size()), 6);
            for (std::size_t i = 0; i < rows.size(); ++i) {
                const Vec6 d = rows[i].angles - dataset.q0;
                residuals.row(static_cast<Eigen::Index>(i)) =
                    (d - basis * (basis.transpose() * d)).transpose();
            }
            Eigen::SelfAdjointEigenSolver<Mat> eig(residuals.transpose() * residuals);
            Mat extra(6, appended);
            for (int k = 0; k < appended; ++k) extra.col(k) = eig.eigenvectors().col(5 - k);
            Mat combined(6, fixed + appended);
            combined << basis, extra;
            basis = combined;
        }
        achieved.push_back(project_onto(basis, dataset.q0, obj.ground_truth));
    }
    return achieved;
}

} // namespace

std::vector<MetricReport> compare_methods(const BenchmarkDataset& dataset,
                                          const std::vector<std::string>& methods,
                                          const std::vector<int>& component_counts,
                                          const CompareOptions& options) {
    if (methods.empty() || component_counts.empty())
        throw InvalidInput("comparison needs methods and component counts");
    for (int m : component_counts)
        if (m < 1) throw InvalidInput("component counts must be >= 1");

    std::vector<MetricReport> reports;
    for (const auto& method : methods) {
        if (method != "kernelized" && method != "retrained_pca" && method != "fixed_plus_appended")
            throw InvalidInput("unknown method '" + method + "'");
        for (int m : component_counts) {
            const auto start = std::chrono::steady_clock::now();
            std::vector<std::vector<JointConfig>> achieved;
            if (method == "kernelized")
                achieved = run_kernelized(dataset, m, options);
            else if (method == "retrained_pca")
                achieved = run_retrained_pca(dataset, m);
            else
                achieved = run_fixed_plus_appended(dataset, m, options);
            const MethodScore score = score_per_object(dataset, achieved, options.pa_tolerance);
            MetricReport report;
            report.method = method;
            report.components = m;
            report.nse = score.nse_mean;
            report.pa = score.pa_mean;
            report.breakdown = score.breakdown;
            report.runtime_ms =
                std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start)
                    .count();
            reports.push_back(std::move(report));
        }
    }
    return reports;
}

void save_report_csv(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write report CSV: " + path.string());
    out << "method,components,nse,pa,runtime_ms\n";
    for (const auto& r : reports)
        out << r.method << "," << r.components << "," << format_double(r.nse) << ","
            << format_double(r.pa) << "," << format_double(r.runtime_ms) << "\n";
}

void save_report_svg(const std::filesystem::path& path, const std::vector<MetricReport>& reports) {
    std::vector<std::string> methods;
    for (const auto& r : reports)
        if (std::find(methods.begin(), methods.end(), r.method) == methods.end())
            methods.push_back(r.method);
    std::vector<SvgSeries> nse_series, pa_series;
    for (const auto& m : methods) {
        SvgSeries sn, sp;
        sn.name = m;
        sp.name = m;
        for (const auto& r : reports) {
            if (r.method != m) continue;
            sn.x.push_back(r.components);
            sn.y.push_back(r.nse);
            sp.x.push_back(r.components);
            sp.y.push_back(r.pa);
        }
        nse_series.push_back(std::move(sn));
        pa_series.push_back(std::move(sp));
    }
    save_metric_panels_svg(path, "normalized square error", nse_series, "primitive accuracy",
                           pa_series);
}

// ---------------------------------------------------------------------------
// Task scripts.

void TaskScript::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["name"] = name;
    j["object_class"] = object_class;
    j["object_kind"] = ObjectPrimitive::kind_name(object_kind);
    j["grasp_coeffs"] = to_json(grasp_coeffs);
    j["manipulation_start"] = to_json(manipulation_start);
    j["manipulation_end"] = to_json(manipulation_end);
    j["priorities"] = priorities;
    j["force_min"] = force_min;
    j["force_max"] = force_max;
    save_model_file(path, "task.v1", std::move(j));
}

TaskScript TaskScript::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "task.v1");
    TaskScript s;
    try {
        s.name = j.at("name").get<std::string>();
        s.object_class = j.at("object_class").get<std::string>();
        s.object_kind = ObjectPrimitive::kind_from_name(j.at("object_kind").get<std::string>());
        s.grasp_coeffs = vec_from_json(j.at("grasp_coeffs"));
        s.manipulation_start = vec_from_json(j.at("manipulation_start"));
        s.manipulation_end = vec_from_json(j.at("manipulation_end"));
        s.priorities = j.at("priorities").get<std::vector<double>>();
        s.force_min = j.at("force_min").get<double>();
        s.force_max = j.at("force_max").get<double>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    if (!s.grasp_coeffs.allFinite() || !s.manipulation_start.allFinite() ||
        !s.manipulation_end.allFinite())
        throw DataError(path.string() + ": non-finite coefficients");
    for (double p : s.priorities)
        if (!(p > 0.0) || p > 1.0) throw DataError(path.string() + ": priorities must be in (0, 1]");
    return s;
}

// ---------------------------------------------------------------------------
// Detection pipeline.

namespace {

Vec3 cluster_oriented_extents(const PointCloud& cloud, const Cluster& cluster) {
    Vec3 lo = Vec3::Constant(std::numeric_limits<double>::infinity());
    Vec3 hi = -lo;
    for (int i : cluster.point_indices) {
        const Vec3 q = cluster.principal_axes.transpose() *
                       (cloud.points[static_cast<std::size_t>(i)].xyz() - cluster.centroid);
        lo = lo.cwiseMin(q);
        hi = hi.cwiseMax(q);
    }
    return hi - lo;
}

} // namespace

std::vector<Detection> detect_objects(const PointCloud& camera_cloud, const SvmModel& svm,
                                      const FrameCalibration& frames, std::uint64_t seed,
                                      const PerceptionParams& params) {
    std::vector<Detection> detections;
    if (camera_cloud.empty()) return detections;
    const PointCloud down = voxel_downsample(camera_cloud, params.voxel_leaf);
    if (down.size() < 3) return detections;
    const RansacResult plane = ransac_plane(down, params.ransac_iters, params.ransac_dist, seed);
    if (plane.outliers.empty()) return detections;
    const auto clusters =
        euclidean_cluster(plane.outliers, params.cluster_epsilon, params.cluster_min_pts);
    for (const auto& cluster : clusters) {
        const FeatureVector f = compute_features(plane.outliers, cluster);
        const Classification c = svm_classify(svm, f, params.reject_threshold);
        if (!c.label) continue; // not found
        Detection d;
        d.label = *c.label;
        d.confidence = c.confidence;
        d.cluster_size = static_cast<int>(cluster.point_indices.size());
        const Pose pose_camera = centroid_pose(plane.outliers, cluster);
        d.pose_base = compose_to_base(frames.marker_to_base, frames.camera_to_marker, pose_camera);
        d.oriented_extents = cluster_oriented_extents(plane.outliers, cluster);
        detections.push_back(std::move(d));
    }
    return detections;
}

// ---------------------------------------------------------------------------
// Scene and model defaults for the scripted tasks.

std::vector<CorpusClassSpec> scene_corpus_classes() {
    auto make = [](const char* label, ObjectPrimitive::Kind kind, std::array<std::uint8_t, 3> color,
                   const Vec3& dims) {
        CorpusClassSpec c;
        c.label = label;
        c.kind = kind;
        c.color = color;
        c.dims = dims;
        return c;
    };
    return {make("bulb", ObjectPrimitive::Kind::Sphere, {235, 235, 225}, Vec3(0.030, 0.030, 0.030)),
            make("lemon", ObjectPrimitive::Kind::Sphere, {230, 200, 40}, Vec3(0.025, 0.025, 0.025)),
            make("spray", ObjectPrimitive::Kind::Cylinder, {60, 90, 220}, Vec3(0.022, 0.055, 0.0)),
            make("box", ObjectPrimitive::Kind::Box, {180, 90, 60}, Vec3(0.030, 0.020, 0.015))};
}

SceneSpec default_task_scene(const std::string& task_name) {
    const auto classes = scene_corpus_classes();
    auto spec_for = [&](const std::string& label) -> SceneObjectSpec {
        for (const auto& c : classes) {
            if (c.label != label) continue;
            SceneObjectSpec o;
            o.label = c.label;
            o.primitive.kind = c.kind;
            o.primitive.dims = c.dims.value();
            o.color = c.color;
            o.point_count = 700;
            return o;
        }
        throw InvalidInput("unknown scene class '" + label + "'");
    };

    SceneSpec scene;
    scene.noise_sigma = 0.001;
    scene.outlier_fraction = 0.02;

    auto place = [](SceneObjectSpec o, double x, double y) {
        double z = 0.0;
        switch (o.primitive.kind) {
            case ObjectPrimitive::Kind::Sphere: z = o.primitive.dims[0]; break;
            case ObjectPrimitive::Kind::Box: z = o.primitive.dims[2]; break;
            case ObjectPrimitive::Kind::Cylinder: z = o.primitive.dims[1]; break;
            case ObjectPrimitive::Kind::Cone: z = 0.0; break;
        }
        o.primitive.pose.translation = Vec3(x, y, z);
        return o;
    };

    if (task_name == "bulb") {
        scene.objects.push_back(place(spec_for("bulb"), 0.05, 0.04));
        scene.objects.push_back(place(spec_for("box"), -0.12, -0.08));
    } else if (task_name == "lemon") {
        scene.objects.push_back(place(spec_for("lemon"), 0.02, -0.06));
        scene.objects.push_back(place(spec_for("box"), 0.14, 0.10));
    } else if (task_name == "spray") {
        scene.objects.push_back(place(spec_for("spray"), -0.04, 0.08));
        scene.objects.push_back(place(spec_for("bulb"), 0.13, -0.09));
    } else {
        throw InvalidInput("unknown task '" + task_name + "'");
    }
    return scene;
}

std::vector<TaskScript> default_task_scripts() {
    std::vector<TaskScript> scripts(3);
    auto vec2 = [](double a, double b) {
        Vec v(2);
        v << a, b;
        return v;
    };
    scripts[0].name = "bulb";
    scripts[0].object_class = "bulb";
    scripts[0].object_kind = ObjectPrimitive::Kind::Sphere;
    scripts[0].grasp_coeffs = vec2(-0.18, 0.21);
    scripts[0].manipulation_start = vec2(-0.19, 0.21);
    scripts[0].manipulation_end = vec2(-0.05, 0.37);
    scripts[0].priorities = {1.0};
    scripts[0].force_min = 2.38;
    scripts[0].force_max = 3.57;

    scripts[1].name = "lemon";
    scripts[1].object_class = "lemon";
    scripts[1].object_kind = ObjectPrimitive::Kind::Sphere;
    scripts[1].grasp_coeffs = vec2(0.12, 0.32);
    scripts[1].manipulation_start = vec2(0.13, 0.33);
    scripts[1].manipulation_end = vec2(0.26, 0.47);
    scripts[1].priorities = {1.0};
    scripts[1].force_min = 2.38;
    scripts[1].force_max = 4.16;

    scripts[2].name = "spray";
    scripts[2].object_class = "spray";
    scripts[2].object_kind = ObjectPrimitive::Kind::Cylinder;
    scripts[2].grasp_coeffs = vec2(-0.11, 0.38);
    scripts[2].manipulation_start = vec2(-0.10, 0.39);
    scripts[2].manipulation_end = vec2(0.14, 0.48);
    scripts[2].priorities = {0.5, 0.5};
    scripts[2].force_min = 2.38;
    scripts[2].force_max = 4.76;
    return scripts;
}

ReplayModels default_replay_models(std::uint64_t seed) {
    ReplayModels models;
    models.hand = HandModel::default_model();
    const BenchmarkDataset dataset = generate_benchmark(BenchmarkParams{}, seed);
    const TrainedPipeline pipe = train_synergy_pipeline(dataset, 2, 5, seed);
    models.subspace = pipe.subspace;
    models.gmm = pipe.gmm;
    models.scene_svm = svm_train(generate_corpus(scene_corpus_classes(), 10, seed), 10.0, 2.0, seed);
    models.frames.marker_to_base.rotation = Mat3::Identity();
    models.frames.marker_to_base.translation = Vec3(0.50, 0.10, 0.0);
    models.frames.camera_to_marker.rotation =
        Eigen::AngleAxisd(M_PI, Vec3::UnitX()).toRotationMatrix();
    models.frames.camera_to_marker.translation = Vec3(-0.20, 0.05, 0.60);
    return models;
}

// ---------------------------------------------------------------------------
// Replay.

namespace {

// Deeper-closure posture at which a sphere of the wanted radius fits the
// tripod fingertips; searched along the squeeze direction.
ObjectPrimitive place_squeeze_object(const HandModel& hand, const SynergySubspace& sub,
                                     const Vec& e_grasp, const Vec& squeeze_unit, double radius,
                                     const std::vector<int>& fingers) {
    for (double progress = 0.02; progress <= 1.61; progress += 0.02) {
        try {
            return fit_sphere_to_fingers(hand, sub, Vec(e_grasp + progress * squeeze_unit), fingers,
                                         radius);
        } catch (const InvalidInput&) {
            continue; // fingertips still too far apart
        }
    }
    throw TaskFailure("no closure posture fits the detected object (radius " +
                      format_double(radius) + " m)");
}

double estimated_grip_radius(const TaskScript& script, const Detection& detection) {
    const Vec3 e = detection.oriented_extents;
    switch (script.object_kind) {
        case ObjectPrimitive::Kind::Sphere: return (e[0] + e[1] + e[2]) / 6.0;
        case ObjectPrimitive::Kind::Cylinder: return (e[1] + e[2]) / 4.0;
        case ObjectPrimitive::Kind::Box: return (e[1] + e[2]) / 4.0;
        case ObjectPrimitive::Kind::Cone: return (e[1] + e[2]) / 4.0;
    }
    return e.mean() / 2.0;
}

} // namespace

TaskTrace replay_task(const TaskScript& script, const SceneSpec& scene, const ReplayModels& models,
                      std::uint64_t seed, const PerceptionParams& params) {
    TaskTrace trace;
    const int s = models.subspace.components();
    if (script.grasp_coeffs.size() != s)
        throw InvalidInput("task script coefficient dimension does not match the subspace");

    // Stage 1: detection on the camera-frame cloud.
    const GeneratedScene generated = generate_scene(scene, seed);
    const Pose base_to_camera = models.frames.camera_to_base().inverse();
    PointCloud camera_cloud = generated.cloud;
    for (auto& p : camera_cloud.points) {
        const Vec3 q = base_to_camera.apply(p.xyz());
        p.x = q.x();
        p.y = q.y();
        p.z = q.z();
    }
    trace.detections = detect_objects(camera_cloud, models.scene_svm, models.frames, seed, params);
    const Detection* target = nullptr;
    for (const auto& d : trace.detections)
        if (d.label == script.object_class) {
            target = &d;
            break;
        }
    if (target == nullptr) {
        trace.failure_stage = "detection";
        return trace;
    }

    // Stage 2: virtual object -> geometric via-point, script grasp endpoint.
    const double grip_radius = estimated_grip_radius(script, *target);
    const JointConfig q0(models.subspace.q0);
    const KmpModel kmp = build_reference(models.gmm, /*times=*/[&] {
        std::vector<double> t(81);
        for (int k = 0; k < 81; ++k) t[static_cast<std::size_t>(k)] = 2.0 * k / 80.0;
        return t;
    }());
    const GmrResult ref_grasp = gmr_condition(models.gmm, 1.0);

    ObjectPrimitive virtual_obj;
    virtual_obj.kind = ObjectPrimitive::Kind::Sphere;
    virtual_obj.dims = Vec3::Constant(std::max(grip_radius, 0.012));
    const ObjectPrimitive fitted = [&] {
        Vec squeeze = Vec::Zero(s);
        squeeze[0] = 1.0;
        return place_squeeze_object(models.hand, models.subspace, script.grasp_coeffs, squeeze,
                                    std::max(grip_radius, 0.012), {0, 1, 2});
    }();
    virtual_obj.pose = fitted.pose;

    KmpModel adapted = kmp;
    try {
        const JointConfig q_ref =
            clamp_to_limits(models.hand, reconstruct(models.subspace, ref_grasp.mean, q0)).config;
        MappingConfig cfg =
            make_mapping_config(models.hand, models.subspace, q_ref, Mat6::Identity());
        const auto endpoints =
            virtual_object_endpoints(cfg, models.hand, virtual_obj, ref_grasp.mean, 1.0);
        adapted = insert_via_point(adapted, 0.85, endpoints.back().mean, 1e-2 * Mat::Identity(s, s));
    } catch (const ReachabilityError&) {
        trace.failure_stage = "mapping";
        return trace;
    }
    adapted = insert_via_point(adapted, 1.0, script.grasp_coeffs, 1e-4 * Mat::Identity(s, s));

    trace.adapted.t.clear();
    trace.adapted.e.resize(41, s);
    for (int k = 0; k <= 40; ++k) {
        const double t = k / 40.0;
        trace.adapted.t.push_back(t);
        trace.adapted.e.row(k) = kmp_predict(adapted, t).mean.transpose();
    }

    // Stage 3: close the grasp and modulate the force.
    Vec squeeze = Vec::Zero(s);
    squeeze[0] = 1.0;
    CloseGraspParams grasp_params;
    grasp_params.required_fingers = {0, 1, 2};
    double threshold = 0.0;
    try {
        threshold = current_threshold_for_force(models.hand, models.subspace, virtual_obj,
                                                script.grasp_coeffs, squeeze, script.force_max,
                                                grasp_params);
    } catch (const Error&) {
        trace.failure_stage = "grasp";
        return trace;
    }
    CloseGraspResult grasp;
    try {
        grasp = close_grasp(models.hand, models.subspace, virtual_obj, script.grasp_coeffs, squeeze,
                            threshold, grasp_params);
    } catch (const GraspFailure&) {
        trace.failure_stage = "grasp";
        return trace;
    }
    trace.grasp_trace = grasp.trace;
    trace.final_force = grasp.per_contact_force;
    if (!grasp.closed) {
        trace.failure_stage = "grasp";
        return trace;
    }

    // Stage 4: manipulation ramp (fused hold/press when two priorities).
    const int ramp_steps = 50;
    trace.manipulation.t.clear();
    trace.manipulation.e.resize(ramp_steps + 1, s);
    Vec command = script.manipulation_start;
    for (int k = 0; k <= ramp_steps; ++k) {
        const double tau = static_cast<double>(k) / ramp_steps;
        const Vec ramp_target =
            script.manipulation_start +
            min_jerk(tau) * (script.manipulation_end - script.manipulation_start);
        if (script.priorities.size() >= 2) {
            std::vector<PrioritizedGaussian> parts(2);
            parts[0].mean = script.grasp_coeffs; // hold sub-task
            parts[0].cov = 1e-2 * Mat::Identity(s, s);
            parts[0].priority = script.priorities[0];
            parts[1].mean = ramp_target; // press sub-task
            parts[1].cov = 1e-4 * Mat::Identity(s, s);
            parts[1].priority = script.priorities[1];
            command = fuse_priorities(parts).mean;
        } else {
            command = ramp_target;
        }
        trace.manipulation.t.push_back(1.0 + tau);
        trace.manipulation.e.row(k) = command.transpose();
    }
    trace.final_coeffs = command;

    const bool coeffs_ok =
        (trace.final_coeffs - script.manipulation_end).cwiseAbs().maxCoeff() <= 0.02;
    const bool force_ok = trace.final_force >= 0.95 * script.force_max &&
                          trace.final_force <= 1.05 * script.force_max;
    if (!coeffs_ok) {
        trace.failure_stage = "manipulation";
        return trace;
    }
    if (!force_ok) {
        trace.failure_stage = "force";
        return trace;
    }
    trace.success = true;
    return trace;
}

} // namespace ksyn
