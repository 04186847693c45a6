#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "ksyn/errors.hpp"
#include "ksyn/evaluation.hpp"

namespace py = pybind11;
using namespace ksyn;

namespace {

PointCloud cloud_from_arrays(const Mat& xyz, const Eigen::MatrixXi& rgb) {
    if (xyz.cols() != 3) throw InvalidInput("xyz must be N x 3");
    if (rgb.size() > 0 && (rgb.rows() != xyz.rows() || rgb.cols() != 3))
        throw InvalidInput("rgb must be empty or N x 3");
    PointCloud cloud;
    cloud.points.reserve(static_cast<std::size_t>(xyz.rows()));
    for (Eigen::Index i = 0; i < xyz.rows(); ++i) {
        PointXYZRGB p;
        p.x = xyz(i, 0);
        p.y = xyz(i, 1);
        p.z = xyz(i, 2);
        if (rgb.size() > 0) {
            p.r = static_cast<std::uint8_t>(rgb(i, 0));
            p.g = static_cast<std::uint8_t>(rgb(i, 1));
            p.b = static_cast<std::uint8_t>(rgb(i, 2));
        }
        cloud.points.push_back(p);
    }
    return cloud;
}

Mat cloud_xyz(const PointCloud& cloud) {
    Mat out(static_cast<Eigen::Index>(cloud.size()), 3);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out(static_cast<Eigen::Index>(i), 0) = cloud.points[i].x;
        out(static_cast<Eigen::Index>(i), 1) = cloud.points[i].y;
        out(static_cast<Eigen::Index>(i), 2) = cloud.points[i].z;
    }
    return out;
}

Eigen::MatrixXi cloud_rgb(const PointCloud& cloud) {
    Eigen::MatrixXi out(static_cast<Eigen::Index>(cloud.size()), 3);
    for (std::size_t i = 0; i < cloud.size(); ++i) {
        out(static_cast<Eigen::Index>(i), 0) = cloud.points[i].r;
        out(static_cast<Eigen::Index>(i), 1) = cloud.points[i].g;
        out(static_cast<Eigen::Index>(i), 2) = cloud.points[i].b;
    }
    return out;
}

} // namespace

PYBIND11_MODULE(_ksyn, m) {
    m.doc() = "kernelized-synergies grasping toolkit";

    py::register_exception<InvalidInput>(m, "InvalidInputError", PyExc_ValueError);
    py::register_exception<DataError>(m, "DataFormatError", PyExc_ValueError);
    py::register_exception<NumericError>(m, "NumericFailure", PyExc_ArithmeticError);
    py::register_exception<TaskFailure>(m, "TaskFailureError", PyExc_RuntimeError);

    // ---- hand model -------------------------------------------------------
    py::class_<JointConfig>(m, "JointConfig")
        .def(py::init<>())
        .def(py::init<const Vec6&>(), py::arg("angles"))
        .def_readwrite("angles", &JointConfig::angles)
        .def_readwrite("timestamp", &JointConfig::timestamp);

    py::class_<HandModel>(m, "HandModel")
        .def_static("default_model", &HandModel::default_model)
        .def_static("load", &HandModel::load, py::arg("path"))
        .def("save", &HandModel::save, py::arg("path"))
        .def_property_readonly("nominal_posture",
                               [](const HandModel& h) { return h.nominal_posture; })
        .def_property_readonly("joint_limits",
                               [](const HandModel& h) { return Mat(h.joint_limits); });

    m.def(
        "forward_kinematics",
        [](const HandModel& model, const JointConfig& q) {
            const auto tips = forward_kinematics(model, q);
            Mat out(5, 3);
            for (int f = 0; f < 5; ++f) out.row(f) = tips[static_cast<std::size_t>(f)].transpose();
            return out;
        },
        py::arg("model"), py::arg("q"), "5 x 3 fingertip positions in the palm frame");
    m.def(
        "fingertip_jacobian",
        [](const HandModel& model, const JointConfig& q) {
            return Mat(fingertip_jacobian(model, q));
        },
        py::arg("model"), py::arg("q"));
    m.def(
        "clamp_to_limits",
        [](const HandModel& model, const JointConfig& q) {
            const auto r = clamp_to_limits(model, q);
            return py::make_tuple(r.config, r.clamped);
        },
        py::arg("model"), py::arg("q"));

    // ---- synergy subspace -------------------------------------------------
    py::class_<SynergySubspace>(m, "SynergySubspace")
        .def_readonly("basis", &SynergySubspace::basis)
        .def_readonly("q0", &SynergySubspace::q0)
        .def_readonly("singular_values", &SynergySubspace::singular_values)
        .def_readonly("explained_variance_ratio", &SynergySubspace::explained_variance_ratio)
        .def_property_readonly("components", &SynergySubspace::components)
        .def_static("load", &SynergySubspace::load, py::arg("path"))
        .def("save", &SynergySubspace::save, py::arg("path"));

    m.def(
        "extract_synergies",
        [](const Mat& demos, const Vec6& q0, int components, bool mean_center) {
            std::vector<JointConfig> configs;
            if (demos.cols() != 6) throw InvalidInput("demos must be K x 6");
            for (Eigen::Index k = 0; k < demos.rows(); ++k)
                configs.emplace_back(Vec6(demos.row(k).transpose()));
            return extract_synergies(build_config_matrix(configs, JointConfig(q0)), components,
                                     mean_center);
        },
        py::arg("demos"), py::arg("q0"), py::arg("components") = 2, py::arg("mean_center") = false,
        "PCA subspace of K x 6 demonstration rows centered at q0");
    m.def(
        "project",
        [](const SynergySubspace& sub, const Vec6& theta) {
            return project(sub, JointConfig(theta)).e;
        },
        py::arg("subspace"), py::arg("theta"));
    m.def(
        "reconstruct",
        [](const SynergySubspace& sub, const Vec& e, const Vec6& theta0) {
            return Vec6(reconstruct(sub, e, JointConfig(theta0)).angles);
        },
        py::arg("subspace"), py::arg("e"), py::arg("theta0"));

    // ---- trajectory model -------------------------------------------------
    py::class_<GmmModel>(m, "GmmModel")
        .def_readonly("priors", &GmmModel::priors)
        .def_readonly("means", &GmmModel::means)
        .def_readonly("covariances", &GmmModel::covs)
        .def_property_readonly("components", &GmmModel::components)
        .def_static("load", &GmmModel::load, py::arg("path"))
        .def("save", &GmmModel::save, py::arg("path"));

    m.def(
        "fit_gmm",
        [](const std::vector<std::pair<std::vector<double>, Mat>>& trajectories, int components,
           std::uint64_t seed) {
            std::vector<SynergyTrajectory> trajs;
            for (const auto& [t, e] : trajectories) {
                SynergyTrajectory traj;
                traj.t = t;
                traj.e = e;
                trajs.push_back(std::move(traj));
            }
            return fit_gmm(trajs, components, seed);
        },
        py::arg("trajectories"), py::arg("components") = 5, py::arg("seed") = 0,
        "trajectories: list of (times, T x S coefficient matrix)");
    m.def(
        "gmr_condition",
        [](const GmmModel& gmm, double t) {
            const auto out = gmr_condition(gmm, t);
            return py::make_tuple(out.mean, out.cov);
        },
        py::arg("gmm"), py::arg("t"));

    py::class_<KmpModel>(m, "KmpModel")
        .def_readonly("length_scale", &KmpModel::length_scale)
        .def_readonly("lambda_mean", &KmpModel::lambda)
        .def_readonly("lambda_cov", &KmpModel::lambda_cov)
        .def_property_readonly("size",
                               [](const KmpModel& k) { return k.reference.size(); })
        .def_static("load", &KmpModel::load, py::arg("path"))
        .def("save", &KmpModel::save, py::arg("path"));

    m.def(
        "build_reference",
        [](const GmmModel& gmm, const std::vector<double>& times, double lambda_mean,
           double lambda_cov, double length_scale) {
            KmpParams params;
            params.lambda = lambda_mean;
            params.lambda_cov = lambda_cov;
            params.length_scale = length_scale;
            return build_reference(gmm, times, params);
        },
        py::arg("gmm"), py::arg("times"), py::arg("lambda_mean") = 1.0,
        py::arg("lambda_cov") = 10.0, py::arg("length_scale") = 0.0);
    m.def(
        "kmp_predict",
        [](const KmpModel& kmp, double t) {
            const auto out = kmp_predict(kmp, t);
            return py::make_tuple(out.mean, out.cov);
        },
        py::arg("kmp"), py::arg("t"));
    m.def("insert_via_point", &insert_via_point, py::arg("kmp"), py::arg("t"), py::arg("mean"),
          py::arg("cov"));
    m.def(
        "fuse_priorities",
        [](const std::vector<std::tuple<Vec, Mat, double>>& components) {
            std::vector<PrioritizedGaussian> parts;
            for (const auto& [mean, cov, priority] : components)
                parts.push_back({mean, cov, priority});
            const auto out = fuse_priorities(parts);
            return py::make_tuple(out.mean, out.cov);
        },
        py::arg("components"), "components: list of (mean, cov, priority)");

    // ---- grasp mechanics ---------------------------------------------------
    m.def(
        "build_grasp_matrix",
        [](const Mat& positions, const Mat& normals, const Vec3& center) {
            if (positions.cols() != 3 || normals.cols() != 3 ||
                positions.rows() != normals.rows())
                throw InvalidInput("positions and normals must be c x 3");
            ContactSet set;
            set.object_frame.translation = center;
            for (Eigen::Index i = 0; i < positions.rows(); ++i) {
                Contact c;
                c.position = positions.row(i).transpose();
                c.normal = normals.row(i).transpose().normalized();
                c.finger_id = static_cast<int>(i);
                set.contacts.push_back(c);
            }
            const auto gm = build_grasp_matrix(set);
            return py::make_tuple(gm.g, gm.rank, gm.degenerate);
        },
        py::arg("positions"), py::arg("normals"), py::arg("center") = Vec3(Vec3::Zero()),
        "(G, rank, degenerate) for point contacts");
    m.def("internal_force_basis", &internal_force_basis, py::arg("grasp_matrix"));
    m.def(
        "soft_synergy_step",
        [](const SynergySubspace& sub, const Vec& delta_e, const Mat6& compliance,
           const Vec6& delta_tau) {
            return Vec6(soft_synergy_step(sub, delta_e, compliance, delta_tau));
        },
        py::arg("subspace"), py::arg("delta_e"), py::arg("hand_compliance"), py::arg("delta_tau"));

    // ---- perception ---------------------------------------------------------
    py::class_<PointCloud>(m, "PointCloud")
        .def(py::init(&cloud_from_arrays), py::arg("xyz"),
             py::arg("rgb") = Eigen::MatrixXi())
        .def_property_readonly("xyz", &cloud_xyz)
        .def_property_readonly("rgb", &cloud_rgb)
        .def("__len__", [](const PointCloud& c) { return c.size(); });

    m.def("load_pcd", &load_pcd, py::arg("path"));
    m.def("save_pcd", &save_pcd, py::arg("path"), py::arg("cloud"));
    m.def("voxel_downsample", &voxel_downsample, py::arg("cloud"), py::arg("leaf"));
    m.def(
        "ransac_plane",
        [](const PointCloud& cloud, int max_iters, double dist_thresh, std::uint64_t seed) {
            const auto out = ransac_plane(cloud, max_iters, dist_thresh, seed);
            return py::make_tuple(Vec3(out.plane.normal), out.plane.offset,
                                  out.plane.inlier_indices, out.outliers);
        },
        py::arg("cloud"), py::arg("max_iters") = 200, py::arg("dist_thresh") = 0.008,
        py::arg("seed") = 0, "(normal, offset, inlier_indices, outlier_cloud)");
    m.def(
        "euclidean_cluster",
        [](const PointCloud& cloud, double epsilon, int min_pts) {
            const auto clusters = euclidean_cluster(cloud, epsilon, min_pts);
            std::vector<std::vector<int>> indices;
            for (const auto& c : clusters) indices.push_back(c.point_indices);
            return indices;
        },
        py::arg("cloud"), py::arg("epsilon") = 0.02, py::arg("min_pts") = 30);
    m.def(
        "compute_features",
        [](const PointCloud& cloud, const std::vector<int>& indices) {
            Cluster cluster;
            cluster.point_indices = indices;
            const auto f = compute_features(cloud, cluster);
            return py::make_tuple(Vec(f.values), f.extent_only);
        },
        py::arg("cloud"), py::arg("indices"), "(64-bin feature vector, extent_only flag)");

    py::class_<SvmModel>(m, "SvmModel")
        .def_readonly("classes", &SvmModel::classes)
        .def_static("load", &SvmModel::load, py::arg("path"))
        .def("save", &SvmModel::save, py::arg("path"));

    m.def(
        "svm_train",
        [](const std::vector<std::pair<Vec, std::string>>& dataset, double c, double gamma,
           std::uint64_t seed) {
            std::vector<SvmSample> samples;
            for (const auto& [values, label] : dataset) {
                if (values.size() != FeatureVector::kDim)
                    throw InvalidInput("feature vectors must have 64 entries");
                SvmSample s;
                s.feature.values = values;
                s.label = label;
                samples.push_back(std::move(s));
            }
            return svm_train(samples, c, gamma, seed);
        },
        py::arg("dataset"), py::arg("c") = 10.0, py::arg("gamma") = 2.0, py::arg("seed") = 0,
        "dataset: list of (64-vector, label)");
    m.def(
        "svm_classify",
        [](const SvmModel& model, const Vec& values, double reject_threshold) {
            FeatureVector f;
            if (values.size() != FeatureVector::kDim)
                throw InvalidInput("feature vectors must have 64 entries");
            f.values = values;
            const auto c = svm_classify(model, f, reject_threshold);
            return py::make_tuple(c.label, c.confidence);
        },
        py::arg("model"), py::arg("feature"), py::arg("reject_threshold") = 0.35,
        "(label or None, confidence)");

    // ---- frames and mapping -------------------------------------------------
    py::class_<Pose>(m, "Pose")
        .def(py::init<>())
        .def(py::init([](const Mat3& rotation, const Vec3& translation) {
                 Pose p;
                 p.rotation = rotation;
                 p.translation = translation;
                 p.validate(1e-6);
                 return p;
             }),
             py::arg("rotation"), py::arg("translation"))
        .def_readonly("rotation", &Pose::rotation)
        .def_readonly("translation", &Pose::translation)
        .def("matrix", &Pose::matrix)
        .def("inverse", &Pose::inverse)
        .def("apply", &Pose::apply, py::arg("point"));

    m.def("compose", &compose, py::arg("a"), py::arg("b"));
    m.def("compose_to_base", &compose_to_base, py::arg("marker_to_base"),
          py::arg("camera_to_marker"), py::arg("object_in_camera"));

    // ---- metrics -------------------------------------------------------------
    m.def(
        "nse",
        [](const Mat& ground, const Mat& achieved, const Vec6& q0) {
            if (ground.cols() != 6 || achieved.cols() != 6)
                throw InvalidInput("trajectories must be K x 6");
            std::vector<JointConfig> g, a;
            for (Eigen::Index k = 0; k < ground.rows(); ++k)
                g.emplace_back(Vec6(ground.row(k).transpose()));
            for (Eigen::Index k = 0; k < achieved.rows(); ++k)
                a.emplace_back(Vec6(achieved.row(k).transpose()));
            const auto out = nse(g, a, JointConfig(q0));
            return py::make_tuple(out.value, out.skipped_samples);
        },
        py::arg("ground"), py::arg("achieved"), py::arg("q0"));
    m.def(
        "primitive_accuracy",
        [](const Mat& ground, const Mat& achieved, double tol_rad) {
            std::vector<JointConfig> g, a;
            for (Eigen::Index k = 0; k < ground.rows(); ++k)
                g.emplace_back(Vec6(ground.row(k).transpose()));
            for (Eigen::Index k = 0; k < achieved.rows(); ++k)
                a.emplace_back(Vec6(achieved.row(k).transpose()));
            return primitive_accuracy(g, a, tol_rad);
        },
        py::arg("ground"), py::arg("achieved"), py::arg("tol_rad") = 0.05);

    m.attr("__version__") = "0.1.0";
}
