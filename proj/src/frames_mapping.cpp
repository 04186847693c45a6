#include "ksyn/frames_mapping.hpp"

#include <cmath>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"
#include "ksyn/primitives.hpp"

namespace ksyn {

void Pose::validate(double tol) const {
    if (!rotation.allFinite() || !translation.allFinite())
        throw InvalidInput("pose entries must be finite");
    if ((rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff() > tol)
        throw InvalidInput("pose rotation is not orthonormal");
    if (std::abs(rotation.determinant() - 1.0) > tol)
        throw InvalidInput("pose rotation must be proper (det = +1)");
}

Pose Pose::inverse() const {
    Pose inv;
    inv.rotation = rotation.transpose();
    inv.translation = -(rotation.transpose() * translation);
    return inv;
}

Eigen::Matrix4d Pose::matrix() const {
    Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
    m.topLeftCorner<3, 3>() = rotation;
    m.topRightCorner<3, 1>() = translation;
    return m;
}

Pose compose(const Pose& a, const Pose& b) {
    Pose out;
    out.rotation = a.rotation * b.rotation;
    out.translation = a.rotation * b.translation + a.translation;
    return out;
}

Pose compose_to_base(const Pose& t_m_b, const Pose& t_c_m, const Pose& p_o_c) {
    t_m_b.validate();
    t_c_m.validate();
    p_o_c.validate();
    return compose(compose(t_m_b, t_c_m), p_o_c);
}

namespace {

nlohmann::json pose_to_json(const Pose& p) {
    const Eigen::Quaterniond q(p.rotation);
    return {{"qw", q.w()}, {"qx", q.x()}, {"qy", q.y()}, {"qz", q.z()},
            {"x", p.translation.x()}, {"y", p.translation.y()}, {"z", p.translation.z()}};
}

Pose pose_from_json(const nlohmann::json& j) {
    Eigen::Quaterniond q(j.at("qw").get<double>(), j.at("qx").get<double>(),
                         j.at("qy").get<double>(), j.at("qz").get<double>());
    if (q.norm() < 1e-12) throw DataError("zero quaternion in pose");
    q.normalize();
    Pose p;
    p.rotation = q.toRotationMatrix();
    p.translation = Vec3(j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>());
    p.validate(1e-6);
    return p;
}

} // namespace

void FrameCalibration::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["marker_to_base"] = pose_to_json(marker_to_base);
    j["camera_to_marker"] = pose_to_json(camera_to_marker);
    save_model_file(path, "frames.v1", std::move(j));
}

FrameCalibration FrameCalibration::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "frames.v1");
    FrameCalibration cal;
    try {
        cal.marker_to_base = pose_from_json(j.at("marker_to_base"));
        cal.camera_to_marker = pose_from_json(j.at("camera_to_marker"));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    return cal;
}

MappingConfig make_mapping_config(const HandModel& model, const SynergySubspace& sub,
                                  const JointConfig& q, const Mat6& hand_compliance) {
    MappingConfig cfg;
    cfg.motion_transfer = fingertip_jacobian(model, q);
    cfg.hand_compliance = hand_compliance;
    cfg.subspace = sub;
    return cfg;
}

namespace {

Mat pseudo_inverse(const Mat& m, double tol_scale = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    const double tol = tol_scale * sv.size() * (sv.size() > 0 ? sv[0] : 0.0);
    Vec inv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) inv[i] = 1.0 / sv[i];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace

Vec object_to_synergy_velocity(const MappingConfig& cfg, const Eigen::Matrix<double, 15, 1>& p_dot) {
    if (!p_dot.allFinite()) throw InvalidInput("fingertip velocities must be finite");
    if (cfg.subspace.basis.rows() != HandModel::kJointCount)
        throw InvalidInput("mapping config subspace dimension mismatch");
    const Mat joint_dot = pseudo_inverse(cfg.motion_transfer) * p_dot; // 6-vector
    // Orthonormal basis: pinv(E) = E^T.
    return cfg.subspace.basis.transpose() * (cfg.hand_compliance * joint_dot);
}

std::vector<std::pair<double, Vec>> integrate_synergy(const MappingConfig& cfg, const Vec& e0,
                                                      const std::function<Vec(double)>& e_dot_fn,
                                                      double duration) {
    if (!(duration > 0.0)) throw InvalidInput("integration duration must be positive");
    if (!(cfg.dt > 0.0)) throw InvalidInput("integration step must be positive");
    const int steps = static_cast<int>(std::floor(duration / cfg.dt + 1e-9));
    std::vector<std::pair<double, Vec>> out;
    out.reserve(static_cast<std::size_t>(steps) + 1);
    Vec e = e0;
    out.emplace_back(0.0, e);
    for (int k = 0; k < steps; ++k) {
        const double t = k * cfg.dt;
        Vec de = e_dot_fn(t);
        if (!de.allFinite())
            throw NumericError("non-finite synergy derivative at step " + std::to_string(k));
        e = e + cfg.dt * de;
        out.emplace_back((k + 1) * cfg.dt, e);
    }
    return out;
}

std::vector<ViaPoint> virtual_object_endpoints(const MappingConfig& cfg, const HandModel& model,
                                               const ObjectPrimitive& object, const Vec& e_current,
                                               double t_end, const EndpointOptions& opts) {
    object.validate();
    if (e_current.size() != cfg.subspace.basis.cols())
        throw InvalidInput("coefficient length does not match subspace");
    if (opts.contact_fingers.size() < 2)
        throw InvalidInput("need at least two contact fingers");

    const JointConfig q0(cfg.subspace.q0);

    // Reachability against the detected placement.
    {
        const JointConfig q = clamp_to_limits(model, reconstruct(cfg.subspace, e_current, q0)).config;
        const auto tips = forward_kinematics(model, q);
        for (int f : opts.contact_fingers) {
            const Vec3 d =
                closest_surface_point(object, tips[static_cast<std::size_t>(f)]).point -
                tips[static_cast<std::size_t>(f)];
            if (d.norm() > cfg.workspace_radius)
                throw ReachabilityError("fingertip goal " + std::to_string(f) + " is " +
                                        format_double(d.norm()) + " m away, beyond the workspace");
        }
    }

    Vec e = e_current;
    MappingConfig local = cfg;
    ObjectPrimitive virtual_obj = object; // size and orientation; recentered below
    for (int iter = 0; iter < std::max(1, opts.refine_iterations); ++iter) {
        const JointConfig q = clamp_to_limits(model, reconstruct(cfg.subspace, e, q0)).config;
        const auto tips = forward_kinematics(model, q);

        // The virtual object lives at the hand: recenter it on the contact
        // fingertips so the displacements express pure size mismatch.
        Vec3 center = Vec3::Zero();
        for (int f : opts.contact_fingers) center += tips[static_cast<std::size_t>(f)];
        center /= static_cast<double>(opts.contact_fingers.size());
        virtual_obj.pose.translation = center;

        Eigen::Matrix<double, 15, 1> displacement = Eigen::Matrix<double, 15, 1>::Zero();
        for (int f : opts.contact_fingers) {
            const SurfacePoint sp =
                closest_surface_point(virtual_obj, tips[static_cast<std::size_t>(f)]);
            displacement.segment<3>(3 * f) = sp.point - tips[static_cast<std::size_t>(f)];
        }
        local.motion_transfer = fingertip_jacobian(model, q);
        // Minimum-jerk unit-time profile; only the endpoint matters here.
        auto e_dot = [&](double t) -> Vec {
            const double rate = 30.0 * t * t * (1.0 - t) * (1.0 - t);
            return object_to_synergy_velocity(local, Eigen::Matrix<double, 15, 1>(rate * displacement));
        };
        const auto path = integrate_synergy(local, e, e_dot, 1.0);
        e = path.back().second;
    }

    std::vector<ViaPoint> out;
    const Eigen::Index s = e.size();
    out.push_back({t_end, e, opts.end_cov * Mat::Identity(s, s)});
    return out;
}

} // namespace ksyn
