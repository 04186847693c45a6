#pragma once

#include <filesystem>
#include <functional>
#include <vector>

#include "ksyn/hand_model.hpp"
#include "ksyn/synergy_core.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

// Rigid transform: proper-orthogonal rotation plus translation.
struct Pose {
    Mat3 rotation = Mat3::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }
    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Pose inverse() const;
    Eigen::Matrix4d matrix() const;

    // Throws InvalidInput when the rotation drifts beyond tolerance.
    void validate(double tol = 1e-9) const;
};

// a then b applied from the right: result maps p to a(b(p)).
Pose compose(const Pose& a, const Pose& b);

// Detected pose lifted into the robot base frame: T_m_b * T_c_m * P_o_c.
Pose compose_to_base(const Pose& t_m_b, const Pose& t_c_m, const Pose& p_o_c);

// Calibration file with the two fixed transforms (frames.v1).
struct FrameCalibration {
    Pose marker_to_base;  // T_m_b
    Pose camera_to_marker; // T_c_m

    Pose camera_to_base() const { return compose(marker_to_base, camera_to_marker); }

    static FrameCalibration load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

// Parameters of the Cartesian-to-synergy velocity chain.
struct MappingConfig {
    Eigen::Matrix<double, 15, 6> motion_transfer; // A_m, stacked fingertip Jacobian
    Mat6 hand_compliance = Mat6::Identity();      // C_h
    SynergySubspace subspace;
    double dt = 0.001;             // Euler step [s]
    double workspace_radius = 0.5; // reachability bound per fingertip goal [m]
};

MappingConfig make_mapping_config(const HandModel& model, const SynergySubspace& sub,
                                  const JointConfig& q, const Mat6& hand_compliance);

// e_dot = pinv(basis) * C_h * pinv(A_m) * p_dot for a stacked 15-vector of
// fingertip velocities (the only composable ordering of the three factors).
Vec object_to_synergy_velocity(const MappingConfig& cfg, const Eigen::Matrix<double, 15, 1>& p_dot);

// Explicit Euler at cfg.dt; returns (t, e) samples with e[0] = e0.
std::vector<std::pair<double, Vec>> integrate_synergy(const MappingConfig& cfg, const Vec& e0,
                                                      const std::function<Vec(double)>& e_dot_fn,
                                                      double duration);

struct ViaPoint {
    double t = 0.0;
    Vec mean;
    Mat cov;
};

struct ObjectPrimitive; // ksyn/primitives.hpp

struct EndpointOptions {
    double end_cov = 1e-4;  // diagonal end-point covariance
    double via_cov = 1e-2;  // diagonal covariance for approach via-points
    int refine_iterations = 10;
    std::vector<int> contact_fingers = {0, 1, 2}; // fingers meant to touch
};

// Place a virtual object of the detected dimensions at the hand (recentered
// on the contact fingertips), derive fingertip goal displacements to its
// surface, push them through the velocity chain over a unit-time
// minimum-jerk profile and emit the resulting end-point at t_end. The given
// pose is only used for the reachability check.
std::vector<ViaPoint> virtual_object_endpoints(const MappingConfig& cfg, const HandModel& model,
                                               const ObjectPrimitive& object, const Vec& e_current,
                                               double t_end, const EndpointOptions& opts = {});

} // namespace ksyn
