#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>

#include "ksyn/types.hpp"

namespace ksyn {

// A single hand sample: six joint angles in radians.
struct JointConfig {
    Vec6 angles = Vec6::Zero();
    std::optional<double> timestamp; // seconds, set for trajectory samples

    JointConfig() = default;
    explicit JointConfig(const Vec6& a) : angles(a) {}
    JointConfig(const Vec6& a, double t) : angles(a), timestamp(t) {}
};

// Planar two-link finger with one actuated flexion joint; the medial joint
// follows the proximal one with a fixed coupling ratio (under-actuation).
struct FingerChain {
    std::string name;
    Vec3 base = Vec3::Zero();      // palm-frame base position [m]
    Vec3 dir = Vec3::UnitX();      // pointing direction when fully extended
    Vec3 flex_axis = -Vec3::UnitY(); // flexion axis, unit, perpendicular to dir
    double link_proximal = 0.05;   // [m]
    double link_medial = 0.04;     // [m]
    double couple = 1.0;           // medial angle = couple * proximal angle
    int joint = 0;                 // actuated joint index in [0, 6)
};

// Six-DOF five-finger hand: joints 0-4 flex thumb/index/middle/ring/little,
// joint 5 rotates the whole thumb chain about the palm normal.
struct HandModel {
    static constexpr int kJointCount = 6;
    static constexpr int kFingerCount = 5;

    std::array<FingerChain, kFingerCount> fingers; // [thumb, index, middle, ring, little]
    int thumb_rotation_joint = 5;
    Vec3 palm_normal = Vec3::UnitZ();
    Eigen::Matrix<double, 6, 2> joint_limits; // column 0 = min, column 1 = max [rad]
    JointConfig nominal_posture;              // q0

    static HandModel default_model();
    static HandModel load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;

    // Throws InvalidInput when an invariant is broken.
    void validate() const;
};

struct ClampResult {
    JointConfig config;
    bool clamped = false;
    std::array<bool, HandModel::kJointCount> clamped_joint{};
};

// Clip each angle into its [min, max] interval. Total on finite input and
// idempotent; out-of-range commands are reported, never rejected.
ClampResult clamp_to_limits(const HandModel& model, const JointConfig& q);

// Fingertip positions in the palm frame, one per finger. Out-of-limit
// angles are clamped first (the model's clamping policy).
std::array<Vec3, HandModel::kFingerCount> forward_kinematics(const HandModel& model,
                                                             const JointConfig& q);

// Stacked fingertip linear-velocity Jacobian: rows 3f..3f+2 belong to
// finger f, columns follow the joint order.
Eigen::Matrix<double, 15, 6> fingertip_jacobian(const HandModel& model, const JointConfig& q);

} // namespace ksyn
