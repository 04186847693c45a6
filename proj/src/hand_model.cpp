#include "ksyn/hand_model.hpp"

#include <cmath>

#include <Eigen/Geometry>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"

namespace ksyn {

namespace {

Mat3 axis_rotation(const Vec3& axis, double angle) {
    return Eigen::AngleAxisd(angle, axis).toRotationMatrix();
}

void require_finite(const JointConfig& q) {
    if (!q.angles.allFinite()) throw InvalidInput("joint angles must be finite");
}

} // namespace

HandModel HandModel::default_model() {
    HandModel m;
    auto make_finger = [](std::string name, const Vec3& base, const Vec3& dir, int joint) {
        FingerChain f;
        f.name = std::move(name);
        f.base = base;
        f.dir = dir.normalized();
        // In-plane axis chosen so flexion curls the tip toward +z.
        f.flex_axis = Vec3(f.dir.y(), -f.dir.x(), 0.0).normalized();
        f.joint = joint;
        return f;
    };
    m.fingers[0] = make_finger("thumb", Vec3(0.010, 0.050, 0.0), Vec3(0.8, -0.6, 0.0), 0);
    m.fingers[1] = make_finger("index", Vec3(0.040, 0.027, 0.0), Vec3::UnitX(), 1);
    m.fingers[2] = make_finger("middle", Vec3(0.040, 0.009, 0.0), Vec3::UnitX(), 2);
    m.fingers[3] = make_finger("ring", Vec3(0.040, -0.009, 0.0), Vec3::UnitX(), 3);
    m.fingers[4] = make_finger("little", Vec3(0.040, -0.027, 0.0), Vec3::UnitX(), 4);
    m.thumb_rotation_joint = 5;
    m.palm_normal = Vec3::UnitZ();
    for (int j = 0; j < 5; ++j) {
        m.joint_limits(j, 0) = -0.10;
        m.joint_limits(j, 1) = 1.60;
    }
    m.joint_limits(5, 0) = -1.20;
    m.joint_limits(5, 1) = 1.20;
    Vec6 q0;
    q0 << 0.35, 0.30, 0.30, 0.30, 0.30, -0.60;
    m.nominal_posture = JointConfig(q0);
    m.validate();
    return m;
}

void HandModel::validate() const {
    for (const auto& f : fingers) {
        if (f.link_proximal <= 0.0 || f.link_medial <= 0.0)
            throw InvalidInput("finger '" + f.name + "': link lengths must be positive");
        if (std::abs(f.dir.norm() - 1.0) > 1e-9 || std::abs(f.flex_axis.norm() - 1.0) > 1e-9)
            throw InvalidInput("finger '" + f.name + "': direction and axis must be unit vectors");
        if (std::abs(f.dir.dot(f.flex_axis)) > 1e-9)
            throw InvalidInput("finger '" + f.name + "': flexion axis must be perpendicular to dir");
        if (f.joint < 0 || f.joint >= kJointCount)
            throw InvalidInput("finger '" + f.name + "': joint index out of range");
    }
    if (thumb_rotation_joint < 0 || thumb_rotation_joint >= kJointCount)
        throw InvalidInput("thumb rotation joint index out of range");
    if (std::abs(palm_normal.norm() - 1.0) > 1e-9)
        throw InvalidInput("palm normal must be a unit vector");
    for (int j = 0; j < kJointCount; ++j) {
        if (!(joint_limits(j, 0) < joint_limits(j, 1)))
            throw InvalidInput("joint " + std::to_string(j) + ": limits must satisfy min < max");
        const double q0 = nominal_posture.angles[j];
        if (q0 < joint_limits(j, 0) || q0 > joint_limits(j, 1))
            throw InvalidInput("nominal posture violates limits at joint " + std::to_string(j));
    }
}

ClampResult clamp_to_limits(const HandModel& model, const JointConfig& q) {
    require_finite(q);
    ClampResult result;
    result.config = q;
    for (int j = 0; j < HandModel::kJointCount; ++j) {
        const double lo = model.joint_limits(j, 0);
        const double hi = model.joint_limits(j, 1);
        double a = q.angles[j];
        if (a < lo) a = lo;
        if (a > hi) a = hi;
        if (a != q.angles[j]) {
            result.clamped = true;
            result.clamped_joint[static_cast<std::size_t>(j)] = true;
            result.config.angles[j] = a;
        }
    }
    return result;
}

std::array<Vec3, HandModel::kFingerCount> forward_kinematics(const HandModel& model,
                                                             const JointConfig& q_in) {
    require_finite(q_in);
    const Vec6 q = clamp_to_limits(model, q_in).config.angles;
    std::array<Vec3, HandModel::kFingerCount> tips;
    for (int f = 0; f < HandModel::kFingerCount; ++f) {
        const FingerChain& chain = model.fingers[static_cast<std::size_t>(f)];
        Vec3 dir = chain.dir;
        Vec3 axis = chain.flex_axis;
        if (f == 0) {
            const Mat3 swing = axis_rotation(model.palm_normal, q[model.thumb_rotation_joint]);
            dir = swing * dir;
            axis = swing * axis;
        }
        const double flex = q[chain.joint];
        tips[static_cast<std::size_t>(f)] =
            chain.base + chain.link_proximal * (axis_rotation(axis, flex) * dir) +
            chain.link_medial * (axis_rotation(axis, (1.0 + chain.couple) * flex) * dir);
    }
    return tips;
}

Eigen::Matrix<double, 15, 6> fingertip_jacobian(const HandModel& model, const JointConfig& q_in) {
    require_finite(q_in);
    const Vec6 q = clamp_to_limits(model, q_in).config.angles;
    Eigen::Matrix<double, 15, 6> jac = Eigen::Matrix<double, 15, 6>::Zero();
    for (int f = 0; f < HandModel::kFingerCount; ++f) {
        const FingerChain& chain = model.fingers[static_cast<std::size_t>(f)];
        Vec3 dir = chain.dir;
        Vec3 axis = chain.flex_axis;
        if (f == 0) {
            const Mat3 swing = axis_rotation(model.palm_normal, q[model.thumb_rotation_joint]);
            dir = swing * dir;
            axis = swing * axis;
        }
        const double flex = q[chain.joint];
        const Vec3 p1 = axis_rotation(axis, flex) * dir;
        const Vec3 p2 = axis_rotation(axis, (1.0 + chain.couple) * flex) * dir;
        // d(R(a,th) v)/dth = a x R(a,th) v for a unit axis.
        const Vec3 d_flex = chain.link_proximal * axis.cross(p1) +
                            chain.link_medial * (1.0 + chain.couple) * axis.cross(p2);
        jac.block<3, 1>(3 * f, chain.joint) = d_flex;
        if (f == 0) {
            const Vec3 tip_offset = chain.link_proximal * p1 + chain.link_medial * p2;
            jac.block<3, 1>(3 * f, model.thumb_rotation_joint) = model.palm_normal.cross(tip_offset);
        }
    }
    return jac;
}

void HandModel::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["palm_normal"] = {palm_normal.x(), palm_normal.y(), palm_normal.z()};
    j["thumb_rotation_joint"] = thumb_rotation_joint;
    nlohmann::json fingers_json = nlohmann::json::array();
    for (const auto& f : fingers) {
        fingers_json.push_back({{"name", f.name},
                                {"base", {f.base.x(), f.base.y(), f.base.z()}},
                                {"dir", {f.dir.x(), f.dir.y(), f.dir.z()}},
                                {"flex_axis", {f.flex_axis.x(), f.flex_axis.y(), f.flex_axis.z()}},
                                {"links", {f.link_proximal, f.link_medial}},
                                {"couple", f.couple},
                                {"joint", f.joint}});
    }
    j["fingers"] = std::move(fingers_json);
    nlohmann::json limits = nlohmann::json::array();
    for (int r = 0; r < kJointCount; ++r) limits.push_back({joint_limits(r, 0), joint_limits(r, 1)});
    j["joint_limits"] = std::move(limits);
    j["nominal_posture"] = to_json(Vec(nominal_posture.angles));
    save_model_file(path, "hand_model.v1", std::move(j));
}

HandModel HandModel::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "hand_model.v1");
    HandModel m;
    try {
        const auto& pn = j.at("palm_normal");
        m.palm_normal = Vec3(pn[0].get<double>(), pn[1].get<double>(), pn[2].get<double>());
        m.thumb_rotation_joint = j.at("thumb_rotation_joint").get<int>();
        const auto& fingers = j.at("fingers");
        if (fingers.size() != kFingerCount) throw DataError("expected 5 fingers");
        for (std::size_t i = 0; i < kFingerCount; ++i) {
            const auto& fj = fingers[i];
            FingerChain f;
            f.name = fj.at("name").get<std::string>();
            f.base = Vec3(fj.at("base")[0].get<double>(), fj.at("base")[1].get<double>(),
                          fj.at("base")[2].get<double>());
            f.dir = Vec3(fj.at("dir")[0].get<double>(), fj.at("dir")[1].get<double>(),
                         fj.at("dir")[2].get<double>());
            f.flex_axis = Vec3(fj.at("flex_axis")[0].get<double>(), fj.at("flex_axis")[1].get<double>(),
                               fj.at("flex_axis")[2].get<double>());
            f.link_proximal = fj.at("links")[0].get<double>();
            f.link_medial = fj.at("links")[1].get<double>();
            f.couple = fj.at("couple").get<double>();
            f.joint = fj.at("joint").get<int>();
            m.fingers[i] = std::move(f);
        }
        const auto& limits = j.at("joint_limits");
        for (int r = 0; r < kJointCount; ++r) {
            m.joint_limits(r, 0) = limits[static_cast<std::size_t>(r)][0].get<double>();
            m.joint_limits(r, 1) = limits[static_cast<std::size_t>(r)][1].get<double>();
        }
        const Vec q0 = vec_from_json(j.at("nominal_posture"));
        if (q0.size() != kJointCount) throw DataError("nominal posture must have 6 entries");
        m.nominal_posture = JointConfig(Vec6(q0));
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

} // namespace ksyn
