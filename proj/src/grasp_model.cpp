#include "ksyn/grasp_model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>

#include <Eigen/Geometry>
#include <Eigen/SVD>

#include "ksyn/errors.hpp"
#include "ksyn/io.hpp"

namespace ksyn {

void ContactSet::validate() const {
    if (contacts.empty()) throw InvalidInput("contact set must not be empty");
    for (const auto& c : contacts) {
        if (!c.position.allFinite()) throw InvalidInput("contact position must be finite");
        if (std::abs(c.normal.norm() - 1.0) > 1e-9)
            throw InvalidInput("contact normals must be unit length");
    }
    object_frame.validate(1e-6);
}

namespace {

Mat3 cross_matrix(const Vec3& v) {
    Mat3 m;
    m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
    return m;
}

Mat pseudo_inverse(const Mat& m, double tol_scale = 1e-12) {
    Eigen::JacobiSVD<Mat> svd(m, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec& sv = svd.singularValues();
    const double tol = tol_scale * std::max(m.rows(), m.cols()) * (sv.size() > 0 ? sv[0] : 0.0);
    Vec inv = Vec::Zero(sv.size());
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) inv[i] = 1.0 / sv[i];
    return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

} // namespace

GraspMatrix build_grasp_matrix(const ContactSet& set) {
    set.validate();
    const int c = static_cast<int>(set.contacts.size());
    GraspMatrix out;
    out.g = Mat::Zero(6, 3 * c);
    const Vec3 center = set.object_frame.translation;
    for (int i = 0; i < c; ++i) {
        out.g.block<3, 3>(0, 3 * i) = Mat3::Identity();
        out.g.block<3, 3>(3, 3 * i) = cross_matrix(set.contacts[static_cast<std::size_t>(i)].position - center);
    }
    Eigen::JacobiSVD<Mat> svd(out.g);
    const double tol = 1e-10 * svd.singularValues()[0];
    out.rank = static_cast<int>((svd.singularValues().array() > tol).count());
    bool coincident = true;
    for (int i = 1; i < c; ++i)
        coincident &= (set.contacts[static_cast<std::size_t>(i)].position -
                       set.contacts[0].position).norm() < 1e-12;
    out.degenerate = c > 1 && coincident;
    return out;
}

Mat internal_force_basis(const Mat& g) {
    if (g.rows() != 6 || g.cols() % 3 != 0) throw InvalidInput("grasp matrix must be 6 x 3c");
    Eigen::JacobiSVD<Mat> svd(g, Eigen::ComputeFullV);
    const Vec& sv = svd.singularValues();
    const double tol = 1e-10 * (sv.size() > 0 ? sv[0] : 0.0);
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv[i] > tol) ++rank;
    const Eigen::Index n = g.cols();
    Mat xi = svd.matrixV().rightCols(n - rank);
    for (Eigen::Index col = 0; col < xi.cols(); ++col) {
        Eigen::Index imax = 0;
        xi.col(col).cwiseAbs().maxCoeff(&imax);
        if (xi(imax, col) < 0.0) xi.col(col) = -xi.col(col);
    }
    return xi;
}

Vec contact_forces(const GraspState& state, const Vec6& wrench, const Vec& delta_e,
                   const Mat& coupling) {
    if (coupling.rows() != state.xi.cols() || coupling.cols() != delta_e.size())
        throw InvalidInput("coupling must map synergy coefficients to internal-force coordinates");
    if (!wrench.allFinite() || !delta_e.allFinite()) throw InvalidInput("inputs must be finite");
    return pseudo_inverse(state.g) * wrench + state.xi * (coupling * delta_e);
}

Vec6 soft_synergy_step(const SynergySubspace& sub, const Vec& delta_e, const Mat6& hand_compliance,
                       const Vec6& delta_tau) {
    if (delta_e.size() != sub.basis.cols()) throw InvalidInput("coefficient length mismatch");
    if (!delta_e.allFinite() || !delta_tau.allFinite()) throw InvalidInput("inputs must be finite");
    return sub.basis * delta_e - hand_compliance * delta_tau;
}

namespace {

struct LockedGrasp {
    std::vector<Contact> contacts;
    GraspState state;
    Mat coupling;                      // r x S
    Eigen::Matrix<double, 15, 6> jacobian; // at the lock configuration
    Vec e_lock;                        // coefficients when the set completed
    int lock_tick = 0;
};

// Default coupling: gain on the first internal-force direction driven by
// the first synergy component, sign-oriented so the actual squeeze presses
// the first contact inward.
Mat make_coupling(const Mat& xi, const Vec& squeeze_unit, const std::vector<Contact>& contacts,
                  double gain) {
    const Eigen::Index r = xi.cols();
    const Eigen::Index s = squeeze_unit.size();
    Mat coupling = Mat::Zero(r, s);
    if (r == 0) return coupling;
    coupling(0, 0) = gain;
    const Vec probe = xi * (coupling * squeeze_unit);
    if (probe.segment<3>(0).dot(contacts[0].normal) > 0.0) coupling = -coupling;
    return coupling;
}

Vec embed_contact_forces(const Vec& fc, const std::vector<Contact>& contacts) {
    Vec stacked = Vec::Zero(15);
    for (std::size_t i = 0; i < contacts.size(); ++i)
        stacked.segment<3>(3 * contacts[i].finger_id) = fc.segment<3>(3 * static_cast<Eigen::Index>(i));
    return stacked;
}

} // namespace

CloseGraspResult close_grasp(const HandModel& model, const SynergySubspace& sub,
                             const ObjectPrimitive& object, const Vec& e_start,
                             const Vec& squeeze_direction, double current_threshold,
                             const CloseGraspParams& params) {
    object.validate();
    if (e_start.size() != sub.basis.cols() || squeeze_direction.size() != e_start.size())
        throw InvalidInput("coefficient dimensions do not match the subspace");
    if (squeeze_direction.norm() < 1e-12) throw InvalidInput("squeeze direction must be nonzero");
    if (current_threshold < 0.0) throw InvalidInput("current threshold must be non-negative");

    const Vec squeeze_unit = squeeze_direction / squeeze_direction.norm();
    std::vector<int> required = params.required_fingers;
    if (required.empty()) required = {0, 1, 2}; // tripod by default
    if (required.size() < 2) throw InvalidInput("grasping needs at least two contact fingers");

    const JointConfig q0(sub.q0);
    CloseGraspResult result;
    std::vector<Contact> locked;
    std::optional<LockedGrasp> grasp;

    Vec e = e_start;
    for (int tick = 0; tick <= params.max_ticks; ++tick) {
        if (tick > 0) e = e + params.step * squeeze_unit;
        const JointConfig q = clamp_to_limits(model, reconstruct(sub, e, q0)).config;
        const auto tips = forward_kinematics(model, q);

        if (!grasp) {
            for (int f : required) {
                const bool already = std::any_of(locked.begin(), locked.end(),
                                                 [f](const Contact& c) { return c.finger_id == f; });
                if (already) continue;
                const SurfacePoint sp = closest_surface_point(object, tips[static_cast<std::size_t>(f)]);
                if (sp.signed_dist <= params.contact_tol) {
                    Contact c;
                    c.position = sp.point;
                    c.normal = sp.normal;
                    c.finger_id = f;
                    locked.push_back(c);
                }
            }
            if (locked.size() == required.size()) {
                LockedGrasp lg;
                lg.contacts = locked;
                ContactSet set;
                set.contacts = locked;
                set.object_frame = object.pose;
                const GraspMatrix gm = build_grasp_matrix(set);
                lg.state.g = gm.g;
                lg.state.xi = internal_force_basis(gm.g);
                lg.state.contact_forces = Vec::Zero(gm.g.cols());
                lg.coupling = make_coupling(lg.state.xi, squeeze_unit, locked, params.coupling_gain);
                lg.jacobian = fingertip_jacobian(model, q);
                lg.e_lock = e;
                lg.lock_tick = tick;
                grasp = std::move(lg);
            }
        }

        GraspTraceRow row;
        row.tick = tick;
        row.e = e;
        if (grasp) {
            const Vec delta_e = e - grasp->e_lock;
            const Vec fc = grasp->state.xi * (grasp->coupling * delta_e);
            const Vec stacked = embed_contact_forces(fc, grasp->contacts);
            const Vec6 tau = grasp->jacobian.transpose() * stacked;
            row.fc_norm = fc.norm();
            row.current = params.current_gain * tau.norm();
            grasp->state.contact_forces = fc;
            grasp->state.joint_torques = tau;
        }
        result.trace.push_back(row);

        if (row.current >= current_threshold) {
            result.e_final = e;
            result.closed = true;
            if (grasp) {
                result.contacts = grasp->contacts;
                result.state = grasp->state;
                result.fc_final = grasp->state.contact_forces;
                double mean_norm = 0.0;
                for (std::size_t i = 0; i < grasp->contacts.size(); ++i)
                    mean_norm += result.fc_final.segment<3>(3 * static_cast<Eigen::Index>(i)).norm();
                result.per_contact_force = mean_norm / static_cast<double>(grasp->contacts.size());
            } else {
                result.fc_final = Vec();
            }
            return result;
        }
    }

    if (!grasp)
        throw GraspFailure("grasp not established within " + std::to_string(params.max_ticks) +
                           " ticks: " + std::to_string(locked.size()) + "/" +
                           std::to_string(required.size()) + " contacts locked");
    result.e_final = e;
    result.closed = false;
    result.contacts = grasp->contacts;
    result.state = grasp->state;
    result.fc_final = grasp->state.contact_forces;
    double mean_norm = 0.0;
    for (std::size_t i = 0; i < grasp->contacts.size(); ++i)
        mean_norm += result.fc_final.segment<3>(3 * static_cast<Eigen::Index>(i)).norm();
    result.per_contact_force = mean_norm / static_cast<double>(grasp->contacts.size());
    return result;
}

double current_threshold_for_force(const HandModel& model, const SynergySubspace& sub,
                                   const ObjectPrimitive& object, const Vec& e_start,
                                   const Vec& squeeze_direction, double per_contact_force,
                                   const CloseGraspParams& params) {
    if (!(per_contact_force > 0.0)) throw InvalidInput("target force must be positive");
    // Run the identical closing loop without a stopping threshold to find the
    // locked configuration, then measure the current/force slopes there.
    CloseGraspResult probe = close_grasp(model, sub, object, e_start, squeeze_direction,
                                         std::numeric_limits<double>::infinity(), params);
    const Vec squeeze_unit = squeeze_direction / squeeze_direction.norm();

    ContactSet set;
    set.contacts = probe.contacts;
    set.object_frame = object.pose;
    const GraspMatrix gm = build_grasp_matrix(set);
    const Mat xi = internal_force_basis(gm.g);
    const Mat coupling = make_coupling(xi, squeeze_unit, probe.contacts, params.coupling_gain);

    const Vec force_per_progress = xi * (coupling * squeeze_unit);
    double mean_contact_slope = 0.0;
    for (std::size_t i = 0; i < probe.contacts.size(); ++i)
        mean_contact_slope += force_per_progress.segment<3>(3 * static_cast<Eigen::Index>(i)).norm();
    mean_contact_slope /= static_cast<double>(probe.contacts.size());
    if (mean_contact_slope < 1e-12)
        throw NumericError("squeeze direction produces no contact force");

    // Current and per-contact force both grow linearly in squeeze progress,
    // so their ratio at the probe's final tick is the exact slope.
    if (probe.state.contact_forces.size() == 0 || probe.state.contact_forces.norm() <= 1e-12)
        throw NumericError("probe run accumulated no squeeze progress");
    const double current_per_force =
        params.current_gain * probe.state.joint_torques.norm() / probe.per_contact_force;
    return current_per_force * per_contact_force;
}

ObjectPrimitive fit_sphere_to_fingers(const HandModel& model, const SynergySubspace& sub,
                                      const Vec& e_contact, const std::vector<int>& fingers,
                                      double radius) {
    if (fingers.size() < 2) throw InvalidInput("need at least two fingers to fit a sphere");
    const JointConfig q0(sub.q0);
    const JointConfig q = clamp_to_limits(model, reconstruct(sub, e_contact, q0)).config;
    const auto tips = forward_kinematics(model, q);

    ObjectPrimitive obj;
    obj.kind = ObjectPrimitive::Kind::Sphere;
    obj.dims = Vec3(radius, radius, radius);

    if (fingers.size() == 2) {
        const Vec3 a = tips[static_cast<std::size_t>(fingers[0])];
        const Vec3 b = tips[static_cast<std::size_t>(fingers[1])];
        if ((b - a).norm() > 2.0 * radius + 1e-9)
            throw InvalidInput("fingertips farther apart than the sphere diameter");
        // Center in the plane bisecting the chord, offset along +z.
        const Vec3 mid = 0.5 * (a + b);
        const double half_chord = 0.5 * (b - a).norm();
        const double lift = std::sqrt(std::max(radius * radius - half_chord * half_chord, 0.0));
        Vec3 axis = (b - a).cross(Vec3::UnitX());
        if (axis.norm() < 1e-9) axis = (b - a).cross(Vec3::UnitY());
        axis = (b - a).cross(axis).normalized();
        if (axis.z() < 0.0) axis = -axis;
        obj.pose.translation = mid + lift * axis;
        return obj;
    }

    // Three or more fingers: sphere through the first three tips.
    const Vec3 a = tips[static_cast<std::size_t>(fingers[0])];
    const Vec3 b = tips[static_cast<std::size_t>(fingers[1])];
    const Vec3 c = tips[static_cast<std::size_t>(fingers[2])];
    const Vec3 ab = b - a, ac = c - a;
    Vec3 n = ab.cross(ac);
    if (n.norm() < 1e-12) throw InvalidInput("contact fingertips are collinear");
    n.normalize();
    // Circumcenter of the triangle in its plane.
    const double ab2 = ab.squaredNorm(), ac2 = ac.squaredNorm();
    const Vec3 to_center =
        (ab2 * ac - ac2 * ab).cross(ab.cross(ac)) / (2.0 * ab.cross(ac).squaredNorm());
    const Vec3 circumcenter = a + to_center;
    const double circumradius = (a - circumcenter).norm();
    if (radius < circumradius - 1e-9)
        throw InvalidInput("sphere radius smaller than the fingertip circumradius");
    const double lift = std::sqrt(std::max(radius * radius - circumradius * circumradius, 0.0));
    Vec3 axis = n;
    if (axis.z() < 0.0) axis = -axis;
    obj.pose.translation = circumcenter + lift * axis;
    return obj;
}

void GraspScenario::save(const std::filesystem::path& path) const {
    nlohmann::json j;
    j["name"] = name;
    j["object"] = {{"kind", ObjectPrimitive::kind_name(object.kind)},
                   {"dims", {object.dims[0], object.dims[1], object.dims[2]}},
                   {"pose",
                    {{"qw", Eigen::Quaterniond(object.pose.rotation).w()},
                     {"qx", Eigen::Quaterniond(object.pose.rotation).x()},
                     {"qy", Eigen::Quaterniond(object.pose.rotation).y()},
                     {"qz", Eigen::Quaterniond(object.pose.rotation).z()},
                     {"x", object.pose.translation.x()},
                     {"y", object.pose.translation.y()},
                     {"z", object.pose.translation.z()}}}};
    j["e_start"] = to_json(e_start);
    j["squeeze_direction"] = to_json(squeeze_direction);
    j["current_threshold"] = current_threshold;
    j["contact_fingers"] = contact_fingers;
    save_model_file(path, "grasp.v1", std::move(j));
}

GraspScenario GraspScenario::load(const std::filesystem::path& path) {
    const nlohmann::json j = load_model_file(path, "grasp.v1");
    GraspScenario s;
    try {
        s.name = j.at("name").get<std::string>();
        const auto& obj = j.at("object");
        s.object.kind = ObjectPrimitive::kind_from_name(obj.at("kind").get<std::string>());
        s.object.dims = Vec3(obj.at("dims")[0].get<double>(), obj.at("dims")[1].get<double>(),
                             obj.at("dims")[2].get<double>());
        const auto& pj = obj.at("pose");
        Eigen::Quaterniond quat(pj.at("qw").get<double>(), pj.at("qx").get<double>(),
                                pj.at("qy").get<double>(), pj.at("qz").get<double>());
        quat.normalize();
        s.object.pose.rotation = quat.toRotationMatrix();
        s.object.pose.translation =
            Vec3(pj.at("x").get<double>(), pj.at("y").get<double>(), pj.at("z").get<double>());
        s.e_start = vec_from_json(j.at("e_start"));
        s.squeeze_direction = vec_from_json(j.at("squeeze_direction"));
        s.current_threshold = j.at("current_threshold").get<double>();
        s.contact_fingers = j.at("contact_fingers").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
    s.object.validate();
    return s;
}

void save_grasp_trace_csv(const std::filesystem::path& path, const std::vector<GraspTraceRow>& trace) {
    if (trace.empty()) throw InvalidInput("empty grasp trace");
    const int s = static_cast<int>(trace.front().e.size());
    std::vector<std::string> header = {"tick"};
    for (int c = 1; c <= s; ++c) header.push_back("e" + std::to_string(c));
    header.push_back("fc_norm");
    header.push_back("current");
    std::vector<std::vector<double>> rows;
    rows.reserve(trace.size());
    for (const auto& row : trace) {
        std::vector<double> r;
        r.push_back(static_cast<double>(row.tick));
        for (int c = 0; c < s; ++c) r.push_back(row.e[c]);
        r.push_back(row.fc_norm);
        r.push_back(row.current);
        rows.push_back(std::move(r));
    }
    write_csv(path, header, rows);
}

} // namespace ksyn
