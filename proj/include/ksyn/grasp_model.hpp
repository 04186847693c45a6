#pragma once

#include <filesystem>
#include <vector>

#include "ksyn/frames_mapping.hpp"
#include "ksyn/hand_model.hpp"
#include "ksyn/primitives.hpp"
#include "ksyn/synergy_core.hpp"
#include "ksyn/types.hpp"

namespace ksyn {

struct Contact {
    Vec3 position;  // world frame [m]
    Vec3 normal;    // outward surface normal, unit
    int finger_id = -1;
};

struct ContactSet {
    std::vector<Contact> contacts;
    Pose object_frame;

    void validate() const;
};

// Point-contact grasp map: column block i sends the force at contact i to
// the object wrench [force; torque about the object center].
struct GraspMatrix {
    Mat g; // 6 x 3c
    int rank = 0;
    bool degenerate = false; // all contacts coincident
};

GraspMatrix build_grasp_matrix(const ContactSet& contacts);

// Orthonormal basis of null(G): the internal (squeeze) force directions.
Mat internal_force_basis(const Mat& g);

struct GraspState {
    Mat g;       // 6 x 3c
    Mat xi;      // 3c x r
    Mat6 hand_compliance = 0.02 * Mat6::Identity(); // C_h
    Vec contact_forces; // 3c [N]
    Vec6 joint_torques = Vec6::Zero(); // [N m]
};

// f_c = pinv(G) w + xi * coupling * delta_e.
Vec contact_forces(const GraspState& state, const Vec6& wrench, const Vec& delta_e,
                   const Mat& coupling);

// delta_q = E delta_e - C_h delta_tau (reference motion minus compliant
// deflection).
Vec6 soft_synergy_step(const SynergySubspace& sub, const Vec& delta_e, const Mat6& hand_compliance,
                       const Vec6& delta_tau);

struct CloseGraspParams {
    double step = 0.005;          // coefficient increment per tick
    int max_ticks = 1000;
    double contact_tol = 1e-3;    // fingertip-to-surface lock distance [m]
    double current_gain = 1.0;    // current = gain * ||tau||
    double coupling_gain = 5.0;   // N per unit squeeze coefficient
    std::vector<int> required_fingers; // contacts that must lock before squeezing; >= 2 of them
};

struct GraspTraceRow {
    int tick = 0;
    Vec e;
    double fc_norm = 0.0;
    double current = 0.0;
};

struct CloseGraspResult {
    Vec e_final;
    Vec fc_final;             // 3c
    double per_contact_force = 0.0; // mean per-contact force norm [N]
    std::vector<GraspTraceRow> trace;
    std::vector<Contact> contacts;
    GraspState state;
    bool closed = false; // current threshold reached
};

// Kinematic closing loop: advance the coefficients along the squeeze
// direction, lock fingertip contacts on the virtual object, then modulate
// the internal force until the simulated motor current hits the threshold.
CloseGraspResult close_grasp(const HandModel& model, const SynergySubspace& sub,
                             const ObjectPrimitive& object, const Vec& e_start,
                             const Vec& squeeze_direction, double current_threshold,
                             const CloseGraspParams& params = {});

// Current at which the mean per-contact force reaches the target, measured
// on the locked contact configuration of the identical closing run.
double current_threshold_for_force(const HandModel& model, const SynergySubspace& sub,
                                   const ObjectPrimitive& object, const Vec& e_start,
                                   const Vec& squeeze_direction, double per_contact_force,
                                   const CloseGraspParams& params = {});

// Sphere touched by the given fingers at the posture e_contact (center on
// the circumcircle axis). Used to author grasp scenarios.
ObjectPrimitive fit_sphere_to_fingers(const HandModel& model, const SynergySubspace& sub,
                                      const Vec& e_contact, const std::vector<int>& fingers,
                                      double radius);

// Scenario file (grasp.v1) and trace output.
struct GraspScenario {
    std::string name;
    ObjectPrimitive object;
    Vec e_start;
    Vec squeeze_direction;
    double current_threshold = 1.0;
    std::vector<int> contact_fingers;

    static GraspScenario load(const std::filesystem::path& path);
    void save(const std::filesystem::path& path) const;
};

void save_grasp_trace_csv(const std::filesystem::path& path, const std::vector<GraspTraceRow>& trace);

} // namespace ksyn
