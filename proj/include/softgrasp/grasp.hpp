#pragma once

#include <optional>
#include <string>
#include <vector>

#include "softgrasp/kinematics.hpp"
#include "softgrasp/types.hpp"

namespace softgrasp {

/// Rigid object primitive. Spheres are centered on the pose origin; cylinders run along the local
/// +x axis from 0 to `length`.
struct RigidObject {
    enum class Kind { Sphere, Cylinder };
    Kind kind = Kind::Sphere;
    double radius = 0.05;
    double length = 0.0;
    Pose pose = Pose::Identity();
    double mass = 0.0;

    Vec3 center_of_mass() const;
};

struct RigidContact {
    Vec3 position = Vec3::Zero();  // from the object's center of mass
    Vec3 world = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();  // object outward normal; pad forces point along -normal
    Vec3 force = Vec3::Zero();    // force on the object
    double moment = 0.0;          // hard-finger contact: always 0
    int link = -1;
    std::string link_name;

    double normal_force() const { return -normal.dot(force); }
};

inline constexpr double kMaxRigidPenetration = 1e-4;
/// Round-off allowance for a pad resting exactly on the surface.
inline constexpr double kTouchTolerance = 1e-12;

/// Signed distance from a pad face to the object surface (negative = penetration). Optionally
/// returns the closest point on the object surface and the outward normal there.
double pad_object_distance(const PadFace& pad, const RigidObject& object, Vec3* point = nullptr,
                           Vec3* normal = nullptr);

/// One point contact per pad whose signed distance is <= kTouchTolerance. Throws InvalidConfiguration when a pad
/// penetrates deeper than kMaxRigidPenetration.
std::vector<RigidContact> find_contact_points(const Gripper& gripper, const std::vector<Pose>& link_poses,
                                              const RigidObject& object);

/// Unit tangent directions d_k of an inscribed n-sided friction pyramid around `normal`, with d_0
/// along the tangential projection of `reference` (world z, then world x when that vanishes).
std::vector<Vec3> pyramid_directions(const Vec3& normal, const Vec3& reference, int sides = 8);

double friction_angle(double mu);
/// Exact Coulomb cone test for a force on the object at a contact with outward normal n.
bool in_friction_cone(const Vec3& force, const Vec3& normal, double mu, double tolerance = 1e-9);
/// Angle between the force and the inward normal.
double cone_angle(const Vec3& force, const Vec3& normal);

struct EquilibriumOptions {
    /// Prescribed normal-force magnitudes per contact; otherwise normal forces are free.
    std::optional<std::vector<double>> normal_forces;
    /// Additional external force at the center of mass.
    Vec3 external_force = Vec3::Zero();
    /// Pyramid alignment; defaults to the direction of the total external load.
    std::optional<Vec3> reference;
    double force_tolerance = 1e-6;
    double moment_tolerance = 1e-6;
    int pyramid_sides = 8;
};

struct EquilibriumResult {
    bool feasible = false;
    std::vector<Vec3> forces;
    double force_residual = 0.0;
    double moment_residual = 0.0;
};

/// Static equilibrium sum(lambda_i) + m g + f_ext = 0, sum(r_i x lambda_i) = 0 with every lambda_i
/// in its linearized friction cone. Infeasible problems return the least-residual forces.
EquilibriumResult grasp_equilibrium(const std::vector<RigidContact>& contacts, double mu, double mass,
                                    const Vec3& gravity, const EquilibriumOptions& options = {});

/// Normal-force pattern s >= 0 of an internal (self-equilibrated) squeeze closest to uniform,
/// scaled so that s[reference] = 1.
VecX squeeze_distribution(const std::vector<RigidContact>& contacts, int reference);

struct GraspState {
    VecX q;
    std::vector<RigidContact> contacts;
    int level = 0;  // 1-based
    double actuation = 0.0;
    double thumb_normal = 0.0;
    double total_normal = 0.0;
    bool feasible = false;
    double force_residual = 0.0;
    double moment_residual = 0.0;
};

struct ClosureOptions {
    std::string tightness_link = "thumb_proximal";
    double actuation_gain = 1.0;  // N of thumb normal force per N of actuation
    double friction = 0.5;
    Vec3 gravity = Vec3::Zero();
};

/// Fingers closed to touch, with the squeeze pattern and the smallest feasible thumb normal force.
struct Closure {
    VecX q;
    std::vector<RigidContact> contacts;
    VecX squeeze;
    int thumb_contact = -1;
    double min_thumb_normal = 0.0;
};

/// Advances each padded joint from its open value toward its upper limit until the pad touches.
/// Throws InvalidConfiguration when no pad reaches the object or the tightness link has no contact.
Closure close_fingers(const Gripper& gripper, const RigidObject& object, const ClosureOptions& options);

/// Equilibrium with normal forces thumb_normal * squeeze.
GraspState grasp_at(const Closure& closure, double thumb_normal, const RigidObject& object,
                    const ClosureOptions& options);

/// One GraspState per actuation level; thumb normal force = minimum feasible + gain * actuation.
/// Levels must be non-decreasing.
std::vector<GraspState> close_gripper(const Gripper& gripper, const RigidObject& object,
                                      const std::vector<double>& actuation, const ClosureOptions& options);

/// Largest pull magnitude along `direction` the grasp resists with its normal forces held fixed.
double rigid_pull_test(const GraspState& state, const Vec3& direction, double mu, double mass,
                       const Vec3& gravity);

}  // namespace softgrasp
