#pragma once

// Rigid-to-FEM handoff: hand trajectories, penalty-contact simulation of a deformable object against
// moving rigid pads, indentation and pull runs, slip detection, strain reports and the two-engine
// grip-tightness sweep.

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "softgrasp/contact.hpp"
#include "softgrasp/fem.hpp"
#include "softgrasp/grasp.hpp"
#include "softgrasp/kinematics.hpp"
#include "softgrasp/projection.hpp"
#include "softgrasp/scene.hpp"

namespace softgrasp {

// ---------------------------------------------------------------------------------------------
// Hand trajectory

struct HandSample {
    double t = 0.0;
    Vec3 position = Vec3::Zero();  // p_h
    Eigen::Quaterniond rotation = Eigen::Quaterniond::Identity();  // R_h
    VecX q;
};

struct PullSpec {
    Vec3 direction = Vec3::UnitX();
    double distance = 0.02;
    double duration = 0.5;
};

/// Piecewise-linear base pose and joint values; rotations are slerped.
class HandTrajectory {
public:
    HandTrajectory() = default;
    /// Throws InvalidArgument unless times strictly increase and every sample has the same joint count.
    explicit HandTrajectory(std::vector<HandSample> samples);

    const std::vector<HandSample>& samples() const { return samples_; }
    double start() const { return samples_.front().t; }
    double end() const { return samples_.back().t; }
    /// Clamped to [start, end].
    HandSample at(double t) const;
    Pose base_pose(double t) const;

private:
    std::vector<HandSample> samples_;
};

/// Closure from q_start to q_end over `closure_duration`, a hold, then a base translation of
/// pull.distance along pull.direction. Samples every `interval` plus the phase boundaries.
/// Zero closure or pull duration, or a non-positive interval, throws InvalidArgument.
HandTrajectory export_hand_trajectory(const Gripper& gripper, const VecX& q_start, const VecX& q_end,
                                      double closure_duration, double hold_duration, const PullSpec& pull,
                                      double interval);

// ---------------------------------------------------------------------------------------------
// Contact simulation

/// Rigid surfaces in their own frames, the link each belongs to, and the nominal contact normal
/// used to split its forces into normal and lateral parts.
struct RigidBodies {
    std::vector<RigidSurface> surfaces;
    std::vector<std::string> links;
    std::vector<Vec3> normals;
};

/// Pad boxes of every padded link, in link frames.
RigidBodies gripper_bodies(const Gripper& gripper);

/// World pose of each rigid surface at a schedule time.
using PoseSchedule = std::function<std::vector<Pose>(double)>;

/// Poses of the padded links of `gripper` along `trajectory`, in gripper_bodies order.
PoseSchedule trajectory_schedule(const Gripper& gripper, const HandTrajectory& trajectory);

struct SimOptions {
    double safety = 0.9;
    double max_time = 10.0;  // per relaxation phase
    double energy_ratio = 1e-4;
    int window = 20;
    double output_interval = 0.05;
    double activation_tolerance = 0.0;
    double search_margin = 0.01;
};

SimOptions sim_options(const Scene& scene);

/// Explicit dynamics of one deformable body with penalty contact against scheduled rigid surfaces.
/// Simulation time always advances; the schedule time advances only while following the
/// trajectory and is held during relaxation.
class ContactSimulation {
public:
    using Observer = std::function<void(const ContactSimulation&)>;

    ContactSimulation(std::shared_ptr<const FemModel> model, Constraints restraint, const Vec3& gravity,
                      RigidBodies bodies, PoseSchedule schedule, const ContactLaw& law, const SimOptions& options);

    /// Follows the schedule up to `schedule_time`. Optionally reports the largest kinetic/strain
    /// energy ratio seen while the strain energy exceeded 1e-6 J.
    void advance_to(double schedule_time, const Observer& observer = {}, double* max_energy_ratio = nullptr);
    /// Damped dynamics at fixed surface poses until kinetic < energy_ratio * strain energy for
    /// `window` steps, the strain energy being floored at that of a 1e-9 strain. Throws
    /// NonConvergence after options.max_time.
    void relax(const Observer& observer = {});
    void set_schedule(PoseSchedule schedule) { schedule_ = std::move(schedule); }

    const FemModel& model() const { return *model_; }
    const SimState& state() const { return state_; }
    const SimOptions& options() const { return options_; }
    const RigidBodies& bodies() const { return bodies_; }
    double dt() const { return dt_; }
    double schedule_time() const { return schedule_time_; }
    NodalField positions() const;
    const std::vector<ContactPoint>& contacts() const { return contacts_; }
    const std::vector<Vec3>& relative_velocity() const { return relative_velocity_; }
    const std::vector<Pose>& poses() const { return poses_; }
    std::vector<RigidSurface> surfaces() const;
    /// Nominal contact normal of surface s in the world.
    Vec3 surface_normal(int s) const;
    /// Per-link totals with each force projected on its link's nominal normal.
    std::map<std::string, LinkForce> link_forces() const;
    double strain_energy() const { return strain_energy_; }
    double kinetic_energy() const;
    const std::vector<int>& candidates() const { return candidates_; }

private:
    void set_poses(const std::vector<Pose>& poses);
    void step(double schedule_dt);
    void notify(const Observer& observer);
    bool at_rest() const;

    std::shared_ptr<const FemModel> model_;
    Constraints restraint_;
    NodalField f_ext_;
    RigidBodies bodies_;
    PoseSchedule schedule_;
    ContactLaw law_;
    SimOptions options_;
    std::vector<int> candidates_;
    double dt_ = 0.0;

    SimState state_;
    NodalField f_int_;
    double strain_energy_ = 0.0;
    double energy_floor_ = 0.0;
    double schedule_time_ = 0.0;
    double next_output_ = 0.0;
    std::vector<Pose> poses_;
    std::vector<RigidSurface> world_;
    std::vector<ContactPoint> contacts_;
    std::vector<Vec3> relative_velocity_;
};

// ---------------------------------------------------------------------------------------------
// Indentation, pull and slip

struct IndentationResult {
    std::map<std::string, LinkForce> link_forces;
    double max_indentation = 0.0;  // deepest inward displacement of a contact node along its pad normal
};

/// Closure phase of the trajectory followed by relaxation to the Indented State.
IndentationResult run_indentation(ContactSimulation& sim, double closure_end,
                                  const ContactSimulation::Observer& observer = {});

struct PullSample {
    double time = 0.0;               // schedule time
    double base_displacement = 0.0;  // m, along the pull
    double thumb_normal = 0.0;
    double total_normal = 0.0;
    Vec3 lateral = Vec3::Zero();  // sum over links of the projected tangential forces
    double mean_slip = 0.0;       // mean tangential drift of tracked nodes from their pad anchors
};

struct PullHistory {
    std::vector<PullSample> samples;
    double max_energy_ratio = 0.0;
};

/// Follows the schedule from the current schedule time to `pull_end`, sampling every
/// `sample_interval` of schedule time. Anchors are the contact nodes active at the start, fixed in
/// their pad frames. The base displacement is the travel of surface 0 along `direction`.
PullHistory run_pull(ContactSimulation& sim, double pull_end, const Vec3& direction,
                     const std::string& tightness_link, double sample_interval,
                     const ContactSimulation::Observer& observer = {});

struct SlipResult {
    bool slipped = false;
    double onset = 0.0;  // base displacement at the first crossing
};

SlipResult detect_slip(const std::vector<PullSample>& history, double threshold);

// ---------------------------------------------------------------------------------------------
// Strain

struct StrainReport {
    std::vector<double> e_max;  // per element, at the centroid
    double global_max = 0.0;
    int max_element = -1;
    Vec3 max_location = Vec3::Zero();  // deformed centroid
    double contact_mean = 0.0;
    double far_mean = 0.0;
    int contact_elements = 0;
};

/// Contact zone: elements whose deformed centroid lies within two element lengths (cube root of
/// the volume) of an active contact node.
StrainReport strain_report(const Mesh& mesh, const NodalField& u, const NodalField& positions,
                           const std::vector<int>& contact_nodes);

void write_strain_report(std::ostream& out, const StrainReport& report);
void write_skin_csv(std::ostream& out, const Mesh& mesh, const NodalField& positions);
/// Displacement (nodal) and e_max (cell) fields.
void write_state_vtk(const Mesh& mesh, const NodalField& u, const std::filesystem::path& path);

// ---------------------------------------------------------------------------------------------
// Sweep

struct SweepRow {
    std::string engine;  // "rigid" | "fem"
    int level = 0;       // 1-based
    double thumb_normal = 0.0;
    double total_normal = 0.0;
    double lateral = 0.0;
    bool slipped = false;
    double onset = 0.0;
    double depth = 0.0;            // FEM closure depth beyond touch
    double max_indentation = 0.0;  // FEM measured
};

struct MatchedPair {
    int fem_level = 0;
    int rigid_level = 0;  // 0 if nothing within tolerance
    double fem_ratio = 0.0;
    double rigid_ratio = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rigid;
    std::vector<SweepRow> fem;
    std::vector<MatchedPair> pairs;
};

/// Level failure wrapping the underlying numerical error.
class SweepFailure : public Error {
public:
    SweepFailure(const std::string& engine, int level, const std::string& what)
        : Error(engine + " level " + std::to_string(level) + ": " + what), engine_(engine), level_(level) {}
    const std::string& engine() const { return engine_; }
    int level() const { return level_; }

private:
    std::string engine_;
    int level_;
};

/// Touch configuration of the scene's gripper on the rigid primitive of the object, and the
/// rigid closure used by the rigid engine.
Closure rigid_closure(const Scene& scene);
ClosureOptions closure_options(const Scene& scene);
/// q_touch advanced by `depth` on every padded prismatic joint. Throws ConfigError past a limit.
VecX closure_configuration(const Scene& scene, const VecX& q_touch, double depth);

struct FemLevel {
    SweepRow row;
    PullHistory pull;
    NodalField u_indented;
    NodalField u_pulled;
};

/// Indentation and pull of one level; the pull duration doubles (up to max_pull_doublings) while
/// the kinetic/strain energy ratio exceeds max_pull_energy_ratio and slowing down still helps.
/// Normal forces in the row are those of the Indented State; the lateral force is the peak over the pull.
FemLevel run_fem_level(const Scene& scene, std::shared_ptr<const FemModel> model, const Closure& closure,
                       int level, double depth);

/// Rigid engine: normal forces set by the thumb normal force, lateral force = pull bound.
SweepRow run_rigid_level(const Scene& scene, const Closure& closure, int level, double thumb_normal);

/// Pairs each FEM level with the rigid level of nearest thumb normal force within `tolerance`.
std::vector<MatchedPair> match_levels(const std::vector<SweepRow>& fem, const std::vector<SweepRow>& rigid,
                                      double tolerance = 0.1);

using LevelCallback = std::function<void(const FemLevel&)>;

SweepResult grip_tightness_sweep(const Scene& scene, const LevelCallback& on_fem_level = {});

void write_sweep_csv(std::ostream& out, const SweepResult& result);
void write_sweep_summary(std::ostream& out, const SweepResult& result, double friction);

}  // namespace softgrasp
