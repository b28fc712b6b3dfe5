#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "softgrasp/contact.hpp"
#include "softgrasp/fem.hpp"
#include "softgrasp/grasp.hpp"
#include "softgrasp/kinematics.hpp"

namespace softgrasp {

enum class Restraint { None, FixCenter, ClampMinX, ClampMinZ };

struct ObjectConfig {
    std::string kind = "cylinder";  // box | cylinder | sphere
    double radius = 0.05;
    double length = 0.3;
    Vec3 size = Vec3::Constant(0.1);  // box only
    int radial_resolution = 6;        // cylinder; sphere uses it as its single resolution
    int axial_resolution = 30;
    std::array<int, 3> box_divisions{4, 4, 4};
    std::string material;
    Restraint restraint = Restraint::None;
    std::optional<double> mass;  // rigid engine; defaults to density * volume
};

struct SimConfig {
    double safety = 0.9;
    double damping = 200.0;  // mass-proportional c_m, 1/s
    double output_interval = 0.05;
    double max_time = 10.0;  // per relaxation phase
    double energy_ratio = 1e-4;
    int window = 20;
    Vec3 gravity = Vec3::Zero();
    double closure_duration = 0.3;
    double hold_duration = 0.0;
    double pull_duration = 0.5;
    double max_pull_energy_ratio = 0.01;
    int max_pull_doublings = 2;
};

struct ContactConfig {
    std::optional<double> normal_stiffness;      // default 10 * E_min * h
    std::optional<double> tangential_stiffness;  // default = normal stiffness
    std::optional<double> friction;              // default: object material friction
    double activation_tolerance = 0.0;
    double search_margin = 0.01;
};

struct SweepConfig {
    int levels = 13;
    double max_depth = 0.01;
    std::vector<double> depths;  // explicit FEM closure depths; overrides max_depth
    Vec3 pull_direction = Vec3::UnitX();
    double pull_distance = 0.02;
    double slip_threshold = 1e-3;
    bool write_vtk = true;
};

struct RigidConfig {
    bool match_fem = true;
    std::vector<double> actuation;  // used when match_fem is false
    double actuation_gain = 1.0;
    double pull_load = 0.0;
};

struct GraspConfig {
    double depth = 0.005;  // FEM closure depth beyond touch for grasp-fem
};

struct Scene {
    ObjectConfig object;
    std::map<std::string, Material> materials;
    Gripper gripper;
    std::string tightness_link = "thumb_proximal";
    ContactConfig contact;
    SimConfig sim;
    SweepConfig sweep;
    RigidConfig rigid;
    GraspConfig grasp;
    bool has_gripper = false;
};

/// Parses and validates a scene document. Unknown keys and invalid values throw ConfigError
/// naming the offending field, e.g. "object.dimensions.radius".
Scene parse_scene(const std::string& json_text);
Scene load_scene(const std::filesystem::path& path);

Mesh build_mesh(const Scene& scene);
/// Material table keyed by the mesh material id (0), with the scene's damping applied.
MaterialTable material_table(const Scene& scene);
const Material& object_material(const Scene& scene);
Constraints build_restraint(const Scene& scene, const Mesh& mesh);
RigidObject rigid_object(const Scene& scene);
ContactLaw contact_law(const Scene& scene, const Mesh& mesh);
/// FEM closure depths per level.
std::vector<double> sweep_depths(const Scene& scene);

}  // namespace softgrasp
