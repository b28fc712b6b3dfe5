#pragma once

#include <optional>
#include <string>
#include <vector>

#include "softgrasp/mesh.hpp"
#include "softgrasp/types.hpp"

namespace softgrasp {

enum class JointType { Fixed, Revolute, Prismatic };

JointType parse_joint_type(const std::string& name);
std::string to_string(JointType type);

struct Joint {
    JointType type = JointType::Fixed;
    Vec3 axis = Vec3::UnitZ();  // unit, in the link frame
    double lower = 0.0;
    double upper = 0.0;
    /// Value at which the finger is open; closing moves toward `upper`.
    double open = 0.0;
};

/// Contact pad: an axis-aligned box in the link frame. The contact face is the box face whose
/// outward normal is `normal` (one of the signed link axes).
struct Pad {
    Vec3 center = Vec3::Zero();
    Vec3 size = Vec3::Constant(0.01);
    Vec3 normal = -Vec3::UnitZ();
};

struct Link {
    std::string name;
    std::string parent;  // empty: attached to the hand base
    Pose origin = Pose::Identity();
    Joint joint;
    std::optional<Pad> pad;
};

/// Hand base pose (p_h, R_h) plus a tree of single-joint links.
struct Gripper {
    std::vector<Link> links;
    Pose base = Pose::Identity();

    /// Throws InvalidArgument for duplicate names, unknown parents, cycles, non-unit axes or bad limits.
    void validate() const;
    int index(const std::string& name) const;  // -1 if absent
    VecX open_configuration() const;
};

Pose make_pose(const Vec3& xyz, const Vec3& rpy);

/// World pose of every link for joint values q (one per link; fixed joints ignore theirs).
/// Throws InvalidArgument when a joint is outside its limits.
std::vector<Pose> forward_kinematics(const Gripper& gripper, const VecX& q);

/// Pad geometry posed in the world.
struct PadFace {
    int link = -1;
    Vec3 center;       // center of the contact face
    Vec3 normal;       // outward from the pad, toward the object
    Vec3 u, v;         // in-plane unit axes
    double half_u = 0, half_v = 0;
};

std::vector<PadFace> pad_faces(const Gripper& gripper, const std::vector<Pose>& link_poses);

/// Closed pad boxes posed in the world, in link order; `links` receives the owning link index.
std::vector<RigidSurface> pad_surfaces(const Gripper& gripper, const std::vector<Pose>& link_poses,
                                       std::vector<int>* links = nullptr);

}  // namespace softgrasp
