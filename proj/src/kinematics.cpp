#include "softgrasp/kinematics.hpp"

#include <cmath>
#include <map>

#include "softgrasp/errors.hpp"

namespace softgrasp {

JointType parse_joint_type(const std::string& name) {
    if (name == "fixed") return JointType::Fixed;
    if (name == "revolute") return JointType::Revolute;
    if (name == "prismatic") return JointType::Prismatic;
    throw InvalidArgument("unknown joint type '" + name + "'");
}

std::string to_string(JointType type) {
    switch (type) {
        case JointType::Fixed: return "fixed";
        case JointType::Revolute: return "revolute";
        case JointType::Prismatic: return "prismatic";
    }
    return "fixed";
}

Pose make_pose(const Vec3& xyz, const Vec3& rpy) {
    Pose p = Pose::Identity();
    p.linear() = (Eigen::AngleAxisd(rpy.z(), Vec3::UnitZ()) * Eigen::AngleAxisd(rpy.y(), Vec3::UnitY()) *
                  Eigen::AngleAxisd(rpy.x(), Vec3::UnitX()))
                     .toRotationMatrix();
    p.translation() = xyz;
    return p;
}

int Gripper::index(const std::string& name) const {
    for (std::size_t i = 0; i < links.size(); ++i)
        if (links[i].name == name) return static_cast<int>(i);
    return -1;
}

VecX Gripper::open_configuration() const {
    VecX q(static_cast<Eigen::Index>(links.size()));
    for (std::size_t i = 0; i < links.size(); ++i) q[static_cast<Eigen::Index>(i)] = links[i].joint.open;
    return q;
}

namespace {

// Link indices with every parent ahead of its children.
std::vector<int> topological_order(const Gripper& g) {
    const int n = static_cast<int>(g.links.size());
    std::vector<int> parent(n, -1), order, state(n, 0);
    for (int i = 0; i < n; ++i) {
        if (g.links[i].parent.empty()) continue;
        parent[i] = g.index(g.links[i].parent);
        if (parent[i] < 0)
            throw InvalidArgument("link '" + g.links[i].name + "' has unknown parent '" + g.links[i].parent + "'");
    }
    for (int i = 0; i < n; ++i) {
        std::vector<int> chain;
        int k = i;
        while (k >= 0 && state[k] == 0) {
            state[k] = 1;
            chain.push_back(k);
            k = parent[k];
        }
        if (k >= 0 && state[k] == 1) throw InvalidArgument("kinematic cycle through link '" + g.links[k].name + "'");
        for (auto it = chain.rbegin(); it != chain.rend(); ++it) {
            state[*it] = 2;
            order.push_back(*it);
        }
    }
    return order;
}

}  // namespace

void Gripper::validate() const {
    std::map<std::string, int> seen;
    for (const auto& l : links) {
        if (l.name.empty()) throw InvalidArgument("link without a name");
        if (seen[l.name]++) throw InvalidArgument("duplicate link name '" + l.name + "'");
        if (l.joint.type != JointType::Fixed) {
            if (std::abs(l.joint.axis.norm() - 1.0) > 1e-9)
                throw InvalidArgument("joint axis of link '" + l.name + "' is not a unit vector");
            if (!(l.joint.lower <= l.joint.upper))
                throw InvalidArgument("joint limits of link '" + l.name + "' are inverted");
            if (l.joint.open < l.joint.lower || l.joint.open > l.joint.upper)
                throw InvalidArgument("open value of link '" + l.name + "' is outside its limits");
        }
        if (l.pad) {
            if ((l.pad->size.array() <= 0).any()) throw InvalidArgument("pad of link '" + l.name + "' has no volume");
            const Vec3 n = l.pad->normal;
            if (std::abs(n.norm() - 1.0) > 1e-9 || std::abs(n.cwiseAbs().maxCoeff() - 1.0) > 1e-9)
                throw InvalidArgument("pad normal of link '" + l.name + "' must be a signed link axis");
        }
    }
    topological_order(*this);
}

std::vector<Pose> forward_kinematics(const Gripper& gripper, const VecX& q) {
    const auto n = gripper.links.size();
    if (static_cast<std::size_t>(q.size()) != n) throw InvalidArgument("one joint value per link required");
    std::vector<Pose> poses(n, Pose::Identity());
    for (int i : topological_order(gripper)) {
        const Link& l = gripper.links[i];
        const double qi = q[i];
        Pose joint = Pose::Identity();
        if (l.joint.type != JointType::Fixed) {
            if (!std::isfinite(qi) || qi < l.joint.lower - 1e-12 || qi > l.joint.upper + 1e-12)
                throw InvalidArgument("joint of link '" + l.name + "' outside its limits");
            if (l.joint.type == JointType::Revolute)
                joint.linear() = Eigen::AngleAxisd(qi, l.joint.axis).toRotationMatrix();
            else
                joint.translation() = qi * l.joint.axis;
        }
        const Pose& parent = l.parent.empty() ? gripper.base : poses[gripper.index(l.parent)];
        poses[i] = parent * l.origin * joint;
    }
    return poses;
}

std::vector<PadFace> pad_faces(const Gripper& gripper, const std::vector<Pose>& link_poses) {
    std::vector<PadFace> out;
    for (std::size_t i = 0; i < gripper.links.size(); ++i) {
        const auto& pad = gripper.links[i].pad;
        if (!pad) continue;
        int k = 0;
        pad->normal.cwiseAbs().maxCoeff(&k);
        const int a = (k + 1) % 3, b = (k + 2) % 3;
        const Pose& T = link_poses[i];
        PadFace f;
        f.link = static_cast<int>(i);
        f.center = T * (pad->center + 0.5 * pad->size[k] * pad->normal);
        f.normal = T.linear() * pad->normal;
        f.u = T.linear().col(a);
        f.v = T.linear().col(b);
        f.half_u = 0.5 * pad->size[a];
        f.half_v = 0.5 * pad->size[b];
        out.push_back(f);
    }
    return out;
}

std::vector<RigidSurface> pad_surfaces(const Gripper& gripper, const std::vector<Pose>& link_poses,
                                       std::vector<int>* links) {
    std::vector<RigidSurface> out;
    if (links) links->clear();
    for (std::size_t i = 0; i < gripper.links.size(); ++i) {
        const auto& pad = gripper.links[i].pad;
        if (!pad) continue;
        out.push_back(make_box_surface(pad->center, pad->size).transformed(link_poses[i]));
        if (links) links->push_back(static_cast<int>(i));
    }
    return out;
}

}  // namespace softgrasp
