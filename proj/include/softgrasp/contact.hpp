#pragma once

#include <iosfwd>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "softgrasp/mesh.hpp"
#include "softgrasp/types.hpp"

namespace softgrasp {

/// Node-to-rigid-surface contact. `force` is the force exerted on the node by the surface.
struct ContactPoint {
    int node_id = -1;
    int surface = -1;   // index into the surface list passed to detection
    int triangle = -1;  // nearest triangle of that surface
    Vec3 normal = Vec3::UnitZ();
    Vec3 closest = Vec3::Zero();  // nearest point on the surface
    double gap = 0.0;             // negative = penetration
    Vec3 force = Vec3::Zero();
    Vec3 spring = Vec3::Zero();  // elastic tangential displacement of the stick spring
    Vec3 anchor = Vec3::Zero();  // stick point on the surface: closest - spring
    bool slipping = false;

    double normal_force() const { return normal.dot(force); }
    Vec3 tangential_force() const { return force - normal * normal.dot(force); }
};

struct DetectOptions {
    /// Node ids to test; empty means every node.
    std::vector<int> candidates;
    /// Surfaces are skipped for nodes farther than this from their bounding box.
    double search_margin = std::numeric_limits<double>::infinity();
};

/// One contact per (node, surface) whose nearest triangle gives a signed gap <= tolerance.
std::vector<ContactPoint> detect_contacts(const NodalField& positions, const std::vector<RigidSurface>& surfaces,
                                          double tolerance = 0.0, const DetectOptions& options = {});

/// Detection that carries the tangential springs of persisting (node, surface) pairs from the previous
/// step, re-projected onto the new tangent plane.
std::vector<ContactPoint> update_contacts(const std::vector<ContactPoint>& previous, const NodalField& positions,
                                          const std::vector<RigidSurface>& surfaces, double tolerance = 0.0,
                                          const DetectOptions& options = {});

struct ContactLaw {
    double normal_stiffness = 0.0;      // k_n, N/m
    double tangential_stiffness = 0.0;  // k_t, N/m
    double friction = 0.0;              // mu
};

/// Penalty normal force and stick-slip tangential force. `relative_velocity[i]` is the velocity of
/// contact i's node relative to the surface point it touches.
void contact_forces(std::vector<ContactPoint>& contacts, const std::vector<Vec3>& relative_velocity,
                    const ContactLaw& law, double dt);

struct KktReport {
    double max_penetration = 0.0;
    double min_normal_force = 0.0;
    double max_complementarity = 0.0;  // max |lambda_n * dg/dt|
    int cone_violations = 0;
};

KktReport kkt_residuals(const std::vector<ContactPoint>& contacts, const std::vector<Vec3>& relative_velocity,
                        double friction, double cone_tolerance = 1e-9);

struct LinkForce {
    double normal_sum = 0.0;            // sum of |f_n|
    Vec3 normal_vector = Vec3::Zero();  // sum of f_n
    Vec3 tangential = Vec3::Zero();     // sum of f_mu
    int contacts = 0;
};

/// Per-link totals. `surface_links[s]` names the link owning surface s. A link listed in
/// `reference_normals` is projected onto that normal instead of the per-contact normals.
/// Throws ConfigError for a contact whose surface has no link.
std::map<std::string, LinkForce> gripper_reaction(const std::vector<ContactPoint>& contacts,
                                                  const std::vector<std::string>& surface_links,
                                                  const std::map<std::string, Vec3>& reference_normals = {});

void write_contact_csv_header(std::ostream& out);
void write_contact_csv_rows(std::ostream& out, double time, const std::vector<ContactPoint>& contacts,
                            const std::vector<std::string>& surface_links);

/// Closest point on triangle (a, b, c) to p.
Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c);

}  // namespace softgrasp
