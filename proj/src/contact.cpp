#include "softgrasp/contact.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>

#include "softgrasp/errors.hpp"
#include "softgrasp/parallel.hpp"
#include "softgrasp/projection.hpp"

namespace softgrasp {

Vec3 closest_point_on_triangle(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
    // Voronoi-region walk over vertices, edges, then the face.
    const Vec3 ab = b - a, ac = c - a, ap = p - a;
    const double d1 = ab.dot(ap), d2 = ac.dot(ap);
    if (d1 <= 0 && d2 <= 0) return a;

    const Vec3 bp = p - b;
    const double d3 = ab.dot(bp), d4 = ac.dot(bp);
    if (d3 >= 0 && d4 <= d3) return b;

    const double vc = d1 * d4 - d3 * d2;
    if (vc <= 0 && d1 >= 0 && d3 <= 0) return a + ab * (d1 / (d1 - d3));

    const Vec3 cp = p - c;
    const double d5 = ab.dot(cp), d6 = ac.dot(cp);
    if (d6 >= 0 && d5 <= d6) return c;

    const double vb = d5 * d2 - d1 * d6;
    if (vb <= 0 && d2 >= 0 && d6 <= 0) return a + ac * (d2 / (d2 - d6));

    const double va = d3 * d6 - d5 * d4;
    if (va <= 0 && (d4 - d3) >= 0 && (d5 - d6) >= 0) return b + (c - b) * ((d4 - d3) / ((d4 - d3) + (d5 - d6)));

    const double denom = 1.0 / (va + vb + vc);
    return a + ab * (vb * denom) + ac * (vc * denom);
}

namespace {

struct Box {
    Vec3 lo, hi;
};

Box bounds(const RigidSurface& s) {
    Box b{Vec3::Constant(std::numeric_limits<double>::infinity()),
          Vec3::Constant(-std::numeric_limits<double>::infinity())};
    for (const auto& v : s.vertices) {
        b.lo = b.lo.cwiseMin(v);
        b.hi = b.hi.cwiseMax(v);
    }
    return b;
}

double box_distance(const Box& b, const Vec3& p) {
    return (p - p.cwiseMax(b.lo).cwiseMin(b.hi)).norm();
}

bool nearest(const RigidSurface& s, const Vec3& x, ContactPoint& out) {
    if (s.normals.size() != s.triangles.size()) throw InvalidArgument("rigid surface normals not computed");
    double best = std::numeric_limits<double>::infinity();
    int best_tri = -1;
    Vec3 best_point = Vec3::Zero();
    for (std::size_t t = 0; t < s.triangles.size(); ++t) {
        const auto& tri = s.triangles[t];
        const Vec3 q = closest_point_on_triangle(x, s.vertices[tri[0]], s.vertices[tri[1]], s.vertices[tri[2]]);
        const double d = (x - q).norm();
        if (d < best) {  // strict: equal distances keep the lower triangle index
            best = d;
            best_tri = static_cast<int>(t);
            best_point = q;
        }
    }
    if (best_tri < 0) return false;
    out.triangle = best_tri;
    out.normal = s.normals[best_tri];
    out.closest = best_point;
    out.gap = (x - best_point).dot(out.normal);
    return true;
}

}  // namespace

std::vector<ContactPoint> detect_contacts(const NodalField& positions, const std::vector<RigidSurface>& surfaces,
                                          double tolerance, const DetectOptions& options) {
    std::vector<int> nodes = options.candidates;
    if (nodes.empty()) {
        nodes.resize(static_cast<std::size_t>(positions.cols()));
        for (std::size_t i = 0; i < nodes.size(); ++i) nodes[i] = static_cast<int>(i);
    }
    std::vector<Box> boxes;
    boxes.reserve(surfaces.size());
    for (const auto& s : surfaces) boxes.push_back(bounds(s));

    // One slot per (candidate, surface); concatenated in that order afterwards.
    const std::size_t ns = surfaces.size();
    std::vector<ContactPoint> slots(nodes.size() * ns);
    std::vector<char> active(nodes.size() * ns, 0);
    parallel_for(nodes.size(), [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            const int node = nodes[i];
            if (node < 0 || node >= positions.cols()) throw InvalidArgument("contact candidate node out of range");
            const Vec3 x = positions.col(node);
            for (std::size_t s = 0; s < ns; ++s) {
                if (box_distance(boxes[s], x) > options.search_margin) continue;
                ContactPoint c;
                if (!nearest(surfaces[s], x, c) || c.gap > tolerance) continue;
                c.node_id = node;
                c.surface = static_cast<int>(s);
                c.anchor = c.closest;
                slots[i * ns + s] = c;
                active[i * ns + s] = 1;
            }
        }
    });
    std::vector<ContactPoint> out;
    for (std::size_t k = 0; k < slots.size(); ++k)
        if (active[k]) out.push_back(slots[k]);
    return out;
}

std::vector<ContactPoint> update_contacts(const std::vector<ContactPoint>& previous, const NodalField& positions,
                                          const std::vector<RigidSurface>& surfaces, double tolerance,
                                          const DetectOptions& options) {
    auto current = detect_contacts(positions, surfaces, tolerance, options);
    std::map<std::pair<int, int>, const ContactPoint*> old;
    for (const auto& c : previous) old[{c.node_id, c.surface}] = &c;
    for (auto& c : current) {
        const auto it = old.find({c.node_id, c.surface});
        if (it == old.end()) continue;
        c.spring = it->second->spring - c.normal * c.normal.dot(it->second->spring);
        c.anchor = c.closest - c.spring;
        c.slipping = it->second->slipping;
    }
    return current;
}

void contact_forces(std::vector<ContactPoint>& contacts, const std::vector<Vec3>& relative_velocity,
                    const ContactLaw& law, double dt) {
    if (!(law.normal_stiffness > 0) || !(law.tangential_stiffness > 0))
        throw InvalidArgument("contact stiffnesses must be positive");
    if (!(law.friction >= 0)) throw InvalidArgument("friction coefficient must be non-negative");
    if (relative_velocity.size() != contacts.size())
        throw InvalidArgument("one relative velocity per contact required");

    for (std::size_t i = 0; i < contacts.size(); ++i) {
        ContactPoint& c = contacts[i];
        if (c.gap > 0) {
            c.force.setZero();
            c.spring.setZero();
            c.anchor = c.closest;
            c.slipping = false;
            continue;
        }
        const Vec3& n = c.normal;
        const double fn = law.normal_stiffness * (-c.gap);
        Vec3 s = c.spring + relative_velocity[i] * dt;
        s -= n * n.dot(s);
        Vec3 ft = -law.tangential_stiffness * s;
        const double cap = law.friction * fn;
        const double ft_norm = ft.norm();
        c.slipping = ft_norm > cap;
        if (c.slipping) {
            ft *= (ft_norm > 0 ? cap / ft_norm : 0.0);
            s = -ft / law.tangential_stiffness;
        }
        c.spring = s;
        c.anchor = c.closest - s;
        c.force = fn * n + ft;
    }
}

KktReport kkt_residuals(const std::vector<ContactPoint>& contacts, const std::vector<Vec3>& relative_velocity,
                        double friction, double cone_tolerance) {
    if (relative_velocity.size() != contacts.size())
        throw InvalidArgument("one relative velocity per contact required");
    KktReport r;
    bool any = false;
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        const auto& c = contacts[i];
        const double fn = c.normal_force();
        r.max_penetration = std::max(r.max_penetration, -c.gap);
        r.min_normal_force = any ? std::min(r.min_normal_force, fn) : fn;
        any = true;
        r.max_complementarity = std::max(r.max_complementarity, std::abs(fn * c.normal.dot(relative_velocity[i])));
        if (c.tangential_force().norm() > friction * std::abs(fn) + cone_tolerance) ++r.cone_violations;
    }
    return r;
}

std::map<std::string, LinkForce> gripper_reaction(const std::vector<ContactPoint>& contacts,
                                                  const std::vector<std::string>& surface_links,
                                                  const std::map<std::string, Vec3>& reference_normals) {
    std::map<std::string, LinkForce> out;
    for (const auto& name : surface_links)
        if (!name.empty()) out[name];
    for (const auto& c : contacts) {
        if (c.surface < 0 || c.surface >= static_cast<int>(surface_links.size()) || surface_links[c.surface].empty())
            throw ConfigError("contact on node " + std::to_string(c.node_id) + " is not assigned to a gripper link");
        const std::string& link = surface_links[c.surface];
        const auto ref = reference_normals.find(link);
        const auto p = project_contact_force(c.force, ref == reference_normals.end() ? c.normal : ref->second);
        LinkForce& f = out[link];
        f.normal_sum += p.normal.norm();
        f.normal_vector += p.normal;
        f.tangential += p.tangential;
        ++f.contacts;
    }
    return out;
}

void write_contact_csv_header(std::ostream& out) {
    out << "time_s,contact_id,node_id,link,gap_m,fn_N,ft_N,slip\n";
}

void write_contact_csv_rows(std::ostream& out, double time, const std::vector<ContactPoint>& contacts,
                            const std::vector<std::string>& surface_links) {
    out << std::setprecision(12);
    for (std::size_t i = 0; i < contacts.size(); ++i) {
        const auto& c = contacts[i];
        const std::string link = c.surface >= 0 && c.surface < static_cast<int>(surface_links.size())
                                     ? surface_links[c.surface]
                                     : std::string();
        out << time << ',' << i << ',' << c.node_id << ',' << link << ',' << c.gap << ',' << c.normal_force() << ','
            << c.tangential_force().norm() << ',' << (c.slipping ? 1 : 0) << '\n';
    }
}

}  // namespace softgrasp
