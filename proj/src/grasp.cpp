#include "softgrasp/grasp.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "softgrasp/errors.hpp"
#include "softgrasp/nnls.hpp"

namespace softgrasp {

Vec3 RigidObject::center_of_mass() const {
    return kind == Kind::Sphere ? pose.translation() : Vec3(pose * Vec3(0.5 * length, 0, 0));
}

namespace {

Vec3 clamp_to_pad(const PadFace& pad, const Vec3& x) {
    const Vec3 w = x - pad.center;
    const double a = std::clamp(w.dot(pad.u), -pad.half_u, pad.half_u);
    const double b = std::clamp(w.dot(pad.v), -pad.half_v, pad.half_v);
    return pad.center + a * pad.u + b * pad.v;
}

double point_pad_distance(const PadFace& pad, const Vec3& x) { return (x - clamp_to_pad(pad, x)).norm(); }

}  // namespace

double pad_object_distance(const PadFace& pad, const RigidObject& object, Vec3* point, Vec3* normal) {
    if (!(object.radius > 0)) throw InvalidArgument("object radius must be positive");
    Vec3 core;  // nearest point of the sphere center or cylinder axis
    if (object.kind == RigidObject::Kind::Sphere) {
        core = object.pose.translation();
    } else {
        if (!(object.length > 0)) throw InvalidArgument("cylinder length must be positive");
        const Vec3 a = object.pose * Vec3::Zero();
        const Vec3 d = object.pose.linear() * Vec3(object.length, 0, 0);
        auto D = [&](double t) { return point_pad_distance(pad, a + t * d); };
        // Distance from a moving point to a convex set is convex in t.
        const double g = 0.5 * (std::sqrt(5.0) - 1.0);
        double lo = 0, hi = 1;
        double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
        double f1 = D(x1), f2 = D(x2);
        while (hi - lo > 1e-12) {
            if (f1 <= f2) {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = D(x1);
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = D(x2);
            }
        }
        double t = 0.5 * (lo + hi);
        double best = D(t);
        for (double end : {0.0, 1.0})
            if (D(end) < best) {
                best = D(end);
                t = end;
            }
        // Lowest parameter attaining the minimum (flat stretches when the pad is parallel to the axis).
        const double flat = best * (1 + 1e-14) + 1e-300;
        if (D(0.0) <= flat) {
            t = 0.0;
        } else {
            double out = 0.0, in = t;
            while (in - out > 1e-13) {
                const double mid = 0.5 * (out + in);
                (D(mid) <= flat ? in : out) = mid;
            }
            t = in;
        }
        core = a + t * d;
        // Value-based flatness only locates the end of a flat stretch to about sqrt(eps); one
        // alternating projection lands on it exactly.
        const Vec3 p = clamp_to_pad(pad, core);
        const double t_snap = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        if (D(t_snap) <= flat) core = a + t_snap * d;
    }
    const Vec3 p = clamp_to_pad(pad, core);
    const Vec3 r = p - core;
    const double dist = r.norm();
    const Vec3 n = dist > 0 ? Vec3(r / dist) : Vec3(-pad.normal);
    if (point) *point = core + object.radius * n;
    if (normal) *normal = n;
    return dist - object.radius;
}

std::vector<RigidContact> find_contact_points(const Gripper& gripper, const std::vector<Pose>& link_poses,
                                              const RigidObject& object) {
    std::vector<RigidContact> out;
    const Vec3 com = object.center_of_mass();
    for (const auto& pad : pad_faces(gripper, link_poses)) {
        RigidContact c;
        const double d = pad_object_distance(pad, object, &c.world, &c.normal);
        if (d > kTouchTolerance) continue;
        if (d < -kMaxRigidPenetration)
            throw InvalidConfiguration("pad of link '" + gripper.links[pad.link].name + "' penetrates the object by " +
                                       std::to_string(-d) + " m");
        c.position = c.world - com;
        c.link = pad.link;
        c.link_name = gripper.links[pad.link].name;
        out.push_back(c);
    }
    return out;
}

std::vector<Vec3> pyramid_directions(const Vec3& normal, const Vec3& reference, int sides) {
    if (sides < 3) throw InvalidArgument("friction pyramid needs at least 3 sides");
    const Vec3 n = normal.normalized();
    Vec3 t1;
    for (const Vec3& r : {reference, Vec3(Vec3::UnitZ()), Vec3(Vec3::UnitX())}) {
        t1 = r - n * n.dot(r);
        if (t1.norm() > 1e-9 * std::max(1.0, r.norm())) break;
    }
    t1.normalize();
    const Vec3 t2 = n.cross(t1);
    std::vector<Vec3> d;
    for (int k = 0; k < sides; ++k) {
        const double th = 2.0 * std::numbers::pi * k / sides;
        d.push_back(std::cos(th) * t1 + std::sin(th) * t2);
    }
    return d;
}

double friction_angle(double mu) {
    if (!(mu >= 0)) throw InvalidArgument("friction coefficient must be non-negative");
    return std::atan(mu);
}

bool in_friction_cone(const Vec3& force, const Vec3& normal, double mu, double tolerance) {
    const double fn = -normal.dot(force);
    const Vec3 ft = force + normal * fn;
    return fn >= -tolerance && ft.norm() <= mu * fn + tolerance;
}

double cone_angle(const Vec3& force, const Vec3& normal) {
    const double fn = -normal.dot(force);
    const double ft = (force + normal * fn).norm();
    return std::atan2(ft, fn);
}

EquilibriumResult grasp_equilibrium(const std::vector<RigidContact>& contacts, double mu, double mass,
                                    const Vec3& gravity, const EquilibriumOptions& options) {
    if (!(mu >= 0)) throw InvalidArgument("friction coefficient must be non-negative");
    const int nc = static_cast<int>(contacts.size());
    const int ns = options.pyramid_sides;
    const bool prescribed = options.normal_forces.has_value();
    if (prescribed && static_cast<int>(options.normal_forces->size()) != nc)
        throw InvalidArgument("one prescribed normal force per contact required");

    const Vec3 load = mass * gravity + options.external_force;
    const Vec3 reference = options.reference.value_or(load);

    // Rows: force (3), moment (3), then one normalisation row per contact in prescribed mode.
    const int per = prescribed ? ns + 1 : ns;
    const int rows = 6 + (prescribed ? nc : 0);
    MatX A = MatX::Zero(rows, std::max(1, nc * per));
    VecX b = VecX::Zero(rows);
    b.head<3>() = -load;

    double scale = 1.0;
    if (prescribed)
        for (double f : *options.normal_forces) scale = std::max(scale, mu * std::abs(f));
    const double W = 1e3 * scale;

    std::vector<std::vector<Vec3>> dirs(nc);
    for (int i = 0; i < nc; ++i) {
        const auto& c = contacts[i];
        dirs[i] = pyramid_directions(c.normal, reference, ns);
        if (prescribed) {
            const double f = (*options.normal_forces)[i];
            if (!(f >= 0)) throw InvalidArgument("prescribed normal forces must be non-negative");
            const Vec3 fixed = -f * c.normal;
            b.head<3>() -= fixed;
            b.segment<3>(3) -= c.position.cross(fixed);
            for (int k = 0; k < ns; ++k) {
                const Vec3 g = mu * f * dirs[i][k];
                A.block<3, 1>(0, i * per + k) = g;
                A.block<3, 1>(3, i * per + k) = c.position.cross(g);
                A(6 + i, i * per + k) = W;
            }
            A(6 + i, i * per + ns) = W;
            b[6 + i] = W;
        } else {
            for (int k = 0; k < ns; ++k) {
                const Vec3 g = -c.normal + mu * dirs[i][k];
                A.block<3, 1>(0, i * per + k) = g;
                A.block<3, 1>(3, i * per + k) = c.position.cross(g);
            }
        }
    }

    const VecX x = nc > 0 ? nnls(A, b).x : VecX::Zero(1);

    EquilibriumResult r;
    Vec3 F = load, M = Vec3::Zero();
    for (int i = 0; i < nc; ++i) {
        const auto& c = contacts[i];
        Vec3 lambda = Vec3::Zero();
        if (prescribed) {
            const double f = (*options.normal_forces)[i];
            double sum = 0;
            for (int k = 0; k < ns; ++k) sum += x[i * per + k];
            const double shrink = sum > 1.0 ? 1.0 / sum : 1.0;
            lambda = -f * c.normal;
            for (int k = 0; k < ns; ++k) lambda += shrink * x[i * per + k] * mu * f * dirs[i][k];
        } else {
            for (int k = 0; k < ns; ++k) lambda += x[i * per + k] * (-c.normal + mu * dirs[i][k]);
        }
        r.forces.push_back(lambda);
        F += lambda;
        M += c.position.cross(lambda);
    }
    r.force_residual = F.norm();
    r.moment_residual = M.norm();
    r.feasible = r.force_residual < options.force_tolerance && r.moment_residual < options.moment_tolerance;
    return r;
}

VecX squeeze_distribution(const std::vector<RigidContact>& contacts, int reference) {
    const int nc = static_cast<int>(contacts.size());
    if (reference < 0 || reference >= nc) throw InvalidArgument("squeeze reference contact out of range");
    double L = 0;
    for (const auto& c : contacts) L = std::max(L, c.position.norm());
    L = std::max(L, 1e-12);
    const double W = 1e6;
    MatX A = MatX::Zero(nc + 6, nc);
    VecX b = VecX::Zero(nc + 6);
    A.topRows(nc).setIdentity();
    b.head(nc).setOnes();
    for (int i = 0; i < nc; ++i) {
        const Vec3 f = -contacts[i].normal;
        A.block<3, 1>(nc, i) = W * f;
        A.block<3, 1>(nc + 3, i) = (W / L) * contacts[i].position.cross(f);
    }
    VecX s = nnls(A, b).x;
    // The penalty weight leaves a balance residual of order 1/W. Project the positive entries onto
    // the exact null space of their wrench map; keep the penalty solution if that goes negative.
    std::vector<int> active;
    for (int i = 0; i < nc; ++i)
        if (s[i] > 0) active.push_back(i);
    if (!active.empty()) {
        MatX G(6, active.size());
        for (std::size_t k = 0; k < active.size(); ++k) {
            G.col(k).head<3>() = A.block<3, 1>(nc, active[k]);
            G.col(k).tail<3>() = A.block<3, 1>(nc + 3, active[k]);
        }
        const VecX ones = VecX::Ones(static_cast<Eigen::Index>(active.size()));
        const VecX exact = ones - G.transpose() * (G * G.transpose()).completeOrthogonalDecomposition().solve(G * ones);
        if (exact.minCoeff() > 0)
            for (std::size_t k = 0; k < active.size(); ++k) s[active[k]] = exact[k];
    }
    if (!(s[reference] > 1e-9))
        throw InvalidConfiguration("contact on link '" + contacts[reference].link_name +
                                   "' cannot take part in a balanced squeeze");
    return s / s[reference];
}

namespace {

bool feasible_with(const std::vector<RigidContact>& contacts, const VecX& normal, double mu, double mass,
                   const Vec3& gravity, const Vec3& external, const std::optional<Vec3>& reference) {
    EquilibriumOptions o;
    o.normal_forces = std::vector<double>(normal.data(), normal.data() + normal.size());
    o.external_force = external;
    o.reference = reference;
    return grasp_equilibrium(contacts, mu, mass, gravity, o).feasible;
}

}  // namespace

Closure close_fingers(const Gripper& gripper, const RigidObject& object, const ClosureOptions& options) {
    gripper.validate();
    Closure c;
    c.q = gripper.open_configuration();
    auto distance = [&](int link) {
        const auto poses = forward_kinematics(gripper, c.q);
        for (const auto& pad : pad_faces(gripper, poses))
            if (pad.link == link) return pad_object_distance(pad, object);
        return std::numeric_limits<double>::infinity();
    };
    // Parents are listed before children in any valid scene, but order explicitly by depth anyway.
    std::vector<int> order(gripper.links.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
    auto depth = [&](int i) {
        int d = 0;
        for (std::string p = gripper.links[i].parent; !p.empty(); p = gripper.links[gripper.index(p)].parent) ++d;
        return d;
    };
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return depth(a) < depth(b); });

    for (int i : order) {
        const Link& l = gripper.links[i];
        if (!l.pad || l.joint.type == JointType::Fixed) continue;
        if (distance(i) <= 0) continue;  // already touching when open
        c.q[i] = l.joint.upper;
        if (distance(i) > 0) continue;  // never reaches the object
        double open = l.joint.open, closed = l.joint.upper;
        while (std::abs(closed - open) > 1e-12) {
            c.q[i] = 0.5 * (open + closed);
            (distance(i) > 0 ? open : closed) = c.q[i];
        }
        c.q[i] = closed;
    }

    c.contacts = find_contact_points(gripper, forward_kinematics(gripper, c.q), object);
    if (c.contacts.empty()) throw InvalidConfiguration("no gripper pad reaches the object");
    for (std::size_t k = 0; k < c.contacts.size(); ++k)
        if (c.contacts[k].link_name == options.tightness_link) c.thumb_contact = static_cast<int>(k);
    if (c.thumb_contact < 0)
        throw InvalidConfiguration("tightness link '" + options.tightness_link + "' does not touch the object");
    c.squeeze = squeeze_distribution(c.contacts, c.thumb_contact);

    const double mu = options.friction;
    if (!feasible_with(c.contacts, 0.0 * c.squeeze, mu, object.mass, options.gravity, Vec3::Zero(), std::nullopt)) {
        double hi = std::max(1e-3, object.mass * options.gravity.norm() / std::max(mu, 1e-3));
        int doublings = 0;
        while (!feasible_with(c.contacts, hi * c.squeeze, mu, object.mass, options.gravity, Vec3::Zero(),
                              std::nullopt)) {
            hi *= 2;
            if (++doublings > 60) throw InvalidConfiguration("the grasp cannot hold the object at any squeeze");
        }
        double lo = 0;
        while (hi - lo > 1e-10 * hi) {
            const double mid = 0.5 * (lo + hi);
            (feasible_with(c.contacts, mid * c.squeeze, mu, object.mass, options.gravity, Vec3::Zero(), std::nullopt)
                 ? hi
                 : lo) = mid;
        }
        c.min_thumb_normal = hi;
    }
    return c;
}

GraspState grasp_at(const Closure& closure, double thumb_normal, const RigidObject& object,
                    const ClosureOptions& options) {
    GraspState s;
    s.q = closure.q;
    s.contacts = closure.contacts;
    const VecX f = thumb_normal * closure.squeeze;
    EquilibriumOptions o;
    o.normal_forces = std::vector<double>(f.data(), f.data() + f.size());
    const auto r = grasp_equilibrium(s.contacts, options.friction, object.mass, options.gravity, o);
    for (std::size_t i = 0; i < s.contacts.size(); ++i) s.contacts[i].force = r.forces[i];
    s.thumb_normal = thumb_normal;
    s.total_normal = f.sum();
    s.feasible = r.feasible;
    s.force_residual = r.force_residual;
    s.moment_residual = r.moment_residual;
    return s;
}

std::vector<GraspState> close_gripper(const Gripper& gripper, const RigidObject& object,
                                      const std::vector<double>& actuation, const ClosureOptions& options) {
    for (std::size_t i = 1; i < actuation.size(); ++i)
        if (actuation[i] < actuation[i - 1]) throw InvalidArgument("actuation levels must be non-decreasing");
    for (double a : actuation)
        if (!(a >= 0)) throw InvalidArgument("actuation levels must be non-negative");
    const Closure c = close_fingers(gripper, object, options);
    std::vector<GraspState> out;
    for (std::size_t i = 0; i < actuation.size(); ++i) {
        auto s = grasp_at(c, c.min_thumb_normal + options.actuation_gain * actuation[i], object, options);
        s.level = static_cast<int>(i) + 1;
        s.actuation = actuation[i];
        out.push_back(std::move(s));
    }
    return out;
}

double rigid_pull_test(const GraspState& state, const Vec3& direction, double mu, double mass, const Vec3& gravity) {
    if (!(direction.norm() > 0)) throw InvalidArgument("pull direction must be nonzero");
    const Vec3 u = direction.normalized();
    VecX f(static_cast<Eigen::Index>(state.contacts.size()));
    for (std::size_t i = 0; i < state.contacts.size(); ++i)
        f[static_cast<Eigen::Index>(i)] = state.contacts[i].normal_force();
    f = f.cwiseMax(0.0);
    auto ok = [&](double P) { return feasible_with(state.contacts, f, mu, mass, gravity, P * u, u); };
    if (!ok(0.0)) return 0.0;
    double lo = 0.0, hi = mu * f.sum() + mass * gravity.norm() + 1.0;
    for (int i = 0; ok(hi); ++i) {
        lo = hi;
        hi *= 2;
        if (i > 60) return hi;
    }
    while (hi - lo > 1e-10 * hi) {
        const double mid = 0.5 * (lo + hi);
        (ok(mid) ? lo : hi) = mid;
    }
    return lo;
}

}  // namespace softgrasp
