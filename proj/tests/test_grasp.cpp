#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numbers>
#include <random>

#include "softgrasp/errors.hpp"
#include "softgrasp/grasp.hpp"
#include "softgrasp/nnls.hpp"

using namespace softgrasp;

namespace {

constexpr double kPi = std::numbers::pi;

// Three fingers around the x axis (thumb at 180 deg), each a prismatic proximal link closing
// radially and a revolute distal link.
Gripper three_finger_hand(double r_open = 0.06) {
    Gripper g;
    const std::pair<const char*, double> fingers[] = {{"thumb", kPi}, {"index", kPi / 3}, {"middle", -kPi / 3}};
    for (const auto& [name, th] : fingers) {
        Link p;
        p.name = std::string(name) + "_proximal";
        p.origin = make_pose(Vec3(0, -r_open * std::sin(th), r_open * std::cos(th)), Vec3(th, 0, 0));
        p.joint = {JointType::Prismatic, -Vec3::UnitZ(), 0.0, 0.03, 0.0};
        p.pad = Pad{Vec3(0, 0, 0.005), Vec3(0.04, 0.02, 0.01), -Vec3::UnitZ()};
        Link d;
        d.name = std::string(name) + "_distal";
        d.parent = p.name;
        d.origin = make_pose(Vec3(0, 0.011, 0), Vec3::Zero());
        d.joint = {JointType::Revolute, -Vec3::UnitX(), 0.0, 1.2, 0.0};
        d.pad = Pad{Vec3(0, 0.012, 0.005), Vec3(0.04, 0.02, 0.01), -Vec3::UnitZ()};
        g.links.push_back(p);
        g.links.push_back(d);
    }
    return g;
}

RigidContact contact_at(const Vec3& position, const Vec3& outward) {
    RigidContact c;
    c.position = position;
    c.world = position;
    c.normal = outward.normalized();
    return c;
}

std::vector<RigidContact> antipodal_y(double r = 0.05) {
    return {contact_at(Vec3(0, r, 0), Vec3::UnitY()), contact_at(Vec3(0, -r, 0), -Vec3::UnitY())};
}

bool feasible_squeeze(const std::vector<RigidContact>& c, double f, double mu, double mass) {
    EquilibriumOptions o;
    o.normal_forces = std::vector<double>(c.size(), f);
    return grasp_equilibrium(c, mu, mass, Vec3(0, 0, -9.81), o).feasible;
}

// Brute-force NNLS oracle: best least-squares solution over every support set with a positive solution.
double nnls_oracle(const MatX& A, const VecX& b) {
    const int n = static_cast<int>(A.cols());
    double best = b.norm();
    for (int mask = 1; mask < (1 << n); ++mask) {
        std::vector<int> cols;
        for (int j = 0; j < n; ++j)
            if (mask & (1 << j)) cols.push_back(j);
        MatX S(A.rows(), static_cast<Eigen::Index>(cols.size()));
        for (std::size_t k = 0; k < cols.size(); ++k) S.col(static_cast<Eigen::Index>(k)) = A.col(cols[k]);
        const VecX z = S.colPivHouseholderQr().solve(b);
        if ((z.array() >= 0).all()) best = std::min(best, (S * z - b).norm());
    }
    return best;
}

}  // namespace

TEST_CASE("nnls matches brute-force enumeration") {
    std::mt19937 rng(5);
    std::normal_distribution<double> d;
    for (int trial = 0; trial < 40; ++trial) {
        const int m = 3 + trial % 4, n = 2 + trial % 5;
        MatX A(m, n);
        VecX b(m);
        for (int i = 0; i < A.size(); ++i) A.data()[i] = d(rng);
        for (int i = 0; i < m; ++i) b[i] = d(rng);
        const auto r = nnls(A, b);
        CHECK(r.converged);
        CHECK((r.x.array() >= 0).all());
        CHECK(r.residual == doctest::Approx(nnls_oracle(A, b)).epsilon(1e-9));
    }
    MatX A(2, 2);
    A << 1, 0, 0, 1;
    CHECK((nnls(A, Vec3(-1, 2, 0).head<2>()).x - Eigen::Vector2d(0, 2)).norm() < 1e-15);
}

TEST_CASE("forward kinematics") {
    Gripper g;
    Link a;
    a.name = "a";
    a.origin = make_pose(Vec3(1, 0, 0), Vec3::Zero());
    a.joint = {JointType::Revolute, Vec3::UnitZ(), -kPi, kPi, 0.0};
    Link b;
    b.name = "b";
    b.parent = "a";
    b.origin = make_pose(Vec3(0.5, 0, 0), Vec3(0.1, 0.2, 0.3));
    b.joint = {JointType::Prismatic, Vec3::UnitX(), 0.0, 0.2, 0.0};
    g.links = {b, a};  // child listed first on purpose
    g.base = make_pose(Vec3(0, 0, 2), Vec3(0, 0, 0.4));
    g.validate();

    auto T = forward_kinematics(g, Eigen::Vector2d(0, 0));
    CHECK((T[1].matrix() - (g.base * a.origin).matrix()).norm() < 1e-15);
    CHECK((T[0].matrix() - (g.base * a.origin * b.origin).matrix()).norm() < 1e-15);

    // 90 degrees about z rotates the child frame by 90 degrees.
    T = forward_kinematics(g, Eigen::Vector2d(0, kPi / 2));
    const Mat3 rel = (g.base * a.origin).linear().transpose() * T[1].linear();
    CHECK((rel * Vec3::UnitX() - Vec3::UnitY()).norm() < 1e-15);

    // Independent 4x4 composition.
    auto rz = [](double th) {
        Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
        m(0, 0) = std::cos(th);
        m(0, 1) = -std::sin(th);
        m(1, 0) = std::sin(th);
        m(1, 1) = std::cos(th);
        return m;
    };
    Eigen::Matrix4d slide = Eigen::Matrix4d::Identity();
    slide(0, 3) = 0.15;
    const Eigen::Matrix4d expected = g.base.matrix() * a.origin.matrix() * rz(0.7) * b.origin.matrix() * slide;
    T = forward_kinematics(g, Eigen::Vector2d(0.15, 0.7));
    CHECK((T[0].matrix() - expected).cwiseAbs().maxCoeff() < 1e-14);

    CHECK_THROWS_AS(forward_kinematics(g, Eigen::Vector2d(0.3, 0)), InvalidArgument);
    CHECK_THROWS_AS(forward_kinematics(g, Eigen::Vector2d(0.0, 4.0)), InvalidArgument);

    Gripper cyc = g;
    cyc.links[1].parent = "b";
    CHECK_THROWS_AS(cyc.validate(), InvalidArgument);
    Gripper axis = g;
    axis.links[1].joint.axis = Vec3(0, 0, 2);
    CHECK_THROWS_AS(axis.validate(), InvalidArgument);
}

TEST_CASE("pad contact against a sphere") {
    Gripper g;
    Link l;
    l.name = "pad";
    l.pad = Pad{Vec3(0, 0, 0.055), Vec3(0.02, 0.02, 0.01), -Vec3::UnitZ()};  // face at z = 0.05
    g.links = {l};
    RigidObject sphere;
    sphere.radius = 0.05;
    auto c = find_contact_points(g, forward_kinematics(g, VecX::Zero(1)), sphere);
    REQUIRE(c.size() == 1);
    CHECK((c[0].world - Vec3(0, 0, 0.05)).norm() < 1e-15);
    CHECK((c[0].normal - Vec3::UnitZ()).norm() < 1e-15);
    CHECK(c[0].link_name == "pad");

    g.base = make_pose(Vec3(0, 0, 0.001), Vec3::Zero());
    CHECK(find_contact_points(g, forward_kinematics(g, VecX::Zero(1)), sphere).empty());

    g.base = make_pose(Vec3(0, 0, -0.01), Vec3::Zero());
    CHECK_THROWS_AS(find_contact_points(g, forward_kinematics(g, VecX::Zero(1)), sphere), InvalidConfiguration);
}

TEST_CASE("pad contact against a cylinder uses the lowest parameter on a flat stretch") {
    Gripper g;
    Link l;
    l.name = "pad";
    l.pad = Pad{Vec3(0.2, 0, 0.055), Vec3(0.04, 0.02, 0.01), -Vec3::UnitZ()};
    g.links = {l};
    RigidObject cyl;
    cyl.kind = RigidObject::Kind::Cylinder;
    cyl.radius = 0.05;
    cyl.length = 0.3;
    const auto c = find_contact_points(g, forward_kinematics(g, VecX::Zero(1)), cyl);
    REQUIRE(c.size() == 1);
    // The flat stretch ends where the distance grows quadratically, so its edge is located to ~1e-8.
    CHECK(std::abs(c[0].world.x() - 0.18) < 1e-7);
    CHECK(std::abs(c[0].world.z() - 0.05) < 1e-12);
    CHECK((c[0].normal - Vec3::UnitZ()).norm() < 1e-6);
    CHECK((c[0].position - (c[0].world - Vec3(0.15, 0, 0))).norm() < 1e-15);
}

TEST_CASE("friction cone helpers") {
    CHECK(friction_angle(0.5) == doctest::Approx(std::atan(0.5)));
    double prev = -1;
    for (double mu = 0; mu < 2; mu += 0.1) {
        CHECK(friction_angle(mu) > prev);
        prev = friction_angle(mu);
    }
    const Vec3 n = Vec3::UnitZ();
    std::mt19937 rng(3);
    std::uniform_real_distribution<double> d(-1, 1);
    for (int i = 0; i < 500; ++i) {
        const Vec3 f(d(rng), d(rng), -std::abs(d(rng)));
        const double mu = 0.5;
        const bool by_angle = cone_angle(f, n) <= friction_angle(mu) + 1e-9;
        CHECK(in_friction_cone(f, n, mu, 0.0) == (cone_angle(f, n) <= friction_angle(mu)));
        CHECK((in_friction_cone(f, n, mu, 1e-12) || !by_angle) == true);
    }
    const auto dirs = pyramid_directions(n, Vec3(1, 1, 5));
    REQUIRE(dirs.size() == 8);
    CHECK((dirs[0] - Vec3(1, 1, 0).normalized()).norm() < 1e-15);
    for (const auto& v : dirs) CHECK(std::abs(v.dot(n)) < 1e-15);
    CHECK(std::abs(pyramid_directions(n, n)[0].dot(n)) < 1e-15);
}

TEST_CASE("two antipodal contacts: squeeze threshold") {
    // Oracle: each contact carries half the weight through friction, so f_n >= m g / (2 mu).
    const double mass = 1.0, mu = 0.5;
    const double oracle = mass * 9.81 / 2 / mu;
    CHECK(oracle == doctest::Approx(9.81));
    const auto c = antipodal_y();
    double lo = 0, hi = 100;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (feasible_squeeze(c, mid, mu, mass) ? hi : lo) = mid;
    }
    CHECK(std::abs(hi - oracle) / oracle < 0.02);
    CHECK_FALSE(feasible_squeeze(c, 0.97 * oracle, mu, mass));
    CHECK(feasible_squeeze(c, 1.03 * oracle, mu, mass));

    EquilibriumOptions o;
    o.normal_forces = std::vector<double>{12.0, 12.0};
    const auto r = grasp_equilibrium(c, mu, mass, Vec3(0, 0, -9.81), o);
    REQUIRE(r.feasible);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(in_friction_cone(r.forces[i], c[i].normal, mu));
        CHECK(cone_angle(r.forces[i], c[i].normal) <= friction_angle(mu) + 1e-9);
        CHECK(-c[i].normal.dot(r.forces[i]) == doctest::Approx(12.0).epsilon(1e-9));
    }
}

TEST_CASE("degenerate and trivial equilibria") {
    CHECK_FALSE(grasp_equilibrium(antipodal_y(), 0.0, 1.0, Vec3(0, 0, -9.81)).feasible);
    CHECK_FALSE(grasp_equilibrium({}, 0.5, 1.0, Vec3(0, 0, -9.81)).feasible);

    std::vector<RigidContact> three;
    for (int k = 0; k < 3; ++k) {
        const double th = 2 * kPi * k / 3;
        const Vec3 n(0, std::cos(th), std::sin(th));
        three.push_back(contact_at(0.05 * n, n));
    }
    const auto r = grasp_equilibrium(three, 0.5, 1.0, Vec3::Zero());
    CHECK(r.feasible);
    for (const auto& f : r.forces) CHECK(f.norm() == 0.0);
}

TEST_CASE("free-mode equilibrium on a three-finger sphere grasp") {
    const Gripper hand = three_finger_hand();
    RigidObject sphere;
    sphere.radius = 0.05;
    sphere.mass = 0.5;
    ClosureOptions opt;
    opt.gravity = Vec3(0, 0, -9.81);
    opt.friction = 0.5;
    const Closure c = close_fingers(hand, sphere, opt);
    CHECK(c.contacts.size() >= 3);
    const auto r = grasp_equilibrium(c.contacts, 0.5, sphere.mass, opt.gravity);
    CHECK(r.feasible);
    CHECK(r.force_residual < 1e-6);
    CHECK(r.moment_residual < 1e-6);
    for (std::size_t i = 0; i < c.contacts.size(); ++i) CHECK(in_friction_cone(r.forces[i], c.contacts[i].normal, 0.5));
}

TEST_CASE("close_gripper on the sphere") {
    const Gripper hand = three_finger_hand();
    RigidObject sphere;
    sphere.radius = 0.05;
    sphere.mass = 0.5;
    ClosureOptions opt;
    opt.gravity = Vec3(0, 0, -9.81);
    opt.friction = 0.5;

    std::vector<double> levels;
    for (int i = 0; i < 13; ++i) levels.push_back(3.0 * i);
    const auto states = close_gripper(hand, sphere, levels, opt);
    REQUIRE(states.size() == 13);
    for (std::size_t i = 0; i < states.size(); ++i) {
        CHECK(states[i].level == static_cast<int>(i) + 1);
        CHECK(states[i].feasible);
        CHECK(states[i].force_residual < 1e-6);
        CHECK(states[i].moment_residual < 1e-6);
        if (i > 0) CHECK(states[i].thumb_normal >= states[i - 1].thumb_normal);
        for (const auto& c : states[i].contacts) CHECK(in_friction_cone(c.force, c.normal, 0.5));
    }
    // Actuation 0 is the loosest feasible grasp: a slightly smaller squeeze drops the object.
    const Closure cl = close_fingers(hand, sphere, opt);
    CHECK(states[0].thumb_normal == doctest::Approx(cl.min_thumb_normal));
    CHECK_FALSE(grasp_at(cl, 0.98 * cl.min_thumb_normal, sphere, opt).feasible);

    // Zero gravity: the symmetric squeeze loads every finger equally.
    ClosureOptions free = opt;
    free.gravity = Vec3::Zero();
    const auto sym = close_gripper(hand, sphere, {10.0}, free);
    std::vector<double> proximal;
    for (const auto& c : sym[0].contacts)
        if (c.link_name.find("proximal") != std::string::npos) proximal.push_back(c.normal_force());
    REQUIRE(proximal.size() == 3);
    CHECK(std::abs(proximal[0] - proximal[1]) < 1e-6);
    CHECK(std::abs(proximal[0] - proximal[2]) < 1e-6);

    CHECK_THROWS_AS(close_gripper(hand, sphere, {2.0, 1.0}, opt), InvalidArgument);
    RigidObject far = sphere;
    far.pose = make_pose(Vec3(1, 0, 0), Vec3::Zero());
    CHECK_THROWS_AS(close_gripper(hand, far, {1.0}, opt), InvalidConfiguration);
}

TEST_CASE("rigid pull bound") {
    // Four contacts around the x axis, normals perpendicular to the pull.
    std::vector<RigidContact> c;
    for (int k = 0; k < 4; ++k) {
        const double th = kPi / 2 * k;
        const Vec3 n(0, std::cos(th), std::sin(th));
        c.push_back(contact_at(0.05 * n, n));
        c.back().force = -10.0 * n;
    }
    GraspState s;
    s.contacts = c;
    CHECK(rigid_pull_test(s, Vec3::UnitX(), 0.25, 0.0, Vec3::Zero()) == doctest::Approx(10.0).epsilon(1e-6));
    CHECK(rigid_pull_test(s, Vec3::UnitX(), 0.0, 0.0, Vec3::Zero()) < 1e-6);

    GraspState twice = s;
    for (auto& k : twice.contacts) k.force *= 2;
    CHECK(rigid_pull_test(twice, Vec3::UnitX(), 0.25, 0.0, Vec3::Zero()) ==
          doctest::Approx(2 * rigid_pull_test(s, Vec3::UnitX(), 0.25, 0.0, Vec3::Zero())).epsilon(1e-6));
}

TEST_CASE("rotating the scene rotates the solved forces") {
    const Mat3 R = Eigen::AngleAxisd(1.3, Vec3(0.2, 1, -0.4).normalized()).toRotationMatrix();
    std::vector<RigidContact> c, rc;
    const Vec3 pts[] = {Vec3(0.05, 0.01, 0), Vec3(-0.03, 0.04, 0.01), Vec3(0.0, -0.045, 0.02)};
    for (const auto& p : pts) {
        c.push_back(contact_at(p, p));
        rc.push_back(contact_at(R * p, R * p));
    }
    EquilibriumOptions o, ro;
    o.normal_forces = std::vector<double>{8, 9, 10};
    o.reference = Vec3::UnitZ();
    ro.normal_forces = o.normal_forces;
    ro.reference = R * Vec3::UnitZ();
    const Vec3 g(0, 0, -9.81);
    const auto a = grasp_equilibrium(c, 0.6, 0.1, g, o);
    const auto b = grasp_equilibrium(rc, 0.6, 0.1, R * g, ro);
    REQUIRE(a.forces.size() == b.forces.size());
    CHECK(a.feasible == b.feasible);
    CHECK(std::abs(a.force_residual - b.force_residual) < 1e-9);
    for (std::size_t i = 0; i < a.forces.size(); ++i) CHECK((b.forces[i] - R * a.forces[i]).norm() < 1e-6);
}
