#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "softgrasp/errors.hpp"
#include "softgrasp/pipeline.hpp"

using namespace softgrasp;

namespace {

constexpr double kPi = std::numbers::pi;

Material soft(double damping = 1000.0) {
    Material m;
    m.young_modulus = 1e5;
    m.poisson_ratio = 0.3;
    m.density = 1000.0;
    m.mass_damping = damping;
    return m;
}

// 4 x 4 x 2 cm block on [0, 0.04]^2 x [0, 0.02] with its base clamped.
struct Block {
    std::shared_ptr<const FemModel> model;
    Constraints base;
};

Block block() {
    Block b;
    b.model = std::make_shared<const FemModel>(generate_box_mesh(Vec3(0.04, 0.04, 0.02), {4, 4, 2}), MaterialTable{{0, soft()}});
    const Mesh& m = b.model->mesh();
    for (int n = 0; n < m.nodes.cols(); ++n)
        if (m.nodes(2, n) == 0.0) b.base.fix_node(n);
    return b;
}

// One flat 6 x 6 cm pad, 1 mm above the block top, pressing down along -z.
Gripper press() {
    Gripper g;
    Link l;
    l.name = "pad";
    l.origin = make_pose(Vec3(0.02, 0.02, 0.021), Vec3::Zero());
    l.joint = {JointType::Prismatic, -Vec3::UnitZ(), 0.0, 0.01, 0.0};
    l.pad = Pad{Vec3(0, 0, 0.005), Vec3(0.06, 0.06, 0.01), -Vec3::UnitZ()};
    g.links.push_back(l);
    return g;
}

VecX joint(double q) { return VecX::Constant(1, q); }

ContactLaw law(double mu) { return {2000.0, 2000.0, mu}; }

SimOptions quick() {
    SimOptions o;
    o.max_time = 5.0;
    o.output_interval = 0.01;
    return o;
}

struct PressRun {
    ContactSimulation sim;
    IndentationResult indented;
    PullHistory pull;
};

// Closure from touch (q = 1 mm) to touch + depth over 50 ms, relaxation, then a pull along +x.
PressRun press_run(double depth, double mu, double distance) {
    const Block b = block();
    const Gripper g = press();
    const auto traj = export_hand_trajectory(g, joint(0.001), joint(0.001 + depth), 0.05, 0.0,
                                             {Vec3::UnitX(), distance, 0.1}, 0.01);
    ContactSimulation sim(b.model, b.base, Vec3::Zero(), gripper_bodies(g), trajectory_schedule(g, traj), law(mu),
                          quick());
    const IndentationResult ind = run_indentation(sim, 0.05);
    PullHistory h = run_pull(sim, 0.15, Vec3::UnitX(), "pad", 0.002);
    return {sim, ind, h};
}

// Uniform stiffness chain: the body as one spring k_b = E A / H in series with the penalty springs of
// the n nodes under the pad. Returns the compression of the body under a plate advance d.
double chain_indentation(double d, double k_node, int n_nodes, double E, double area, double height) {
    const double k_contact = k_node * n_nodes;
    const double k_body = E * area / height;
    return d * k_contact / (k_contact + k_body);
}

Gripper three_fingers(double r_open) {
    Gripper g;
    const std::pair<const char*, double> fingers[] = {{"thumb", kPi}, {"index", kPi / 3}, {"middle", -kPi / 3}};
    for (const auto& [name, th] : fingers) {
        Link p;
        p.name = std::string(name) + "_proximal";
        p.origin = make_pose(Vec3(0, -r_open * std::sin(th), r_open * std::cos(th)), Vec3(th, 0, 0));
        p.joint = {JointType::Prismatic, -Vec3::UnitZ(), 0.0, 0.03, 0.0};
        p.pad = Pad{Vec3(0, 0, 0.005), Vec3(0.04, 0.02, 0.01), -Vec3::UnitZ()};
        g.links.push_back(p);
    }
    return g;
}

double max_abs(const NodalField& f) { return f.size() ? f.cwiseAbs().maxCoeff() : 0.0; }

}  // namespace

TEST_CASE("contact force projection") {
    auto p = project_contact_force(Vec3(1, 2, 3), Vec3(0, 0, 1));
    CHECK((p.normal - Vec3(0, 0, 3)).norm() == 0.0);
    CHECK((p.tangential - Vec3(1, 2, 0)).norm() == 0.0);

    const Vec3 n = Vec3(1, -2, 2).normalized();
    CHECK(project_contact_force(4.0 * n, n).tangential.norm() < 1e-15);
    CHECK(project_contact_force(n.cross(Vec3::UnitX()), n).normal.norm() < 1e-15);
    CHECK_THROWS_AS(project_contact_force(Vec3(1, 0, 0), Vec3(0, 0, 2)), InvalidArgument);

    std::mt19937 rng(3);
    std::normal_distribution<double> d;
    for (int i = 0; i < 200; ++i) {
        const Vec3 lambda(d(rng), d(rng), d(rng));
        const Vec3 m = Vec3(d(rng), d(rng), d(rng)).normalized();
        const auto q = project_contact_force(lambda, m);
        CHECK((q.normal + q.tangential - lambda).norm() < 1e-12 * lambda.norm());
        CHECK(std::abs(q.normal.dot(q.tangential)) < 1e-12 * lambda.squaredNorm());
    }
}

TEST_CASE("hand trajectory phases") {
    Gripper g = press();
    g.base = make_pose(Vec3(0.1, 0, 0), Vec3(0, 0, 0.3));
    const auto traj = export_hand_trajectory(g, joint(0.0), joint(0.004), 0.3, 0.1, {Vec3(2, 0, 0), 0.02, 0.5}, 0.05);
    const auto& s = traj.samples();

    SUBCASE("pull displaces the base by the pull distance") {
        CHECK((s.back().position - s.front().position - Vec3(0.02, 0, 0)).norm() < 1e-15);
        CHECK(s.back().q[0] == doctest::Approx(0.004));
        CHECK((traj.base_pose(0.2).linear() - g.base.linear()).norm() < 1e-12);
    }
    SUBCASE("times strictly increase and span the run") {
        CHECK(s.front().t == 0.0);
        CHECK(s.back().t == doctest::Approx(0.9).epsilon(1e-15));
        for (std::size_t i = 1; i < s.size(); ++i) CHECK(s[i].t > s[i - 1].t);
        bool closure_end = false, pull_start = false;
        for (const auto& x : s) {
            closure_end |= x.t == 0.3;
            pull_start |= x.t == 0.3 + 0.1;
        }
        CHECK(closure_end);
        CHECK(pull_start);
    }
    SUBCASE("linear closure") {
        CHECK(traj.at(0.15).q[0] == doctest::Approx(0.002).epsilon(1e-12));
        CHECK(traj.at(0.35).q[0] == doctest::Approx(0.004));
        CHECK((traj.at(0.65).position - Vec3(0.11, 0, 0)).norm() < 1e-12);
        for (const auto& x : s) CHECK((x.rotation.toRotationMatrix().transpose() * x.rotation.toRotationMatrix() -
                                       Mat3::Identity()).norm() < 1e-9);
    }
    SUBCASE("zero pull distance holds the base") {
        const auto hold = export_hand_trajectory(g, joint(0.0), joint(0.004), 0.3, 0.0, {Vec3::UnitX(), 0.0, 0.5}, 0.05);
        for (const auto& x : hold.samples()) CHECK((x.position - g.base.translation()).norm() == 0.0);
    }
    SUBCASE("zero durations are rejected") {
        CHECK_THROWS_AS(export_hand_trajectory(g, joint(0), joint(0), 0.0, 0.0, {}, 0.05), InvalidArgument);
        CHECK_THROWS_AS(export_hand_trajectory(g, joint(0), joint(0), 0.3, 0.0, {Vec3::UnitX(), 0.02, 0.0}, 0.05),
                        InvalidArgument);
    }
}

TEST_CASE("gripper surfaces follow forward kinematics of the trajectory") {
    const Block b = block();
    Gripper g = three_fingers(0.08);
    g.base = make_pose(Vec3(0.02, 0.02, 0.5), Vec3(0.1, 0.2, 0.3));  // far from the block
    VecX q0 = VecX::Zero(3), q1 = VecX::Constant(3, 0.02);
    const auto traj = export_hand_trajectory(g, q0, q1, 0.02, 0.01, {Vec3(1, 1, 0), 0.01, 0.02}, 0.005);
    ContactSimulation sim(b.model, b.base, Vec3::Zero(), gripper_bodies(g), trajectory_schedule(g, traj), law(0.5),
                          quick());
    for (const auto& s : traj.samples()) {
        sim.advance_to(s.t);
        Gripper posed = g;
        posed.base = traj.base_pose(s.t);
        const auto expected = pad_surfaces(posed, forward_kinematics(posed, s.q));
        const auto actual = sim.surfaces();
        REQUIRE(actual.size() == expected.size());
        double err = 0;
        for (std::size_t k = 0; k < actual.size(); ++k)
            for (std::size_t v = 0; v < actual[k].vertices.size(); ++v)
                err = std::max(err, (actual[k].vertices[v] - expected[k].vertices[v]).norm());
        CHECK(err < 1e-12);
    }
    CHECK(max_abs(sim.state().u) == 0.0);
}

TEST_CASE("indentation") {
    SUBCASE("fingers that never touch leave the body at rest") {
        const Block b = block();
        const Gripper g = press();
        const auto traj = export_hand_trajectory(g, joint(0.0), joint(0.0005), 0.05, 0.0, {Vec3::UnitX(), 0.0, 0.1}, 0.01);
        ContactSimulation sim(b.model, b.base, Vec3::Zero(), gripper_bodies(g), trajectory_schedule(g, traj), law(0.5),
                              quick());
        run_indentation(sim, 0.05);
        CHECK(max_abs(sim.state().u) < 1e-9);
    }
    SUBCASE("deeper closure indents more, as the spring chain predicts") {
        double previous = 0;
        for (double depth : {0.0005, 0.001, 0.002}) {
            const PressRun r = press_run(depth, 0.5, 0.0);
            const double oracle = chain_indentation(depth, 2000.0, 25, 1e5, 0.04 * 0.04, 0.02);
            CHECK(r.indented.max_indentation > previous);
            CHECK(r.indented.max_indentation == doctest::Approx(oracle).epsilon(0.1));
            previous = r.indented.max_indentation;
            // Penalty bound on the penetration and the cone invariant at the Indented State.
            const KktReport kkt = kkt_residuals(r.sim.contacts(), r.sim.relative_velocity(), 0.5);
            double fmax = 0;
            for (const auto& c : r.sim.contacts()) fmax = std::max(fmax, c.normal_force());
            CHECK(kkt.max_penetration <= fmax / 2000.0 + 1e-12);
            CHECK(kkt.cone_violations == 0);
            CHECK(kkt.min_normal_force >= 0.0);
        }
    }
    SUBCASE("symmetric three-finger squeeze of a free sphere is self-equilibrated") {
        auto model = std::make_shared<const FemModel>(generate_sphere_mesh(0.05, 4), MaterialTable{{0, soft(300.0)}});
        const Mesh& m = model->mesh();
        const Gripper g = three_fingers(0.06);
        const auto traj = export_hand_trajectory(g, VecX::Constant(3, 0.01), VecX::Constant(3, 0.014), 0.1, 0.0,
                                                 {Vec3::UnitX(), 0.0, 0.1}, 0.02);
        // Mass damping resists any residual drift; a tight energy criterion keeps that force negligible.
        SimOptions o = quick();
        o.energy_ratio = 1e-8;
        o.window = 50;
        ContactSimulation sim(model, {}, Vec3::Zero(), gripper_bodies(g), trajectory_schedule(g, traj),
                              {5e3, 5e3, 0.5}, o);
        run_indentation(sim, 0.1);
        Vec3 net = Vec3::Zero();
        for (const auto& c : sim.contacts()) net += c.force;
        double max_pad = 0;
        for (const auto& [name, f] : sim.link_forces()) max_pad = std::max(max_pad, f.normal_sum);
        CHECK(max_pad > 0.1);
        CHECK(net.norm() < 0.01 * max_pad);

        const StrainReport rep = strain_report(m, sim.state().u, sim.positions(), [&] {
            std::vector<int> nodes;
            for (const auto& c : sim.contacts())
                if (c.gap <= 0) nodes.push_back(c.node_id);
            return nodes;
        }());
        CHECK(rep.contact_elements > 0);
        CHECK(rep.contact_mean > rep.far_mean);
    }
}

TEST_CASE("pull") {
    SUBCASE("frictionless contact offers no lateral resistance and slips") {
        const PressRun r = press_run(0.001, 0.0, 0.005);
        const PullSample& end = r.pull.samples.back();
        CHECK(end.total_normal > 0.5);
        CHECK(end.lateral.norm() < 1e-3 * end.total_normal);
        CHECK(end.base_displacement == doctest::Approx(0.005));
        const SlipResult slip = detect_slip(r.pull.samples, 1e-3);
        CHECK(slip.slipped);
        CHECK(slip.onset < 0.005);
        CHECK_FALSE(detect_slip(r.pull.samples, std::numeric_limits<double>::infinity()).slipped);
    }
    SUBCASE("a high-friction grasp sticks") {
        const PressRun r = press_run(0.002, 5.0, 0.001);
        CHECK_FALSE(detect_slip(r.pull.samples, 1e-3).slipped);
        CHECK(r.pull.samples.back().lateral.x() > 0.0);  // the pad drags the top of the body along +x
    }
    SUBCASE("a frozen gripper keeps the indentation forces") {
        const PressRun r = press_run(0.001, 0.5, 0.0);
        const PullSample& a = r.pull.samples.front();
        const PullSample& b = r.pull.samples.back();
        CHECK(b.total_normal == doctest::Approx(a.total_normal).epsilon(0.005));
        CHECK((b.lateral - a.lateral).norm() < 0.005 * a.total_normal);
    }
}

TEST_CASE("slip detection on synthetic histories") {
    std::vector<PullSample> h(5);
    for (int i = 0; i < 5; ++i) {
        h[i].base_displacement = 0.001 * i;
        h[i].mean_slip = 0.0004 * i;
    }
    CHECK_FALSE(detect_slip(h, 0.002).slipped);
    const SlipResult s = detect_slip(h, 0.001);
    CHECK(s.slipped);
    CHECK(s.onset == 0.003);
    CHECK_FALSE(detect_slip(h, std::numeric_limits<double>::infinity()).slipped);
}

TEST_CASE("strain report") {
    const Mesh m = generate_box_mesh(Vec3(0.03, 0.02, 0.01), {3, 2, 1});
    SUBCASE("undeformed") {
        const NodalField u = NodalField::Zero(3, m.nodes.cols());
        const auto r = strain_report(m, u, m.nodes, {});
        for (double e : r.e_max) CHECK(e == 0.0);
        CHECK(r.contact_elements == 0);
    }
    SUBCASE("uniform uniaxial stretch 1.2") {
        NodalField u = NodalField::Zero(3, m.nodes.cols());
        u.row(0) = 0.2 * m.nodes.row(0);
        const auto r = strain_report(m, u, m.nodes + u, {0});
        for (double e : r.e_max) CHECK(std::abs(e - 0.2) < 1e-9);
        CHECK(r.global_max == doctest::Approx(0.2));
        CHECK(r.contact_elements >= 1);  // the element holding node 0
    }
}

TEST_CASE("level matching") {
    auto row = [](const char* engine, int level, double thumb, double total, double lateral) {
        SweepRow r;
        r.engine = engine;
        r.level = level;
        r.thumb_normal = thumb;
        r.total_normal = total;
        r.lateral = lateral;
        return r;
    };
    const std::vector<SweepRow> fem{row("fem", 1, 0.0, 0.0, 0.0), row("fem", 2, 10.0, 30.0, 15.0),
                                    row("fem", 3, 20.0, 60.0, 40.0)};
    const std::vector<SweepRow> rigid{row("rigid", 1, 9.5, 28.5, 8.55), row("rigid", 2, 10.6, 31.8, 9.54),
                                      row("rigid", 3, 25.0, 75.0, 22.5)};
    const auto pairs = match_levels(fem, rigid);
    REQUIRE(pairs.size() == 3);
    CHECK(pairs[0].rigid_level == 0);
    CHECK(pairs[1].rigid_level == 1);  // |9.5 - 10| < |10.6 - 10|
    CHECK(pairs[1].fem_ratio == doctest::Approx(0.5));
    CHECK(pairs[1].rigid_ratio == doctest::Approx(0.3));
    CHECK(pairs[2].rigid_level == 0);  // 25 is more than 10% away from 20

    std::ostringstream csv;
    write_sweep_csv(csv, SweepResult{rigid, fem, pairs});
    std::istringstream in(csv.str());
    std::string line;
    std::getline(in, line);
    CHECK(line == "engine,level,thumb_fn_N,total_fn_N,lateral_N,slipped,onset_m");
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6);
}
