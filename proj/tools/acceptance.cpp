// Acceptance run: one PASS/FAIL line per criterion. Tolerances are fixed here, not on the command line.

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <memory>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <sys/wait.h>

#include "softgrasp/contact.hpp"
#include "softgrasp/fem.hpp"
#include "softgrasp/grasp.hpp"
#include "softgrasp/pipeline.hpp"
#include "softgrasp/scene.hpp"

namespace fs = std::filesystem;
using namespace softgrasp;

namespace {

constexpr double kPi = std::numbers::pi;

struct Check {
    bool ok = true;
    std::ostringstream detail;

    void expect(bool cond, const std::string& what) {
        if (!cond) {
            ok = false;
            detail << " [failed: " << what << ']';
        }
    }
};

Material gel(double E = 1e6, double nu = 0.3) {
    Material m;
    m.young_modulus = E;
    m.poisson_ratio = nu;
    m.density = 1000;
    return m;
}

NodalField random_field(Eigen::Index n, double scale, unsigned seed) {
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-scale, scale);
    NodalField u(3, n);
    for (Eigen::Index i = 0; i < u.size(); ++i) u.data()[i] = d(rng);
    return u;
}

Mesh jittered_box(int div, unsigned seed) {
    Mesh m = generate_box_mesh(Vec3(0.1, 0.08, 0.12), {div, div, div});
    std::mt19937 rng(seed);
    std::uniform_real_distribution<double> d(-0.004, 0.004);
    for (Eigen::Index i = 0; i < m.nodes.cols(); ++i)
        for (int k = 0; k < 3; ++k) m.nodes(k, i) += d(rng);
    return m;
}

// 1. FEM verification.
void fem_suite(Check& c) {
    // Patch test: an affine field gives F = I + A at every Gauss point, and no net force on
    // interior nodes.
    const Mesh patch = jittered_box(3, 1);
    const FemModel patch_model(patch, {{0, gel()}});
    Mat3 A;
    A << 0.02, -0.01, 0.005, 0.01, -0.015, 0.0, 0.003, 0.004, 0.01;
    const NodalField u_affine = (A * patch.nodes).colwise() + Vec3(0.001, -0.002, 0.003);
    double f_err = 0;
    for (std::size_t e = 0; e < patch.element_count(); ++e)
        for (int g = 0; g < 8; ++g)
            f_err = std::max(f_err, (deformation_gradient(patch, u_affine, e, g) - Mat3::Identity() - A)
                                        .cwiseAbs()
                                        .maxCoeff());
    const NodalField f_patch = internal_forces(patch_model, u_affine);
    const auto boundary = boundary_nodes(patch);
    double interior = 0;
    for (Eigen::Index n = 0; n < patch.nodes.cols(); ++n)
        if (!std::binary_search(boundary.begin(), boundary.end(), static_cast<int>(n)))
            interior = std::max(interior, f_patch.col(n).norm());
    const double patch_rel = interior / f_patch.cwiseAbs().maxCoeff();
    c.expect(f_err < 1e-12, "patch F");
    c.expect(patch_rel < 1e-12, "patch interior force");

    // Internal force against the central-difference gradient of the strain energy.
    const FemModel model(jittered_box(2, 3), {{0, gel()}});
    const NodalField u = random_field(static_cast<Eigen::Index>(model.node_count()), 0.004, 11);
    const NodalField f = internal_forces(model, u);
    const double h = 1e-6;
    double grad_err = 0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        NodalField up = u, um = u;
        up.data()[i] += h;
        um.data()[i] -= h;
        grad_err = std::max(grad_err,
                            std::abs((strain_energy(model, up) - strain_energy(model, um)) / (2 * h) - f.data()[i]));
    }
    grad_err /= f.cwiseAbs().maxCoeff();
    c.expect(grad_err < 1e-4, "energy gradient");

    // Undamped one-element bar, 1% axial compression, 1000 steps.
    const FemModel bar(generate_box_mesh(Vec3(1.0, 0.1, 0.1), {1, 1, 1}), {{0, gel(1e6, 0.0)}});
    SimState s = SimState::zeros(8);
    for (int a = 0; a < 8; ++a) s.u(0, a) = -0.01 * bar.mesh().nodes(0, a);
    const NodalField zero8 = NodalField::Zero(3, 8);
    const double dt = stable_timestep(bar.mesh(), bar.materials(), 0.9);
    NodalField f_int = internal_forces(bar, s.u);
    const double e0 = strain_energy(bar, s.u);
    double drift = 0;
    for (int i = 0; i < 1000; ++i) {
        const double w = strain_energy(bar, s.u);
        const NodalField v_prev = s.v;
        s = step_explicit(s, bar.lumped_mass(), VecX::Zero(8), zero8, f_int, zero8, dt);
        f_int = internal_forces(bar, s.u);
        const double ke = 0.5 * v_prev.cwiseProduct(s.v).colwise().sum().dot(bar.lumped_mass().transpose());
        drift = std::max(drift, std::abs(ke + w - e0) / e0);
    }
    c.expect(drift < 0.01, "energy drift");

    // Free body: linear momentum.
    const auto n = static_cast<Eigen::Index>(model.node_count());
    SimState fb = SimState::zeros(model.node_count());
    fb.u = random_field(n, 0.002, 4);
    fb.v = random_field(n, 0.05, 8);
    const VecX& M = model.lumped_mass();
    const Vec3 p0 = fb.v * M;
    const NodalField zero = NodalField::Zero(3, n);
    const double dt_fb = explicit_timestep(model, 0.9);
    for (int i = 0; i < 1000; ++i)
        fb = step_explicit(fb, M, VecX::Zero(n), zero, internal_forces(model, fb.u), zero, dt_fb);
    const double momentum = (Vec3(fb.v * M) - p0).norm() / (fb.v.cwiseAbs() * M).norm();
    c.expect(momentum < 1e-9, "momentum");

    c.detail << std::setprecision(3) << "patch F " << f_err << ", patch force " << patch_rel << ", gradient "
             << grad_err << ", drift " << drift << ", momentum " << momentum;
}

// 2. Strain.
void strain_suite(Check& c) {
    const StrainResult stretch = principal_strains(Eigen::Vector3d(1.2, 1, 1).asDiagonal());
    const double stretch_err = std::abs(stretch.e_max - 0.2);
    const Mat3 R = Eigen::AngleAxisd(1.1, Vec3(0.3, -1, 2).normalized()).toRotationMatrix();
    const double rotation = principal_strains(R).principal_strains.cwiseAbs().maxCoeff();
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> d(-0.3, 0.3);
    double rebuild = 0;
    for (int trial = 0; trial < 100; ++trial) {
        Mat3 F = Mat3::Identity();
        for (int i = 0; i < 9; ++i) F.data()[i] += d(rng);
        if (F.determinant() <= 0.1) continue;
        const StrainResult r = principal_strains(F);
        Mat3 E = Mat3::Zero();
        for (int i = 0; i < 3; ++i) {
            const Vec3 nv = r.principal_directions.col(i);
            E += 0.5 * (r.principal_stretches[i] * r.principal_stretches[i] - 1.0) * nv * nv.transpose();
        }
        rebuild = std::max(rebuild, (E - r.green_lagrange).cwiseAbs().maxCoeff());
        rebuild = std::max(rebuild, (r.green_lagrange - 0.5 * (F.transpose() * F - Mat3::Identity()))
                                        .cwiseAbs()
                                        .maxCoeff());
    }
    c.expect(stretch_err < 1e-15, "uniaxial stretch");
    c.expect(rotation < 1e-12, "pure rotation");
    c.expect(rebuild < 1e-9, "reconstruction");
    c.detail << std::setprecision(3) << "stretch error " << stretch_err << ", rotation " << rotation
             << ", reconstruction " << rebuild;
}

// 3. Cube resting on a fixed plane under gravity.
void contact_suite(Check& c) {
    Material m = gel(1e5, 0.3);
    m.mass_damping = 300;
    const Mesh cube = generate_box_mesh(Vec3(0.05, 0.05, 0.05), {4, 4, 4});
    auto model = std::make_shared<const FemModel>(cube, MaterialTable{{0, m}});
    RigidBodies ground;
    ground.surfaces.push_back(
        make_rectangle_surface(Vec3(0.025, 0.025, 0.0), Vec3::UnitX(), Vec3::UnitY(), 0.2, 0.2));
    ground.links.push_back("ground");
    ground.normals.push_back(Vec3::UnitZ());
    const ContactLaw law{2e4, 2e4, 0.5};
    SimOptions opt;
    opt.max_time = 20;
    opt.energy_ratio = 1e-8;
    opt.window = 50;
    ContactSimulation sim(model, {}, Vec3(0, 0, -9.81), ground,
                          [](double) { return std::vector<Pose>{Pose::Identity()}; }, law, opt);
    sim.relax();
    std::vector<ContactPoint> active;
    std::vector<Vec3> velocity;
    for (std::size_t i = 0; i < sim.contacts().size(); ++i) {
        active.push_back(sim.contacts()[i]);
        velocity.push_back(sim.relative_velocity()[i]);
    }
    const KktReport k = kkt_residuals(active, velocity, law.friction, 1e-9);
    double max_fn = 0, total_fn = 0;
    for (const auto& p : active) {
        max_fn = std::max(max_fn, std::abs(p.normal_force()));
        total_fn += p.normal_force();
    }
    const double weight = 9.81 * model->lumped_mass().sum();
    c.expect(!active.empty(), "contacts");
    c.expect(k.max_penetration <= max_fn / law.normal_stiffness * (1 + 1e-12), "penetration bound");
    c.expect(k.min_normal_force >= 0, "non-negative normal force");
    c.expect(k.cone_violations == 0, "friction cone");
    c.expect(k.max_complementarity < 1e-6, "complementarity");
    c.expect(std::abs(total_fn - weight) < 1e-3 * weight, "weight carried");
    c.detail << std::setprecision(3) << active.size() << " contacts, penetration " << k.max_penetration
             << " m vs bound " << max_fn / law.normal_stiffness << " m, min f_n " << k.min_normal_force
             << " N, complementarity " << k.max_complementarity << " W, support/weight " << total_fn / weight;
}

// 4. Rigid grasp.
void rigid_suite(Check& c) {
    const double mass = 1.0, mu = 0.5;
    const double oracle = mass * 9.81 / (2 * mu);  // each side lifts half the weight by friction
    auto contact_at = [](const Vec3& p, const Vec3& n) {
        RigidContact rc;
        rc.position = p;
        rc.world = p;
        rc.normal = n;
        return rc;
    };
    const std::vector<RigidContact> pair{contact_at(Vec3(0, 0.05, 0), Vec3::UnitY()),
                                         contact_at(Vec3(0, -0.05, 0), -Vec3::UnitY())};
    auto feasible = [&](double f) {
        EquilibriumOptions o;
        o.normal_forces = std::vector<double>{f, f};
        return grasp_equilibrium(pair, mu, mass, Vec3(0, 0, -9.81), o).feasible;
    };
    double lo = 0, hi = 100;
    while (hi - lo > 1e-9) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
    }
    const double threshold_err = std::abs(hi - oracle) / oracle;
    c.expect(threshold_err < 0.02, "antipodal threshold");

    Gripper hand;
    for (const auto& [name, th] : {std::pair{"thumb", kPi}, {"index", kPi / 3}, {"middle", -kPi / 3}}) {
        Link l;
        l.name = name;
        l.origin = make_pose(Vec3(0, -0.07 * std::sin(th), 0.07 * std::cos(th)), Vec3(th, 0, 0));
        l.joint = {JointType::Prismatic, -Vec3::UnitZ(), 0.0, 0.04, 0.0};
        l.pad = Pad{Vec3(0, 0, 0.005), Vec3(0.04, 0.02, 0.01), -Vec3::UnitZ()};
        hand.links.push_back(l);
    }
    RigidObject sphere;
    sphere.radius = 0.05;
    sphere.mass = 0.5;
    ClosureOptions opt;
    opt.tightness_link = "thumb";
    opt.friction = mu;
    opt.gravity = Vec3(0, 0, -9.81);
    const auto states = close_gripper(hand, sphere, {5.0, 20.0}, opt);
    double force_res = 0, moment_res = 0;
    bool all_feasible = true;
    for (const auto& s : states) {
        force_res = std::max(force_res, s.force_residual);
        moment_res = std::max(moment_res, s.moment_residual);
        all_feasible = all_feasible && s.feasible;
    }
    c.expect(all_feasible && force_res < 1e-6 && moment_res < 1e-6, "three-finger residuals");
    c.detail << std::setprecision(4) << "threshold " << hi << " N vs " << oracle << " N (" << 100 * threshold_err
             << "%), residuals " << std::setprecision(3) << force_res << " N / " << moment_res << " N m";
}

using Table = std::vector<std::vector<std::string>>;

Table read_csv(const fs::path& p) {
    Table rows;
    std::ifstream in(p);
    std::string line;
    while (std::getline(in, line)) {
        std::vector<std::string> row;
        std::stringstream s(line);
        std::string cell;
        while (std::getline(s, cell, ',')) row.push_back(cell);
        rows.push_back(row);
    }
    return rows;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

int run_sweep(const std::string& cli, const fs::path& scene, const fs::path& out) {
    const std::string cmd = '"' + cli + "\" pull-sweep --deterministic --force --config \"" + scene.string() +
                            "\" --out \"" + out.string() + "\" > \"" + out.string() + ".log\" 2>&1";
    fs::create_directories(out.parent_path());
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

// 5. Two-engine sweep on the shipped cylinder scene.
void sweep_suite(Check& c, const fs::path& dir, const Scene& scene) {
    const Table sweep = read_csv(dir / "sweep.csv");
    const Table summary = read_csv(dir / "sweep_summary.csv");
    const int levels = scene.sweep.levels;
    c.expect(static_cast<int>(sweep.size()) == 2 * levels + 1, "sweep rows");
    c.expect(static_cast<int>(summary.size()) == levels + 1, "summary rows");
    if (!c.ok) return;
    const double mu = std::stod(summary[1][7]);

    std::vector<double> rn, rl, fl;
    for (int k = 1; k <= levels; ++k) {
        rn.push_back(std::stod(sweep[k][3]));
        rl.push_back(std::stod(sweep[k][4]));
        fl.push_back(std::stod(sweep[levels + k][4]));
    }
    // (a) Ratio bound where the normal force is above the equilibrium tolerance of the rigid solve.
    const double floor = 1e-6;
    double worst = 0;
    for (int k = 0; k < levels; ++k) {
        if (rn[k] > floor)
            worst = std::max(worst, rl[k] / rn[k]);
        else
            c.expect(rl[k] <= 1.01e-6, "rigid lateral at zero load");
    }
    c.expect(worst <= mu + 0.02, "rigid ratio");
    // Least-squares line of rigid lateral against total normal.
    const double n = levels;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int k = 0; k < levels; ++k) {
        sx += rn[k];
        sy += rl[k];
        sxx += rn[k] * rn[k];
        sxy += rn[k] * rl[k];
    }
    const double slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    const double icept = (sy - slope * sx) / n;
    double resid = 0;
    for (int k = 0; k < levels; ++k) resid = std::max(resid, std::abs(rl[k] - slope * rn[k] - icept));
    const double range = *std::max_element(rl.begin(), rl.end()) - *std::min_element(rl.begin(), rl.end());
    c.expect(resid < 0.02 * range, "rigid linearity");

    // (b) Matched levels indented by at least 10% of the radius.
    int indented = 0;
    double min_margin = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < summary.size(); ++i) {
        const auto& r = summary[i];
        if (std::stoi(r[1]) == 0 || std::stod(r[3]) < 0.1 * scene.object.radius) continue;
        ++indented;
        min_margin = std::min(min_margin, std::stod(r[5]) - std::stod(r[6]));
    }
    c.expect(indented > 0, "indented matched levels");
    c.expect(min_margin > 0, "fem ratio above rigid");

    // (c) Weak monotonicity of the FEM lateral force.
    const double noise = 0.005 * *std::max_element(fl.begin(), fl.end());
    double worst_drop = 0;
    for (int k = 1; k < levels; ++k) worst_drop = std::max(worst_drop, fl[k - 1] - fl[k]);
    c.expect(worst_drop <= noise, "fem lateral monotone");

    c.detail << std::setprecision(4) << "(a) max rigid ratio " << worst << " vs mu " << mu << ", fit residual "
             << resid << " N of range " << range << " N; (b) " << indented << " indented levels, min ratio margin "
             << min_margin << "; (c) largest drop " << worst_drop << " N vs floor " << noise << " N";
}

// 6. Sphere squeeze at 10% radius indentation.
void sphere_suite(Check& c, const fs::path& scene_path) {
    const Scene scene = load_scene(scene_path);
    const Mesh mesh = build_mesh(scene);
    auto model = std::make_shared<const FemModel>(mesh, material_table(scene));
    const Closure closure = rigid_closure(scene);
    const VecX q_end = closure_configuration(scene, closure.q, scene.grasp.depth);
    const HandTrajectory trajectory = export_hand_trajectory(
        scene.gripper, closure.q, q_end, scene.sim.closure_duration, scene.sim.hold_duration,
        {scene.sweep.pull_direction, 0.0, scene.sim.pull_duration}, scene.sim.output_interval);
    ContactSimulation sim(model, build_restraint(scene, mesh), scene.sim.gravity, gripper_bodies(scene.gripper),
                          trajectory_schedule(scene.gripper, trajectory), contact_law(scene, mesh),
                          sim_options(scene));
    const IndentationResult ind = run_indentation(sim, scene.sim.closure_duration);
    std::vector<int> nodes;
    for (const auto& p : sim.contacts())
        if (p.gap <= 0) nodes.push_back(p.node_id);
    const StrainReport r = strain_report(mesh, sim.state().u, sim.positions(), nodes);
    c.expect(ind.max_indentation >= 0.1 * scene.object.radius, "indentation reaches 10% of radius");
    c.expect(r.contact_mean > 2 * r.far_mean, "contact zone strain");
    c.detail << std::setprecision(4) << "indentation " << ind.max_indentation << " m (radius "
             << scene.object.radius << " m), contact mean " << r.contact_mean << ", far mean " << r.far_mean
             << ", ratio " << r.contact_mean / r.far_mean;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria 1-7"};
    std::string cli, scenes, work = (fs::temp_directory_path() / "softgrasp_acceptance").string();
    app.add_option("--cli", cli, "softgrasp executable")->required()->check(CLI::ExistingFile);
    app.add_option("--scenes", scenes, "directory with the shipped scenes")->required()->check(CLI::ExistingDirectory);
    app.add_option("--work", work, "scratch directory for sweep outputs and report.txt");
    std::vector<int> only;
    app.add_option("--only", only, "run only these criteria")->check(CLI::Range(1, 7));
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(work);
    std::ofstream log(fs::path(work) / "report.txt");
    bool all = true;
    auto report = [&](int id, const std::string& name, const std::function<void(Check&)>& body) {
        if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) return;
        Check c;
        const auto t0 = std::chrono::steady_clock::now();
        try {
            body(c);
        } catch (const std::exception& e) {
            c.ok = false;
            c.detail << " [exception: " << e.what() << ']';
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        all = all && c.ok;
        std::ostringstream line;
        line << (c.ok ? "PASS" : "FAIL") << ' ' << id << ' ' << name << " (" << std::fixed << std::setprecision(1)
             << secs << " s): " << std::defaultfloat << c.detail.str() << '\n';
        std::cout << line.str() << std::flush;
        log << line.str() << std::flush;
    };

    const fs::path cylinder = fs::path(scenes) / "cylinder_sweep.json";
    const fs::path first = fs::path(work) / "run1", second = fs::path(work) / "run2";

    report(1, "fem verification", fem_suite);
    report(2, "strain", strain_suite);
    report(3, "contact kkt", contact_suite);
    report(4, "rigid grasp", rigid_suite);
    report(5, "grip-tightness sweep", [&](Check& c) {
        const int code = run_sweep(cli, cylinder, first);
        c.expect(code == 0, "pull-sweep exit code " + std::to_string(code));
        if (!c.ok) return;
        const Scene scene = load_scene(cylinder);
        c.detail << build_mesh(scene).element_count() << " elements; ";
        sweep_suite(c, first, scene);
    });
    report(6, "sphere squeeze strain", [&](Check& c) { sphere_suite(c, fs::path(scenes) / "sphere_squeeze.json"); });
    report(7, "determinism", [&](Check& c) {
        if (!fs::exists(first / "sweep.csv")) {
            const int code = run_sweep(cli, cylinder, first);
            c.expect(code == 0, "pull-sweep exit code " + std::to_string(code));
        }
        const int code = run_sweep(cli, cylinder, second);
        c.expect(code == 0, "pull-sweep exit code " + std::to_string(code));
        for (const char* f : {"sweep.csv", "sweep_summary.csv"}) {
            const std::string a = slurp(first / f), b = slurp(second / f);
            c.expect(!a.empty() && a == b, std::string(f) + " differs");
        }
        c.detail << "sweep.csv and sweep_summary.csv compared byte for byte";
    });
    return all ? 0 : 1;
}
