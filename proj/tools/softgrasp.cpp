// softgrasp: command-line driver for meshing, rigid and FEM grasps, the grip-tightness sweep and
// strain reports.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "softgrasp/errors.hpp"
#include "softgrasp/parallel.hpp"
#include "softgrasp/pipeline.hpp"
#include "softgrasp/scene.hpp"

namespace fs = std::filesystem;
using namespace softgrasp;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitClobber = 3;
constexpr int kExitNumerical = 4;

class Clobber : public Error {
public:
    using Error::Error;
};

struct Options {
    std::string config;
    std::string out;
    bool deterministic = false;
    bool force = false;
};

/// Output file inside --out; refuses to overwrite unless --force.
class OutputDir {
public:
    OutputDir(const std::string& dir, bool force) : dir_(dir), force_(force) {
        std::error_code ec;
        fs::create_directories(dir_, ec);
        if (ec) throw IoError("cannot create output directory " + dir_.string() + ": " + ec.message());
    }
    fs::path file(const std::string& name) const {
        const fs::path p = dir_ / name;
        if (!force_ && fs::exists(p)) throw Clobber(p.string() + " exists (use --force to overwrite)");
        if (p.has_parent_path()) fs::create_directories(p.parent_path());
        return p;
    }
    std::ofstream open(const std::string& name) const {
        const fs::path p = file(name);
        std::ofstream out(p);
        if (!out) throw IoError("cannot open " + p.string() + " for writing");
        return out;
    }

private:
    fs::path dir_;
    bool force_;
};

std::string level_name(const char* prefix, int level, const char* suffix) {
    std::ostringstream s;
    s << prefix << std::setw(2) << std::setfill('0') << level << suffix;
    return s.str();
}

std::vector<int> active_nodes(const std::vector<ContactPoint>& contacts) {
    std::vector<int> nodes;
    for (const auto& c : contacts)
        if (c.gap <= 0) nodes.push_back(c.node_id);
    return nodes;
}

int cmd_meshgen(const Options& o) {
    const Scene scene = load_scene(o.config);
    const OutputDir out(o.out, o.force);
    const Mesh mesh = build_mesh(scene);
    const ValidationReport report = validate_mesh(mesh);
    out.open("mesh.json") << mesh_to_json(mesh);
    std::ofstream rep = out.open("mesh_report.txt");
    double min_j = report.min_jacobian.empty() ? 0.0
                                               : *std::min_element(report.min_jacobian.begin(), report.min_jacobian.end());
    std::ostringstream s;
    s << (report.ok ? "ok" : "invalid") << "\nnodes " << mesh.node_count() << "\nelements " << mesh.element_count()
      << "\nmin_jacobian " << min_j << '\n';
    for (const auto& v : report.violations) s << "violation " << v << '\n';
    rep << s.str();
    std::cout << s.str();
    return report.ok ? 0 : kExitNumerical;
}

int cmd_grasp_rigid(const Options& o) {
    const Scene scene = load_scene(o.config);
    if (!scene.has_gripper) throw ConfigError("gripper section is required");
    const OutputDir out(o.out, o.force);
    std::vector<double> actuation = scene.rigid.actuation;
    if (scene.rigid.match_fem || actuation.empty()) {
        actuation.clear();
        for (int k = 0; k < scene.sweep.levels; ++k) actuation.push_back(k);
    }
    const RigidObject object = rigid_object(scene);
    const ClosureOptions opts = closure_options(scene);
    const auto states = close_gripper(scene.gripper, object, actuation, opts);
    std::ofstream csv = out.open("grasp_rigid.csv");
    csv << std::setprecision(10);
    csv << "level,actuation_N,thumb_fn_N,total_fn_N,feasible,force_residual_N,moment_residual_Nm,pull_bound_N\n";
    for (const auto& s : states) {
        const double bound = rigid_pull_test(s, scene.sweep.pull_direction, opts.friction, object.mass, opts.gravity);
        csv << s.level << ',' << s.actuation << ',' << s.thumb_normal << ',' << s.total_normal << ','
            << (s.feasible ? 1 : 0) << ',' << s.force_residual << ',' << s.moment_residual << ',' << bound << '\n';
    }
    std::cout << "wrote " << states.size() << " rigid grasp states\n";
    return 0;
}

/// Indentation at grasp.depth. strain-report writes only the energy trace and strain outputs.
int run_grasp_fem(const Options& o, bool strain_only) {
    const Scene scene = load_scene(o.config);
    if (!scene.has_gripper) throw ConfigError("gripper section is required");
    const OutputDir out(o.out, o.force);
    const Mesh mesh = build_mesh(scene);
    const auto model = std::make_shared<const FemModel>(mesh, material_table(scene));
    const Closure closure = rigid_closure(scene);
    const VecX q_end = closure_configuration(scene, closure.q, scene.grasp.depth);
    const HandTrajectory trajectory = export_hand_trajectory(
        scene.gripper, closure.q, q_end, scene.sim.closure_duration, scene.sim.hold_duration,
        {scene.sweep.pull_direction, 0.0, scene.sim.pull_duration}, scene.sim.output_interval);
    ContactSimulation sim(model, build_restraint(scene, mesh), scene.sim.gravity, gripper_bodies(scene.gripper),
                          trajectory_schedule(scene.gripper, trajectory), contact_law(scene, mesh),
                          sim_options(scene));

    const fs::path energy_path = out.file("energy.csv");
    std::ofstream energy(energy_path);
    energy << std::setprecision(10) << "time_s,kinetic_J,strain_J\n";
    std::ofstream contacts;
    if (!strain_only) {
        contacts = out.open("contacts.csv");
        write_contact_csv_header(contacts);
    }
    int frame = 0;
    auto observer = [&](const ContactSimulation& s) {
        energy << s.state().t << ',' << s.kinetic_energy() << ',' << s.strain_energy() << std::endl;
        if (strain_only) return;
        write_contact_csv_rows(contacts, s.state().t, s.contacts(), s.bodies().links);
        write_state_vtk(mesh, s.state().u, out.file(level_name("vtk/state_", frame++, ".vtk")));
    };

    try {
        run_indentation(sim, scene.sim.closure_duration, observer);
    } catch (const Divergence&) {
        std::cerr << "energy trace: " << energy_path.string() << '\n';
        throw;
    }
    const NodalField x = sim.positions();
    const StrainReport report = strain_report(mesh, sim.state().u, x, active_nodes(sim.contacts()));
    {
        std::ofstream sr = out.open("strain_report.csv");
        write_strain_report(sr, report);
    }
    {
        std::ofstream el = out.open("element_strain.csv");
        el << std::setprecision(10) << "element,e_max\n";
        for (std::size_t e = 0; e < report.e_max.size(); ++e) el << e << ',' << report.e_max[e] << '\n';
    }
    if (!strain_only) {
        write_state_vtk(mesh, sim.state().u, out.file("final.vtk"));
        std::ofstream skin = out.open("skin.csv");
        write_skin_csv(skin, mesh, x);
        std::ofstream lf = out.open("link_forces.csv");
        lf << std::setprecision(10) << "link,normal_N,lateral_N,contacts\n";
        for (const auto& [name, f] : sim.link_forces())
            lf << name << ',' << f.normal_sum << ',' << f.tangential.norm() << ',' << f.contacts << '\n';
    }
    std::cout << std::setprecision(6) << "indented state at t = " << sim.state().t << " s (" << sim.state().step
              << " steps, dt = " << sim.dt() << " s)\n"
              << "max e_max " << report.global_max << " at element " << report.max_element << "\n"
              << "contact-zone mean e_max " << report.contact_mean << ", far-zone mean e_max " << report.far_mean
              << '\n';
    return 0;
}

int cmd_pull_sweep(const Options& o) {
    const Scene scene = load_scene(o.config);
    if (!scene.has_gripper) throw ConfigError("gripper section is required");
    const OutputDir out(o.out, o.force);
    const fs::path sweep_path = out.file("sweep.csv");
    const fs::path summary_path = out.file("sweep_summary.csv");
    const Mesh mesh = build_mesh(scene);
    std::cerr << "pull-sweep: " << mesh.element_count() << " elements, " << scene.sweep.levels << " levels\n";
    const SweepResult result = grip_tightness_sweep(scene, [&](const FemLevel& level) {
        const SweepRow& r = level.row;
        std::cerr << std::setprecision(4) << "  fem level " << r.level << ": depth " << r.depth << " m, thumb "
                  << r.thumb_normal << " N, total " << r.total_normal << " N, lateral " << r.lateral << " N"
                  << (r.slipped ? ", slipped" : "") << '\n';
        if (!scene.sweep.write_vtk) return;
        write_state_vtk(mesh, level.u_indented, out.file(level_name("vtk/level_", r.level, "_indented.vtk")));
        write_state_vtk(mesh, level.u_pulled, out.file(level_name("vtk/level_", r.level, "_pulled.vtk")));
    });
    {
        std::ofstream csv(sweep_path);
        write_sweep_csv(csv, result);
    }
    {
        std::ofstream csv(summary_path);
        write_sweep_summary(csv, result, closure_options(scene).friction);
    }
    std::cout << "wrote " << result.rigid.size() + result.fem.size() << " sweep rows to " << sweep_path.string()
              << '\n';
    return 0;
}

int cmd_validate(const Options& o) {
    const Scene scene = load_scene(o.config);
    const Mesh mesh = build_mesh(scene);
    const ValidationReport report = validate_mesh(mesh);
    std::cout << "config ok\nmesh " << (report.ok ? "ok" : "invalid") << ": " << mesh.node_count() << " nodes, "
              << mesh.element_count() << " elements\n";
    for (const auto& v : report.violations) std::cout << "  " << v << '\n';
    if (!report.ok) return kExitNumerical;
    const FemModel model(mesh, material_table(scene));
    const ContactLaw law = contact_law(scene, mesh);
    std::cout << std::setprecision(6) << "CFL step " << stable_timestep(mesh, model.materials(), scene.sim.safety)
              << " s\ncontact k_n " << law.normal_stiffness << " N/m, k_t " << law.tangential_stiffness
              << " N/m, mu " << law.friction << '\n';
    if (scene.has_gripper) {
        const Closure c = rigid_closure(scene);
        std::cout << "touch configuration:";
        for (Eigen::Index i = 0; i < c.q.size(); ++i) std::cout << ' ' << scene.gripper.links[i].name << '=' << c.q[i];
        std::cout << "\nrigid contacts " << c.contacts.size() << ", minimum thumb normal " << c.min_thumb_normal
                  << " N\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Soft-object grasp simulation: rigid grasp analysis and explicit FEM indentation"};
    app.require_subcommand(1);
    Options o;
    auto add = [&](const std::string& name, const std::string& help, bool needs_out) {
        CLI::App* c = app.add_subcommand(name, help);
        c->add_option("--config", o.config, "scene JSON")->required()->check(CLI::ExistingFile);
        if (needs_out) c->add_option("--out", o.out, "output directory")->required();
        c->add_flag("--deterministic", o.deterministic, "single worker, sequential reductions");
        c->add_flag("--force", o.force, "overwrite existing outputs");
        return c;
    };
    auto* meshgen = add("meshgen", "generate and validate the object mesh", true);
    auto* rigid = add("grasp-rigid", "rigid-engine grasp states per actuation level", true);
    auto* fem = add("grasp-fem", "FEM indentation with VTK, contact and strain outputs", true);
    auto* sweep = add("pull-sweep", "two-engine grip-tightness grasp-and-pull sweep", true);
    auto* strain = add("strain-report", "FEM indentation followed by the strain report", true);
    auto* validate = add("validate", "check the scene and print diagnostics", false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }
    if (o.deterministic) set_deterministic(true);

    try {
        if (meshgen->parsed()) return cmd_meshgen(o);
        if (rigid->parsed()) return cmd_grasp_rigid(o);
        if (fem->parsed()) return run_grasp_fem(o, false);
        if (sweep->parsed()) return cmd_pull_sweep(o);
        if (strain->parsed()) return run_grasp_fem(o, true);
        if (validate->parsed()) return cmd_validate(o);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const InvalidConfiguration& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const Clobber& e) {
        std::cerr << "refusing to overwrite: " << e.what() << '\n';
        return kExitClobber;
    } catch (const IoError& e) {
        std::cerr << "i/o error: " << e.what() << '\n';
        return kExitClobber;
    } catch (const SweepFailure& e) {
        std::cerr << "sweep failed at " << e.what() << '\n';
        return kExitNumerical;
    } catch (const Error& e) {
        std::cerr << "numerical failure: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitNumerical;
    }
    return 0;
}
