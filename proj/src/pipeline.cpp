#include "softgrasp/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <set>

#include "softgrasp/errors.hpp"

namespace softgrasp {

// ---------------------------------------------------------------------------------------------
// Hand trajectory

HandTrajectory::HandTrajectory(std::vector<HandSample> samples) : samples_(std::move(samples)) {
    if (samples_.empty()) throw InvalidArgument("hand trajectory needs at least one sample");
    for (std::size_t i = 0; i < samples_.size(); ++i) {
        if (!std::isfinite(samples_[i].t)) throw InvalidArgument("hand trajectory time must be finite");
        if (i > 0 && !(samples_[i].t > samples_[i - 1].t))
            throw InvalidArgument("hand trajectory times must strictly increase");
        if (samples_[i].q.size() != samples_[0].q.size())
            throw InvalidArgument("hand trajectory samples disagree on the joint count");
        samples_[i].rotation.normalize();
    }
}

HandSample HandTrajectory::at(double t) const {
    if (t <= samples_.front().t) return samples_.front();
    if (t >= samples_.back().t) return samples_.back();
    const auto it = std::upper_bound(samples_.begin(), samples_.end(), t,
                                     [](double x, const HandSample& s) { return x < s.t; });
    const HandSample& b = *it;
    const HandSample& a = *(it - 1);
    const double w = (t - a.t) / (b.t - a.t);
    HandSample s;
    s.t = t;
    s.position = (1 - w) * a.position + w * b.position;
    s.rotation = a.rotation.slerp(w, b.rotation);
    s.q = (1 - w) * a.q + w * b.q;
    return s;
}

Pose HandTrajectory::base_pose(double t) const {
    const HandSample s = at(t);
    Pose p = Pose::Identity();
    p.linear() = s.rotation.toRotationMatrix();
    p.translation() = s.position;
    return p;
}

HandTrajectory export_hand_trajectory(const Gripper& gripper, const VecX& q_start, const VecX& q_end,
                                      double closure_duration, double hold_duration, const PullSpec& pull,
                                      double interval) {
    if (!(closure_duration > 0)) throw InvalidArgument("closure duration must be positive");
    if (!(pull.duration > 0)) throw InvalidArgument("pull duration must be positive");
    if (!(hold_duration >= 0)) throw InvalidArgument("hold duration must be non-negative");
    if (!(interval > 0)) throw InvalidArgument("sample interval must be positive");
    if (!(pull.distance >= 0)) throw InvalidArgument("pull distance must be non-negative");
    const auto n = static_cast<Eigen::Index>(gripper.links.size());
    if (q_start.size() != n || q_end.size() != n) throw InvalidArgument("one joint value per link required");
    Vec3 dir = Vec3::Zero();
    if (pull.distance > 0) {
        if (!(pull.direction.norm() > 0)) throw InvalidArgument("pull direction must be nonzero");
        dir = pull.direction.normalized();
    }

    const double t_hold = closure_duration;
    const double t_pull = closure_duration + hold_duration;
    const double t_end = t_pull + pull.duration;
    // Grid points within round-off of a phase boundary give way to the boundary itself.
    const double tol = 1e-9 * interval;
    const std::vector<double> boundaries{0.0, t_hold, t_pull, t_end};
    std::vector<double> times = boundaries;
    for (int k = 1; k * interval < t_end; ++k) {
        const double t = k * interval;
        if (std::none_of(boundaries.begin(), boundaries.end(), [&](double b) { return std::abs(t - b) <= tol; }))
            times.push_back(t);
    }
    std::sort(times.begin(), times.end());
    times.erase(std::unique(times.begin(), times.end()), times.end());

    const Eigen::Quaterniond rotation(gripper.base.linear());
    std::vector<HandSample> samples;
    for (double t : times) {
        HandSample s;
        s.t = t;
        const double c = std::min(t / closure_duration, 1.0);
        s.q = t >= t_hold ? q_end : ((1 - c) * q_start + c * q_end).eval();
        const double p = t <= t_pull ? 0.0 : std::min((t - t_pull) / pull.duration, 1.0);
        s.position = gripper.base.translation() + (t >= t_end ? 1.0 : p) * pull.distance * dir;
        s.rotation = rotation;
        samples.push_back(s);
    }
    return HandTrajectory(std::move(samples));
}

// ---------------------------------------------------------------------------------------------
// Contact simulation

RigidBodies gripper_bodies(const Gripper& gripper) {
    RigidBodies b;
    std::vector<int> links;
    b.surfaces = pad_surfaces(gripper, std::vector<Pose>(gripper.links.size(), Pose::Identity()), &links);
    for (int l : links) {
        b.links.push_back(gripper.links[l].name);
        b.normals.push_back(gripper.links[l].pad->normal);
    }
    return b;
}

PoseSchedule trajectory_schedule(const Gripper& gripper, const HandTrajectory& trajectory) {
    std::vector<int> padded;
    for (std::size_t i = 0; i < gripper.links.size(); ++i)
        if (gripper.links[i].pad) padded.push_back(static_cast<int>(i));
    return [g = gripper, trajectory, padded](double t) mutable {
        const HandSample s = trajectory.at(t);
        g.base = trajectory.base_pose(t);
        const auto link_poses = forward_kinematics(g, s.q);
        std::vector<Pose> out;
        out.reserve(padded.size());
        for (int l : padded) out.push_back(link_poses[l]);
        return out;
    };
}

SimOptions sim_options(const Scene& scene) {
    SimOptions o;
    o.safety = scene.sim.safety;
    o.max_time = scene.sim.max_time;
    o.energy_ratio = scene.sim.energy_ratio;
    o.window = scene.sim.window;
    o.output_interval = scene.sim.output_interval;
    o.activation_tolerance = scene.contact.activation_tolerance;
    o.search_margin = scene.contact.search_margin;
    return o;
}

ContactSimulation::ContactSimulation(std::shared_ptr<const FemModel> model, Constraints restraint, const Vec3& gravity,
                                     RigidBodies bodies, PoseSchedule schedule, const ContactLaw& law,
                                     const SimOptions& options)
    : model_(std::move(model)), restraint_(std::move(restraint)), bodies_(std::move(bodies)),
      schedule_(std::move(schedule)), law_(law), options_(options) {
    if (!model_) throw InvalidArgument("contact simulation needs a model");
    if (bodies_.links.size() != bodies_.surfaces.size() || bodies_.normals.size() != bodies_.surfaces.size())
        throw InvalidArgument("one link name and nominal normal per rigid surface required");
    if (!(law_.normal_stiffness > 0) || !(law_.tangential_stiffness > 0))
        throw InvalidArgument("contact stiffnesses must be positive");
    if (!(options_.output_interval > 0)) throw InvalidArgument("output interval must be positive");
    const Mesh& mesh = model_->mesh();
    f_ext_ = external_forces(mesh, model_->materials(), gravity, {});
    candidates_ = boundary_nodes(mesh);

    double min_mass = std::numeric_limits<double>::infinity();
    for (int n : candidates_) min_mass = std::min(min_mass, model_->lumped_mass()[n]);
    dt_ = explicit_timestep(*model_, options_.safety,
                            (law_.normal_stiffness + law_.tangential_stiffness) / min_mass);

    // Strain energy of a uniform 1e-9 strain: below this, energies are round-off.
    for (std::size_t e = 0; e < mesh.element_count(); ++e)
        energy_floor_ += 0.5e-18 * model_->materials().at(mesh.element_material[e]).young_modulus *
                         element_volume(mesh, e);

    state_ = SimState::zeros(mesh.node_count());
    for (std::size_t k = 0; k < restraint_.dofs.size(); ++k)
        state_.u(restraint_.dofs[k] % 3, restraint_.dofs[k] / 3) = restraint_.values[k];
    f_int_ = internal_forces(*model_, state_.u, &strain_energy_);

    set_poses(schedule_(0.0));
    contacts_ = detect_contacts(positions(), world_, options_.activation_tolerance,
                                {candidates_, options_.search_margin});
    relative_velocity_.assign(contacts_.size(), Vec3::Zero());
    contact_forces(contacts_, relative_velocity_, law_, dt_);
}

void ContactSimulation::set_poses(const std::vector<Pose>& poses) {
    if (poses.size() != bodies_.surfaces.size()) throw InvalidArgument("one pose per rigid surface required");
    poses_ = poses;
    world_.resize(poses.size());
    for (std::size_t s = 0; s < poses.size(); ++s) world_[s] = bodies_.surfaces[s].transformed(poses[s]);
}

NodalField ContactSimulation::positions() const { return model_->mesh().nodes + state_.u; }

std::vector<RigidSurface> ContactSimulation::surfaces() const { return world_; }

Vec3 ContactSimulation::surface_normal(int s) const { return (poses_.at(s).linear() * bodies_.normals[s]).normalized(); }

double ContactSimulation::kinetic_energy() const { return softgrasp::kinetic_energy(model_->lumped_mass(), state_.v); }

std::map<std::string, LinkForce> ContactSimulation::link_forces() const {
    std::map<std::string, Vec3> refs;
    for (std::size_t s = 0; s < world_.size(); ++s) refs[bodies_.links[s]] = surface_normal(static_cast<int>(s));
    return gripper_reaction(contacts_, bodies_.links, refs);
}

void ContactSimulation::step(double schedule_dt) {
    NodalField f_contact = NodalField::Zero(3, state_.u.cols());
    for (const auto& c : contacts_) f_contact.col(c.node_id) -= c.force;
    state_ = step_explicit(state_, model_->lumped_mass(), model_->nodal_damping(), f_ext_, f_int_, f_contact, dt_,
                           restraint_);

    const std::vector<Pose> previous = poses_;
    if (schedule_dt > 0) {
        schedule_time_ += schedule_dt;
        set_poses(schedule_(schedule_time_));
    }
    f_int_ = internal_forces(*model_, state_.u, &strain_energy_);
    contacts_ = update_contacts(contacts_, positions(), world_, options_.activation_tolerance,
                                {candidates_, options_.search_margin});
    relative_velocity_.resize(contacts_.size());
    for (std::size_t i = 0; i < contacts_.size(); ++i) {
        const auto& c = contacts_[i];
        Vec3 surface_velocity = Vec3::Zero();
        if (schedule_dt > 0) {
            const Pose back = previous[c.surface] * poses_[c.surface].inverse();
            surface_velocity = (c.closest - back * c.closest) / dt_;
        }
        relative_velocity_[i] = state_.v.col(c.node_id) - surface_velocity;
    }
    contact_forces(contacts_, relative_velocity_, law_, dt_);
}

void ContactSimulation::notify(const Observer& observer) {
    const double eps = 1e-9 * options_.output_interval;
    if (state_.t + eps < next_output_) return;
    if (observer) observer(*this);
    while (next_output_ <= state_.t + eps) next_output_ += options_.output_interval;
}

bool ContactSimulation::at_rest() const {
    if (state_.v.cwiseAbs().maxCoeff() != 0.0) return false;
    NodalField r = f_ext_ - f_int_;
    for (const auto& c : contacts_) r.col(c.node_id) += c.force;
    for (int dof : restraint_.dofs) r(dof % 3, dof / 3) = 0;
    return r.cwiseAbs().maxCoeff() == 0.0;
}

void ContactSimulation::advance_to(double schedule_time, const Observer& observer, double* max_energy_ratio) {
    notify(observer);
    const double eps = 1e-12 * std::max(1.0, std::abs(schedule_time));
    while (schedule_time_ < schedule_time - eps) {
        step(std::min(dt_, schedule_time - schedule_time_));
        notify(observer);
        if (max_energy_ratio && strain_energy_ > 1e-6)
            *max_energy_ratio = std::max(*max_energy_ratio, kinetic_energy() / strain_energy_);
    }
}

void ContactSimulation::relax(const Observer& observer) {
    notify(observer);
    if (at_rest()) return;
    const double start = state_.t;
    int streak = 0;
    double ratio = std::numeric_limits<double>::infinity();
    while (state_.t - start < options_.max_time) {
        step(0.0);
        notify(observer);
        const double ke = kinetic_energy();
        if (ke == 0.0 && at_rest()) return;
        ratio = strain_energy_ > 0 ? ke / strain_energy_ : std::numeric_limits<double>::infinity();
        const bool quiet = ratio < options_.energy_ratio || ke < options_.energy_ratio * energy_floor_;
        streak = quiet ? streak + 1 : 0;
        if (streak >= options_.window) return;
    }
    throw NonConvergence(ratio);
}

// ---------------------------------------------------------------------------------------------
// Indentation, pull and slip

IndentationResult run_indentation(ContactSimulation& sim, double closure_end, const ContactSimulation::Observer& observer) {
    sim.advance_to(closure_end, observer);
    sim.relax(observer);
    IndentationResult r;
    r.link_forces = sim.link_forces();
    for (const auto& c : sim.contacts()) {
        if (c.gap > 0) continue;
        r.max_indentation =
            std::max(r.max_indentation, sim.state().u.col(c.node_id).dot(sim.surface_normal(c.surface)));
    }
    return r;
}

namespace {

struct Anchor {
    int node;
    int surface;
    Vec3 local;
};

PullSample sample_pull(const ContactSimulation& sim, const std::vector<Anchor>& anchors, const Vec3& origin,
                       const Vec3& direction, const std::string& tightness_link) {
    PullSample s;
    s.time = sim.schedule_time();
    s.base_displacement = sim.poses().empty() ? 0.0 : (sim.poses()[0].translation() - origin).dot(direction);
    for (const auto& [name, f] : sim.link_forces()) {
        s.total_normal += f.normal_sum;
        s.lateral += f.tangential;
        if (name == tightness_link) s.thumb_normal = f.normal_sum;
    }
    if (!anchors.empty()) {
        const NodalField x = sim.positions();
        double sum = 0;
        for (const auto& a : anchors) {
            const Vec3 n = sim.surface_normal(a.surface);
            Vec3 d = x.col(a.node) - sim.poses()[a.surface] * a.local;
            d -= n * n.dot(d);
            sum += d.norm();
        }
        s.mean_slip = sum / static_cast<double>(anchors.size());
    }
    return s;
}

}  // namespace

PullHistory run_pull(ContactSimulation& sim, double pull_end, const Vec3& direction, const std::string& tightness_link,
                     double sample_interval, const ContactSimulation::Observer& observer) {
    if (!(sample_interval > 0)) throw InvalidArgument("pull sample interval must be positive");
    const Vec3 dir = direction.norm() > 0 ? direction.normalized() : Vec3::Zero();
    std::vector<Anchor> anchors;
    const NodalField x = sim.positions();
    for (const auto& c : sim.contacts())
        if (c.gap <= 0) anchors.push_back({c.node_id, c.surface, sim.poses()[c.surface].inverse() * x.col(c.node_id)});
    const Vec3 origin = sim.poses().empty() ? Vec3::Zero() : Vec3(sim.poses()[0].translation());

    PullHistory h;
    h.samples.push_back(sample_pull(sim, anchors, origin, dir, tightness_link));
    const double start = sim.schedule_time();
    for (int k = 1; sim.schedule_time() < pull_end - 1e-12 * std::max(1.0, pull_end); ++k) {
        sim.advance_to(std::min(start + k * sample_interval, pull_end), observer, &h.max_energy_ratio);
        h.samples.push_back(sample_pull(sim, anchors, origin, dir, tightness_link));
    }
    return h;
}

SlipResult detect_slip(const std::vector<PullSample>& history, double threshold) {
    for (const auto& s : history)
        if (s.mean_slip > threshold) return {true, s.base_displacement};
    return {};
}

// ---------------------------------------------------------------------------------------------
// Strain

StrainReport strain_report(const Mesh& mesh, const NodalField& u, const NodalField& positions,
                           const std::vector<int>& contact_nodes) {
    StrainReport r;
    const std::size_t ne = mesh.element_count();
    r.e_max.resize(ne);
    double contact_sum = 0, far_sum = 0;
    int far = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        r.e_max[e] = principal_strains(deformation_gradient(mesh, u, e, -1), e).e_max;
        Vec3 centroid = Vec3::Zero();
        for (int a : mesh.elements[e]) centroid += positions.col(a);
        centroid /= 8.0;
        if (r.max_element < 0 || r.e_max[e] > r.global_max) {
            r.global_max = r.e_max[e];
            r.max_element = static_cast<int>(e);
            r.max_location = centroid;
        }
        const double reach = 2.0 * std::cbrt(element_volume(mesh, e));
        bool near = false;
        for (int n : contact_nodes)
            if ((positions.col(n) - centroid).norm() <= reach) {
                near = true;
                break;
            }
        if (near) {
            contact_sum += r.e_max[e];
            ++r.contact_elements;
        } else {
            far_sum += r.e_max[e];
            ++far;
        }
    }
    r.contact_mean = r.contact_elements > 0 ? contact_sum / r.contact_elements : 0.0;
    r.far_mean = far > 0 ? far_sum / far : 0.0;
    return r;
}

void write_strain_report(std::ostream& out, const StrainReport& r) {
    out << std::setprecision(10);
    out << "global_max,element,x,y,z,contact_mean,far_mean,contact_elements\n";
    out << r.global_max << ',' << r.max_element << ',' << r.max_location.x() << ',' << r.max_location.y() << ','
        << r.max_location.z() << ',' << r.contact_mean << ',' << r.far_mean << ',' << r.contact_elements << '\n';
}

void write_skin_csv(std::ostream& out, const Mesh& mesh, const NodalField& positions) {
    out << std::setprecision(12);
    out << "node_id,x0,y0,z0,x,y,z\n";
    for (int n : boundary_nodes(mesh)) {
        out << n;
        for (int k = 0; k < 3; ++k) out << ',' << mesh.nodes(k, n);
        for (int k = 0; k < 3; ++k) out << ',' << positions(k, n);
        out << '\n';
    }
}

void write_state_vtk(const Mesh& mesh, const NodalField& u, const std::filesystem::path& path) {
    VtkField disp{"displacement", 3, std::vector<double>(u.data(), u.data() + u.size())};
    VtkField strain{"e_max", 1, {}};
    strain.values.resize(mesh.element_count());
    for (std::size_t e = 0; e < mesh.element_count(); ++e)
        strain.values[e] = principal_strains(deformation_gradient(mesh, u, e, -1), e).e_max;
    const NodalField x = mesh.nodes + u;
    write_vtk(mesh, {disp}, {strain}, path, &x);
}

// ---------------------------------------------------------------------------------------------
// Sweep

ClosureOptions closure_options(const Scene& scene) {
    ClosureOptions o;
    o.tightness_link = scene.tightness_link;
    o.actuation_gain = scene.rigid.actuation_gain;
    o.friction = scene.contact.friction.value_or(object_material(scene).friction);
    o.gravity = scene.sim.gravity;
    return o;
}

Closure rigid_closure(const Scene& scene) {
    if (!scene.has_gripper) throw ConfigError("gripper section is required");
    return close_fingers(scene.gripper, rigid_object(scene), closure_options(scene));
}

VecX closure_configuration(const Scene& scene, const VecX& q_touch, double depth) {
    VecX q = q_touch;
    for (std::size_t i = 0; i < scene.gripper.links.size(); ++i) {
        const Link& l = scene.gripper.links[i];
        if (!l.pad || l.joint.type != JointType::Prismatic) continue;
        q[i] += depth;
        if (q[i] > l.joint.upper + 1e-12)
            throw ConfigError("sweep.depths: closure depth " + std::to_string(depth) + " exceeds the joint limit of link '" +
                              l.name + "'");
        q[i] = std::min(q[i], l.joint.upper);
    }
    return q;
}

FemLevel run_fem_level(const Scene& scene, std::shared_ptr<const FemModel> model, const Closure& closure, int level,
                       double depth) {
    const Gripper& g = scene.gripper;
    const VecX q_end = closure_configuration(scene, closure.q, depth);
    const Mesh& mesh = model->mesh();
    const SimConfig& sc = scene.sim;
    PullSpec pull{scene.sweep.pull_direction, scene.sweep.pull_distance, sc.pull_duration};
    auto trajectory = [&](double duration) {
        PullSpec p = pull;
        p.duration = duration;
        return export_hand_trajectory(g, closure.q, q_end, sc.closure_duration, sc.hold_duration, p,
                                      sc.output_interval);
    };

    ContactSimulation sim(model, build_restraint(scene, mesh), sc.gravity, gripper_bodies(g),
                          trajectory_schedule(g, trajectory(pull.duration)), contact_law(scene, mesh),
                          sim_options(scene));
    const IndentationResult indented = run_indentation(sim, sc.closure_duration);
    const double pull_start = sc.closure_duration + sc.hold_duration;
    if (sc.hold_duration > 0) sim.advance_to(pull_start);

    FemLevel out;
    out.u_indented = sim.state().u;
    // A slower pull should cut the inertial share of the energy roughly fourfold. When halving the
    // speed does not at least halve the ratio, the kinetic energy comes from stick-slip release
    // rather than from the pull rate, and slowing down further only costs time.
    double duration = pull.duration;
    double previous_ratio = std::numeric_limits<double>::infinity();
    for (int attempt = 0;; ++attempt) {
        ContactSimulation trial = sim;
        trial.set_schedule(trajectory_schedule(g, trajectory(duration)));
        const double sample = std::min(sc.output_interval, duration / 100.0);
        PullHistory pull_history = run_pull(trial, pull_start + duration, pull.direction, scene.tightness_link, sample);
        const double ratio = pull_history.max_energy_ratio;
        const bool improved = ratio <= 0.5 * previous_ratio;
        if (attempt == 0 || ratio < out.pull.max_energy_ratio) {
            out.pull = std::move(pull_history);
            out.u_pulled = trial.state().u;
        }
        if (ratio <= sc.max_pull_energy_ratio || attempt >= sc.max_pull_doublings || !improved) break;
        previous_ratio = ratio;
        duration *= 2;
    }

    // Tightness is read at the Indented State; the lateral force is the largest the grasp resisted
    // during the pull, which is what the rigid pull bound measures on the other side.
    const PullSample& start = out.pull.samples.front();
    const SlipResult slip = detect_slip(out.pull.samples, scene.sweep.slip_threshold);
    out.row.engine = "fem";
    out.row.level = level;
    out.row.thumb_normal = start.thumb_normal;
    out.row.total_normal = start.total_normal;
    for (const auto& s : out.pull.samples) out.row.lateral = std::max(out.row.lateral, s.lateral.norm());
    out.row.slipped = slip.slipped;
    out.row.onset = slip.onset;
    out.row.depth = depth;
    out.row.max_indentation = indented.max_indentation;
    return out;
}

namespace {

SweepRow rigid_row(const Scene& scene, const GraspState& state, int level) {
    const RigidObject object = rigid_object(scene);
    const ClosureOptions opts = closure_options(scene);
    SweepRow row;
    row.engine = "rigid";
    row.level = level;
    row.thumb_normal = state.thumb_normal;
    row.total_normal = state.total_normal;
    row.lateral = rigid_pull_test(state, scene.sweep.pull_direction, opts.friction, object.mass, opts.gravity);
    if (scene.object.restraint != Restraint::None) {
        // A restrained rigid object cannot follow the hand: the pads slide from the first instant.
        row.slipped = scene.sweep.pull_distance > 0;
        row.onset = 0.0;
    } else {
        row.slipped = scene.rigid.pull_load > row.lateral;
        row.onset = 0.0;
    }
    return row;
}

}  // namespace

SweepRow run_rigid_level(const Scene& scene, const Closure& closure, int level, double thumb_normal) {
    return rigid_row(scene, grasp_at(closure, thumb_normal, rigid_object(scene), closure_options(scene)), level);
}

std::vector<MatchedPair> match_levels(const std::vector<SweepRow>& fem, const std::vector<SweepRow>& rigid,
                                      double tolerance) {
    auto ratio = [](const SweepRow& r) { return r.total_normal > 0 ? r.lateral / r.total_normal : 0.0; };
    std::vector<MatchedPair> out;
    for (const auto& f : fem) {
        MatchedPair p;
        p.fem_level = f.level;
        p.fem_ratio = ratio(f);
        double best = std::numeric_limits<double>::infinity();
        if (f.thumb_normal > 0) {
            for (const auto& r : rigid) {
                const double d = std::abs(r.thumb_normal - f.thumb_normal);
                if (d < best && d <= tolerance * f.thumb_normal) {
                    best = d;
                    p.rigid_level = r.level;
                    p.rigid_ratio = ratio(r);
                }
            }
        }
        out.push_back(p);
    }
    return out;
}

SweepResult grip_tightness_sweep(const Scene& scene, const LevelCallback& on_fem_level) {
    const Mesh mesh = build_mesh(scene);
    const ValidationReport report = validate_mesh(mesh);
    if (!report.ok)
        throw InvalidArgument("generated mesh failed validation: " +
                              (report.violations.empty() ? std::string("unknown") : report.violations.front()));
    auto model = std::make_shared<const FemModel>(mesh, material_table(scene));
    const Closure closure = rigid_closure(scene);
    const auto depths = sweep_depths(scene);

    SweepResult result;
    for (int k = 0; k < static_cast<int>(depths.size()); ++k) {
        try {
            FemLevel level = run_fem_level(scene, model, closure, k + 1, depths[k]);
            if (on_fem_level) on_fem_level(level);
            result.fem.push_back(level.row);
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw SweepFailure("fem", k + 1, e.what());
        }
    }

    std::vector<GraspState> states;
    if (scene.rigid.match_fem) {
        for (const auto& f : result.fem)
            states.push_back(grasp_at(closure, f.thumb_normal, rigid_object(scene), closure_options(scene)));
    } else {
        states = close_gripper(scene.gripper, rigid_object(scene), scene.rigid.actuation, closure_options(scene));
    }
    for (std::size_t k = 0; k < states.size(); ++k) {
        try {
            result.rigid.push_back(rigid_row(scene, states[k], static_cast<int>(k) + 1));
        } catch (const ConfigError&) {
            throw;
        } catch (const Error& e) {
            throw SweepFailure("rigid", static_cast<int>(k) + 1, e.what());
        }
    }
    result.pairs = match_levels(result.fem, result.rigid);
    return result;
}

void write_sweep_csv(std::ostream& out, const SweepResult& result) {
    out << std::setprecision(10);
    out << "engine,level,thumb_fn_N,total_fn_N,lateral_N,slipped,onset_m\n";
    for (const auto* rows : {&result.rigid, &result.fem})
        for (const auto& r : *rows)
            out << r.engine << ',' << r.level << ',' << r.thumb_normal << ',' << r.total_normal << ',' << r.lateral
                << ',' << (r.slipped ? 1 : 0) << ',' << r.onset << '\n';
}

void write_sweep_summary(std::ostream& out, const SweepResult& result, double friction) {
    out << std::setprecision(10);
    out << "fem_level,rigid_level,depth_m,indentation_m,thumb_fn_N,fem_ratio,rigid_ratio,friction,larger\n";
    for (std::size_t k = 0; k < result.pairs.size(); ++k) {
        const auto& p = result.pairs[k];
        const SweepRow& f = result.fem[k];
        std::string larger = "unmatched";
        if (p.rigid_level > 0)
            larger = p.fem_ratio > p.rigid_ratio ? "fem" : (p.fem_ratio < p.rigid_ratio ? "rigid" : "equal");
        out << p.fem_level << ',' << p.rigid_level << ',' << f.depth << ',' << f.max_indentation << ','
            << f.thumb_normal << ',' << p.fem_ratio << ',' << p.rigid_ratio << ',' << friction << ',' << larger
            << '\n';
    }
}

}  // namespace softgrasp
