#include "softgrasp/scene.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

#include <json.hpp>

#include "softgrasp/errors.hpp"

namespace softgrasp {

namespace {

using nlohmann::json;

// JSON object view that records its dotted path and rejects keys nobody asked for.
class Section {
public:
    Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ConfigError(where() + " must be an object");
    }
    Section(const Section&) = delete;
    Section& operator=(const Section&) = delete;

    ~Section() noexcept(false) {
        if (std::uncaught_exceptions() > 0) return;
        for (const auto& [key, value] : j_.items())
            if (!seen_.count(key)) throw ConfigError(field(key) + " is not a recognised key");
    }

    bool has(const std::string& key) {
        seen_.insert(key);
        return j_.contains(key) && !j_.at(key).is_null();
    }
    std::string field(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

    const json& raw(const std::string& key) {
        if (!has(key)) throw ConfigError(field(key) + " is required");
        return j_.at(key);
    }
    Section section(const std::string& key) { return Section(raw(key), field(key)); }

    double number(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_number() || !std::isfinite(v.get<double>())) throw ConfigError(field(key) + " must be a number");
        return v.get<double>();
    }
    double number(const std::string& key, double fallback) { return has(key) ? number(key) : fallback; }
    double positive(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v > 0)) throw ConfigError(field(key) + " must be > 0");
        return v;
    }
    double non_negative(const std::string& key, double fallback) {
        const double v = number(key, fallback);
        if (!(v >= 0)) throw ConfigError(field(key) + " must be >= 0");
        return v;
    }
    int integer(const std::string& key, int fallback, int minimum) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_number_integer()) throw ConfigError(field(key) + " must be an integer");
        const int i = v.get<int>();
        if (i < minimum) throw ConfigError(field(key) + " must be >= " + std::to_string(minimum));
        return i;
    }
    std::string string(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_string()) throw ConfigError(field(key) + " must be a string");
        return v.get<std::string>();
    }
    std::string string(const std::string& key, const std::string& fallback) {
        return has(key) ? string(key) : fallback;
    }
    bool boolean(const std::string& key, bool fallback) {
        if (!has(key)) return fallback;
        const json& v = raw(key);
        if (!v.is_boolean()) throw ConfigError(field(key) + " must be true or false");
        return v.get<bool>();
    }
    Vec3 vec3(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array() || v.size() != 3) throw ConfigError(field(key) + " must be an array of 3 numbers");
        Vec3 out;
        for (int i = 0; i < 3; ++i) {
            if (!v[i].is_number()) throw ConfigError(field(key) + " must be an array of 3 numbers");
            out[i] = v[i].get<double>();
        }
        if (!out.allFinite()) throw ConfigError(field(key) + " must be finite");
        return out;
    }
    Vec3 vec3(const std::string& key, const Vec3& fallback) { return has(key) ? vec3(key) : fallback; }
    std::vector<double> numbers(const std::string& key) {
        const json& v = raw(key);
        if (!v.is_array()) throw ConfigError(field(key) + " must be an array of numbers");
        std::vector<double> out;
        for (const auto& x : v) {
            if (!x.is_number()) throw ConfigError(field(key) + " must be an array of numbers");
            out.push_back(x.get<double>());
        }
        return out;
    }

private:
    std::string where() const { return path_.empty() ? "scene" : path_; }

    const json& j_;
    std::string path_;
    std::set<std::string> seen_;
};

Pose read_pose(Section& s) {
    return make_pose(s.vec3("xyz", Vec3::Zero()), s.vec3("rpy", Vec3::Zero()));
}

Material read_material(Section& s) {
    Material m;
    m.model = ConstitutiveModel::NeoHookean;
    if (s.has("model")) {
        try {
            m.model = parse_model(s.string("model"));
        } catch (const ConfigError&) {
            throw ConfigError(s.field("model") + " must be 'linear-elastic' or 'neo-hookean'");
        }
    }
    m.young_modulus = s.number("young_modulus");
    m.poisson_ratio = s.number("poisson_ratio");
    m.density = s.number("density");
    m.friction = s.number("friction", 0.5);
    return m;
}

Link read_link(Section& s) {
    Link l;
    l.name = s.string("name");
    l.parent = s.string("parent", "");
    if (s.has("origin")) {
        Section o = s.section("origin");
        l.origin = read_pose(o);
    }
    if (s.has("joint")) {
        Section j = s.section("joint");
        try {
            l.joint.type = parse_joint_type(j.string("type"));
        } catch (const InvalidArgument&) {
            throw ConfigError(j.field("type") + " must be 'fixed', 'revolute' or 'prismatic'");
        }
        if (l.joint.type != JointType::Fixed) {
            const Vec3 axis = j.vec3("axis");
            if (!(axis.norm() > 0)) throw ConfigError(j.field("axis") + " must be nonzero");
            l.joint.axis = axis.normalized();
            const auto lim = j.numbers("limits");
            if (lim.size() != 2 || !(lim[0] <= lim[1])) throw ConfigError(j.field("limits") + " must be [lower, upper]");
            l.joint.lower = lim[0];
            l.joint.upper = lim[1];
            l.joint.open = j.number("open", lim[0]);
            if (l.joint.open < lim[0] || l.joint.open > lim[1])
                throw ConfigError(j.field("open") + " must lie within the limits");
        }
    }
    if (s.has("pad")) {
        Section p = s.section("pad");
        Pad pad;
        pad.center = p.vec3("center", Vec3::Zero());
        pad.size = p.vec3("size");
        if ((pad.size.array() <= 0).any()) throw ConfigError(p.field("size") + " must be positive");
        pad.normal = p.vec3("normal", -Vec3::UnitZ());
        if (std::abs(pad.normal.norm() - 1) > 1e-9 || std::abs(pad.normal.cwiseAbs().maxCoeff() - 1) > 1e-9)
            throw ConfigError(p.field("normal") + " must be a signed unit axis");
        l.pad = pad;
    }
    return l;
}

Restraint parse_restraint(const std::string& s, const std::string& field) {
    if (s == "none") return Restraint::None;
    if (s == "fix_center") return Restraint::FixCenter;
    if (s == "clamp_min_x") return Restraint::ClampMinX;
    if (s == "clamp_min_z") return Restraint::ClampMinZ;
    throw ConfigError(field + " must be one of none, fix_center, clamp_min_x, clamp_min_z");
}

}  // namespace

Scene parse_scene(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scene is not valid JSON: ") + e.what());
    }
    Scene sc;
    Section root(doc, "");

    {
        Section m = root.section("materials");
        for (const auto& [name, value] : doc.at("materials").items()) {
            Section ms = Section(value, m.field(name));
            m.has(name);
            sc.materials[name] = read_material(ms);
            sc.materials[name].validate(m.field(name));
        }
    }

    {
        Section o = root.section("object");
        auto& ob = sc.object;
        ob.kind = o.string("kind");
        if (ob.kind != "box" && ob.kind != "cylinder" && ob.kind != "sphere")
            throw ConfigError(o.field("kind") + " must be box, cylinder or sphere");
        Section d = o.section("dimensions");
        if (ob.kind == "box") {
            ob.size = d.vec3("size");
            if ((ob.size.array() <= 0).any()) throw ConfigError(d.field("size") + " must be positive");
            const Vec3 r = o.vec3("resolution");
            for (int i = 0; i < 3; ++i) {
                if (r[i] < 1 || r[i] != std::floor(r[i])) throw ConfigError(o.field("resolution") + " must be positive integers");
                ob.box_divisions[i] = static_cast<int>(r[i]);
            }
        } else {
            ob.radius = d.number("radius");
            if (!(ob.radius > 0)) throw ConfigError(d.field("radius") + " must be > 0");
            if (ob.kind == "cylinder") {
                ob.length = d.number("length");
                if (!(ob.length > 0)) throw ConfigError(d.field("length") + " must be > 0");
                Section r = o.section("resolution");
                ob.radial_resolution = r.integer("radial", 6, 1);
                ob.axial_resolution = r.integer("axial", 30, 1);
            } else {
                ob.radial_resolution = o.integer("resolution", 6, 1);
            }
        }
        ob.material = o.string("material");
        if (!sc.materials.count(ob.material))
            throw ConfigError(o.field("material") + " names unknown material '" + ob.material + "'");
        ob.restraint = parse_restraint(o.string("restraint", "none"), o.field("restraint"));
        if (o.has("mass")) ob.mass = o.positive("mass", 1.0);
    }

    if (root.has("gripper")) {
        sc.has_gripper = true;
        Section g = root.section("gripper");
        if (g.has("base")) {
            Section b = g.section("base");
            sc.gripper.base = read_pose(b);
        }
        sc.tightness_link = g.string("tightness_link", "thumb_proximal");
        const json& links = g.raw("links");
        if (!links.is_array() || links.empty()) throw ConfigError(g.field("links") + " must be a non-empty array");
        for (std::size_t i = 0; i < links.size(); ++i) {
            Section ls(links[i], g.field("links") + "[" + std::to_string(i) + "]");
            sc.gripper.links.push_back(read_link(ls));
        }
        try {
            sc.gripper.validate();
        } catch (const InvalidArgument& e) {
            throw ConfigError(g.field("links") + ": " + e.what());
        }
        if (sc.gripper.index(sc.tightness_link) < 0)
            throw ConfigError(g.field("tightness_link") + " names unknown link '" + sc.tightness_link + "'");
    }

    if (root.has("contact")) {
        Section c = root.section("contact");
        if (c.has("k_n")) sc.contact.normal_stiffness = c.positive("k_n", 1.0);
        if (c.has("k_t")) sc.contact.tangential_stiffness = c.positive("k_t", 1.0);
        if (c.has("mu")) sc.contact.friction = c.non_negative("mu", 0.0);
        sc.contact.activation_tolerance = c.non_negative("activation_tolerance", 0.0);
        sc.contact.search_margin = c.positive("search_margin", sc.contact.search_margin);
    }

    if (root.has("sim")) {
        Section s = root.section("sim");
        auto& sim = sc.sim;
        sim.safety = s.number("safety", sim.safety);
        if (!(sim.safety > 0 && sim.safety <= 1)) throw ConfigError(s.field("safety") + " must be in (0, 1]");
        sim.damping = s.non_negative("damping", sim.damping);
        sim.output_interval = s.positive("output_interval", sim.output_interval);
        sim.max_time = s.positive("max_time", sim.max_time);
        sim.energy_ratio = s.positive("energy_ratio", sim.energy_ratio);
        sim.window = s.integer("window", sim.window, 1);
        sim.gravity = s.vec3("gravity", sim.gravity);
        sim.closure_duration = s.positive("closure_duration", sim.closure_duration);
        sim.hold_duration = s.non_negative("hold_duration", sim.hold_duration);
        sim.pull_duration = s.positive("pull_duration", sim.pull_duration);
        sim.max_pull_energy_ratio = s.positive("max_pull_energy_ratio", sim.max_pull_energy_ratio);
        sim.max_pull_doublings = s.integer("max_pull_doublings", sim.max_pull_doublings, 0);
    }

    if (root.has("sweep")) {
        Section s = root.section("sweep");
        auto& sw = sc.sweep;
        sw.levels = s.integer("levels", sw.levels, 1);
        sw.max_depth = s.non_negative("max_depth", sw.max_depth);
        if (s.has("depths")) {
            sw.depths = s.numbers("depths");
            if (static_cast<int>(sw.depths.size()) != sw.levels)
                throw ConfigError(s.field("depths") + " must have one entry per level");
            for (std::size_t i = 0; i < sw.depths.size(); ++i)
                if (!(sw.depths[i] >= 0) || (i > 0 && sw.depths[i] < sw.depths[i - 1]))
                    throw ConfigError(s.field("depths") + " must be non-negative and non-decreasing");
        }
        if (s.has("pull")) {
            Section p = s.section("pull");
            sw.pull_direction = p.vec3("direction", sw.pull_direction);
            if (!(sw.pull_direction.norm() > 0)) throw ConfigError(p.field("direction") + " must be nonzero");
            sw.pull_direction.normalize();
            sw.pull_distance = p.non_negative("distance", sw.pull_distance);
        }
        sw.slip_threshold = s.positive("slip_threshold", sw.slip_threshold);
        sw.write_vtk = s.boolean("write_vtk", sw.write_vtk);
    }

    if (root.has("rigid")) {
        Section r = root.section("rigid");
        auto& rg = sc.rigid;
        if (r.has("actuation")) {
            const json& a = r.raw("actuation");
            if (a.is_string()) {
                if (a.get<std::string>() != "match_fem")
                    throw ConfigError(r.field("actuation") + " must be \"match_fem\" or an array of forces");
                rg.match_fem = true;
            } else {
                rg.match_fem = false;
                rg.actuation = r.numbers("actuation");
                if (static_cast<int>(rg.actuation.size()) != sc.sweep.levels)
                    throw ConfigError(r.field("actuation") + " must have one entry per sweep level");
                for (std::size_t i = 0; i < rg.actuation.size(); ++i)
                    if (!(rg.actuation[i] >= 0) || (i > 0 && rg.actuation[i] < rg.actuation[i - 1]))
                        throw ConfigError(r.field("actuation") + " must be non-negative and non-decreasing");
            }
        }
        rg.actuation_gain = r.positive("actuation_gain", rg.actuation_gain);
        rg.pull_load = r.non_negative("pull_load", rg.pull_load);
    }

    if (root.has("grasp")) {
        Section g = root.section("grasp");
        sc.grasp.depth = g.non_negative("depth", sc.grasp.depth);
    }
    return sc;
}

Scene load_scene(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read scene file " + path.string());
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_scene(ss.str());
}

const Material& object_material(const Scene& scene) { return scene.materials.at(scene.object.material); }

Mesh build_mesh(const Scene& scene) {
    const auto& o = scene.object;
    if (o.kind == "box") return generate_box_mesh(o.size, o.box_divisions);
    if (o.kind == "cylinder") return generate_cylinder_mesh(o.radius, o.length, o.radial_resolution, o.axial_resolution);
    return generate_sphere_mesh(o.radius, o.radial_resolution);
}

MaterialTable material_table(const Scene& scene) {
    Material m = object_material(scene);
    m.mass_damping = scene.sim.damping;
    return {{0, m}};
}

Constraints build_restraint(const Scene& scene, const Mesh& mesh) {
    Constraints c;
    const auto n = static_cast<int>(mesh.node_count());
    switch (scene.object.restraint) {
        case Restraint::None: break;
        case Restraint::FixCenter: {
            const Vec3 centroid = mesh.nodes.rowwise().mean();
            int best = 0;
            for (int i = 1; i < n; ++i)
                if ((mesh.nodes.col(i) - centroid).norm() < (mesh.nodes.col(best) - centroid).norm()) best = i;
            c.fix_node(best);
            break;
        }
        case Restraint::ClampMinX:
        case Restraint::ClampMinZ: {
            const int axis = scene.object.restraint == Restraint::ClampMinX ? 0 : 2;
            const double lo = mesh.nodes.row(axis).minCoeff();
            const double span = mesh.nodes.row(axis).maxCoeff() - lo;
            for (int i = 0; i < n; ++i)
                if (mesh.nodes(axis, i) <= lo + 1e-9 * span) c.fix_node(i);
            break;
        }
    }
    return c;
}

RigidObject rigid_object(const Scene& scene) {
    const auto& o = scene.object;
    RigidObject r;
    r.radius = o.radius;
    double volume = 0;
    if (o.kind == "sphere") {
        r.kind = RigidObject::Kind::Sphere;
        volume = 4.0 / 3.0 * std::numbers::pi * std::pow(o.radius, 3);
    } else if (o.kind == "cylinder") {
        r.kind = RigidObject::Kind::Cylinder;
        r.length = o.length;
        volume = std::numbers::pi * o.radius * o.radius * o.length;
    } else {
        throw ConfigError("object.kind 'box' has no rigid-engine primitive; use sphere or cylinder");
    }
    r.mass = o.mass.value_or(object_material(scene).density * volume);
    return r;
}

ContactLaw contact_law(const Scene& scene, const Mesh& mesh) {
    ContactLaw law;
    double h = 0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) h += std::cbrt(element_volume(mesh, e));
    h /= std::max<std::size_t>(1, mesh.element_count());
    law.normal_stiffness = scene.contact.normal_stiffness.value_or(10.0 * object_material(scene).young_modulus * h);
    law.tangential_stiffness = scene.contact.tangential_stiffness.value_or(law.normal_stiffness);
    law.friction = scene.contact.friction.value_or(object_material(scene).friction);
    return law;
}

std::vector<double> sweep_depths(const Scene& scene) {
    if (!scene.sweep.depths.empty()) return scene.sweep.depths;
    const int n = scene.sweep.levels;
    std::vector<double> d(n, 0.0);
    for (int i = 0; i < n; ++i) d[i] = n == 1 ? scene.sweep.max_depth : scene.sweep.max_depth * i / (n - 1);
    return d;
}

}  // namespace softgrasp
