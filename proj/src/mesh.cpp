#include "softgrasp/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>

#include <json.hpp>

#include "softgrasp/errors.hpp"
#include "softgrasp/hex8.hpp"

namespace softgrasp {

Eigen::Matrix<double, 3, 8> Mesh::element_coords(std::size_t e) const {
    Eigen::Matrix<double, 3, 8> x;
    for (int a = 0; a < 8; ++a) x.col(a) = nodes.col(elements[e][a]);
    return x;
}

void RigidSurface::compute_normals() {
    normals.resize(triangles.size());
    for (std::size_t t = 0; t < triangles.size(); ++t) {
        const auto& tri = triangles[t];
        const Vec3 n = (vertices[tri[1]] - vertices[tri[0]]).cross(vertices[tri[2]] - vertices[tri[0]]);
        const double len = n.norm();
        if (!(len > 1e-18)) throw InvalidArgument("degenerate triangle " + std::to_string(t) + " in rigid surface");
        normals[t] = n / len;
    }
}

RigidSurface RigidSurface::transformed(const Pose& pose) const {
    RigidSurface out;
    out.triangles = triangles;
    out.vertices.reserve(vertices.size());
    for (const auto& v : vertices) out.vertices.push_back(pose * v);
    out.normals.reserve(normals.size());
    for (const auto& n : normals) out.normals.push_back(pose.linear() * n);
    return out;
}

RigidSurface make_box_surface(const Vec3& center, const Vec3& size) {
    RigidSurface s;
    const Vec3 h = 0.5 * size;
    for (int a = 0; a < 8; ++a)
        s.vertices.push_back(center + Vec3(hex8::kXi[a] * h.x(), hex8::kEta[a] * h.y(), hex8::kZeta[a] * h.z()));
    for (const auto& f : hex8::kFaces) {
        s.triangles.push_back({f[0], f[1], f[2]});
        s.triangles.push_back({f[0], f[2], f[3]});
    }
    s.compute_normals();
    return s;
}

RigidSurface make_rectangle_surface(const Vec3& center, const Vec3& u_axis, const Vec3& v_axis, double u_length,
                                    double v_length) {
    RigidSurface s;
    const Vec3 du = 0.5 * u_length * u_axis.normalized();
    const Vec3 dv = 0.5 * v_length * v_axis.normalized();
    s.vertices = {center - du - dv, center + du - dv, center + du + dv, center - du + dv};
    s.triangles = {{0, 1, 2}, {0, 2, 3}};
    s.compute_normals();
    return s;
}

namespace {

// Reorders a hex so that its reference Jacobian at the centroid is positive.
void orient(HexConnectivity& h, const NodalField& nodes) {
    Eigen::Matrix<double, 3, 8> x;
    for (int a = 0; a < 8; ++a) x.col(a) = nodes.col(h[a]);
    if (hex8::jacobian(x, hex8::NaturalPoint<double>::Zero().eval()).determinant() < 0) {
        std::swap(h[1], h[3]);
        std::swap(h[5], h[7]);
    }
}

NodalField to_field(const std::vector<Vec3>& pts) {
    NodalField f(3, static_cast<Eigen::Index>(pts.size()));
    for (std::size_t i = 0; i < pts.size(); ++i) f.col(static_cast<Eigen::Index>(i)) = pts[i];
    return f;
}

}  // namespace

Mesh generate_box_mesh(const Vec3& extents, const std::array<int, 3>& divisions, int material_id) {
    for (int d = 0; d < 3; ++d) {
        if (!(extents[d] > 0) || !std::isfinite(extents[d])) throw InvalidArgument("box extents must be positive");
        if (divisions[d] < 1) throw InvalidArgument("box divisions must be >= 1");
    }
    const int nx = divisions[0], ny = divisions[1], nz = divisions[2];
    auto id = [&](int i, int j, int k) { return i + (nx + 1) * (j + (ny + 1) * k); };

    Mesh m;
    m.nodes.resize(3, (nx + 1) * (ny + 1) * (nz + 1));
    for (int k = 0; k <= nz; ++k)
        for (int j = 0; j <= ny; ++j)
            for (int i = 0; i <= nx; ++i)
                m.nodes.col(id(i, j, k)) = Vec3(extents.x() * i / nx, extents.y() * j / ny, extents.z() * k / nz);
    for (int k = 0; k < nz; ++k)
        for (int j = 0; j < ny; ++j)
            for (int i = 0; i < nx; ++i)
                m.elements.push_back({id(i, j, k), id(i + 1, j, k), id(i + 1, j + 1, k), id(i, j + 1, k),
                                      id(i, j, k + 1), id(i + 1, j, k + 1), id(i + 1, j + 1, k + 1),
                                      id(i, j + 1, k + 1)});
    m.element_material.assign(m.elements.size(), material_id);
    return m;
}

Mesh generate_cylinder_mesh(double radius, double length, int radial_resolution, int axial_resolution,
                            int material_id) {
    if (!(radius > 0) || !std::isfinite(radius)) throw InvalidArgument("cylinder radius must be positive");
    if (!(length > 0) || !std::isfinite(length)) throw InvalidArgument("cylinder length must be positive");
    if (radial_resolution < 1 || axial_resolution < 1) throw InvalidArgument("cylinder resolutions must be >= 1");

    const int n = radial_resolution;
    const int layers = std::max(1, (n + 1) / 2);
    const double core = 0.5 * radius;  // core half-width

    // Cross-section in the (y, z) plane.
    std::vector<Eigen::Vector2d> pts;
    std::vector<int> core_id((n + 1) * (n + 1));
    for (int iy = 0; iy <= n; ++iy)
        for (int ix = 0; ix <= n; ++ix) {
            core_id[ix + (n + 1) * iy] = static_cast<int>(pts.size());
            pts.emplace_back(-core + 2.0 * core * ix / n, -core + 2.0 * core * iy / n);
        }
    const int perimeter = 4 * n;
    auto boundary_core = [&](int k) {
        const int b = k / n, i = k % n;
        switch (b) {
            case 0: return core_id[n + (n + 1) * i];
            case 1: return core_id[(n - i) + (n + 1) * n];
            case 2: return core_id[0 + (n + 1) * (n - i)];
            default: return core_id[i];
        }
    };
    std::vector<int> ring_id(perimeter * (layers + 1));
    for (int k = 0; k < perimeter; ++k) {
        ring_id[k] = boundary_core(k);
        const Eigen::Vector2d inner = pts[ring_id[k]];
        const double theta = -std::numbers::pi / 4 + (std::numbers::pi / 2) * k / n;
        const Eigen::Vector2d outer(radius * std::cos(theta), radius * std::sin(theta));
        for (int j = 1; j <= layers; ++j) {
            const double t = static_cast<double>(j) / layers;
            ring_id[k + perimeter * j] = static_cast<int>(pts.size());
            pts.push_back((1 - t) * inner + t * outer);
        }
    }
    std::vector<std::array<int, 4>> quads;
    for (int iy = 0; iy < n; ++iy)
        for (int ix = 0; ix < n; ++ix)
            quads.push_back({core_id[ix + (n + 1) * iy], core_id[ix + 1 + (n + 1) * iy],
                             core_id[ix + 1 + (n + 1) * (iy + 1)], core_id[ix + (n + 1) * (iy + 1)]});
    for (int j = 0; j < layers; ++j)
        for (int k = 0; k < perimeter; ++k) {
            const int k1 = (k + 1) % perimeter;
            quads.push_back({ring_id[k + perimeter * j], ring_id[k + perimeter * (j + 1)],
                             ring_id[k1 + perimeter * (j + 1)], ring_id[k1 + perimeter * j]});
        }

    const int per_section = static_cast<int>(pts.size());
    Mesh m;
    m.nodes.resize(3, per_section * (axial_resolution + 1));
    for (int l = 0; l <= axial_resolution; ++l)
        for (int p = 0; p < per_section; ++p)
            m.nodes.col(p + per_section * l) = Vec3(length * l / axial_resolution, pts[p].x(), pts[p].y());
    for (int l = 0; l < axial_resolution; ++l)
        for (const auto& q : quads) {
            HexConnectivity h;
            for (int a = 0; a < 4; ++a) {
                h[a] = q[a] + per_section * l;
                h[a + 4] = q[a] + per_section * (l + 1);
            }
            orient(h, m.nodes);
            m.elements.push_back(h);
        }
    m.element_material.assign(m.elements.size(), material_id);
    return m;
}

Mesh generate_sphere_mesh(double radius, int resolution, int material_id) {
    if (!(radius > 0) || !std::isfinite(radius)) throw InvalidArgument("sphere radius must be positive");
    if (resolution < 1) throw InvalidArgument("sphere resolution must be >= 1");

    const int n = resolution;
    const int layers = std::max(1, (n + 1) / 2);
    const double core = 0.4 * radius;

    std::map<std::array<int, 4>, int> index;
    std::vector<Vec3> pts;
    auto node = [&](int i, int j, int k, int layer) {
        const std::array<int, 4> key{i, j, k, layer};
        if (auto it = index.find(key); it != index.end()) return it->second;
        const Vec3 unit(2.0 * i / n - 1.0, 2.0 * j / n - 1.0, 2.0 * k / n - 1.0);
        const Vec3 inner = core * unit;
        const Vec3 outer = radius * unit.normalized();
        const double t = static_cast<double>(layer) / layers;
        const int id = static_cast<int>(pts.size());
        pts.push_back((1 - t) * inner + t * outer);
        index.emplace(key, id);
        return id;
    };

    std::vector<HexConnectivity> hexes;
    for (int k = 0; k < n; ++k)
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < n; ++i)
                hexes.push_back({node(i, j, k, 0), node(i + 1, j, k, 0), node(i + 1, j + 1, k, 0),
                                 node(i, j + 1, k, 0), node(i, j, k + 1, 0), node(i + 1, j, k + 1, 0),
                                 node(i + 1, j + 1, k + 1, 0), node(i, j + 1, k + 1, 0)});
    // Six shell blocks: face lattice (p, q) on the core boundary, extruded outward by layer.
    for (int axis = 0; axis < 3; ++axis)
        for (int side : {0, n}) {
            const int a1 = (axis + 1) % 3, a2 = (axis + 2) % 3;
            auto lattice = [&](int p, int q, int layer) {
                std::array<int, 3> c{};
                c[axis] = side;
                c[a1] = p;
                c[a2] = q;
                return node(c[0], c[1], c[2], layer);
            };
            for (int layer = 0; layer < layers; ++layer)
                for (int q = 0; q < n; ++q)
                    for (int p = 0; p < n; ++p)
                        hexes.push_back({lattice(p, q, layer), lattice(p + 1, q, layer), lattice(p + 1, q + 1, layer),
                                         lattice(p, q + 1, layer), lattice(p, q, layer + 1),
                                         lattice(p + 1, q, layer + 1), lattice(p + 1, q + 1, layer + 1),
                                         lattice(p, q + 1, layer + 1)});
        }

    Mesh m;
    m.nodes = to_field(pts);
    for (auto& h : hexes) orient(h, m.nodes);
    m.elements = std::move(hexes);
    m.element_material.assign(m.elements.size(), material_id);
    return m;
}

ValidationReport validate_mesh(const Mesh& mesh) {
    ValidationReport r;
    const auto n = static_cast<int>(mesh.node_count());
    for (Eigen::Index i = 0; i < mesh.nodes.cols(); ++i)
        if (!mesh.nodes.col(i).allFinite()) {
            r.ok = false;
            r.violations.push_back("node " + std::to_string(i) + ": non-finite coordinate");
        }
    if (mesh.element_material.size() != mesh.elements.size()) {
        r.ok = false;
        r.violations.push_back("element_material length does not match element count");
    }

    std::array<hex8::NaturalPoint<double>, 16> samples;
    const auto gp = hex8::gauss_points();
    for (int a = 0; a < 8; ++a) {
        samples[a] = hex8::NaturalPoint<double>(hex8::kXi[a], hex8::kEta[a], hex8::kZeta[a]);
        samples[8 + a] = gp[a];
    }

    r.min_jacobian.assign(mesh.element_count(), 0.0);
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const auto& h = mesh.elements[e];
        bool indices_ok = true;
        for (int a = 0; a < 8; ++a) {
            if (h[a] < 0 || h[a] >= n) {
                indices_ok = false;
                r.violations.push_back("element " + std::to_string(e) + ": node index " + std::to_string(h[a]) +
                                       " out of range");
            }
            for (int b = 0; b < a; ++b)
                if (h[a] == h[b]) {
                    indices_ok = false;
                    r.violations.push_back("element " + std::to_string(e) + ": duplicate node " +
                                           std::to_string(h[a]));
                }
        }
        if (!indices_ok) {
            r.ok = false;
            r.min_jacobian[e] = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        const auto x = mesh.element_coords(e);
        double jmin = std::numeric_limits<double>::infinity();
        for (const auto& p : samples) jmin = std::min(jmin, hex8::jacobian(x, p).determinant());
        r.min_jacobian[e] = jmin;
        if (!(jmin > 0)) {
            r.ok = false;
            r.violations.push_back("element " + std::to_string(e) + ": non-positive Jacobian " + std::to_string(jmin));
        }
    }
    return r;
}

double element_volume(const Mesh& mesh, std::size_t e) {
    const auto x = mesh.element_coords(e);
    double v = 0;
    for (const auto& p : hex8::gauss_points()) v += hex8::jacobian(x, p).determinant();
    return v;
}

double mesh_volume(const Mesh& mesh) {
    double v = 0;
    for (std::size_t e = 0; e < mesh.element_count(); ++e) v += element_volume(mesh, e);
    return v;
}

std::vector<std::pair<int, int>> boundary_faces(const Mesh& mesh) {
    std::map<std::array<int, 4>, std::pair<int, int>> seen;
    std::map<std::array<int, 4>, int> count;
    for (std::size_t e = 0; e < mesh.element_count(); ++e)
        for (int f = 0; f < 6; ++f) {
            std::array<int, 4> key;
            for (int c = 0; c < 4; ++c) key[c] = mesh.elements[e][hex8::kFaces[f][c]];
            std::sort(key.begin(), key.end());
            ++count[key];
            seen.emplace(key, std::make_pair(static_cast<int>(e), f));
        }
    std::vector<std::pair<int, int>> out;
    for (const auto& [key, c] : count)
        if (c == 1) out.push_back(seen.at(key));
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> boundary_nodes(const Mesh& mesh) {
    std::vector<int> ids;
    for (const auto& [e, f] : boundary_faces(mesh))
        for (int c = 0; c < 4; ++c) ids.push_back(mesh.elements[e][hex8::kFaces[f][c]]);
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
}

void write_vtk(const Mesh& mesh, const std::vector<VtkField>& nodal_fields,
               const std::vector<VtkField>& element_fields, const std::filesystem::path& path,
               const NodalField* positions) {
    for (const auto& f : nodal_fields)
        if (f.values.size() != mesh.node_count() * static_cast<std::size_t>(f.components))
            throw InvalidArgument("nodal field '" + f.name + "' has wrong length");
    for (const auto& f : element_fields)
        if (f.values.size() != mesh.element_count() * static_cast<std::size_t>(f.components))
            throw InvalidArgument("element field '" + f.name + "' has wrong length");
    if (positions && positions->cols() != mesh.nodes.cols())
        throw InvalidArgument("positions do not match node count");

    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << std::setprecision(17);
    out << "# vtk DataFile Version 3.0\nsoftgrasp\nASCII\nDATASET UNSTRUCTURED_GRID\n";
    const NodalField& x = positions ? *positions : mesh.nodes;
    out << "POINTS " << mesh.node_count() << " double\n";
    for (Eigen::Index i = 0; i < x.cols(); ++i) out << x(0, i) << ' ' << x(1, i) << ' ' << x(2, i) << '\n';
    out << "CELLS " << mesh.element_count() << ' ' << 9 * mesh.element_count() << '\n';
    for (const auto& h : mesh.elements) {
        out << 8;
        for (int a : h) out << ' ' << a;
        out << '\n';
    }
    out << "CELL_TYPES " << mesh.element_count() << '\n';
    for (std::size_t e = 0; e < mesh.element_count(); ++e) out << "12\n";

    auto write_fields = [&out](const std::vector<VtkField>& fields) {
        for (const auto& f : fields) {
            if (f.components == 3) {
                out << "VECTORS " << f.name << " double\n";
                for (std::size_t i = 0; i < f.values.size(); i += 3)
                    out << f.values[i] << ' ' << f.values[i + 1] << ' ' << f.values[i + 2] << '\n';
            } else {
                out << "SCALARS " << f.name << " double 1\nLOOKUP_TABLE default\n";
                for (double v : f.values) out << v << '\n';
            }
        }
    };
    if (!nodal_fields.empty()) {
        out << "POINT_DATA " << mesh.node_count() << '\n';
        write_fields(nodal_fields);
    }
    if (!element_fields.empty()) {
        out << "CELL_DATA " << mesh.element_count() << '\n';
        write_fields(element_fields);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::string mesh_to_json(const Mesh& mesh) {
    nlohmann::json j;
    j["nodes"] = nlohmann::json::array();
    for (Eigen::Index i = 0; i < mesh.nodes.cols(); ++i)
        j["nodes"].push_back({mesh.nodes(0, i), mesh.nodes(1, i), mesh.nodes(2, i)});
    j["elements"] = mesh.elements;
    j["element_material"] = mesh.element_material;
    return j.dump();
}

Mesh mesh_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("mesh JSON: ") + e.what());
    }
    Mesh m;
    try {
        const auto& nodes = j.at("nodes");
        m.nodes.resize(3, static_cast<Eigen::Index>(nodes.size()));
        for (std::size_t i = 0; i < nodes.size(); ++i)
            for (int d = 0; d < 3; ++d) m.nodes(d, static_cast<Eigen::Index>(i)) = nodes.at(i).at(d).get<double>();
        m.elements = j.at("elements").get<std::vector<HexConnectivity>>();
        m.element_material = j.at("element_material").get<std::vector<int>>();
    } catch (const nlohmann::json::exception& e) {
        throw InvalidArgument(std::string("mesh JSON: ") + e.what());
    }
    return m;
}

}  // namespace softgrasp
