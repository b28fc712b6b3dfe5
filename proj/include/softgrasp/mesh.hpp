#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "softgrasp/types.hpp"

namespace softgrasp {

using HexConnectivity = std::array<int, 8>;

/// Hexahedral mesh of a deformable body. Reference coordinates in meters, VTK hexahedron node order.
struct Mesh {
    NodalField nodes;                       // 3 x node_count
    std::vector<HexConnectivity> elements;  // 0-based node indices
    std::vector<int> element_material;

    std::size_t node_count() const { return static_cast<std::size_t>(nodes.cols()); }
    std::size_t element_count() const { return elements.size(); }

    /// 3 x 8 reference coordinates of one element.
    Eigen::Matrix<double, 3, 8> element_coords(std::size_t e) const;
};

/// Triangulated rigid surface in a body-local frame with per-triangle outward unit normals.
struct RigidSurface {
    std::vector<Vec3> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<Vec3> normals;

    /// Recomputes normals from the vertex winding. Throws InvalidArgument on a zero-area triangle.
    void compute_normals();
    RigidSurface transformed(const Pose& pose) const;
};

/// Closed box surface (12 triangles) centered at `center` with edge lengths `size`, axes aligned with the frame.
RigidSurface make_box_surface(const Vec3& center, const Vec3& size);

/// Single flat rectangle (2 triangles) with the given outward normal.
RigidSurface make_rectangle_surface(const Vec3& center, const Vec3& u_axis, const Vec3& v_axis,
                                    double u_length, double v_length);

Mesh generate_box_mesh(const Vec3& extents, const std::array<int, 3>& divisions, int material_id = 0);

/// Cylinder along +x from x = 0 to x = length, axis through y = z = 0.
/// Butterfly layout: a square core of radial_resolution^2 cells and four shell blocks.
Mesh generate_cylinder_mesh(double radius, double length, int radial_resolution, int axial_resolution,
                            int material_id = 0);

/// Spherified-cube sphere centered at the origin: a cube core and six shell blocks.
Mesh generate_sphere_mesh(double radius, int resolution, int material_id = 0);

struct ValidationReport {
    bool ok = true;
    std::vector<double> min_jacobian;  // per element, over corners and Gauss points
    std::vector<std::string> violations;
};

ValidationReport validate_mesh(const Mesh& mesh);

/// Element volume by 2x2x2 Gauss quadrature of the reference Jacobian.
double element_volume(const Mesh& mesh, std::size_t e);
double mesh_volume(const Mesh& mesh);

/// Boundary faces (faces referenced by exactly one element), as (element, local face) pairs.
std::vector<std::pair<int, int>> boundary_faces(const Mesh& mesh);
/// Sorted unique node ids on boundary faces.
std::vector<int> boundary_nodes(const Mesh& mesh);

struct VtkField {
    std::string name;
    int components = 1;  // 1 (scalar) or 3 (vector)
    std::vector<double> values;
};

/// Legacy ASCII VTK 3.0 unstructured grid with VTK_HEXAHEDRON cells. Positions are the reference
/// coordinates unless `positions` is supplied.
void write_vtk(const Mesh& mesh, const std::vector<VtkField>& nodal_fields,
               const std::vector<VtkField>& element_fields, const std::filesystem::path& path,
               const NodalField* positions = nullptr);

std::string mesh_to_json(const Mesh& mesh);
Mesh mesh_from_json(const std::string& text);

}  // namespace softgrasp
