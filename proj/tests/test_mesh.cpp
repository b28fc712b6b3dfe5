#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "softgrasp/errors.hpp"
#include "softgrasp/mesh.hpp"

using namespace softgrasp;

namespace {

std::filesystem::path temp_path(const std::string& name) {
    auto dir = std::filesystem::temp_directory_path() / "softgrasp_test_mesh";
    std::filesystem::create_directories(dir);
    return dir / name;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Minimal legacy-VTK reader: POINTS block only.
NodalField read_vtk_points(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::string tok;
    while (in >> tok && tok != "POINTS") {
    }
    std::size_t n;
    std::string type;
    in >> n >> type;
    NodalField x(3, static_cast<Eigen::Index>(n));
    for (std::size_t i = 0; i < n; ++i)
        for (int d = 0; d < 3; ++d) {
            std::string v;
            in >> v;
            x(d, static_cast<Eigen::Index>(i)) = std::stod(v);
        }
    return x;
}

}  // namespace

TEST_CASE("box mesh counts and volume") {
    auto m = generate_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
    CHECK(m.node_count() == 8);
    CHECK(m.element_count() == 1);
    CHECK(mesh_volume(m) == doctest::Approx(1.0).epsilon(1e-14));

    m = generate_box_mesh(Vec3(1, 1, 1), {2, 2, 2});
    CHECK(m.node_count() == 27);
    CHECK(m.element_count() == 8);

    m = generate_box_mesh(Vec3(0.3, 0.1, 0.1), {30, 10, 10});
    CHECK(m.node_count() == 31u * 11u * 11u);
    CHECK(std::abs(mesh_volume(m) - 3e-3) < 1e-12);
    CHECK(validate_mesh(m).ok);
}

TEST_CASE("box mesh rejects degenerate input") {
    CHECK_THROWS_AS(generate_box_mesh(Vec3(0, 1, 1), {1, 1, 1}), InvalidArgument);
    CHECK_THROWS_AS(generate_box_mesh(Vec3(1, -1, 1), {1, 1, 1}), InvalidArgument);
    CHECK_THROWS_AS(generate_box_mesh(Vec3(1, 1, 1), {1, 0, 1}), InvalidArgument);
}

TEST_CASE("cylinder mesh validity and volume") {
    const double r = 0.05, L = 0.30;
    const auto coarse = generate_cylinder_mesh(r, L, 4, 12);
    CHECK(validate_mesh(coarse).ok);

    const double exact = std::numbers::pi * r * r * L;
    const auto fine = generate_cylinder_mesh(r, L, 8, 12);
    CHECK(validate_mesh(fine).ok);
    CHECK(std::abs(mesh_volume(fine) - exact) / exact < 0.05);

    // Monotone convergence as the resolution doubles.
    const double e2 = std::abs(mesh_volume(generate_cylinder_mesh(r, L, 2, 4)) - exact);
    const double e4 = std::abs(mesh_volume(generate_cylinder_mesh(r, L, 4, 4)) - exact);
    const double e8 = std::abs(mesh_volume(generate_cylinder_mesh(r, L, 8, 4)) - exact);
    CHECK(e4 < e2);
    CHECK(e8 < e4);

    CHECK_THROWS_AS(generate_cylinder_mesh(0.0, L, 4, 4), InvalidArgument);
    CHECK_THROWS_AS(generate_cylinder_mesh(r, -1.0, 4, 4), InvalidArgument);
}

TEST_CASE("sphere mesh validity and volume") {
    const double r = 0.05;
    CHECK(validate_mesh(generate_sphere_mesh(r, 6)).ok);

    const double exact = 4.0 / 3.0 * std::numbers::pi * r * r * r;
    CHECK(std::abs(mesh_volume(generate_sphere_mesh(r, 8)) - exact) / exact < 0.05);

    const double e2 = std::abs(mesh_volume(generate_sphere_mesh(r, 2)) - exact);
    const double e4 = std::abs(mesh_volume(generate_sphere_mesh(r, 4)) - exact);
    const double e8 = std::abs(mesh_volume(generate_sphere_mesh(r, 8)) - exact);
    CHECK(e4 < e2);
    CHECK(e8 < e4);

    CHECK_THROWS_AS(generate_sphere_mesh(r, 0), InvalidArgument);
    CHECK_THROWS_AS(generate_sphere_mesh(-r, 4), InvalidArgument);
}

TEST_CASE("every generator output validates") {
    for (int res = 1; res <= 5; ++res) {
        CHECK(validate_mesh(generate_cylinder_mesh(0.05, 0.3, res, 3)).ok);
        CHECK(validate_mesh(generate_sphere_mesh(0.05, res)).ok);
        CHECK(validate_mesh(generate_box_mesh(Vec3(0.1, 0.2, 0.3), {res, res + 1, res + 2})).ok);
    }
}

TEST_CASE("validate_mesh reference Jacobian and constructed defects") {
    auto cube = generate_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
    auto report = validate_mesh(cube);
    CHECK(report.ok);
    // Unit cube: dX/dxi = diag(1/2, 1/2, 1/2) everywhere, so det J = 1/8.
    CHECK(report.min_jacobian[0] == doctest::Approx(0.125).epsilon(1e-14));

    auto dup = cube;
    dup.elements[0][3] = dup.elements[0][0];
    report = validate_mesh(dup);
    CHECK_FALSE(report.ok);
    CHECK(report.violations.size() >= 1);

    auto inverted = cube;
    std::swap(inverted.elements[0][1], inverted.elements[0][3]);
    std::swap(inverted.elements[0][5], inverted.elements[0][7]);
    report = validate_mesh(inverted);
    CHECK_FALSE(report.ok);
    CHECK(report.min_jacobian[0] < 0);

    auto out_of_range = cube;
    out_of_range.elements[0][2] = 99;
    CHECK_FALSE(validate_mesh(out_of_range).ok);
}

TEST_CASE("boundary faces of a structured box") {
    const auto m = generate_box_mesh(Vec3(1, 1, 1), {2, 3, 4});
    CHECK(boundary_faces(m).size() == 2u * (2 * 3 + 3 * 4 + 2 * 4));
    CHECK(boundary_nodes(m).size() == 3u * 4 * 5 - 1u * 2 * 3);
}

TEST_CASE("write_vtk format") {
    const auto cube = generate_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
    const auto path = temp_path("cube.vtk");
    write_vtk(cube, {}, {{"e_max", 1, {0.25}}}, path);
    const auto text = slurp(path);
    CHECK(text.find("# vtk DataFile Version 3.0") == 0);
    CHECK(text.find("CELL_TYPES 1\n12\n") != std::string::npos);
    CHECK(text.find("CELL_DATA 1\nSCALARS e_max double 1") != std::string::npos);

    const auto geometry_only = temp_path("geom.vtk");
    write_vtk(cube, {}, {}, geometry_only);
    const auto g = slurp(geometry_only);
    CHECK(g.find("POINT_DATA") == std::string::npos);
    CHECK(g.find("CELL_TYPES 1") != std::string::npos);

    CHECK_THROWS_AS(write_vtk(cube, {{"d", 3, std::vector<double>(5)}}, {}, temp_path("bad.vtk")), InvalidArgument);
    CHECK_THROWS_AS(write_vtk(cube, {}, {{"e", 1, {1.0, 2.0}}}, temp_path("bad.vtk")), InvalidArgument);
    CHECK_THROWS_AS(write_vtk(cube, {}, {}, "/nonexistent-dir/x.vtk"), IoError);
}

TEST_CASE("write_vtk round-trips coordinates at 17 significant digits") {
    const auto m = generate_sphere_mesh(0.0537, 3);
    const auto path = temp_path("sphere.vtk");
    write_vtk(m, {}, {}, path);
    const auto x = read_vtk_points(path);
    REQUIRE(x.cols() == m.nodes.cols());
    CHECK((x - m.nodes).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("mesh JSON round trip") {
    const auto m = generate_cylinder_mesh(0.05, 0.3, 2, 3, 7);
    const auto back = mesh_from_json(mesh_to_json(m));
    CHECK((back.nodes - m.nodes).cwiseAbs().maxCoeff() == 0.0);
    CHECK(back.elements == m.elements);
    CHECK(back.element_material == m.element_material);
    CHECK_THROWS_AS(mesh_from_json("{\"nodes\": 3}"), InvalidArgument);
}

TEST_CASE("rigid surfaces") {
    const auto box = make_box_surface(Vec3(0, 0, 0), Vec3(0.04, 0.02, 0.01));
    REQUIRE(box.triangles.size() == 12);
    for (std::size_t t = 0; t < box.triangles.size(); ++t) {
        CHECK(box.normals[t].norm() == doctest::Approx(1.0).epsilon(1e-12));
        // Outward: normal points away from the centroid.
        const auto& tri = box.triangles[t];
        const Vec3 c = (box.vertices[tri[0]] + box.vertices[tri[1]] + box.vertices[tri[2]]) / 3.0;
        CHECK(c.dot(box.normals[t]) > 0);
    }
    RigidSurface bad;
    bad.vertices = {Vec3::Zero(), Vec3::UnitX(), 2 * Vec3::UnitX()};
    bad.triangles = {{0, 1, 2}};
    CHECK_THROWS_AS(bad.compute_normals(), InvalidArgument);
}
