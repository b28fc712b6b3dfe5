#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "softgrasp/errors.hpp"
#include "softgrasp/fem.hpp"

using namespace softgrasp;

namespace {

Mesh skewed_hex() {
    auto m = generate_box_mesh(Vec3(0.1, 0.1, 0.1), {1, 1, 1});
    m.nodes.col(6) += Vec3(0.02, 0.015, 0.01);
    m.nodes.col(1) += Vec3(0.01, -0.01, 0.0);
    m.nodes.col(4) += Vec3(-0.005, 0.0, 0.012);
    return m;
}

NodalField affine(const Mesh& m, const Mat3& A, const Vec3& b) {
    return (A * m.nodes).colwise() + b;
}

void check_result_invariants(const StrainResult& r) {
    CHECK((r.green_lagrange - r.green_lagrange.transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.principal_stretches.array() > 0).all());
    CHECK((r.principal_directions.transpose() * r.principal_directions - Mat3::Identity()).cwiseAbs().maxCoeff() <
          1e-9);
    for (int i = 0; i < 3; ++i) {
        CHECK(r.principal_strains[i] == doctest::Approx(r.principal_stretches[i] - 1.0).epsilon(1e-15));
        CHECK(r.e_max >= r.principal_strains[i]);
        CHECK(r.e_min <= r.principal_strains[i]);
    }
    Mat3 rebuilt = Mat3::Zero();
    for (int i = 0; i < 3; ++i) {
        const Vec3 n = r.principal_directions.col(i);
        rebuilt += 0.5 * (r.principal_stretches[i] * r.principal_stretches[i] - 1.0) * n * n.transpose();
    }
    CHECK((rebuilt - r.green_lagrange).cwiseAbs().maxCoeff() < 1e-9);
}

}  // namespace

TEST_CASE("deformation gradient of simple fields") {
    const auto m = generate_box_mesh(Vec3(1, 1, 1), {1, 1, 1});
    const NodalField zero = NodalField::Zero(3, 8);
    CHECK((deformation_gradient(m, zero, 0, 0) - Mat3::Identity()).cwiseAbs().maxCoeff() == 0.0);

    NodalField u = NodalField::Zero(3, 8);
    u.row(0) = 0.1 * m.nodes.row(0);
    const Mat3 expected = Eigen::Vector3d(1.1, 1, 1).asDiagonal();
    for (int g = -1; g < 8; ++g) CHECK((deformation_gradient(m, u, 0, g) - expected).cwiseAbs().maxCoeff() < 1e-14);

    const Mat3 R = Eigen::AngleAxisd(M_PI / 2, Vec3::UnitZ()).toRotationMatrix();
    const NodalField rot = R * m.nodes - m.nodes;
    CHECK((deformation_gradient(m, rot, 0, 3) - R).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("patch test: affine fields are reproduced at every Gauss point") {
    const auto m = skewed_hex();
    std::mt19937 rng(17);
    std::uniform_real_distribution<double> d(-0.3, 0.3);
    for (int trial = 0; trial < 20; ++trial) {
        Mat3 A;
        for (int i = 0; i < 9; ++i) A.data()[i] = d(rng);
        const NodalField u = affine(m, A, Vec3(d(rng), d(rng), d(rng)));
        for (int g = 0; g < 8; ++g)
            CHECK((deformation_gradient(m, u, 0, g) - (Mat3::Identity() + A)).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("principal strains: closed forms") {
    const auto r = principal_strains(Eigen::Vector3d(1.2, 1, 1).asDiagonal());
    CHECK((r.green_lagrange - Mat3(Eigen::Vector3d(0.22, 0, 0).asDiagonal())).cwiseAbs().maxCoeff() < 1e-15);
    CHECK(r.e_max == doctest::Approx(0.2).epsilon(1e-15));
    CHECK(std::abs(r.e_min) < 1e-15);
    check_result_invariants(r);

    const Mat3 R = Eigen::AngleAxisd(1.1, Vec3(0.3, -1, 2).normalized()).toRotationMatrix();
    const auto rr = principal_strains(R);
    CHECK(rr.green_lagrange.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(std::abs(rr.e_max) < 1e-12);
    CHECK(std::abs(rr.e_min) < 1e-12);

    Mat3 inverted = Mat3::Identity();
    inverted(0, 0) = -1;
    CHECK_THROWS_AS(principal_strains(inverted, 3), ElementInversion);
}

TEST_CASE("principal strains: simple shear against a generic eigensolver") {
    Mat3 F = Mat3::Identity();
    F(0, 1) = 0.1;
    const auto r = principal_strains(F);
    CHECK(r.green_lagrange(0, 1) == doctest::Approx(0.05).epsilon(1e-14));
    CHECK(r.green_lagrange(1, 1) == doctest::Approx(0.005).epsilon(1e-14));
    // Independent route: general (non-symmetric) eigensolver on C.
    Eigen::EigenSolver<Mat3> es(F.transpose() * F);
    std::vector<double> lam;
    for (int i = 0; i < 3; ++i) lam.push_back(std::sqrt(es.eigenvalues()[i].real()));
    std::sort(lam.rbegin(), lam.rend());
    for (int i = 0; i < 3; ++i) CHECK(r.principal_stretches[i] == doctest::Approx(lam[i]).epsilon(1e-12));
    check_result_invariants(r);
}

TEST_CASE("principal strains: invariants over random deformations") {
    std::mt19937 rng(99);
    std::uniform_real_distribution<double> d(-0.4, 0.4);
    for (int trial = 0; trial < 200; ++trial) {
        Mat3 F;
        do {
            for (int i = 0; i < 9; ++i) F.data()[i] = (i % 4 == 0 ? 1.0 : 0.0) + d(rng);
        } while (F.determinant() <= 0.05);
        check_result_invariants(principal_strains(F));
    }
}
