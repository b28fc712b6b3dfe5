#pragma once

// Trilinear 8-node hexahedron in VTK_HEXAHEDRON node order:
//
//        7-------6
//       /|      /|        zeta
//      4-------5 |         |  eta
//      | 3-----|-2         | /
//      |/      |/          |/
//      0-------1           +---- xi
//
// Natural coordinates of node a are (kXi[a], kEta[a], kZeta[a]) in {-1, +1}^3.

#include <array>
#include <cmath>

#include <Eigen/Dense>

namespace softgrasp::hex8 {

inline constexpr std::array<int, 8> kXi{-1, 1, 1, -1, -1, 1, 1, -1};
inline constexpr std::array<int, 8> kEta{-1, -1, 1, 1, -1, -1, 1, 1};
inline constexpr std::array<int, 8> kZeta{-1, -1, -1, -1, 1, 1, 1, 1};

/// Local node indices of the six faces, each ordered counter-clockwise seen from outside.
inline constexpr std::array<std::array<int, 4>, 6> kFaces{{
    {0, 3, 2, 1},  // zeta = -1
    {4, 5, 6, 7},  // zeta = +1
    {0, 1, 5, 4},  // eta = -1
    {2, 3, 7, 6},  // eta = +1
    {0, 4, 7, 3},  // xi = -1
    {1, 2, 6, 5},  // xi = +1
}};

template <typename Scalar>
using NaturalPoint = Eigen::Matrix<Scalar, 3, 1>;

template <typename Scalar>
Eigen::Matrix<Scalar, 8, 1> shape_functions(const NaturalPoint<Scalar>& p) {
    Eigen::Matrix<Scalar, 8, 1> n;
    for (int a = 0; a < 8; ++a)
        n[a] = Scalar(0.125) * (Scalar(1) + kXi[a] * p[0]) * (Scalar(1) + kEta[a] * p[1]) *
               (Scalar(1) + kZeta[a] * p[2]);
    return n;
}

/// Row a holds dN_a / d(xi, eta, zeta).
template <typename Scalar>
Eigen::Matrix<Scalar, 8, 3> shape_gradients(const NaturalPoint<Scalar>& p) {
    Eigen::Matrix<Scalar, 8, 3> d;
    for (int a = 0; a < 8; ++a) {
        const Scalar sx = Scalar(1) + kXi[a] * p[0];
        const Scalar sy = Scalar(1) + kEta[a] * p[1];
        const Scalar sz = Scalar(1) + kZeta[a] * p[2];
        d(a, 0) = Scalar(0.125) * kXi[a] * sy * sz;
        d(a, 1) = Scalar(0.125) * kEta[a] * sx * sz;
        d(a, 2) = Scalar(0.125) * kZeta[a] * sx * sy;
    }
    return d;
}

/// 2x2x2 Gauss rule, unit weights.
template <typename Scalar = double>
std::array<NaturalPoint<Scalar>, 8> gauss_points() {
    const Scalar g = Scalar(1) / std::sqrt(Scalar(3));
    std::array<NaturalPoint<Scalar>, 8> pts;
    for (int a = 0; a < 8; ++a) pts[a] = NaturalPoint<Scalar>(kXi[a] * g, kEta[a] * g, kZeta[a] * g);
    return pts;
}

/// Jacobian dX/d(xi) for nodal coordinates given as a 3 x 8 matrix.
template <typename DerivedX, typename Scalar = typename DerivedX::Scalar>
Eigen::Matrix<Scalar, 3, 3> jacobian(const Eigen::MatrixBase<DerivedX>& coords, const NaturalPoint<Scalar>& p) {
    return coords * shape_gradients<Scalar>(p);
}

}  // namespace softgrasp::hex8
