#pragma once

#include <cmath>

#include "softgrasp/errors.hpp"
#include "softgrasp/types.hpp"

namespace softgrasp {

struct ProjectedForce {
    Vec3 normal;      // (n n^T) lambda
    Vec3 tangential;  // (I - n n^T) lambda
};

/// Splits a contact force into its components along and across a unit normal.
/// The tangential part is formed as the remainder, so normal + tangential reproduces lambda.
inline ProjectedForce project_contact_force(const Vec3& lambda, const Vec3& normal) {
    if (!normal.allFinite() || std::abs(normal.norm() - 1.0) > 1e-9)
        throw InvalidArgument("contact normal must be a unit vector");
    ProjectedForce p;
    p.normal = normal * normal.dot(lambda);
    p.tangential = lambda - p.normal;
    return p;
}

}  // namespace softgrasp
