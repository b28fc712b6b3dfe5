#include "softgrasp/material.hpp"

#include <cmath>

#include "softgrasp/errors.hpp"

namespace softgrasp {

void Material::validate(const std::string& name) const {
    auto fail = [&](const std::string& field, const std::string& rule) {
        throw ConfigError(name + "." + field + " " + rule);
    };
    if (!(density > 0) || !std::isfinite(density)) fail("density", "must be > 0");
    if (!(young_modulus > 0) || !std::isfinite(young_modulus)) fail("young_modulus", "must be > 0");
    if (!(poisson_ratio >= 0 && poisson_ratio < 0.5)) fail("poisson_ratio", "must be in [0, 0.5)");
    if (!(friction >= 0) || !std::isfinite(friction)) fail("friction", "must be >= 0");
    if (!(mass_damping >= 0) || !std::isfinite(mass_damping)) fail("mass_damping", "must be >= 0");
}

ConstitutiveModel parse_model(const std::string& name) {
    if (name == "linear-elastic") return ConstitutiveModel::LinearElastic;
    if (name == "neo-hookean") return ConstitutiveModel::NeoHookean;
    throw ConfigError("unknown constitutive model '" + name + "'");
}

std::string to_string(ConstitutiveModel model) {
    return model == ConstitutiveModel::LinearElastic ? "linear-elastic" : "neo-hookean";
}

namespace {

double checked_det(const Mat3& F, std::size_t element) {
    const double J = F.determinant();
    if (!(J > 0)) throw ElementInversion(element, J);
    return J;
}

}  // namespace

// Compressible Neo-Hookean: W = mu/2 (I1 - 3) - mu ln J + lambda/2 (ln J)^2.
// Linear: W = lambda/2 tr(eps)^2 + mu eps:eps with eps = sym(F) - I.

double strain_energy_density(const Mat3& F, const Material& m, std::size_t element) {
    const double J = checked_det(F, element);
    const double mu = m.shear_modulus(), lambda = m.lame_lambda();
    if (m.model == ConstitutiveModel::LinearElastic) {
        const Mat3 eps = 0.5 * (F + F.transpose()) - Mat3::Identity();
        const double tr = eps.trace();
        return 0.5 * lambda * tr * tr + mu * eps.squaredNorm();
    }
    const double lnJ = std::log(J);
    return 0.5 * mu * (F.squaredNorm() - 3.0) - mu * lnJ + 0.5 * lambda * lnJ * lnJ;
}

Mat3 first_piola_stress(const Mat3& F, const Material& m, std::size_t element) {
    const double J = checked_det(F, element);
    const double mu = m.shear_modulus(), lambda = m.lame_lambda();
    if (m.model == ConstitutiveModel::LinearElastic) {
        const Mat3 eps = 0.5 * (F + F.transpose()) - Mat3::Identity();
        return lambda * eps.trace() * Mat3::Identity() + 2.0 * mu * eps;
    }
    const Mat3 FinvT = F.inverse().transpose();
    return mu * (F - FinvT) + lambda * std::log(J) * FinvT;
}

Mat3 stress(const Mat3& F, const Material& m, std::size_t element) {
    const double J = checked_det(F, element);
    if (m.model == ConstitutiveModel::LinearElastic) return first_piola_stress(F, m, element);
    const double mu = m.shear_modulus(), lambda = m.lame_lambda();
    const Mat3 b = F * F.transpose();
    Mat3 sigma = (mu * (b - Mat3::Identity()) + lambda * std::log(J) * Mat3::Identity()) / J;
    return 0.5 * (sigma + sigma.transpose());
}

}  // namespace softgrasp
