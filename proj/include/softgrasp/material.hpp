#pragma once

#include <cmath>
#include <cstddef>
#include <map>
#include <string>

#include "softgrasp/types.hpp"

namespace softgrasp {

enum class ConstitutiveModel { LinearElastic, NeoHookean };

struct Material {
    double density = 1000.0;  // kg/m^3
    ConstitutiveModel model = ConstitutiveModel::NeoHookean;
    double young_modulus = 1e6;  // Pa
    double poisson_ratio = 0.3;
    double friction = 0.5;
    double mass_damping = 0.0;  // Rayleigh c_m, 1/s

    double shear_modulus() const { return young_modulus / (2.0 * (1.0 + poisson_ratio)); }
    double lame_lambda() const {
        return young_modulus * poisson_ratio / ((1.0 + poisson_ratio) * (1.0 - 2.0 * poisson_ratio));
    }
    /// Constrained (P-wave) modulus E(1-v)/((1+v)(1-2v)).
    double constrained_modulus() const { return lame_lambda() + 2.0 * shear_modulus(); }
    double dilatational_wave_speed() const { return std::sqrt(constrained_modulus() / density); }

    /// Throws ConfigError naming `name` if any parameter is outside its admissible range.
    void validate(const std::string& name = "material") const;
};

/// Materials keyed by the element material id.
using MaterialTable = std::map<int, Material>;

ConstitutiveModel parse_model(const std::string& name);
std::string to_string(ConstitutiveModel model);

// Constitutive evaluation. All of these throw ElementInversion(element) when det F <= 0.

/// Strain energy per unit reference volume.
double strain_energy_density(const Mat3& F, const Material& material, std::size_t element = 0);
/// First Piola-Kirchhoff stress dW/dF.
Mat3 first_piola_stress(const Mat3& F, const Material& material, std::size_t element = 0);
/// Cauchy stress. For the linear model the small-strain stress is returned as is.
Mat3 stress(const Mat3& F, const Material& material, std::size_t element = 0);

}  // namespace softgrasp
