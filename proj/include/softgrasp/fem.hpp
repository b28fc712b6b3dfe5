#pragma once

// Explicit dynamic finite elements on trilinear hexahedra: total Lagrangian internal forces with
// 2x2x2 Gauss quadrature, row-sum lumped mass, central-difference time stepping with
// mass-proportional damping, and dynamic relaxation to quasi-static states.

#include <array>
#include <cstddef>
#include <vector>

#include "softgrasp/hex8.hpp"
#include "softgrasp/material.hpp"
#include "softgrasp/mesh.hpp"
#include "softgrasp/types.hpp"

namespace softgrasp {

/// Nodal kinematic state. `v` is the mid-step velocity of the central-difference scheme.
struct SimState {
    NodalField u, v, a;
    double t = 0.0;
    std::size_t step = 0;

    static SimState zeros(std::size_t node_count);
    bool finite() const { return u.allFinite() && v.allFinite() && a.allFinite(); }
};

/// Mesh + materials + per-Gauss-point reference shape-function gradients.
class FemModel {
public:
    /// Throws ConfigError for an element whose material id has no entry, InvalidArgument for an
    /// invalid mesh.
    FemModel(Mesh mesh, MaterialTable materials);

    const Mesh& mesh() const { return mesh_; }
    const MaterialTable& materials() const { return materials_; }
    const Material& element_material(std::size_t e) const { return *element_material_[e]; }
    std::size_t node_count() const { return mesh_.node_count(); }
    std::size_t element_count() const { return mesh_.element_count(); }

    /// dN/dX at Gauss point g of element e (8 x 3) and its quadrature weight det(J).
    const Eigen::Matrix<double, 8, 3>& grad(std::size_t e, int g) const { return grad_[8 * e + g]; }
    double weight(std::size_t e, int g) const { return weight_[8 * e + g]; }

    const VecX& lumped_mass() const { return mass_; }
    /// Mass-weighted Rayleigh coefficient c_m per node.
    const VecX& nodal_damping() const { return damping_; }

private:
    Mesh mesh_;
    MaterialTable materials_;
    std::vector<const Material*> element_material_;
    std::vector<Eigen::Matrix<double, 8, 3>> grad_;
    std::vector<double> weight_;
    VecX mass_;
    VecX damping_;
};

struct StrainResult {
    Mat3 F;
    Mat3 green_lagrange;
    Vec3 principal_stretches;  // descending
    Mat3 principal_directions;  // column i pairs with principal_stretches[i]
    Vec3 principal_strains;     // stretch - 1
    double e_max = 0.0;
    double e_min = 0.0;
};

struct Traction {
    std::vector<std::pair<int, int>> facets;  // (element, local face) on the boundary
    Vec3 traction = Vec3::Zero();             // Pa, reference area
};

/// Prescribed displacement values for degrees of freedom (3 * node + direction).
struct Constraints {
    std::vector<int> dofs;
    std::vector<double> values;

    void fix_node(int node, const Vec3& value = Vec3::Zero());
    bool empty() const { return dofs.empty(); }
};

struct BoundaryConditions {
    Vec3 body_accel = Vec3::Zero();
    std::vector<Traction> tractions;
    Constraints fixed;
};

struct RelaxationOptions {
    double safety = 0.9;
    double energy_ratio = 1e-4;  // kinetic / strain
    int window = 20;             // consecutive steps the ratio has to hold
};

VecX lumped_mass(const Mesh& mesh, const MaterialTable& materials);

/// f_int = sum_e int B^T P dV over the reference configuration. Optionally accumulates the total
/// strain energy. Throws ElementInversion for any Gauss point with det F <= 0.
NodalField internal_forces(const FemModel& model, const NodalField& u, double* strain_energy = nullptr);
NodalField internal_forces(const Mesh& mesh, const SimState& state, const MaterialTable& materials);

double strain_energy(const FemModel& model, const NodalField& u);
double kinetic_energy(const VecX& mass, const NodalField& v);

/// Lumped body force m_i * body_accel plus consistent surface integrals of tractions. Throws
/// InvalidArgument if a traction facet is not on the boundary.
NodalField external_forces(const Mesh& mesh, const MaterialTable& materials, const Vec3& body_accel,
                           const std::vector<Traction>& tractions);

/// Characteristic length of a hex: volume / largest face area.
double characteristic_length(const Mesh& mesh, std::size_t e);
/// safety * min_e (characteristic length / dilatational wave speed).
double stable_timestep(const Mesh& mesh, const MaterialTable& materials, double safety = 0.9);

/// Highest natural frequency (rad/s) of the lumped-mass system linearized at `u`, by power iteration
/// on M^-1/2 K M^-1/2 with K applied through central differences of f_int. Converges from below;
/// callers add their own margin.
double max_frequency(const FemModel& model, const NodalField& u, int iterations = 100);

/// Step actually used by the drivers: min of stable_timestep and safety * 2 / omega, where omega^2
/// bounds the highest eigenvalue of M^-1 (K + K_extra) and `extra_stiffness_over_mass` is the
/// largest per-node stiffness/mass added by penalty contact.
double explicit_timestep(const FemModel& model, double safety, double extra_stiffness_over_mass = 0.0);

/// One central-difference step of M a = f_ext - f_int - f_contact - c_m M v. Constrained degrees
/// of freedom take their prescribed values. Throws Divergence on a non-finite result.
SimState step_explicit(const SimState& state, const VecX& mass, const VecX& damping, const NodalField& f_ext,
                       const NodalField& f_int, const NodalField& f_contact, double dt,
                       const Constraints& constraints = {});

/// Damped explicit dynamics from rest until kinetic energy < energy_ratio * strain energy for
/// `window` consecutive steps. Returns immediately when the unloaded body is already at rest.
/// Throws NonConvergence at max_time.
SimState run_to_quasistatic(const FemModel& model, const BoundaryConditions& bc, double max_time,
                            const RelaxationOptions& options = {});

/// F = I + grad_0 u at a natural point of element e.
Mat3 deformation_gradient(const Mesh& mesh, const NodalField& u, std::size_t element,
                          const hex8::NaturalPoint<double>& point);
/// Gauss point 0..7, or -1 for the element centroid.
Mat3 deformation_gradient(const Mesh& mesh, const NodalField& u, std::size_t element, int integration_point);

StrainResult principal_strains(const Mat3& F, std::size_t element = 0);

}  // namespace softgrasp
