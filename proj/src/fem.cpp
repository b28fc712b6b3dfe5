#include "softgrasp/fem.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>

#include "softgrasp/errors.hpp"
#include "softgrasp/parallel.hpp"

namespace softgrasp {

SimState SimState::zeros(std::size_t node_count) {
    SimState s;
    const auto n = static_cast<Eigen::Index>(node_count);
    s.u = NodalField::Zero(3, n);
    s.v = NodalField::Zero(3, n);
    s.a = NodalField::Zero(3, n);
    return s;
}

void Constraints::fix_node(int node, const Vec3& value) {
    for (int d = 0; d < 3; ++d) {
        dofs.push_back(3 * node + d);
        values.push_back(value[d]);
    }
}

namespace {

const Material& lookup(const MaterialTable& materials, int id) {
    const auto it = materials.find(id);
    if (it == materials.end()) throw ConfigError("no material defined for material id " + std::to_string(id));
    return it->second;
}

}  // namespace

FemModel::FemModel(Mesh mesh, MaterialTable materials) : mesh_(std::move(mesh)), materials_(std::move(materials)) {
    const auto report = validate_mesh(mesh_);
    if (!report.ok)
        throw InvalidArgument("invalid mesh: " + (report.violations.empty() ? std::string("unknown") : report.violations[0]));
    for (const auto& [id, m] : materials_) m.validate("materials[" + std::to_string(id) + "]");

    const std::size_t ne = mesh_.element_count();
    element_material_.resize(ne);
    grad_.resize(8 * ne);
    weight_.resize(8 * ne);
    const auto gp = hex8::gauss_points();
    for (std::size_t e = 0; e < ne; ++e) {
        element_material_[e] = &lookup(materials_, mesh_.element_material[e]);
        const auto x = mesh_.element_coords(e);
        for (int g = 0; g < 8; ++g) {
            const auto dNdxi = hex8::shape_gradients(gp[g]);
            const Mat3 J = x * dNdxi;
            grad_[8 * e + g] = dNdxi * J.inverse();
            weight_[8 * e + g] = J.determinant();
        }
    }
    mass_ = softgrasp::lumped_mass(mesh_, materials_);
    damping_ = VecX::Zero(mesh_.node_count());
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& h = mesh_.elements[e];
        const double rho = element_material_[e]->density, cm = element_material_[e]->mass_damping;
        for (int g = 0; g < 8; ++g) {
            const auto N = hex8::shape_functions(gp[g]);
            for (int a = 0; a < 8; ++a) damping_[h[a]] += cm * rho * N[a] * weight_[8 * e + g];
        }
    }
    damping_ = damping_.cwiseQuotient(mass_);
}

VecX lumped_mass(const Mesh& mesh, const MaterialTable& materials) {
    VecX m = VecX::Zero(static_cast<Eigen::Index>(mesh.node_count()));
    const auto gp = hex8::gauss_points();
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const double rho = lookup(materials, mesh.element_material[e]).density;
        const auto x = mesh.element_coords(e);
        const auto& h = mesh.elements[e];
        for (const auto& p : gp) {
            const double w = hex8::jacobian(x, p).determinant();
            const auto N = hex8::shape_functions(p);
            for (int a = 0; a < 8; ++a) m[h[a]] += rho * N[a] * w;
        }
    }
    return m;
}

NodalField internal_forces(const FemModel& model, const NodalField& u, double* strain_energy) {
    const Mesh& mesh = model.mesh();
    const std::size_t ne = mesh.element_count();
    std::vector<Eigen::Matrix<double, 3, 8>> fe(ne);
    std::vector<double> we(ne, 0.0);

    parallel_for(ne, [&](std::size_t begin, std::size_t end) {
        Eigen::Matrix<double, 3, 8> ue;
        for (std::size_t e = begin; e < end; ++e) {
            const auto& h = mesh.elements[e];
            for (int a = 0; a < 8; ++a) ue.col(a) = u.col(h[a]);
            const Material& mat = model.element_material(e);
            fe[e].setZero();
            double w = 0;
            for (int g = 0; g < 8; ++g) {
                const auto& B = model.grad(e, g);
                const Mat3 F = Mat3::Identity() + ue * B;
                const Mat3 P = first_piola_stress(F, mat, e);
                fe[e].noalias() += model.weight(e, g) * P * B.transpose();
                if (strain_energy) w += model.weight(e, g) * strain_energy_density(F, mat, e);
            }
            we[e] = w;
        }
    });

    NodalField f = NodalField::Zero(3, u.cols());
    double energy = 0;
    for (std::size_t e = 0; e < ne; ++e) {
        const auto& h = mesh.elements[e];
        for (int a = 0; a < 8; ++a) f.col(h[a]) += fe[e].col(a);
        energy += we[e];
    }
    if (strain_energy) *strain_energy = energy;
    return f;
}

NodalField internal_forces(const Mesh& mesh, const SimState& state, const MaterialTable& materials) {
    return internal_forces(FemModel(mesh, materials), state.u);
}

double strain_energy(const FemModel& model, const NodalField& u) {
    double w = 0;
    internal_forces(model, u, &w);
    return w;
}

double kinetic_energy(const VecX& mass, const NodalField& v) {
    return 0.5 * v.colwise().squaredNorm().dot(mass.transpose());
}

NodalField external_forces(const Mesh& mesh, const MaterialTable& materials, const Vec3& body_accel,
                           const std::vector<Traction>& tractions) {
    NodalField f = lumped_mass(mesh, materials).transpose().replicate(3, 1).cwiseProduct(
        body_accel.replicate(1, static_cast<Eigen::Index>(mesh.node_count())));
    if (tractions.empty()) return f;

    const auto boundary = boundary_faces(mesh);
    const std::set<std::pair<int, int>> on_boundary(boundary.begin(), boundary.end());
    const double g = 1.0 / std::sqrt(3.0);
    for (const auto& tr : tractions)
        for (const auto& facet : tr.facets) {
            if (!on_boundary.count(facet))
                throw InvalidArgument("traction facet (element " + std::to_string(facet.first) + ", face " +
                                      std::to_string(facet.second) + ") is not on the boundary");
            const auto& face = hex8::kFaces[facet.second];
            Eigen::Matrix<double, 3, 4> x;
            for (int c = 0; c < 4; ++c) x.col(c) = mesh.nodes.col(mesh.elements[facet.first][face[c]]);
            // Bilinear quad, 2x2 Gauss.
            for (double s : {-g, g})
                for (double t : {-g, g}) {
                    const Eigen::Vector4d N(0.25 * (1 - s) * (1 - t), 0.25 * (1 + s) * (1 - t),
                                            0.25 * (1 + s) * (1 + t), 0.25 * (1 - s) * (1 + t));
                    const Vec3 dxs = 0.25 * (-(1 - t) * x.col(0) + (1 - t) * x.col(1) + (1 + t) * x.col(2) -
                                             (1 + t) * x.col(3));
                    const Vec3 dxt = 0.25 * (-(1 - s) * x.col(0) - (1 + s) * x.col(1) + (1 + s) * x.col(2) +
                                             (1 - s) * x.col(3));
                    const double dA = dxs.cross(dxt).norm();
                    for (int c = 0; c < 4; ++c)
                        f.col(mesh.elements[facet.first][face[c]]) += N[c] * dA * tr.traction;
                }
        }
    return f;
}

double characteristic_length(const Mesh& mesh, std::size_t e) {
    const auto x = mesh.element_coords(e);
    double max_area = 0;
    for (const auto& face : hex8::kFaces) {
        const Vec3 d1 = x.col(face[2]) - x.col(face[0]);
        const Vec3 d2 = x.col(face[3]) - x.col(face[1]);
        max_area = std::max(max_area, 0.5 * d1.cross(d2).norm());
    }
    return element_volume(mesh, e) / max_area;
}

double stable_timestep(const Mesh& mesh, const MaterialTable& materials, double safety) {
    if (!(safety > 0 && safety <= 1)) throw InvalidArgument("timestep safety factor must be in (0, 1]");
    double dt = std::numeric_limits<double>::infinity();
    for (std::size_t e = 0; e < mesh.element_count(); ++e) {
        const Material& m = lookup(materials, mesh.element_material[e]);
        dt = std::min(dt, characteristic_length(mesh, e) / m.dilatational_wave_speed());
    }
    return safety * dt;
}

double max_frequency(const FemModel& model, const NodalField& u, int iterations) {
    const auto n = u.cols();
    const NodalField inv_sqrt_m = model.lumped_mass().cwiseSqrt().cwiseInverse().transpose().replicate(3, 1);
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    NodalField x(3, n);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
    x /= x.norm();
    const double scale = std::max(1e-9, 1e-6 * (model.mesh().nodes.rowwise().maxCoeff() -
                                               model.mesh().nodes.rowwise().minCoeff()).norm());
    double lambda = 0;
    for (int it = 0; it < iterations; ++it) {
        const NodalField dx = scale * x.cwiseProduct(inv_sqrt_m);
        const NodalField kx = (internal_forces(model, u + dx) - internal_forces(model, u - dx)) / (2.0 * scale);
        const NodalField y = kx.cwiseProduct(inv_sqrt_m);
        lambda = x.cwiseProduct(y).sum();
        const double norm = y.norm();
        if (!(norm > 0)) break;
        x = y / norm;
    }
    return std::sqrt(std::max(lambda, 0.0));
}

double explicit_timestep(const FemModel& model, double safety, double extra_stiffness_over_mass) {
    const double cfl = stable_timestep(model.mesh(), model.materials(), safety);
    // 5% margin on the power-iteration estimate, which approaches the top eigenvalue from below.
    const double omega = 1.05 * max_frequency(model, NodalField::Zero(3, static_cast<Eigen::Index>(model.node_count())));
    const double omega_total = std::sqrt(omega * omega + extra_stiffness_over_mass);
    return omega_total > 0 ? std::min(cfl, safety * 2.0 / omega_total) : cfl;
}

SimState step_explicit(const SimState& state, const VecX& mass, const VecX& damping, const NodalField& f_ext,
                       const NodalField& f_int, const NodalField& f_contact, double dt,
                       const Constraints& constraints) {
    SimState next;
    const auto n = state.u.cols();
    const auto inv_mass = mass.cwiseInverse().transpose().replicate(3, 1);
    const auto c = damping.transpose().replicate(3, 1);
    next.a = (f_ext - f_int - f_contact).cwiseProduct(inv_mass) - c.cwiseProduct(state.v);
    next.v = state.v + dt * next.a;
    next.u = state.u + dt * next.v;
    for (std::size_t k = 0; k < constraints.dofs.size(); ++k) {
        const int dof = constraints.dofs[k];
        const int node = dof / 3, dir = dof % 3;
        if (node >= n) throw InvalidArgument("constraint on non-existent node " + std::to_string(node));
        const double v_new = (constraints.values[k] - state.u(dir, node)) / dt;
        next.a(dir, node) = (v_new - state.v(dir, node)) / dt;
        next.v(dir, node) = v_new;
        next.u(dir, node) = constraints.values[k];
    }
    next.t = state.t + dt;
    next.step = state.step + 1;
    if (!next.finite()) throw Divergence(next.step);
    return next;
}

SimState run_to_quasistatic(const FemModel& model, const BoundaryConditions& bc, double max_time,
                            const RelaxationOptions& options) {
    const Mesh& mesh = model.mesh();
    SimState state = SimState::zeros(mesh.node_count());
    for (std::size_t k = 0; k < bc.fixed.dofs.size(); ++k)
        state.u(bc.fixed.dofs[k] % 3, bc.fixed.dofs[k] / 3) = bc.fixed.values[k];

    const NodalField f_ext = external_forces(mesh, model.materials(), bc.body_accel, bc.tractions);
    const NodalField f_none = NodalField::Zero(3, state.u.cols());
    NodalField f_int = internal_forces(model, state.u);
    {
        NodalField residual = f_ext - f_int;
        for (int dof : bc.fixed.dofs) residual(dof % 3, dof / 3) = 0;
        if (residual.cwiseAbs().maxCoeff() == 0.0) return state;
    }

    const double dt = explicit_timestep(model, options.safety);
    int streak = 0;
    double ratio = std::numeric_limits<double>::infinity();
    while (state.t < max_time) {
        state = step_explicit(state, model.lumped_mass(), model.nodal_damping(), f_ext, f_int, f_none, dt, bc.fixed);
        double w = 0;
        f_int = internal_forces(model, state.u, &w);
        const double ke = kinetic_energy(model.lumped_mass(), state.v);
        ratio = w > 0 ? ke / w : std::numeric_limits<double>::infinity();
        streak = (ke > 0 && ratio < options.energy_ratio) ? streak + 1 : 0;
        if (streak >= options.window) return state;
    }
    throw NonConvergence(ratio);
}

Mat3 deformation_gradient(const Mesh& mesh, const NodalField& u, std::size_t element,
                          const hex8::NaturalPoint<double>& point) {
    if (element >= mesh.element_count()) throw InvalidArgument("element id out of range");
    const auto X = mesh.element_coords(element);
    Eigen::Matrix<double, 3, 8> ue;
    for (int a = 0; a < 8; ++a) ue.col(a) = u.col(mesh.elements[element][a]);
    const auto dNdxi = hex8::shape_gradients(point);
    const Mat3 J = X * dNdxi;
    return Mat3::Identity() + ue * dNdxi * J.inverse();
}

Mat3 deformation_gradient(const Mesh& mesh, const NodalField& u, std::size_t element, int integration_point) {
    if (integration_point < -1 || integration_point > 7) throw InvalidArgument("integration point must be -1..7");
    const auto p = integration_point < 0 ? hex8::NaturalPoint<double>::Zero().eval()
                                         : hex8::gauss_points()[integration_point];
    return deformation_gradient(mesh, u, element, p);
}

StrainResult principal_strains(const Mat3& F, std::size_t element) {
    const double J = F.determinant();
    if (!(J > 0)) throw ElementInversion(element, J);
    StrainResult r;
    r.F = F;
    const Mat3 C = F.transpose() * F;
    r.green_lagrange = 0.5 * (C - Mat3::Identity());
    Eigen::SelfAdjointEigenSolver<Mat3> eig(C);
    // Eigen sorts ascending; report descending.
    for (int i = 0; i < 3; ++i) {
        r.principal_stretches[i] = std::sqrt(std::max(eig.eigenvalues()[2 - i], 0.0));
        r.principal_directions.col(i) = eig.eigenvectors().col(2 - i);
    }
    r.principal_strains = r.principal_stretches.array() - 1.0;
    r.e_max = r.principal_strains.maxCoeff();
    r.e_min = r.principal_strains.minCoeff();
    return r;
}

}  // namespace softgrasp
