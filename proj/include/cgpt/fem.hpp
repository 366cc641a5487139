#pragma once

// P1 Galerkin solver for the interior variable-coefficient Neumann problem
//   div(sigma grad u) = 0 in D,   sigma du/dnu = g on dD,   mean(u|dD) = 0.
// The zero-mean condition is a Lagrange multiplier row; boundary loads for
// trigonometric fluxes are integrated in closed form edge by edge, which
// keeps the Fourier representation of the boundary maps spectrally clean.

#include <cmath>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

namespace cgpt {

struct FluxCoefficients {
    Eigen::VectorXd cos_coeffs;  // modes 1..K
    Eigen::VectorXd sin_coeffs;
    int order() const { return static_cast<int>(cos_coeffs.size()); }

    static FluxCoefficients zero(int order) {
        return {Eigen::VectorXd::Zero(order), Eigen::VectorXd::Zero(order)};
    }
};

struct InteriorSolution {
    const DiskMesh* mesh = nullptr;
    Eigen::VectorXd nodal_potential;
    FluxCoefficients flux_spec;
};

// Per-triangle constant gradients of a nodal field.
inline Eigen::Matrix<double, Eigen::Dynamic, 2> element_gradients(const DiskMesh& mesh,
                                                                  const Eigen::VectorXd& nodal) {
    Eigen::Matrix<double, Eigen::Dynamic, 2> g(mesh.triangle_count(), 2);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
        const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
        const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
        const double area2 = 2.0 * mesh.triangle_area(t);
        // grad of hat_i = perpendicular of the opposite edge / (2 area)
        const Eigen::Vector2d g0(p1.y() - p2.y(), p2.x() - p1.x());
        const Eigen::Vector2d g1(p2.y() - p0.y(), p0.x() - p2.x());
        const Eigen::Vector2d g2(p0.y() - p1.y(), p1.x() - p0.x());
        g.row(t) = ((nodal[tri[0]] * g0 + nodal[tri[1]] * g1 + nodal[tri[2]] * g2) / area2).transpose();
    }
    return g;
}

inline Eigen::Matrix<double, Eigen::Dynamic, 2> element_gradients(const InteriorSolution& sol) {
    return element_gradients(*sol.mesh, sol.nodal_potential);
}

// Load vectors for the trigonometric flux basis (cos k, k=1..K, then sin k).
// Column j holds the nodal loads int_{dD} g_j v ds with the boundary treated
// as the unit circle (arc-length = angle) and v linear in angle per edge.
inline Eigen::MatrixXd boundary_load_matrix(const DiskMesh& mesh, int order) {
    const int nb = mesh.boundary_count();
    Eigen::MatrixXd loads = Eigen::MatrixXd::Zero(mesh.vertex_count(), 2 * order);
    const double dth = kTwoPi / nb;
    for (int e = 0; e < nb; ++e) {
        const int ia = mesh.boundary[e], ib = mesh.boundary[(e + 1) % nb];
        const double ta = dth * e, tb = ta + dth;  // unwrapped angles
        for (int k = 1; k <= order; ++k) {
            const double sa = std::sin(k * ta), sb = std::sin(k * tb);
            const double ca = std::cos(k * ta), cb = std::cos(k * tb);
            // cos k-theta flux
            const double ic = (sb - sa) / k;
            const double jc = (tb * sb - ta * sa) / k + (cb - ca) / (k * k);
            loads(ia, k - 1) += (tb * ic - jc) / dth;
            loads(ib, k - 1) += (jc - ta * ic) / dth;
            // sin k-theta flux
            const double is = (ca - cb) / k;
            const double js = (ta * ca - tb * cb) / k + (sb - sa) / (k * k);
            loads(ia, order + k - 1) += (tb * is - js) / dth;
            loads(ib, order + k - 1) += (js - ta * is) / dth;
        }
    }
    return loads;
}

inline Eigen::VectorXd flux_load_vector(const DiskMesh& mesh, const FluxCoefficients& flux) {
    const Eigen::MatrixXd basis = boundary_load_matrix(mesh, flux.order());
    Eigen::VectorXd coeffs(2 * flux.order());
    coeffs << flux.cos_coeffs, flux.sin_coeffs;
    return basis * coeffs;
}

// Factorizes the saddle system for one conductivity; solves are then cheap
// per right-hand side.  The factorization is what dominates one forward
// evaluation, so callers batch all fluxes for a given sigma through one
// NeumannSolver.
class NeumannSolver {
public:
    NeumannSolver(const DiskMesh& mesh, const ConductivityField& sigma) : mesh_(&mesh) {
        if (sigma.values.size() != mesh.vertex_count())
            throw std::invalid_argument("NeumannSolver: field/mesh size mismatch");
        if (sigma.values.minCoeff() <= 0.0)
            throw std::invalid_argument("NeumannSolver: conductivity must be positive (ellipticity)");

        const int nv = mesh.vertex_count();
        std::vector<Eigen::Triplet<double>> trip;
        trip.reserve(mesh.triangle_count() * 9 + 2 * mesh.boundary_count());
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            const double area = mesh.triangle_area(t);
            if (area <= 0.0) throw std::invalid_argument("NeumannSolver: degenerate triangle");
            const double sbar = (sigma.values[tri[0]] + sigma.values[tri[1]] + sigma.values[tri[2]]) / 3.0;
            const Eigen::Vector2d& p0 = mesh.vertices[tri[0]];
            const Eigen::Vector2d& p1 = mesh.vertices[tri[1]];
            const Eigen::Vector2d& p2 = mesh.vertices[tri[2]];
            Eigen::Matrix<double, 2, 3> g;
            g.col(0) << p1.y() - p2.y(), p2.x() - p1.x();
            g.col(1) << p2.y() - p0.y(), p0.x() - p2.x();
            g.col(2) << p0.y() - p1.y(), p1.x() - p0.x();
            g /= 2.0 * area;
            for (int i = 0; i < 3; ++i)
                for (int j = 0; j < 3; ++j)
                    trip.emplace_back(tri[i], tri[j], sbar * area * g.col(i).dot(g.col(j)));
        }
        // Zero-boundary-mean constraint row/column (trapezoid weights).
        const double w = kTwoPi / mesh.boundary_count();
        for (int b : mesh.boundary) {
            trip.emplace_back(b, nv, w);
            trip.emplace_back(nv, b, w);
        }
        system_.resize(nv + 1, nv + 1);
        system_.setFromTriplets(trip.begin(), trip.end());
        lu_.compute(system_);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("NeumannSolver: factorization failed (singular system)");
    }

    const DiskMesh& mesh() const { return *mesh_; }

    // Nodal potential for a given load vector (zero-mean flux assumed).
    Eigen::VectorXd solve_load(const Eigen::VectorXd& load) const {
        const int nv = mesh_->vertex_count();
        Eigen::VectorXd rhs = Eigen::VectorXd::Zero(nv + 1);
        rhs.head(nv) = load;
        Eigen::VectorXd x = lu_.solve(rhs);
        if (lu_.info() != Eigen::Success)
            throw std::runtime_error("NeumannSolver: linear solve failed");
        const double resid = (system_ * x - rhs).norm();
        const double scale = std::max(rhs.norm(), 1e-300);
        if (resid > 1e-10 * scale)
            throw std::runtime_error("NeumannSolver: residual " + std::to_string(resid / scale) +
                                     " exceeds tolerance");
        return x.head(nv);
    }

    Eigen::VectorXd solve_flux(const FluxCoefficients& flux) const {
        return solve_load(flux_load_vector(*mesh_, flux));
    }

private:
    const DiskMesh* mesh_;
    Eigen::SparseMatrix<double> system_;
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu_;
};

inline InteriorSolution solve_neumann(const DiskMesh& mesh, const ConductivityField& sigma,
                                      const FluxCoefficients& g) {
    NeumannSolver solver(mesh, sigma);
    InteriorSolution sol;
    sol.mesh = &mesh;
    sol.nodal_potential = solver.solve_flux(g);
    sol.flux_spec = g;
    return sol;
}

// Consistent P1 mass matrix, for L2 inner products of nodal fields.
inline Eigen::SparseMatrix<double> mass_matrix(const DiskMesh& mesh) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(mesh.triangle_count() * 9);
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double a12 = mesh.triangle_area(t) / 12.0;
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 3; ++j) trip.emplace_back(tri[i], tri[j], (i == j ? 2.0 : 1.0) * a12);
    }
    Eigen::SparseMatrix<double> m(mesh.vertex_count(), mesh.vertex_count());
    m.setFromTriplets(trip.begin(), trip.end());
    return m;
}

}  // namespace cgpt
