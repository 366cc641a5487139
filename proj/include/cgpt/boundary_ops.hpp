#pragma once

// Matrix representations of the boundary maps on the zero-mean Fourier
// basis {cos k-theta, sin k-theta, k = 1..K}, stacked cos block first.
// Lambda_1 and the exterior map are analytic diagonals on the unit disk;
// Lambda_sigma comes from FEM solves paired against the boundary load
// vectors, which makes the assembled matrix variationally consistent
// (symmetric to solver precision, and exactly compatible with the
// conductivity derivative used by the inversion).

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cgpt/cgpt.hpp"
#include "cgpt/fem.hpp"
#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

namespace cgpt {

struct FourierBoundaryOperator {
    enum class Role { NtdInterior, NtdExterior, MSigma, Composite };
    int order = 0;
    Eigen::MatrixXd matrix;  // 2K x 2K on stacked (cos 1..K, sin 1..K)
    Role role = Role::Composite;
};

inline FourierBoundaryOperator ntd_unit_disk(int order) {
    if (order < 1) throw std::invalid_argument("ntd_unit_disk: order must be positive");
    FourierBoundaryOperator op;
    op.order = order;
    op.role = FourierBoundaryOperator::Role::NtdInterior;
    Eigen::VectorXd d(2 * order);
    for (int k = 1; k <= order; ++k) d[k - 1] = d[order + k - 1] = 1.0 / k;
    op.matrix = d.asDiagonal();
    return op;
}

inline FourierBoundaryOperator exterior_ntd_disk(int order) {
    FourierBoundaryOperator op = ntd_unit_disk(order);
    op.matrix = -op.matrix;
    op.role = FourierBoundaryOperator::Role::NtdExterior;
    return op;
}

inline double condition_number_sym(const Eigen::MatrixXd& a) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(a, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().cwiseAbs().minCoeff();
    const double hi = es.eigenvalues().cwiseAbs().maxCoeff();
    return lo > 0.0 ? hi / lo : std::numeric_limits<double>::infinity();
}

inline void require_well_conditioned(const Eigen::MatrixXd& a, const std::string& name) {
    if (condition_number_sym(a) > 1e12)
        throw std::runtime_error(name + " is numerically singular (condition number > 1e12)");
}

// NtD map of the conductivity problem.  Entry (j,k) = <g_j, u_k>/pi where
// u_k is the FEM solution with basis flux g_k; the load-vector pairing keeps
// the matrix symmetric up to solver tolerance before the final
// symmetrization.
inline FourierBoundaryOperator ntd_sigma(const DiskMesh& mesh, const ConductivityField& sigma,
                                         int order) {
    if (order > mesh.boundary_count() / 2 - 2)
        throw std::invalid_argument("ntd_sigma: order exceeds the Nyquist margin of the boundary");
    const Eigen::MatrixXd loads = boundary_load_matrix(mesh, order);
    NeumannSolver solver(mesh, sigma);
    Eigen::MatrixXd traces(mesh.vertex_count(), 2 * order);
    for (int j = 0; j < 2 * order; ++j) traces.col(j) = solver.solve_load(loads.col(j));

    Eigen::MatrixXd a = (loads.transpose() * traces) / kPi;
    const double asym = (a - a.transpose()).norm();
    if (asym > 1e-6 * std::max(a.norm(), 1e-300))
        throw std::runtime_error("ntd_sigma: asymmetry " + std::to_string(asym / a.norm()) +
                                 " signals an under-resolved mesh");
    FourierBoundaryOperator op;
    op.order = order;
    op.role = FourierBoundaryOperator::Role::NtdInterior;
    op.matrix = 0.5 * (a + a.transpose());
    return op;
}

// M_sigma = Lambda_1^-1 (Lambda_1 - Lambda_sigma) (Lambda_sigma - Lambda_e)^-1 (Lambda_1 - Lambda_e).
inline FourierBoundaryOperator msigma_matrix(const FourierBoundaryOperator& lambda_sigma) {
    const int order = lambda_sigma.order;
    const Eigen::MatrixXd l1 = ntd_unit_disk(order).matrix;
    const Eigen::MatrixXd le = exterior_ntd_disk(order).matrix;
    const Eigen::MatrixXd& ls = lambda_sigma.matrix;

    const Eigen::MatrixXd denom = ls - le;  // on the disk: Lambda_sigma + Lambda_1
    require_well_conditioned(denom, "msigma_matrix: Lambda_sigma - Lambda_e");

    FourierBoundaryOperator op;
    op.order = order;
    op.role = FourierBoundaryOperator::Role::MSigma;
    op.matrix = l1.inverse() * (l1 - ls) * denom.ldlt().solve(l1 - le);
    return op;
}

// CGPT blocks from the M_sigma matrix: M_mn^{pq} = pi * n * (M_sigma)_{(m,p),(n,q)},
// since the flux of r^n cos/sin n-theta on the unit circle is n times the
// mode itself and the modes have boundary L2 norm^2 = pi.
inline CgptMatrix cgpt_from_msigma(const FourierBoundaryOperator& msigma, int order) {
    const int kb = msigma.order;
    if (order > kb - 4)
        throw std::invalid_argument("cgpt_from_msigma: order exceeds the truncation margin");
    CgptMatrix m = CgptMatrix::zero(order);
    for (int i = 1; i <= order; ++i) {
        for (int j = 1; j <= order; ++j) {
            m.cc(i - 1, j - 1) = kPi * j * msigma.matrix(i - 1, j - 1);
            m.cs(i - 1, j - 1) = kPi * j * msigma.matrix(i - 1, kb + j - 1);
            m.sc(i - 1, j - 1) = kPi * j * msigma.matrix(kb + i - 1, j - 1);
            m.ss(i - 1, j - 1) = kPi * j * msigma.matrix(kb + i - 1, kb + j - 1);
        }
    }
    return m;
}

// Default operator order for a requested CGPT order; the margin suppresses
// truncation feedback in the operator products.
inline int default_operator_order(int cgpt_order) { return 2 * cgpt_order + 8; }

// Full pipeline: FEM NtD -> M_sigma -> CGPT blocks.
inline CgptMatrix compute_cgpt(const DiskMesh& mesh, const ConductivityField& sigma, int order,
                               int operator_order = 0) {
    const int kb = operator_order > 0 ? operator_order : default_operator_order(order);
    return cgpt_from_msigma(msigma_matrix(ntd_sigma(mesh, sigma, kb)), order);
}

}  // namespace cgpt
