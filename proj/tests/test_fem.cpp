#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "cgpt/fem.hpp"
#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

using namespace cgpt;

namespace {

DiskMesh mesh_at_level(int level, int base = 16) {
    DiskMesh m = build_disk_mesh(base);
    for (int l = 0; l < level; ++l) m = refine_mesh(m);
    return m;
}

FluxCoefficients single_cos_mode(int order, int mode, double amp) {
    FluxCoefficients g = FluxCoefficients::zero(order);
    g.cos_coeffs[mode - 1] = amp;
    return g;
}

// L2 boundary-trace error against an analytic trace, trapezoid rule.
double trace_error(const InteriorSolution& sol, const std::function<double(double)>& exact) {
    double acc = 0.0;
    const auto q = boundary_quadrature(*sol.mesh);
    for (int b = 0; b < sol.mesh->boundary_count(); ++b) {
        const double d = sol.nodal_potential[sol.mesh->boundary[b]] - exact(q[b].first);
        acc += q[b].second * d * d;
    }
    return std::sqrt(acc);
}

}  // namespace

TEST_CASE("harmonic mode on homogeneous disk") {
    const DiskMesh m = mesh_at_level(3);
    const ConductivityField one = constant_field(m, 1.0);
    // sigma=1, g = cos(theta): u = r cos(theta)
    const InteriorSolution sol = solve_neumann(m, one, single_cos_mode(3, 1, 1.0));
    REQUIRE(trace_error(sol, [](double th) { return std::cos(th); }) < 2e-3);

    // boundary mean is zero
    double mean = 0.0;
    for (int b : m.boundary) mean += sol.nodal_potential[b];
    REQUIRE(std::abs(mean) * kTwoPi / m.boundary_count() <=
            1e-10 * sol.nodal_potential.cwiseAbs().maxCoeff());
}

TEST_CASE("mode-3 NtD eigenvalue and O(h^2) trace convergence") {
    // sigma=1, g = 3 cos(3 theta) -> u = r^3 cos(3 theta), trace cos(3 theta)
    double prev = 0.0;
    for (int level = 2; level <= 4; ++level) {
        const DiskMesh m = mesh_at_level(level);
        const ConductivityField one = constant_field(m, 1.0);
        const InteriorSolution sol = solve_neumann(m, one, single_cos_mode(4, 3, 3.0));
        const double err = trace_error(sol, [](double th) { return std::cos(3 * th); });
        if (level > 2) REQUIRE(prev / err >= 3.5);
        prev = err;
    }
}

TEST_CASE("constant-sigma interior solution") {
    // sigma = c, g = (2c/(c+1)) m cos(m theta) -> u = (2/(c+1)) r^m cos(m theta)
    const double c = 2.0;
    const int mode = 2;
    const DiskMesh m = mesh_at_level(4);
    const ConductivityField cf = constant_field(m, c);
    const InteriorSolution sol =
        solve_neumann(m, cf, single_cos_mode(3, mode, 2.0 * c / (c + 1.0) * mode));
    REQUIRE(trace_error(sol, [&](double th) { return 2.0 / (c + 1.0) * std::cos(mode * th); }) <
            2e-3);
}

TEST_CASE("element gradients reproduce linear fields") {
    const DiskMesh m = mesh_at_level(2);
    Eigen::VectorXd x(m.vertex_count());
    for (int i = 0; i < m.vertex_count(); ++i) x[i] = m.vertices[i].x();
    const auto g = element_gradients(m, x);
    for (int t = 0; t < m.triangle_count(); ++t) {
        REQUIRE(g(t, 0) == Catch::Approx(1.0).margin(1e-12));
        REQUIRE(g(t, 1) == Catch::Approx(0.0).margin(1e-12));
    }
    const auto gc = element_gradients(m, Eigen::VectorXd::Constant(m.vertex_count(), 5.0));
    REQUIRE(gc.cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("energy identity") {
    const DiskMesh m = mesh_at_level(3);
    const ConductivityField f = project_sigma(AnalyticSigma{1}, m);
    const FluxCoefficients g = single_cos_mode(2, 2, 1.5);
    NeumannSolver solver(m, f);
    const Eigen::VectorXd load = flux_load_vector(m, g);
    const Eigen::VectorXd u = solver.solve_load(load);
    // int sigma |grad u|^2 (elementwise) vs int g u (load pairing)
    double energy = 0.0;
    const auto grads = element_gradients(m, u);
    for (int t = 0; t < m.triangle_count(); ++t) {
        const auto& tri = m.triangles[t];
        const double sbar = (f.values[tri[0]] + f.values[tri[1]] + f.values[tri[2]]) / 3.0;
        energy += sbar * m.triangle_area(t) * grads.row(t).squaredNorm();
    }
    const double boundary_work = load.dot(u);
    REQUIRE(energy == Catch::Approx(boundary_work).epsilon(1e-8));
}

TEST_CASE("solver is linear in the flux") {
    const DiskMesh m = mesh_at_level(2);
    const ConductivityField f = project_sigma(AnalyticSigma{2, 0.3, 0.7}, m);
    NeumannSolver solver(m, f);
    FluxCoefficients g1 = FluxCoefficients::zero(3), g2 = FluxCoefficients::zero(3);
    g1.cos_coeffs << 1.0, 0.0, -0.5;
    g1.sin_coeffs << 0.0, 2.0, 0.0;
    g2.cos_coeffs << 0.0, 1.0, 0.0;
    g2.sin_coeffs << -1.0, 0.0, 0.25;
    FluxCoefficients g12 = FluxCoefficients::zero(3);
    g12.cos_coeffs = g1.cos_coeffs + g2.cos_coeffs;
    g12.sin_coeffs = g1.sin_coeffs + g2.sin_coeffs;
    const Eigen::VectorXd u =
        solver.solve_flux(g1) + solver.solve_flux(g2) - solver.solve_flux(g12);
    REQUIRE(u.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("invalid conductivity rejected") {
    const DiskMesh m = mesh_at_level(1);
    ConductivityField f = constant_field(m, 1.0);
    f.values[3] = -0.5;
    REQUIRE_THROWS_AS(NeumannSolver(m, f), std::invalid_argument);
}
