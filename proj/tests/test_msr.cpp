#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "cgpt/boundary_ops.hpp"
#include "cgpt/cgpt.hpp"
#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"
#include "cgpt/msr.hpp"

using namespace cgpt;

namespace {

DiskMesh mesh_at_level(int level, int base = 16) {
    DiskMesh m = build_disk_mesh(base);
    for (int l = 0; l < level; ++l) m = refine_mesh(m);
    return m;
}

}  // namespace

TEST_CASE("sensor array validation") {
    REQUIRE_THROWS_AS(SensorArray(1, 3.0), std::invalid_argument);
    REQUIRE_THROWS_AS(SensorArray(16, 1.0), std::invalid_argument);
    const SensorArray a(8, 3.0);
    REQUIRE(a.angle(2) == Catch::Approx(kPi / 2.0));
}

TEST_CASE("coefficient matrix entries and block ordering") {
    const SensorArray array(6, 2.0);
    const Eigen::MatrixXd a = build_A(array, 3);
    REQUIRE(a.rows() == 6);
    REQUIRE(a.cols() == 6);
    for (int m = 1; m <= 3; ++m) {
        const double scale = 1.0 / (kTwoPi * m * std::pow(2.0, m));
        for (int t = 0; t < 6; ++t) {
            REQUIRE(a(m - 1, t) == Catch::Approx(scale * std::cos(m * array.angle(t))).margin(1e-15));
            REQUIRE(a(3 + m - 1, t) ==
                    Catch::Approx(scale * std::sin(m * array.angle(t))).margin(1e-15));
        }
    }
}

TEST_CASE("MSR entries match the far-field expansion") {
    // A point at angle theta_t on the sensor circle sees the perturbation of
    // the harmonic background generated by the source at theta_s; for the
    // truncated model the (s,t) entry equals the far-field evaluation with
    // source coefficients a_n^c = -cos(n theta_s)/(2 pi n R^n), sin analog.
    const DiskMesh mesh = mesh_at_level(3);
    const CgptMatrix m = compute_cgpt(mesh, project_sigma(AnalyticSigma{1}, mesh), 3);
    const SensorArray array(9, 2.5);
    const MsrMatrix v = simulate_msr(m, array, 3, 0.0, 0);

    for (int s : {0, 4}) {
        HarmonicCoefficients h;
        h.a_c = Eigen::VectorXd::Zero(3);
        h.a_s = Eigen::VectorXd::Zero(3);
        for (int n = 1; n <= 3; ++n) {
            const double scale = 1.0 / (kTwoPi * n * std::pow(array.radius, n));
            h.a_c[n - 1] = -scale * std::cos(n * array.angle(s));
            h.a_s[n - 1] = -scale * std::sin(n * array.angle(s));
        }
        for (int t : {1, 7}) {
            const Eigen::Vector2d x(array.radius * std::cos(array.angle(t)),
                                    array.radius * std::sin(array.angle(t)));
            REQUIRE(v.values(s, t) == Catch::Approx(far_field_eval(m, h, x)).margin(1e-14));
        }
    }
}

TEST_CASE("noiseless recovery round trip") {
    const DiskMesh mesh = mesh_at_level(3);
    const CgptMatrix m = compute_cgpt(mesh, project_sigma(AnalyticSigma{2, 0.4, 0.6}, mesh), 3);
    const SensorArray array(32, 3.0);
    const MsrMatrix v = simulate_msr(m, array, 3, 0.0, 0);
    const CgptMatrix rec = recover_cgpt(v, array, 3);
    REQUIRE((rec.assemble() - m.assemble()).norm() < 1e-10 * m.assemble().norm());
}

TEST_CASE("zero CGPT gives zero MSR") {
    const SensorArray array(12, 2.0);
    const MsrMatrix v = simulate_msr(CgptMatrix::zero(2), array, 2, 0.0, 0);
    REQUIRE(v.values.cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("noise is deterministic in the seed") {
    const CgptMatrix m = constant_cgpt(2.0, 2);
    const SensorArray array(16, 2.0);
    const MsrMatrix a = simulate_msr(m, array, 2, 1e-3, 42);
    const MsrMatrix b = simulate_msr(m, array, 2, 1e-3, 42);
    const MsrMatrix c = simulate_msr(m, array, 2, 1e-3, 43);
    REQUIRE((a.values - b.values).norm() == 0.0);
    REQUIRE((a.values - c.values).norm() > 0.0);

    const MsrMatrix clean = simulate_msr(m, array, 2, 0.0, 42);
    const double dev = (a.values - clean.values).norm() / std::sqrt(16.0 * 16.0);
    REQUIRE(dev == Catch::Approx(1e-3).epsilon(0.3));
}

TEST_CASE("MSR is symmetric for symmetric CGPTs") {
    const DiskMesh mesh = mesh_at_level(3);
    const CgptMatrix m = compute_cgpt(mesh, project_sigma(AnalyticSigma{4}, mesh), 2);
    const SensorArray array(10, 2.2);
    const MsrMatrix v = simulate_msr(m, array, 2, 0.0, 0);
    REQUIRE((v.values - v.values.transpose()).norm() < 1e-12 * v.values.norm());
}

TEST_CASE("MSR amplitude decays with the sensor radius") {
    const CgptMatrix m = constant_cgpt(3.0, 2);
    const MsrMatrix near = simulate_msr(m, SensorArray(12, 2.0), 2, 0.0, 0);
    const MsrMatrix far = simulate_msr(m, SensorArray(12, 4.0), 2, 0.0, 0);
    REQUIRE(far.values.norm() < 0.3 * near.values.norm());
}

TEST_CASE("recovery needs enough sensors") {
    const SensorArray small(8, 2.0);
    MsrMatrix v;
    v.values = Eigen::MatrixXd::Zero(8, 8);
    REQUIRE_THROWS_AS(recover_cgpt(v, small, 4), std::invalid_argument);
    REQUIRE_THROWS_AS(simulate_msr(constant_cgpt(2.0, 2), small, 3, 0.0, 0),
                      std::invalid_argument);
}

TEST_CASE("MSR CSV round trip") {
    const MsrMatrix v = simulate_msr(constant_cgpt(2.0, 3), SensorArray(9, 2.0), 3, 1e-4, 7);
    const std::string path = "msr_roundtrip_test.csv";
    dump_msr_csv(v, path);
    const MsrMatrix back = load_msr_csv(path);
    std::remove(path.c_str());
    REQUIRE((back.values - v.values).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE_THROWS_AS(load_msr_csv("no_such_file.csv"), std::runtime_error);
}
