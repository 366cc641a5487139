#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdio>

#include "cgpt/boundary_ops.hpp"
#include "cgpt/cgpt.hpp"
#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

using namespace cgpt;

namespace {

DiskMesh mesh_at_level(int level, int base = 16) {
    DiskMesh m = build_disk_mesh(base);
    for (int l = 0; l < level; ++l) m = refine_mesh(m);
    return m;
}

}  // namespace

TEST_CASE("radial oracle reproduces the constant-disk formula") {
    for (double c : {0.5, 2.0, 5.0}) {
        for (int m = 1; m <= 5; ++m) {
            const double b = radial_reflection_coefficient([c](double) { return c; }, m);
            REQUIRE(b == Catch::Approx((1.0 - c) / (1.0 + c)).margin(1e-8));
        }
        const CgptMatrix oracle = radial_cgpt_oracle([c](double) { return c; }, 3);
        const CgptMatrix ref = constant_cgpt(c, 3);
        REQUIRE((oracle.assemble() - ref.assemble()).cwiseAbs().maxCoeff() < 1e-7);
    }
}

TEST_CASE("FEM pipeline matches the radial oracle for sigma = 1 + r^2") {
    auto sig = [](double r) { return 1.0 + r * r; };
    const CgptMatrix oracle = radial_cgpt_oracle(sig, 3);

    const DiskMesh m = mesh_at_level(5);
    ConductivityField f = project_fn(m, [&](double x, double y) { return sig(std::hypot(x, y)); });
    const CgptMatrix fem = compute_cgpt(m, f, 3);

    const double scale = oracle.assemble().norm();
    for (int k = 0; k < 3; ++k) {
        REQUIRE(fem.cc(k, k) == Catch::Approx(oracle.cc(k, k)).margin(2e-3 * scale));
        REQUIRE(fem.ss(k, k) == Catch::Approx(oracle.ss(k, k)).margin(2e-3 * scale));
    }
    REQUIRE(fem.cs.cwiseAbs().maxCoeff() < 1e-6 * scale);
}

TEST_CASE("constant CGPT values") {
    const CgptMatrix m = constant_cgpt(2.0, 4);
    for (int k = 1; k <= 4; ++k)
        REQUIRE(m.cc(k - 1, k - 1) == Catch::Approx(kTwoPi * k / 3.0));
    REQUIRE(m.cc(0, 1) == 0.0);
    REQUIRE_THROWS_AS(constant_cgpt(-1.0, 2), std::invalid_argument);
}

TEST_CASE("far field of a homogeneous disk under h = r cos theta") {
    // sigma = 2: (u - h)(x) = -(1/3) cos(theta) / r at leading order; at
    // x = (3, 0) the exact truncated value is -1/9 * ... = -1/9 / ... check:
    // M_11 = 2 pi /3, decay 1/(2 pi * 3), amplitude = -(2pi/3)(1/(2pi*3)) = -1/9.
    const CgptMatrix m = constant_cgpt(2.0, 3);
    HarmonicCoefficients h;
    h.a_c = Eigen::VectorXd::Zero(3);
    h.a_s = Eigen::VectorXd::Zero(3);
    h.a_c[0] = 1.0;
    REQUIRE(far_field_eval(m, h, {3.0, 0.0}) == Catch::Approx(-1.0 / 9.0).epsilon(1e-12));
    REQUIRE_THROWS_AS(far_field_eval(m, h, {0.5, 0.0}), std::domain_error);
}

TEST_CASE("far field is rotation-equivariant for a radial inclusion") {
    const CgptMatrix m = constant_cgpt(3.0, 4);
    const double alpha = 0.7;
    // rotate the source field r cos theta by alpha: a_c = cos, a_s = sin
    HarmonicCoefficients h0, hr;
    h0.a_c = Eigen::VectorXd::Zero(4);
    h0.a_s = Eigen::VectorXd::Zero(4);
    h0.a_c[0] = 1.0;
    hr = h0;
    hr.a_c[0] = std::cos(alpha);
    hr.a_s[0] = std::sin(alpha);
    const Eigen::Vector2d x(2.0, 0.5);
    const Eigen::Rotation2Dd rot(alpha);
    REQUIRE(far_field_eval(m, hr, rot * x) == Catch::Approx(far_field_eval(m, h0, x)).epsilon(1e-12));
}

TEST_CASE("far field decays like 1/r") {
    const DiskMesh m = mesh_at_level(4);
    const ConductivityField f = project_sigma(AnalyticSigma{1}, m);
    const CgptMatrix cg = compute_cgpt(m, f, 4);
    HarmonicCoefficients h;
    h.a_c = Eigen::VectorXd::Zero(4);
    h.a_s = Eigen::VectorXd::Zero(4);
    h.a_c[0] = 0.8;
    h.a_s[1] = 0.3;
    const double v2 = std::abs(far_field_eval(cg, h, {2.0, 0.0}));
    const double v8 = std::abs(far_field_eval(cg, h, {8.0, 0.0}));
    REQUIRE(v8 < v2 / 3.0);
    REQUIRE(v8 > 0.0);
}

TEST_CASE("assemble and from_assembled round trip") {
    CgptMatrix m = CgptMatrix::zero(2);
    m.cc << 1, 2, 3, 4;
    m.cs << 5, 6, 7, 8;
    m.sc << -1, -2, -3, -4;
    m.ss << 0.5, 0, 0, 0.25;
    const CgptMatrix back = CgptMatrix::from_assembled(m.assemble());
    REQUIRE((back.cc - m.cc).norm() == 0.0);
    REQUIRE((back.cs - m.cs).norm() == 0.0);
    REQUIRE((back.sc - m.sc).norm() == 0.0);
    REQUIRE((back.ss - m.ss).norm() == 0.0);

    const CgptMatrix t = m.truncated(1);
    REQUIRE(t.order == 1);
    REQUIRE(t.cc(0, 0) == 1.0);
    REQUIRE_THROWS_AS(m.truncated(3), std::invalid_argument);
}

TEST_CASE("JSON round trip") {
    const DiskMesh mesh = mesh_at_level(2);
    const CgptMatrix m = compute_cgpt(mesh, project_sigma(AnalyticSigma{4}, mesh), 3);
    const std::string path = "cgpt_roundtrip_test.json";
    save_cgpt_json(m, path);
    const CgptMatrix back = load_cgpt_json(path);
    std::remove(path.c_str());
    REQUIRE(back.order == m.order);
    REQUIRE((back.assemble() - m.assemble()).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE_THROWS_AS(load_cgpt_json("no_such_file.json"), std::runtime_error);
}
