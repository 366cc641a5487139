#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <random>

#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

using namespace cgpt;

TEST_CASE("benchmark formulas at reference points") {
    REQUIRE(AnalyticSigma{1}(0, 0) == 4.0);
    REQUIRE(AnalyticSigma{2, 1.0, 1.0}(0, 1) == Catch::Approx(4.0));
    REQUIRE(AnalyticSigma{4}(0, 0) == Catch::Approx(3.0));   // inside the jump disk
    REQUIRE(AnalyticSigma{4}(0.9, 0) == Catch::Approx(2.0 + 0.729));
    // real branch of the Hoelder term below y = 0.5
    REQUIRE(AnalyticSigma{3}(0, 0) == Catch::Approx(3.0 + std::pow(0.5, 0.4)));
}

TEST_CASE("projection reproduces the formula at vertices") {
    DiskMesh m = refine_mesh(refine_mesh(build_disk_mesh(8)));
    const AnalyticSigma spec{2, 0.5, 0.8};
    const ConductivityField f = project_sigma(spec, m);
    for (int i = 0; i < m.vertex_count(); ++i) {
        const auto& p = m.vertices[i];
        REQUIRE(f.values[i] == Catch::Approx(spec(p.x(), p.y())).margin(1e-12));
        REQUIRE(eval_field(f, p) == Catch::Approx(spec(p.x(), p.y())).margin(1e-12));
    }
    REQUIRE(f.bound_c >= 2.0);
    REQUIRE(f.values.maxCoeff() <= f.bound_c);
    REQUIRE(f.values.minCoeff() >= 1.0 / f.bound_c);
}

TEST_CASE("piecewise-linear interpolation") {
    DiskMesh m = refine_mesh(build_disk_mesh(8));
    const ConductivityField c3 = constant_field(m, 3.0);
    REQUIRE(eval_field(c3, {0.3, 0.2}) == Catch::Approx(3.0).margin(1e-12));

    const ConductivityField fx = project_fn(m, [](double x, double) { return x + 2.0; });
    REQUIRE(eval_field(fx, {0.25, 0.0}) == Catch::Approx(2.25).margin(1e-12));

    REQUIRE_THROWS_AS(eval_field(c3, Eigen::Vector2d(2.0, 0.0)), std::domain_error);
}

TEST_CASE("clamping") {
    DiskMesh m = build_disk_mesh(8);
    ConductivityField f = constant_field(m, 1.0);
    f.values[0] = 0.1;
    f.values[1] = 5.0;
    const ConductivityField g = clamp_field(f, 4.0);
    REQUIRE(g.values[0] == 0.25);
    REQUIRE(g.values[1] == 4.0);
    const ConductivityField gg = clamp_field(g, 4.0);
    REQUIRE((gg.values - g.values).norm() == 0.0);  // idempotent
    REQUIRE_THROWS_AS(clamp_field(f, 1.0), std::invalid_argument);
}

TEST_CASE("clamping is nonexpansive in Linf") {
    DiskMesh m = build_disk_mesh(8);
    ConductivityField f = constant_field(m, 1.0), g = constant_field(m, 1.0);
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(-3.0, 8.0);
    for (int i = 0; i < f.values.size(); ++i) {
        f.values[i] = u(rng);
        g.values[i] = u(rng);
    }
    const double before = (f.values - g.values).cwiseAbs().maxCoeff();
    const double after =
        (clamp_field(f, 5.0).values - clamp_field(g, 5.0).values).cwiseAbs().maxCoeff();
    REQUIRE(after <= before + 1e-15);
}

TEST_CASE("field csv round trip") {
    DiskMesh m = refine_mesh(build_disk_mesh(8));
    const ConductivityField f = project_sigma(AnalyticSigma{1}, m);
    const std::string path = "field_roundtrip_test.csv";
    dump_field_csv(f, path);
    const ConductivityField g = load_field_csv(m, path);
    REQUIRE((f.values - g.values).cwiseAbs().maxCoeff() < 1e-15);
    std::remove(path.c_str());
}
