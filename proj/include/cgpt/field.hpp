#pragma once

// Piecewise-linear nodal conductivity fields on a disk mesh, including the
// benchmark conductivity formulas used throughout the test suite.

#include <cmath>
#include <fstream>
#include <functional>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cgpt/mesh.hpp"

namespace cgpt {

struct ConductivityField {
    const DiskMesh* mesh = nullptr;
    Eigen::VectorXd values;  // one conductivity per vertex
    double bound_c = 2.0;    // values constrained to [1/bound_c, bound_c]
};

// Benchmark conductivity formulas, identified by index:
//   1: x^3 + y^3 + 4
//   2: b*x^3 + a*y^5 + y^2 + 2
//   3: x^3 + y^5 + |y - 0.5|^0.4 + 3   (real branch below y = 0.5)
//   4: x^3 + y^5 + [x^2 + y^2 < 0.25] + 2
struct AnalyticSigma {
    int kind = 1;
    double a = 1.0;
    double b = 1.0;

    double operator()(double x, double y) const {
        switch (kind) {
            case 1: return x * x * x + y * y * y + 4.0;
            case 2: return b * x * x * x + a * std::pow(y, 5) + y * y + 2.0;
            case 3: return x * x * x + std::pow(y, 5) + std::pow(std::abs(y - 0.5), 0.4) + 3.0;
            case 4: return x * x * x + std::pow(y, 5) + (x * x + y * y < 0.25 ? 1.0 : 0.0) + 2.0;
            default: throw std::invalid_argument("AnalyticSigma: unknown formula index");
        }
    }
};

inline ConductivityField project_fn(const DiskMesh& mesh,
                                    const std::function<double(double, double)>& f) {
    ConductivityField field;
    field.mesh = &mesh;
    field.values.resize(mesh.vertex_count());
    double vmax = 0.0, vmin = std::numeric_limits<double>::infinity();
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        const double v = f(mesh.vertices[i].x(), mesh.vertices[i].y());
        if (!std::isfinite(v)) {
            std::ostringstream msg;
            msg << "project_fn: non-finite conductivity at vertex " << i << " ("
                << mesh.vertices[i].x() << ", " << mesh.vertices[i].y() << ")";
            throw std::runtime_error(msg.str());
        }
        field.values[i] = v;
        vmax = std::max(vmax, v);
        vmin = std::min(vmin, v);
    }
    if (vmin <= 0.0) throw std::runtime_error("project_fn: conductivity must be positive");
    field.bound_c = std::max(2.0, std::ceil(std::max(vmax, 1.0 / vmin)));
    return field;
}

inline ConductivityField project_sigma(const AnalyticSigma& spec, const DiskMesh& mesh) {
    return project_fn(mesh, [&spec](double x, double y) { return spec(x, y); });
}

inline ConductivityField constant_field(const DiskMesh& mesh, double c) {
    ConductivityField field;
    field.mesh = &mesh;
    field.values = Eigen::VectorXd::Constant(mesh.vertex_count(), c);
    field.bound_c = std::max(2.0, std::ceil(std::max(c, 1.0 / c)));
    return field;
}

// Barycentric interpolation on the containing triangle.
inline double eval_field(const ConductivityField& field, const Eigen::Vector2d& p) {
    const DiskMesh& mesh = *field.mesh;
    if (p.norm() > 1.0 + 1e-12)
        throw std::domain_error("eval_field: point outside the unit disk");
    const double tol = -1e-10;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Eigen::Vector2d& a = mesh.vertices[tri[0]];
        const Eigen::Vector2d& b = mesh.vertices[tri[1]];
        const Eigen::Vector2d& c = mesh.vertices[tri[2]];
        const double area2 = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
        const double l0 = ((b.x() - p.x()) * (c.y() - p.y()) - (c.x() - p.x()) * (b.y() - p.y())) / area2;
        const double l1 = ((c.x() - p.x()) * (a.y() - p.y()) - (a.x() - p.x()) * (c.y() - p.y())) / area2;
        const double l2 = 1.0 - l0 - l1;
        if (l0 >= tol && l1 >= tol && l2 >= tol)
            return l0 * field.values[tri[0]] + l1 * field.values[tri[1]] + l2 * field.values[tri[2]];
    }
    // Points inside the disk but outside the polygonal mesh hull (thin sliver
    // near the boundary): fall back to the nearest boundary edge.
    double best = std::numeric_limits<double>::infinity();
    double val = 0.0;
    const int nb = mesh.boundary_count();
    for (int e = 0; e < nb; ++e) {
        const int i = mesh.boundary[e], j = mesh.boundary[(e + 1) % nb];
        const Eigen::Vector2d a = mesh.vertices[i], b = mesh.vertices[j];
        const Eigen::Vector2d d = b - a;
        double s = std::clamp((p - a).dot(d) / d.squaredNorm(), 0.0, 1.0);
        const double dist = (a + s * d - p).norm();
        if (dist < best) {
            best = dist;
            val = (1.0 - s) * field.values[i] + s * field.values[j];
        }
    }
    return val;
}

inline ConductivityField clamp_field(const ConductivityField& field, double c) {
    if (c <= 1.0) throw std::invalid_argument("clamp_field: bound must exceed 1");
    ConductivityField out = field;
    out.bound_c = c;
    for (int i = 0; i < out.values.size(); ++i)
        out.values[i] = std::clamp(out.values[i], 1.0 / c, c);
    return out;
}

inline void dump_field_csv(const ConductivityField& field, const std::string& path) {
    std::ofstream f(path);
    f.precision(17);
    f << "x,y,sigma\n";
    for (int i = 0; i < field.mesh->vertex_count(); ++i)
        f << field.mesh->vertices[i].x() << "," << field.mesh->vertices[i].y() << ","
          << field.values[i] << "\n";
}

inline ConductivityField load_field_csv(const DiskMesh& mesh, const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_field_csv: cannot open " + path);
    std::string line;
    std::getline(f, line);  // header
    ConductivityField field;
    field.mesh = &mesh;
    field.values.resize(mesh.vertex_count());
    for (int i = 0; i < mesh.vertex_count(); ++i) {
        if (!std::getline(f, line))
            throw std::runtime_error("load_field_csv: too few rows in " + path);
        std::istringstream ss(line);
        double x, y, s;
        char comma;
        ss >> x >> comma >> y >> comma >> s;
        if ((Eigen::Vector2d(x, y) - mesh.vertices[i]).norm() > 1e-9)
            throw std::runtime_error("load_field_csv: vertex order mismatch in " + path);
        field.values[i] = s;
    }
    double vmax = field.values.maxCoeff(), vmin = field.values.minCoeff();
    field.bound_c = std::max(2.0, std::ceil(std::max(vmax, 1.0 / vmin)));
    return field;
}

}  // namespace cgpt
