#pragma once

// Triangulations of the unit disk with boundary nodes equally spaced in
// angle.  The base mesh is a fan around the center; refinement is uniform
// 1-to-4 with radial projection of boundary midpoints onto the circle, so
// the boundary stays equispaced at every level and trapezoidal quadrature
// on it is spectrally exact for trigonometric polynomials.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numbers>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace cgpt {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct DiskMesh {
    std::vector<Eigen::Vector2d> vertices;
    std::vector<std::array<int, 3>> triangles;  // positively oriented
    std::vector<int> boundary;                  // ordered by increasing angle
    int level = 0;
    // Lineage of each vertex w.r.t. the parent mesh: (i,i) for inherited
    // vertices, (i,j) for midpoints of parent edge {i,j}.  Empty at level 0.
    std::vector<std::pair<int, int>> parents;

    int vertex_count() const { return static_cast<int>(vertices.size()); }
    int triangle_count() const { return static_cast<int>(triangles.size()); }
    int boundary_count() const { return static_cast<int>(boundary.size()); }

    double boundary_angle(int b) const {
        const Eigen::Vector2d& p = vertices[boundary[b]];
        double th = std::atan2(p.y(), p.x());
        if (th < 0.0) th += kTwoPi;
        return th;
    }

    double triangle_area(int t) const {
        const auto& tri = triangles[t];
        const Eigen::Vector2d& a = vertices[tri[0]];
        const Eigen::Vector2d& b = vertices[tri[1]];
        const Eigen::Vector2d& c = vertices[tri[2]];
        return 0.5 * ((b.x() - a.x()) * (c.y() - a.y()) -
                      (c.x() - a.x()) * (b.y() - a.y()));
    }
};

inline DiskMesh build_disk_mesh(int base_boundary_count) {
    if (base_boundary_count < 8)
        throw std::invalid_argument("build_disk_mesh: need at least 8 boundary nodes");
    if (base_boundary_count % 2 != 0)
        throw std::invalid_argument("build_disk_mesh: boundary count must be even");

    DiskMesh m;
    const int n = base_boundary_count;
    m.vertices.reserve(n + 1);
    m.vertices.emplace_back(0.0, 0.0);
    for (int j = 0; j < n; ++j) {
        const double th = kTwoPi * j / n;
        m.vertices.emplace_back(std::cos(th), std::sin(th));
        m.boundary.push_back(j + 1);
    }
    for (int j = 0; j < n; ++j)
        m.triangles.push_back({0, j + 1, 1 + (j + 1) % n});
    m.level = 0;
    return m;
}

inline DiskMesh refine_mesh(const DiskMesh& mesh) {
    DiskMesh child;
    child.level = mesh.level + 1;
    child.vertices = mesh.vertices;
    child.parents.resize(mesh.vertices.size());
    for (int i = 0; i < mesh.vertex_count(); ++i) child.parents[i] = {i, i};

    // Count edge multiplicity; edges seen once are boundary edges.
    std::map<std::pair<int, int>, int> edge_use;
    auto key = [](int a, int b) { return std::make_pair(std::min(a, b), std::max(a, b)); };
    for (const auto& t : mesh.triangles)
        for (int e = 0; e < 3; ++e) ++edge_use[key(t[e], t[(e + 1) % 3])];

    std::map<std::pair<int, int>, int> midpoint;
    for (const auto& [k, uses] : edge_use) {
        Eigen::Vector2d p = 0.5 * (mesh.vertices[k.first] + mesh.vertices[k.second]);
        if (uses == 1) p.normalize();  // boundary edge: project onto the circle
        midpoint[k] = child.vertex_count();
        child.vertices.push_back(p);
        child.parents.emplace_back(k.first, k.second);
    }

    for (const auto& t : mesh.triangles) {
        const int a = t[0], b = t[1], c = t[2];
        const int ab = midpoint[key(a, b)], bc = midpoint[key(b, c)], ca = midpoint[key(c, a)];
        child.triangles.push_back({a, ab, ca});
        child.triangles.push_back({ab, b, bc});
        child.triangles.push_back({ca, bc, c});
        child.triangles.push_back({ab, bc, ca});
    }

    for (const auto& [k, uses] : edge_use)
        if (uses == 1) child.boundary.push_back(midpoint[k]);
    for (int b : mesh.boundary) child.boundary.push_back(b);
    std::sort(child.boundary.begin(), child.boundary.end(), [&](int i, int j) {
        auto ang = [&](int v) {
            double th = std::atan2(child.vertices[v].y(), child.vertices[v].x());
            return th < 0.0 ? th + kTwoPi : th;
        };
        return ang(i) < ang(j);
    });
    return child;
}

// Periodic trapezoid rule on the equispaced boundary nodes; arc-length
// measure of the unit circle, weights sum to 2*pi.
inline std::vector<std::pair<double, double>> boundary_quadrature(const DiskMesh& mesh) {
    const int n = mesh.boundary_count();
    std::vector<std::pair<double, double>> q;
    q.reserve(n);
    for (int b = 0; b < n; ++b) q.emplace_back(mesh.boundary_angle(b), kTwoPi / n);
    return q;
}

// Transfer nodal values from a mesh to its refine_mesh() child.
inline Eigen::VectorXd refine_nodal_values(const DiskMesh& child, const Eigen::VectorXd& parent_values) {
    if (child.parents.empty())
        throw std::invalid_argument("refine_nodal_values: mesh has no refinement lineage");
    Eigen::VectorXd v(child.vertex_count());
    for (int i = 0; i < child.vertex_count(); ++i) {
        const auto& [a, b] = child.parents[i];
        v[i] = (a == b) ? parent_values[a] : 0.5 * (parent_values[a] + parent_values[b]);
    }
    return v;
}

inline void dump_mesh_csv(const DiskMesh& mesh, const std::string& vertex_path,
                          const std::string& triangle_path) {
    std::ofstream vf(vertex_path);
    vf.precision(17);
    vf << "x,y\n";
    for (const auto& p : mesh.vertices) vf << p.x() << "," << p.y() << "\n";
    std::ofstream tf(triangle_path);
    tf << "i,j,k\n";
    for (const auto& t : mesh.triangles) tf << t[0] << "," << t[1] << "," << t[2] << "\n";
}

}  // namespace cgpt
