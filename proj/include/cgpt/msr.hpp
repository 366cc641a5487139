#pragma once

// Multistatic response matrices: synthesis from CGPTs via the harmonic
// expansion of the source potentials, and least-squares recovery of the
// CGPT blocks from measured data.

#include <cstdint>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "cgpt/cgpt.hpp"
#include "cgpt/mesh.hpp"

namespace cgpt {

// Coincident point sources / potential detectors, equispaced on a circle of
// radius R > 1 concentric with the disk.
struct SensorArray {
    int count = 0;
    double radius = 0.0;

    SensorArray(int n, double r) : count(n), radius(r) {
        if (n < 2) throw std::invalid_argument("SensorArray: need at least 2 sensors");
        if (r <= 1.1) throw std::invalid_argument("SensorArray: radius must exceed 1.1");
    }

    double angle(int t) const { return kTwoPi * t / count; }
};

struct MsrMatrix {
    Eigen::MatrixXd values;  // N x N
    int simulated_order = 0;
    double noise_std = 0.0;
};

// Coefficient matrix A (2K x N): row m-1 carries cos(m theta_t)/(2 pi m R^m),
// row K+m-1 the sin counterpart, matching the CGPT block ordering.
inline Eigen::MatrixXd build_A(const SensorArray& array, int order) {
    if (order < 1) throw std::invalid_argument("build_A: order must be positive");
    Eigen::MatrixXd a(2 * order, array.count);
    for (int m = 1; m <= order; ++m) {
        const double scale = 1.0 / (kTwoPi * m * std::pow(array.radius, m));
        for (int t = 0; t < array.count; ++t) {
            a(m - 1, t) = scale * std::cos(m * array.angle(t));
            a(order + m - 1, t) = scale * std::sin(m * array.angle(t));
        }
    }
    return a;
}

inline MsrMatrix simulate_msr(const CgptMatrix& m_true, const SensorArray& array, int sim_order,
                              double noise_std, std::uint64_t seed) {
    if (sim_order > m_true.order)
        throw std::invalid_argument("simulate_msr: simulation order exceeds CGPT order");
    const Eigen::MatrixXd a = build_A(array, sim_order);
    MsrMatrix msr;
    msr.simulated_order = sim_order;
    msr.noise_std = noise_std;
    msr.values = a.transpose() * m_true.truncated(sim_order).assemble() * a;
    if (noise_std > 0.0) {
        std::mt19937_64 rng(seed);
        std::normal_distribution<double> gauss(0.0, noise_std);
        for (int i = 0; i < msr.values.rows(); ++i)
            for (int j = 0; j < msr.values.cols(); ++j) msr.values(i, j) += gauss(rng);
    }
    return msr;
}

// Truncated pseudo-inverse of a symmetric PSD matrix.
inline Eigen::MatrixXd pseudo_inverse_sym(const Eigen::MatrixXd& g, double rel_threshold) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(g);
    const Eigen::VectorXd ev = es.eigenvalues();
    const double cutoff = rel_threshold * ev.cwiseAbs().maxCoeff();
    if (ev.cwiseAbs().maxCoeff() == 0.0 || cutoff <= 0.0)
        throw std::runtime_error("pseudo_inverse_sym: rank collapse");
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(ev.size());
    int rank = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (std::abs(ev[i]) > cutoff) {
            inv[i] = 1.0 / ev[i];
            ++rank;
        }
    if (rank == 0) throw std::runtime_error("pseudo_inverse_sym: rank collapse");
    return es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

// Closed-form normal-equation minimizer of ||V - A^T M A||_F.
inline CgptMatrix recover_cgpt(const MsrMatrix& v, const SensorArray& array, int order) {
    if (2 * order >= array.count)
        throw std::invalid_argument("recover_cgpt: need 2K < N sensors");
    const Eigen::MatrixXd a = build_A(array, order);
    const Eigen::MatrixXd gram_inv = pseudo_inverse_sym(a * a.transpose(), 1e-12);
    const Eigen::MatrixXd m = gram_inv * a * v.values * a.transpose() * gram_inv;
    return CgptMatrix::from_assembled(m);
}

inline void dump_msr_csv(const MsrMatrix& msr, const std::string& path) {
    std::ofstream f(path);
    f.precision(17);
    for (int i = 0; i < msr.values.rows(); ++i) {
        for (int j = 0; j < msr.values.cols(); ++j) f << (j ? "," : "") << msr.values(i, j);
        f << "\n";
    }
}

inline MsrMatrix load_msr_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_msr_csv: cannot open " + path);
    std::vector<std::vector<double>> rows;
    std::string line;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        rows.push_back(std::move(row));
    }
    const int n = static_cast<int>(rows.size());
    MsrMatrix msr;
    msr.values.resize(n, n);
    for (int i = 0; i < n; ++i) {
        if (static_cast<int>(rows[i].size()) != n)
            throw std::runtime_error("load_msr_csv: matrix is not square in " + path);
        for (int j = 0; j < n; ++j) msr.values(i, j) = rows[i][j];
    }
    return msr;
}

}  // namespace cgpt
