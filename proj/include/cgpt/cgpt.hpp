#pragma once

// Contracted polarization tensor container, analytic and radial-ODE
// reference values, and far-field evaluation of the perturbed potential.

#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <nlohmann/json.hpp>

#include "cgpt/mesh.hpp"

namespace cgpt {

struct CgptMatrix {
    int order = 0;
    Eigen::MatrixXd cc, cs, sc, ss;  // K x K blocks

    static CgptMatrix zero(int order) {
        CgptMatrix m;
        m.order = order;
        m.cc = m.cs = m.sc = m.ss = Eigen::MatrixXd::Zero(order, order);
        return m;
    }

    // Full 2K x 2K assembly [[cc, cs], [sc, ss]].
    Eigen::MatrixXd assemble() const {
        Eigen::MatrixXd a(2 * order, 2 * order);
        a << cc, cs, sc, ss;
        return a;
    }

    static CgptMatrix from_assembled(const Eigen::MatrixXd& a) {
        if (a.rows() != a.cols() || a.rows() % 2 != 0)
            throw std::invalid_argument("CgptMatrix: assembled matrix must be square 2Kx2K");
        CgptMatrix m;
        m.order = static_cast<int>(a.rows()) / 2;
        const int k = m.order;
        m.cc = a.topLeftCorner(k, k);
        m.cs = a.topRightCorner(k, k);
        m.sc = a.bottomLeftCorner(k, k);
        m.ss = a.bottomRightCorner(k, k);
        return m;
    }

    // Leading-orders submatrix.
    CgptMatrix truncated(int k) const {
        if (k > order) throw std::invalid_argument("CgptMatrix: truncation beyond stored order");
        CgptMatrix m;
        m.order = k;
        m.cc = cc.topLeftCorner(k, k);
        m.cs = cs.topLeftCorner(k, k);
        m.sc = sc.topLeftCorner(k, k);
        m.ss = ss.topLeftCorner(k, k);
        return m;
    }
};

// Diagonal CGPTs of a homogeneous disk: M_mm = 2*pi*m*(c-1)/(c+1).
inline CgptMatrix constant_cgpt(double c, int order) {
    if (c <= 0.0) throw std::invalid_argument("constant_cgpt: conductivity must be positive");
    CgptMatrix m = CgptMatrix::zero(order);
    for (int i = 0; i < order; ++i) {
        const double v = kTwoPi * (i + 1) * (c - 1.0) / (c + 1.0);
        m.cc(i, i) = v;
        m.ss(i, i) = v;
    }
    return m;
}

// Radial transmission oracle.  For each mode m the interior radial factor f
// solves (sigma r f')' - m^2 sigma f / r = 0 with f ~ r^m at the origin;
// matching f and the flux sigma*f' at r = 1 to the exterior harmonic form
// r^m + b_m r^-m (exterior conductivity 1) gives b_m and M_mm = -2*pi*m*b_m.
inline double radial_reflection_coefficient(const std::function<double(double)>& sigma_r, int m) {
    namespace ode = boost::numeric::odeint;
    using State = std::array<double, 2>;  // (f, sigma * r * f')

    auto rhs = [&](const State& y, State& dy, double r) {
        const double s = sigma_r(r);
        dy[0] = y[1] / (s * r);
        dy[1] = m * m * s * y[0] / r;
    };

    const double r0 = 1e-6;
    State y{std::pow(r0, m), m * sigma_r(r0) * std::pow(r0, m)};
    auto stepper = ode::make_controlled<ode::runge_kutta_dopri5<State>>(1e-14, 1e-10);
    try {
        ode::integrate_adaptive(stepper, rhs, y, r0, 1.0, 1e-4);
    } catch (const std::exception& e) {
        throw std::runtime_error(std::string("radial oracle: ODE integration failed: ") + e.what());
    }
    if (!std::isfinite(y[0]) || !std::isfinite(y[1]) || y[0] == 0.0)
        throw std::runtime_error("radial oracle: ODE integration produced invalid state");

    // Interior log-derivative rho = sigma(1) f'(1) / f(1); exterior flux of
    // alpha (r^m + b r^-m) at r = 1 is alpha m (1 - b).
    const double rho = y[1] / y[0];
    return (m - rho) / (m + rho);
}

inline CgptMatrix radial_cgpt_oracle(const std::function<double(double)>& sigma_r, int order) {
    CgptMatrix m = CgptMatrix::zero(order);
    for (int k = 1; k <= order; ++k) {
        const double b = radial_reflection_coefficient(sigma_r, k);
        m.cc(k - 1, k - 1) = -kTwoPi * k * b;
        m.ss(k - 1, k - 1) = m.cc(k - 1, k - 1);
    }
    return m;
}

struct HarmonicCoefficients {
    double h0 = 0.0;
    Eigen::VectorXd a_c, a_s;  // coefficients of r^n cos/sin n-theta, n = 1..order
    int order() const { return static_cast<int>(a_c.size()); }
};

// Truncated far-field expansion of the perturbation u - h outside the disk.
inline double far_field_eval(const CgptMatrix& m, const HarmonicCoefficients& h,
                             const Eigen::Vector2d& x) {
    const double r = x.norm();
    if (r <= 1.0) throw std::domain_error("far_field_eval: point must lie outside the unit disk");
    const int k = std::min(m.order, h.order());
    const double theta = std::atan2(x.y(), x.x());
    double value = 0.0;
    for (int mm = 1; mm <= m.order; ++mm) {
        double cos_amp = 0.0, sin_amp = 0.0;
        for (int n = 1; n <= k; ++n) {
            cos_amp += m.cc(mm - 1, n - 1) * h.a_c[n - 1] + m.cs(mm - 1, n - 1) * h.a_s[n - 1];
            sin_amp += m.sc(mm - 1, n - 1) * h.a_c[n - 1] + m.ss(mm - 1, n - 1) * h.a_s[n - 1];
        }
        const double decay = 1.0 / (kTwoPi * mm * std::pow(r, mm));
        value -= decay * (cos_amp * std::cos(mm * theta) + sin_amp * std::sin(mm * theta));
    }
    return value;
}

inline nlohmann::json cgpt_to_json(const CgptMatrix& m) {
    auto flat = [](const Eigen::MatrixXd& b) {
        std::vector<double> v;
        v.reserve(b.size());
        for (int i = 0; i < b.rows(); ++i)
            for (int j = 0; j < b.cols(); ++j) v.push_back(b(i, j));
        return v;
    };
    return {{"order", m.order}, {"cc", flat(m.cc)}, {"cs", flat(m.cs)},
            {"sc", flat(m.sc)}, {"ss", flat(m.ss)}};
}

inline CgptMatrix cgpt_from_json(const nlohmann::json& j) {
    CgptMatrix m;
    m.order = j.at("order").get<int>();
    auto unflat = [&](const char* key) {
        const auto v = j.at(key).get<std::vector<double>>();
        if (static_cast<int>(v.size()) != m.order * m.order)
            throw std::invalid_argument("cgpt_from_json: block size mismatch for " + std::string(key));
        Eigen::MatrixXd b(m.order, m.order);
        for (int i = 0; i < m.order; ++i)
            for (int jj = 0; jj < m.order; ++jj) b(i, jj) = v[i * m.order + jj];
        return b;
    };
    m.cc = unflat("cc");
    m.cs = unflat("cs");
    m.sc = unflat("sc");
    m.ss = unflat("ss");
    return m;
}

inline void save_cgpt_json(const CgptMatrix& m, const std::string& path) {
    std::ofstream f(path);
    f << cgpt_to_json(m).dump(2) << "\n";
}

inline CgptMatrix load_cgpt_json(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("load_cgpt_json: cannot open " + path);
    nlohmann::json j;
    f >> j;
    return cgpt_from_json(j);
}

}  // namespace cgpt
