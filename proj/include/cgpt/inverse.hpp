#pragma once

// Reconstruction of the conductivity from target CGPTs: discrepancy
// functionals, Frechet machinery, Landweber (Armijo) and Newton steps,
// Morozov stopping, and the recursive order-raising schedule.
//
// The discrete chain is variationally closed: the NtD matrix is assembled
// by pairing boundary load vectors with FEM solutions, so the derivative of
// a CGPT entry with respect to nodal conductivity is exactly the
// element-averaged integral of grad(u_m).grad(u_n), where u_m solves the
// interior problem with flux (L_sigma - L_e)^-1 (L_1 - L_e)[dh_m/dnu].

#include <cmath>
#include <deque>
#include <fstream>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cgpt/boundary_ops.hpp"
#include "cgpt/cgpt.hpp"
#include "cgpt/fem.hpp"
#include "cgpt/field.hpp"
#include "cgpt/mesh.hpp"

namespace cgpt {

enum class Parity { Cos, Sin };
enum class WeightScheme { Unit, InverseMN };
enum class FunctionalKind { S1, S2, S3, S4 };
enum class StepperKind { Landweber, Newton };
enum class PenaltyNorm { L2, Linf };

struct StageSpec {
    int order = 1;
    int level = 0;
    int max_iters = 400;
};

struct InversionConfig {
    std::vector<StageSpec> schedule;
    WeightScheme weight_scheme = WeightScheme::Unit;
    FunctionalKind functional = FunctionalKind::S1;
    StepperKind stepper = StepperKind::Landweber;
    bool fixed_step = false;
    double t0 = 1.0;
    double shrink = 0.5;
    double slope = 1e-4;
    int max_backtracks = 40;
    double q = 0.0;  // regularization weight; reference is the initial guess
    PenaltyNorm penalty = PenaltyNorm::L2;
    double delta = 0.0;  // declared Frobenius noise level of the targets
    double tau = 1.2;    // Morozov factor
    double clamp_c = 10.0;
    double initial_value = 1.0;
    int base_boundary = 16;

    void validate() const {
        if (schedule.empty()) throw std::invalid_argument("InversionConfig: empty schedule");
        for (size_t i = 1; i < schedule.size(); ++i)
            if (schedule[i].order < schedule[i - 1].order)
                throw std::invalid_argument("InversionConfig: schedule orders must be nondecreasing");
        if (tau <= 1.0) throw std::invalid_argument("InversionConfig: tau must exceed 1");
        if (t0 <= 0.0) throw std::invalid_argument("InversionConfig: t0 must be positive");
        if (clamp_c <= 1.0) throw std::invalid_argument("InversionConfig: clamp bound must exceed 1");
        if (q < 0.0) throw std::invalid_argument("InversionConfig: q must be nonnegative");
        if (delta < 0.0) throw std::invalid_argument("InversionConfig: delta must be nonnegative");
    }
};

struct HistoryRecord {
    int k = 0;
    int stage_order = 0;
    double eps_M = 0.0;
    double eps_sigma = std::numeric_limits<double>::quiet_NaN();
    double step = 0.0;
    double functional = 0.0;
    bool newton_fallback = false;
};

struct InversionHistory {
    std::vector<HistoryRecord> records;
    std::vector<int> stage_starts;  // record index where each stage begins
    std::string stop_reason;        // "morozov" | "max-iter" | "stalled"
};

struct TargetData {
    CgptMatrix y;
    double delta = 0.0;
    std::optional<AnalyticSigma> truth;  // for eps_sigma bookkeeping only
};

inline void dump_history_csv(const InversionHistory& h, const std::string& path) {
    std::ofstream f(path);
    f.precision(17);
    f << "k,stage_order,eps_M,eps_sigma,step,functional\n";
    for (const auto& r : h.records)
        f << r.k << "," << r.stage_order << "," << r.eps_M << "," << r.eps_sigma << "," << r.step
          << "," << r.functional << "\n";
}

// Weights on the assembled 2N x 2N index set; entry (i,j) weights the block
// row of mode m(i) against mode n(j), identically across parities.
inline Eigen::MatrixXd weight_matrix(int order, WeightScheme scheme) {
    Eigen::MatrixXd w(2 * order, 2 * order);
    auto mode = [order](int i) { return i % order + 1; };
    for (int i = 0; i < 2 * order; ++i)
        for (int j = 0; j < 2 * order; ++j)
            w(i, j) = scheme == WeightScheme::Unit ? 1.0 : 1.0 / (mode(i) * mode(j));
    return w;
}

// Per-stage immutable data: mesh, load vectors, mass matrices.
struct StageContext {
    const DiskMesh* mesh = nullptr;
    int order = 0;           // active CGPT order
    int operator_order = 0;  // Fourier order of the boundary operators
    Eigen::MatrixXd loads;   // V x 2*operator_order
    Eigen::VectorXd lumped_mass;
    Eigen::SparseMatrix<double> mass;
};

inline StageContext make_stage_context(const DiskMesh& mesh, int order) {
    StageContext ctx;
    ctx.mesh = &mesh;
    ctx.order = order;
    ctx.operator_order = default_operator_order(order);
    if (ctx.operator_order > mesh.boundary_count() / 2 - 2)
        throw std::invalid_argument("make_stage_context: mesh too coarse for the requested order");
    ctx.loads = boundary_load_matrix(mesh, ctx.operator_order);
    ctx.mass = mass_matrix(mesh);
    ctx.lumped_mass = Eigen::VectorXd::Zero(mesh.vertex_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double a3 = mesh.triangle_area(t) / 3.0;
        for (int v : mesh.triangles[t]) ctx.lumped_mass[v] += a3;
    }
    return ctx;
}

// One forward evaluation at a fixed conductivity: NtD matrix, M_sigma,
// CGPTs, and (lazily) the interior fields whose gradients drive the
// Frechet derivative.
class StageForward {
public:
    StageForward(const StageContext& ctx, const ConductivityField& sigma)
        : ctx_(&ctx), sigma_(sigma), solver_(*ctx.mesh, sigma) {
        const int nb = 2 * ctx.operator_order;
        solutions_.resize(ctx.mesh->vertex_count(), nb);
        for (int j = 0; j < nb; ++j) solutions_.col(j) = solver_.solve_load(ctx.loads.col(j));
        Eigen::MatrixXd a = (ctx.loads.transpose() * solutions_) / kPi;
        const double asym = (a - a.transpose()).norm();
        if (asym > 1e-6 * std::max(a.norm(), 1e-300))
            throw std::runtime_error("StageForward: NtD asymmetry signals an under-resolved mesh");
        lambda_.order = ctx.operator_order;
        lambda_.role = FourierBoundaryOperator::Role::NtdInterior;
        lambda_.matrix = 0.5 * (a + a.transpose());
        cgpt_ = cgpt_from_msigma(msigma_matrix(lambda_), ctx.order);
    }

    const StageContext& context() const { return *ctx_; }
    const ConductivityField& sigma() const { return sigma_; }
    const CgptMatrix& cgpt() const { return cgpt_; }
    const FourierBoundaryOperator& ntd() const { return lambda_; }

    // Element gradients of the 2N interior fields u_{m,parity} of the
    // Frechet formula (cos modes first).  Row t of entry b is grad u_b on
    // triangle t.
    const std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>>& field_gradients() const {
        if (gradients_.empty()) {
            const int n = ctx_->order, kb = ctx_->operator_order;
            const Eigen::MatrixXd l1 = ntd_unit_disk(kb).matrix;
            const Eigen::MatrixXd le = exterior_ntd_disk(kb).matrix;
            Eigen::MatrixXd fluxes = Eigen::MatrixXd::Zero(2 * kb, 2 * n);
            for (int m = 1; m <= n; ++m) {
                fluxes(m - 1, m - 1) = m;           // d/dnu of r^m cos m-theta
                fluxes(kb + m - 1, n + m - 1) = m;  // sin counterpart
            }
            const Eigen::MatrixXd w = (lambda_.matrix - le).ldlt().solve((l1 - le) * fluxes);
            const Eigen::MatrixXd ufields = solutions_ * w;
            gradients_.reserve(2 * n);
            for (int b = 0; b < 2 * n; ++b)
                gradients_.push_back(element_gradients(*ctx_->mesh, ufields.col(b)));
        }
        return gradients_;
    }

    // M'_{mn}[gamma] for one parity pair, gamma given nodally.
    double frechet(const Eigen::VectorXd& gamma, int m, int n, Parity pm, Parity pn) const {
        const auto& g = field_gradients();
        const int bm = (pm == Parity::Cos ? 0 : ctx_->order) + m - 1;
        const int bn = (pn == Parity::Cos ? 0 : ctx_->order) + n - 1;
        const DiskMesh& mesh = *ctx_->mesh;
        double acc = 0.0;
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            const auto& tri = mesh.triangles[t];
            const double gbar = (gamma[tri[0]] + gamma[tri[1]] + gamma[tri[2]]) / 3.0;
            acc += gbar * g[bm].row(t).dot(g[bn].row(t)) * mesh.triangle_area(t);
        }
        return acc;
    }

    // Per-triangle steepest-descent field of S1: sum of w*eps times the
    // gradient products, one value per triangle.
    Eigen::VectorXd descent_per_triangle(const CgptMatrix& y, const Eigen::MatrixXd& weights) const {
        const auto& g = field_gradients();
        const int n2 = 2 * ctx_->order;
        const Eigen::MatrixXd c = weights.cwiseProduct(y.assemble() - cgpt_.assemble());
        const DiskMesh& mesh = *ctx_->mesh;
        Eigen::VectorXd out(mesh.triangle_count());
        Eigen::MatrixXd e(n2, 2);
        for (int t = 0; t < mesh.triangle_count(); ++t) {
            for (int b = 0; b < n2; ++b) e.row(b) = g[b].row(t);
            out[t] = (c * e).cwiseProduct(e).sum();
        }
        return out;
    }

    // Matrix of per-triangle gradient products, row (b1*2N + b2), used by
    // the Newton step's spanning set.
    Eigen::MatrixXd gradient_products() const {
        const auto& g = field_gradients();
        const int n2 = 2 * ctx_->order;
        const DiskMesh& mesh = *ctx_->mesh;
        Eigen::MatrixXd q(n2 * n2, mesh.triangle_count());
        for (int b1 = 0; b1 < n2; ++b1)
            for (int b2 = 0; b2 < n2; ++b2)
                q.row(b1 * n2 + b2) = (g[b1].col(0).cwiseProduct(g[b2].col(0)) +
                                       g[b1].col(1).cwiseProduct(g[b2].col(1)))
                                          .transpose();
        return q;
    }

private:
    const StageContext* ctx_;
    ConductivityField sigma_;
    NeumannSolver solver_;
    Eigen::MatrixXd solutions_;  // V x 2Kb nodal solutions for basis fluxes
    FourierBoundaryOperator lambda_;
    CgptMatrix cgpt_;
    mutable std::vector<Eigen::Matrix<double, Eigen::Dynamic, 2>> gradients_;
};

// ---- Discrepancy functionals ------------------------------------------

inline double s1_value(const CgptMatrix& m, const CgptMatrix& y, const Eigen::MatrixXd& weights) {
    const Eigen::MatrixXd d = y.assemble() - m.assemble();
    return 0.5 * weights.cwiseProduct(d.cwiseProduct(d)).sum();
}

// Eigen-basis discrepancy; weight_fn maps an eigenvalue to its weight.
inline double s2_value(const CgptMatrix& m, const CgptMatrix& y,
                       const std::function<double(double)>& weight_fn) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(y.assemble());
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(m.assemble());
    if (ey.info() != Eigen::Success || em.info() != Eigen::Success)
        throw std::runtime_error("s2_value: eigendecomposition failed");
    const Eigen::MatrixXd proj =
        em.eigenvectors().transpose() * (y.assemble() - m.assemble()) * ey.eigenvectors();
    double acc = 0.0;
    for (int l = 0; l < proj.cols(); ++l)
        for (int lp = 0; lp < proj.rows(); ++lp)
            acc += weight_fn(ey.eigenvalues()[l]) * weight_fn(em.eigenvalues()[lp]) *
                   proj(lp, l) * proj(lp, l);
    return 0.5 * acc;
}

inline double residual_frobenius(const CgptMatrix& m, const CgptMatrix& y) {
    return (y.assemble() - m.assemble()).norm();
}

inline bool morozov_stop(double residual, double delta, double tau) {
    return delta > 0.0 && residual <= tau * delta;
}

// eps_M and eps_sigma of the convergence bookkeeping; integrals use the
// consistent P1 mass matrix.
inline std::pair<double, double> epsilon_metrics(const StageContext& ctx,
                                                 const Eigen::VectorXd& sigma_k,
                                                 const Eigen::VectorXd& sigma_star,
                                                 const CgptMatrix& m_k, const CgptMatrix& y) {
    const double eps_m = (y.assemble() - m_k.assemble()).squaredNorm();
    const Eigen::VectorXd d = sigma_k - sigma_star;
    const double eps_s = d.dot(ctx.mass * d) / sigma_star.dot(ctx.mass * sigma_star);
    return {eps_m, eps_s};
}

// ---- Spec-shaped convenience wrappers ----------------------------------

inline double frechet_apply(const StageContext& ctx, const ConductivityField& sigma,
                            const Eigen::VectorXd& gamma, int m, int n, Parity pm, Parity pn) {
    return StageForward(ctx, sigma).frechet(gamma, m, n, pm, pn);
}

// Nodal steepest-descent field of S1 (area-weighted lift of the
// per-triangle field).
inline Eigen::VectorXd gradient_field(const StageForward& fwd, const CgptMatrix& y,
                                      const Eigen::MatrixXd& weights) {
    const StageContext& ctx = fwd.context();
    const Eigen::VectorXd per_tri = fwd.descent_per_triangle(y, weights);
    const DiskMesh& mesh = *ctx.mesh;
    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(mesh.vertex_count());
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const double a3 = mesh.triangle_area(t) / 3.0;
        for (int v : mesh.triangles[t]) nodal[v] += a3 * per_tri[t];
    }
    return nodal.cwiseQuotient(ctx.lumped_mass);
}

// Analytic first Landweber update around a constant background: the
// interior fields are (2/(c+1)) h_m exactly, so the update is a finite
// combination of r^{m+n-2} harmonics.  eps_weighted is the weighted
// discrepancy matrix w .* (Y - M(c)) at the active order.
inline double analytic_first_update(double c, const Eigen::MatrixXd& eps_weighted, double t,
                                    const Eigen::Vector2d& x) {
    const int n = static_cast<int>(eps_weighted.rows()) / 2;
    const double r = x.norm(), theta = std::atan2(x.y(), x.x());
    const double amp = t * 4.0 / ((c + 1.0) * (c + 1.0));
    double acc = 0.0;
    for (int m = 1; m <= n; ++m) {
        for (int nn = 1; nn <= n; ++nn) {
            const double radial = m * nn * std::pow(r, m + nn - 2);
            const double cd = std::cos((m - nn) * theta), sd = std::sin((m - nn) * theta);
            acc += radial * (eps_weighted(m - 1, nn - 1) * cd +          // cc
                             eps_weighted(n + m - 1, n + nn - 1) * cd +  // ss
                             eps_weighted(m - 1, n + nn - 1) * -sd +     // cs: sin((n-m)theta)
                             eps_weighted(n + m - 1, nn - 1) * sd);      // sc
        }
    }
    return amp * acc;
}

// ---- Iteration ----------------------------------------------------------

struct InversionState {
    ConductivityField sigma;
    std::unique_ptr<StageForward> forward;
    double last_step = 0.0;
    int k = 0;
    std::string stop_reason;
};

namespace detail {

inline double functional_value(const InversionConfig& cfg, const StageContext& ctx,
                               const CgptMatrix& m, const CgptMatrix& y,
                               const Eigen::MatrixXd& weights, const Eigen::VectorXd& sigma,
                               const Eigen::VectorXd& sigma_ref) {
    double s;
    if (cfg.functional == FunctionalKind::S2 || cfg.functional == FunctionalKind::S4)
        s = s2_value(m, y, [](double) { return 1.0; });
    else
        s = s1_value(m, y, weights);
    if (cfg.q > 0.0) {
        const Eigen::VectorXd d = sigma - sigma_ref;
        if (cfg.penalty == PenaltyNorm::L2)
            s += cfg.q * d.dot(ctx.mass * d);
        else
            s += cfg.q * d.cwiseAbs().maxCoeff() * d.cwiseAbs().maxCoeff();
    }
    return s;
}

}  // namespace detail

// One accepted Landweber step (Armijo backtracking unless fixed_step).
// Returns false when the line search stalls.
inline bool landweber_step(InversionState& state, const InversionConfig& cfg,
                           const StageContext& ctx, const CgptMatrix& y,
                           const Eigen::MatrixXd& weights, const Eigen::VectorXd& sigma_ref) {
    StageForward& fwd = *state.forward;
    const double s0 = detail::functional_value(cfg, ctx, fwd.cgpt(), y, weights,
                                               state.sigma.values, sigma_ref);

    Eigen::VectorXd dir = gradient_field(fwd, y, weights);
    if (cfg.q > 0.0 && cfg.penalty == PenaltyNorm::L2)
        dir -= 2.0 * cfg.q * (state.sigma.values - sigma_ref);

    // Directional derivative -S'(sigma)[dir], exact for the discrete chain.
    const DiskMesh& mesh = *ctx.mesh;
    const Eigen::VectorXd per_tri = fwd.descent_per_triangle(y, weights);
    double descent = 0.0;
    for (int t = 0; t < mesh.triangle_count(); ++t) {
        const auto& tri = mesh.triangles[t];
        const double dbar = (dir[tri[0]] + dir[tri[1]] + dir[tri[2]]) / 3.0;
        descent += dbar * per_tri[t] * mesh.triangle_area(t);
    }
    if (cfg.q > 0.0 && cfg.penalty == PenaltyNorm::L2)
        descent -= 2.0 * cfg.q * (state.sigma.values - sigma_ref).dot(ctx.mass * dir);
    if (!(descent > 0.0)) {
        state.stop_reason = "stalled";
        return false;
    }

    double t = state.last_step > 0.0 ? std::min(2.0 * state.last_step, cfg.t0) : cfg.t0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
        if (t < 1e-14) break;
        ConductivityField trial = state.sigma;
        trial.values += t * dir;
        trial = clamp_field(trial, cfg.clamp_c);
        auto trial_fwd = std::make_unique<StageForward>(ctx, trial);
        const double st = detail::functional_value(cfg, ctx, trial_fwd->cgpt(), y, weights,
                                                   trial.values, sigma_ref);
        if (cfg.fixed_step || st <= s0 - cfg.slope * t * descent) {
            state.sigma = std::move(trial);
            state.forward = std::move(trial_fwd);
            state.last_step = t;
            ++state.k;
            return true;
        }
        t *= cfg.shrink;
    }
    state.stop_reason = "stalled";
    return false;
}

// Newton step with the pseudo-inverse over the spanning set of gradient
// products; falls back to a Landweber step when the denominator degenerates.
inline bool newton_step(InversionState& state, const InversionConfig& cfg, const StageContext& ctx,
                        const CgptMatrix& y, const Eigen::MatrixXd& weights,
                        const Eigen::VectorXd& sigma_ref, bool* fallback = nullptr) {
    StageForward& fwd = *state.forward;
    const double s0 = detail::functional_value(cfg, ctx, fwd.cgpt(), y, weights,
                                               state.sigma.values, sigma_ref);
    const DiskMesh& mesh = *ctx.mesh;
    const int nt = mesh.triangle_count();

    Eigen::VectorXd area(nt);
    for (int t = 0; t < nt; ++t) area[t] = mesh.triangle_area(t);

    // Spanning directions psi_p: the per-triangle gradient products for S1,
    // their eigenvector contractions for S2.
    Eigen::MatrixXd psi;  // P x T
    const Eigen::MatrixXd q = fwd.gradient_products();
    if (cfg.functional == FunctionalKind::S2 || cfg.functional == FunctionalKind::S4) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> ey(y.assemble());
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(fwd.cgpt().assemble());
        const int n2 = 2 * ctx.order;
        psi.resize(n2 * n2, nt);
        int p = 0;
        for (int l = 0; l < n2; ++l)
            for (int lp = 0; lp < n2; ++lp, ++p) {
                Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(nt);
                for (int b1 = 0; b1 < n2; ++b1)
                    for (int b2 = 0; b2 < n2; ++b2)
                        row += em.eigenvectors()(b1, lp) * ey.eigenvectors()(b2, l) *
                               q.row(b1 * n2 + b2);
                psi.row(p) = row;
            }
    } else {
        psi = q;
    }

    // S'(sigma)[psi_p] = -sum_b w_b eps_b M'_b[psi_p]; M'_b[psi_p] is a
    // weighted triangle sum of product fields.
    const Eigen::MatrixXd c = weights.cwiseProduct(y.assemble() - fwd.cgpt().assemble());
    const int n2 = 2 * ctx.order;
    Eigen::VectorXd cflat(n2 * n2);
    for (int b1 = 0; b1 < n2; ++b1)
        for (int b2 = 0; b2 < n2; ++b2) cflat[b1 * n2 + b2] = c(b1, b2);
    const Eigen::VectorXd sprime = -(q * area.asDiagonal() * psi.transpose()).transpose() * cflat;

    const double denom = sprime.squaredNorm();
    if (denom < 1e-14) {
        if (fallback) *fallback = true;
        return landweber_step(state, cfg, ctx, y, weights, sigma_ref);
    }
    if (fallback) *fallback = false;

    const Eigen::VectorXd correction_tri = (psi.transpose() * sprime) * (s0 / denom);
    Eigen::VectorXd nodal = Eigen::VectorXd::Zero(mesh.vertex_count());
    for (int t = 0; t < nt; ++t) {
        const double a3 = area[t] / 3.0;
        for (int v : mesh.triangles[t]) nodal[v] += a3 * correction_tri[t];
    }
    nodal = nodal.cwiseQuotient(ctx.lumped_mass);

    ConductivityField next = state.sigma;
    next.values -= nodal;
    next = clamp_field(next, cfg.clamp_c);
    state.sigma = std::move(next);
    state.forward = std::make_unique<StageForward>(ctx, state.sigma);
    state.last_step = s0 / denom;
    ++state.k;
    return true;
}

struct MeshHierarchy {
    std::deque<DiskMesh> levels;  // stable addresses

    explicit MeshHierarchy(int base_boundary, int max_level) {
        levels.push_back(build_disk_mesh(base_boundary));
        for (int l = 0; l < max_level; ++l) levels.push_back(refine_mesh(levels.back()));
    }
    const DiskMesh& at(int level) const { return levels.at(level); }
};

// Recursive order-raising reconstruction over the configured schedule.
inline std::pair<ConductivityField, InversionHistory> recursive_reconstruct(
    const TargetData& target, const InversionConfig& cfg, const MeshHierarchy& meshes) {
    cfg.validate();
    if (target.y.order < cfg.schedule.back().order)
        throw std::invalid_argument("recursive_reconstruct: target order below final schedule order");

    InversionHistory history;
    ConductivityField sigma = constant_field(meshes.at(cfg.schedule.front().level), cfg.initial_value);
    int current_level = cfg.schedule.front().level;
    InversionState state;
    state.sigma = sigma;

    for (const StageSpec& stage : cfg.schedule) {
        while (current_level < stage.level) {
            const DiskMesh& child = meshes.at(current_level + 1);
            state.sigma.values = refine_nodal_values(child, state.sigma.values);
            state.sigma.mesh = &child;
            ++current_level;
        }
        const StageContext ctx = make_stage_context(meshes.at(current_level), stage.order);
        const CgptMatrix y = target.y.truncated(stage.order);
        const Eigen::MatrixXd weights = weight_matrix(stage.order, cfg.weight_scheme);
        const Eigen::VectorXd sigma_ref =
            Eigen::VectorXd::Constant(ctx.mesh->vertex_count(), cfg.initial_value);
        Eigen::VectorXd sigma_star;
        if (target.truth)
            sigma_star = project_sigma(*target.truth, *ctx.mesh).values;

        state.forward = std::make_unique<StageForward>(ctx, state.sigma);
        state.stop_reason.clear();
        history.stage_starts.push_back(static_cast<int>(history.records.size()));

        std::string stage_stop = "max-iter";
        for (int it = 0; it < stage.max_iters; ++it) {
            if (morozov_stop(residual_frobenius(state.forward->cgpt(), y), target.delta, cfg.tau)) {
                stage_stop = "morozov";
                break;
            }
            bool fallback = false;
            bool ok = cfg.stepper == StepperKind::Newton
                          ? newton_step(state, cfg, ctx, y, weights, sigma_ref, &fallback)
                          : landweber_step(state, cfg, ctx, y, weights, sigma_ref);
            if (!ok) {
                stage_stop = "stalled";
                break;
            }
            HistoryRecord rec;
            rec.k = state.k;
            rec.stage_order = stage.order;
            rec.step = state.last_step;
            rec.newton_fallback = fallback;
            rec.functional = detail::functional_value(cfg, ctx, state.forward->cgpt(), y, weights,
                                                      state.sigma.values, sigma_ref);
            if (sigma_star.size() > 0) {
                auto [em, es] = epsilon_metrics(ctx, state.sigma.values, sigma_star,
                                                state.forward->cgpt(), y);
                rec.eps_M = em;
                rec.eps_sigma = es;
            } else {
                rec.eps_M = (y.assemble() - state.forward->cgpt().assemble()).squaredNorm();
            }
            history.records.push_back(rec);
        }
        history.stop_reason = stage_stop;
    }
    return {state.sigma, history};
}

}  // namespace cgpt
