#ifndef FSE_SHOOTING_HPP
#define FSE_SHOOTING_HPP

/**
 * @file shooting.hpp
 * @brief Shooting residual on the Fourier coefficients of the initial section.
 *
 * Unknowns are the coefficients Z(0) of z(0, φ̃) in state-major order
 * (index i·Ũ + u) plus the frequencies that are released. The residual is
 *
 *     R = (I ⊗ R(ρ)) Γ⁻¹ z̄(2π) - Z(0)
 *
 * where z̄(2π) collects the end points of the S̃ sample trajectories.
 */

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/integrator.hpp"
#include "fse/model.hpp"
#include "fse/parallel.hpp"

namespace fse {

struct TorusCoefficients {
    Vector z0;
    FrequencyVector omega;
};

struct ShootingOptions {
    NewmarkOptions newmark;
    int workers = 1;
    bool jacobians = true;
};

struct ShootingEvaluation {
    Vector residual;
    Vector z_end;          // Z(2π)
    Vector z_end_rotated;  // Ẑ(2π)
    Matrix jac_z0;         // ∂R/∂Z(0)
    Matrix jac_omega;      // column i-1 holds ∂R/∂ω_i, all d frequencies
    TrajectoryBatchResult batch;
};

// ---------------------------------------------------------------------------
// Transforms between coefficients and samples

/// (I ⊗ Γ) Z: coefficients to grid samples.
inline Vector coefficients_to_samples(const Vector& z, const HarmonicScheme& scheme) {
    const auto u = scheme.u_tilde, s = scheme.s_tilde;
    if (z.size() % u != 0) throw ConfigError("coefficient vector length is not a multiple of U~");
    const auto states = z.size() / u;
    Vector out(states * s);
    for (Eigen::Index i = 0; i < states; ++i) out.segment(i * s, s).noalias() = scheme.gamma * z.segment(i * u, u);
    return out;
}

/// (I ⊗ Γ⁻¹) z̄: grid samples to coefficients.
inline Vector samples_to_coefficients(const Vector& zbar, const HarmonicScheme& scheme) {
    const auto u = scheme.u_tilde, s = scheme.s_tilde;
    if (zbar.size() % s != 0) throw ConfigError("sample vector length is not a multiple of S~");
    const auto states = zbar.size() / s;
    Vector out(states * u);
    for (Eigen::Index i = 0; i < states; ++i)
        out.segment(i * u, u).noalias() = scheme.gamma_inv * zbar.segment(i * s, s);
    return out;
}

/// (I ⊗ A) Z for a Ũ x Ũ block A.
inline Vector apply_blockwise(const Matrix& a, const Vector& z) {
    const auto u = a.cols();
    const auto states = z.size() / u;
    Vector out(states * a.rows());
    for (Eigen::Index i = 0; i < states; ++i) out.segment(i * a.rows(), a.rows()).noalias() = a * z.segment(i * u, u);
    return out;
}

/// z(0, φ̃) = (I ⊗ H(φ̃)) Z.
inline Vector reconstruct(const Vector& z, const HarmonicScheme& scheme, const Vector& phi_tilde) {
    const auto u = scheme.u_tilde;
    const Eigen::RowVectorXd h = basis_row(scheme.k_matrix, phi_tilde);
    const auto states = z.size() / u;
    Vector out(states);
    for (Eigen::Index i = 0; i < states; ++i) out(i) = h.dot(z.segment(i * u, u));
    return out;
}

namespace detail {

inline void check_problem(const SecondOrderModel& model, const TorusCoefficients& c, const HarmonicScheme& scheme) {
    if (c.omega.d() != scheme.d)
        throw ConfigError("frequency vector has d = " + std::to_string(c.omega.d()) + " but the scheme has d = " +
                          std::to_string(scheme.d));
    if (c.z0.size() != 2 * model.n * scheme.u_tilde)
        throw ConfigError("coefficient vector must have length 2n*U~ = " +
                          std::to_string(2 * model.n * scheme.u_tilde));
    if (model.max_forcing_index() > c.omega.e())
        throw ConfigError("forcing uses frequency index " + std::to_string(model.max_forcing_index()) +
                          " but only e = " + std::to_string(c.omega.e()) + " frequencies are forcing frequencies");
}

} // namespace detail

// ---------------------------------------------------------------------------
// Residual and Jacobians

inline ShootingEvaluation evaluate(const SecondOrderModel& model, const TorusCoefficients& coeffs,
                                   const HarmonicScheme& scheme, const ShootingOptions& opts = {}) {
    detail::check_problem(model, coeffs, scheme);
    const auto n2 = 2 * model.n;
    const auto u = scheme.u_tilde, s = scheme.s_tilde;
    const int d = scheme.d;
    const Vector& omega = coeffs.omega.omega();
    const Vector rho = coeffs.omega.rho();

    NewmarkOptions nopt = opts.newmark;
    nopt.sensitivities = opts.jacobians;

    ShootingEvaluation ev;
    ev.batch = integrate_batch(model, coefficients_to_samples(coeffs.z0, scheme), omega, scheme, nopt, opts.workers);
    ev.z_end = samples_to_coefficients(ev.batch.terminal_states, scheme);
    const Matrix rot = rotation_matrix(rho, scheme.k_matrix);
    ev.z_end_rotated = apply_blockwise(rot, ev.z_end);
    ev.residual = ev.z_end_rotated - coeffs.z0;
    if (!opts.jacobians) return ev;

    const Matrix p = rot * scheme.gamma_inv;
    const auto& blocks = ev.batch.sensitivity_blocks;
    ev.jac_z0.resize(n2 * u, n2 * u);
    parallel_for(opts.workers, static_cast<std::size_t>(n2), [&](std::size_t bi) {
        const auto b = static_cast<Eigen::Index>(bi);
        Vector psi(s);
        for (Eigen::Index a = 0; a < n2; ++a) {
            for (Eigen::Index k = 0; k < s; ++k) psi(k) = blocks[static_cast<std::size_t>(k)](a, b);
            auto blk = ev.jac_z0.block(a * u, b * u, u, u);
            blk.noalias() = (p * psi.asDiagonal()) * scheme.gamma;
            if (a == b) blk.diagonal().array() -= 1.0;
        }
    });

    ev.jac_omega.resize(n2 * u, d);
    ev.jac_omega.col(0) = apply_blockwise(p, ev.batch.omega1_sensitivities);
    if (d > 1) ev.jac_omega.col(0) += apply_blockwise(rotation_derivative(rho, omega, scheme.k_matrix, 1), ev.z_end);
    for (int j = 2; j <= d; ++j) {
        ev.jac_omega.col(j - 1) = apply_blockwise(rotation_derivative(rho, omega, scheme.k_matrix, j), ev.z_end);
        if (j - 2 < ev.batch.forcing_frequency_sensitivities.cols())
            ev.jac_omega.col(j - 1) += apply_blockwise(p, ev.batch.forcing_frequency_sensitivities.col(j - 2));
    }
    return ev;
}

struct FdCheckReport {
    double z0_error = 0.0;      // worst column over ∂R/∂Z(0)
    double omega_error = 0.0;   // worst column over the checked ∂R/∂ω_i
    Eigen::Index worst_column = -1;
    double worst() const { return std::max(z0_error, omega_error); }
};

/**
 * Central finite differences of the residual against the analytic Jacobian.
 * Column errors are ‖J_col - FD_col‖ / max(‖FD_col‖, 1e-3·max_col‖FD‖) so
 * that near-zero columns are compared on the scale of the whole Jacobian.
 * `omega_indices` defaults to all d frequencies.
 */
inline FdCheckReport jacobian_fd_check(const SecondOrderModel& model, const TorusCoefficients& coeffs,
                                       const HarmonicScheme& scheme, const ShootingOptions& opts, double h,
                                       std::vector<int> omega_indices = {}) {
    if (!(h > 0.0)) throw ConfigError("jacobian_fd_check: step must be positive");
    if (omega_indices.empty())
        for (int i = 1; i <= scheme.d; ++i) omega_indices.push_back(i);
    const ShootingEvaluation base = evaluate(model, coeffs, scheme, opts);
    ShootingOptions plain = opts;
    plain.jacobians = false;

    const auto nz = coeffs.z0.size();
    const auto cols = nz + static_cast<Eigen::Index>(omega_indices.size());
    Matrix fd(base.residual.size(), cols), an(base.residual.size(), cols);
    for (Eigen::Index j = 0; j < nz; ++j) {
        TorusCoefficients plus = coeffs, minus = coeffs;
        plus.z0(j) += h;
        minus.z0(j) -= h;
        fd.col(j) = (evaluate(model, plus, scheme, plain).residual - evaluate(model, minus, scheme, plain).residual) /
                    (2.0 * h);
        an.col(j) = base.jac_z0.col(j);
    }
    for (std::size_t k = 0; k < omega_indices.size(); ++k) {
        const int i = omega_indices[k];
        TorusCoefficients plus = coeffs, minus = coeffs;
        plus.omega.set(i, coeffs.omega[i] + h);
        minus.omega.set(i, coeffs.omega[i] - h);
        const auto c = nz + static_cast<Eigen::Index>(k);
        fd.col(c) = (evaluate(model, plus, scheme, plain).residual - evaluate(model, minus, scheme, plain).residual) /
                    (2.0 * h);
        an.col(c) = base.jac_omega.col(i - 1);
    }

    double scale = 0.0;
    for (Eigen::Index c = 0; c < cols; ++c) scale = std::max(scale, fd.col(c).norm());
    FdCheckReport rep;
    double worst = -1.0;
    for (Eigen::Index c = 0; c < cols; ++c) {
        const double err = (an.col(c) - fd.col(c)).norm() / std::max({fd.col(c).norm(), 1e-3 * scale, 1e-300});
        if (c < nz) rep.z0_error = std::max(rep.z0_error, err);
        else rep.omega_error = std::max(rep.omega_error, err);
        if (err > worst) {
            worst = err;
            rep.worst_column = c;
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Constraint rows

/// Row of one phase condition over Z(0); `degenerate` is set when it vanishes.
struct PhaseRow {
    int index = 0;
    Eigen::RowVectorXd row;
    bool degenerate = false;
};

/**
 * Phase-condition rows over Z(0), normalized to unit Euclidean norm.
 * Index i ≥ 2 gives [(I ⊗ ∇_i) Z]ᵀ. Index 1 gives the coefficients of
 * z' = (u, q'') on the initial section, with q'' taken from the equation of
 * motion at φ_1 = 0.
 */
inline std::vector<PhaseRow> phase_condition_rows(const Vector& z0, const HarmonicScheme& scheme,
                                                  const SecondOrderModel& model, const Vector& omega,
                                                  const std::vector<int>& indices) {
    const auto n = model.n;
    const auto s = scheme.s_tilde;
    std::vector<PhaseRow> rows;
    for (int i : indices) {
        if (i < 1 || i > scheme.d) throw ConfigError("phase condition index " + std::to_string(i) + " out of range");
        PhaseRow pr;
        pr.index = i;
        Vector g;
        if (i >= 2) {
            g = apply_blockwise(scheme.nabla_list[static_cast<std::size_t>(i - 2)], z0);
        } else {
            const Vector zbar = coefficients_to_samples(z0, scheme);
            Vector dz(2 * n * s);
            const double w = omega(0);
            Eigen::LLT<Matrix> mass(model.mass);
            NonlinearForce nl;
            nl.resize(n);
            for (Eigen::Index k = 0; k < s; ++k) {
                Vector q(n), v(n);
                for (Eigen::Index a = 0; a < n; ++a) {
                    q(a) = zbar(a * s + k);
                    v(a) = zbar((n + a) * s + k);
                }
                const detail::TrajectoryForcing forcing(model, omega, scheme.sample(k));
                model.eval_nonlinear(q, w * v, nl);
                const Vector acc =
                    mass.solve(model.force_distribution * (forcing(0.0, nullptr) - nl.f) - w * (model.damping * v) -
                               model.stiffness * q) /
                    (w * w);
                for (Eigen::Index a = 0; a < n; ++a) {
                    dz(a * s + k) = v(a);
                    dz((n + a) * s + k) = acc(a);
                }
            }
            g = samples_to_coefficients(dz, scheme);
        }
        const double norm = g.norm();
        pr.degenerate = !(norm > 1e-14 * std::max(1.0, z0.norm()));
        pr.row = pr.degenerate ? Eigen::RowVectorXd(g.transpose()) : Eigen::RowVectorXd(g.transpose() / norm);
        rows.push_back(std::move(pr));
    }
    return rows;
}

/// Linear row over ω = (ω_1..ω_d) enforcing ω_i - ρ_i ω_1 = 0.
inline Eigen::RowVectorXd frequency_condition_row(int d, int i, double rho_i) {
    if (i < 2 || i > d) throw ConfigError("frequency condition index must satisfy 2 <= i <= d");
    Eigen::RowVectorXd row = Eigen::RowVectorXd::Zero(d);
    row(0) = -rho_i;
    row(i - 1) = 1.0;
    return row;
}

/// Frequency conditions for indices i = 2..e with target ratios `rho_fixed(i-2)`.
inline std::vector<Eigen::RowVectorXd> frequency_condition_rows(const FrequencyVector& omega, const Vector& rho_fixed,
                                                                const std::vector<int>& indices) {
    std::vector<Eigen::RowVectorXd> rows;
    for (int i : indices) {
        if (i - 2 >= rho_fixed.size()) throw ConfigError("frequency condition lacks a target ratio");
        rows.push_back(frequency_condition_row(omega.d(), i, rho_fixed(i - 2)));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Square shooting system with constraints

/// Which frequencies are unknown and which equations fill the dimension deficit.
struct DeficitSetup {
    std::vector<int> released;        // frequency indices solved for
    std::vector<int> phase_indices;   // phase conditions
    std::vector<int> frequency_conditions; // indices i with ω_i - ρ_i ω_1 = 0
    Vector target_rho;                // ρ_i for the frequency conditions, entry i-2
};

/**
 * Maps x = [Z(0); ω_released] to F = [R; phase values; frequency conditions].
 * Phase values are row(Z_ref)·(Z - Z_ref) around a reference section set with
 * `set_reference`, so the phase rows constrain increments with zero
 * right-hand side.
 */
class ShootingSystem {
public:
    struct Result {
        Vector f;
        Matrix fx;
        ShootingEvaluation evaluation;
        TorusCoefficients point;
    };

    ShootingSystem(SecondOrderModel model, HarmonicScheme scheme, ShootingOptions opts, DeficitSetup setup,
                   FrequencyVector omega)
        : model_(std::move(model)), scheme_(std::move(scheme)), opts_(std::move(opts)), setup_(std::move(setup)),
          omega_(std::move(omega)) {
        for (int i : setup_.released)
            if (i < 1 || i > omega_.d()) throw ConfigError("released frequency index out of range");
        for (int i : setup_.frequency_conditions) {
            if (i < 2 || i > omega_.d()) throw ConfigError("frequency condition index out of range");
            if (i - 2 >= setup_.target_rho.size()) throw ConfigError("frequency condition lacks a target ratio");
        }
        const auto m = setup_.phase_indices.size() + setup_.frequency_conditions.size();
        if (m != setup_.released.size())
            throw ConfigError("constraints must fill the dimension deficit exactly: " +
                              std::to_string(setup_.released.size()) + " released frequencies but " +
                              std::to_string(m) + " phase/frequency conditions");
    }

    const SecondOrderModel& model() const { return model_; }
    const HarmonicScheme& scheme() const { return scheme_; }
    const ShootingOptions& options() const { return opts_; }
    const DeficitSetup& setup() const { return setup_; }
    const FrequencyVector& base_omega() const { return omega_; }

    void set_model(SecondOrderModel model) { model_ = std::move(model); }
    void set_frequency(int i, double value) { omega_.set(i, value); }
    void set_options(ShootingOptions opts) { opts_ = std::move(opts); }

    Eigen::Index coefficient_size() const { return 2 * model_.n * scheme_.u_tilde; }
    Eigen::Index unknowns() const { return coefficient_size() + static_cast<Eigen::Index>(setup_.released.size()); }

    Vector pack(const TorusCoefficients& c) const {
        Vector x(unknowns());
        x.head(coefficient_size()) = c.z0;
        for (std::size_t k = 0; k < setup_.released.size(); ++k)
            x(coefficient_size() + static_cast<Eigen::Index>(k)) = c.omega[setup_.released[k]];
        return x;
    }

    TorusCoefficients unpack(const Vector& x) const {
        TorusCoefficients c{x.head(coefficient_size()), omega_};
        for (std::size_t k = 0; k < setup_.released.size(); ++k)
            c.omega.set(setup_.released[k], x(coefficient_size() + static_cast<Eigen::Index>(k)));
        return c;
    }

    /// Rebuilds the phase rows around `x`; later values are measured from it.
    void set_reference(const Vector& x) {
        const TorusCoefficients c = unpack(x);
        reference_ = c.z0;
        phase_rows_ = phase_condition_rows(c.z0, scheme_, model_, c.omega.omega(), setup_.phase_indices);
        for (const auto& pr : phase_rows_)
            if (pr.degenerate)
                throw RankDeficiency("phase condition " + std::to_string(pr.index) +
                                     " is degenerate at the reference point (the section has no dependence on that "
                                     "angle); seed a nonconstant torus");
    }
    bool has_reference() const { return reference_.size() == coefficient_size() || setup_.phase_indices.empty(); }
    const std::vector<PhaseRow>& phase_rows() const { return phase_rows_; }

    Result operator()(const Vector& x, bool jacobian) const {
        if (!has_reference()) throw ConfigError("ShootingSystem: phase reference not set");
        Result r;
        r.point = unpack(x);
        ShootingOptions o = opts_;
        o.jacobians = jacobian;
        r.evaluation = evaluate(model_, r.point, scheme_, o);
        const auto nz = coefficient_size();
        const auto m = static_cast<Eigen::Index>(setup_.released.size());
        r.f.resize(nz + m);
        r.f.head(nz) = r.evaluation.residual;
        Eigen::Index row = nz;
        for (const auto& pr : phase_rows_) r.f(row++) = pr.row.dot(r.point.z0 - reference_);
        for (int i : setup_.frequency_conditions)
            r.f(row++) = r.point.omega[i] - setup_.target_rho(i - 2) * r.point.omega[1];
        if (!jacobian) return r;

        r.fx = Matrix::Zero(nz + m, nz + m);
        r.fx.topLeftCorner(nz, nz) = r.evaluation.jac_z0;
        for (Eigen::Index k = 0; k < m; ++k)
            r.fx.block(0, nz + k, nz, 1) = r.evaluation.jac_omega.col(setup_.released[static_cast<std::size_t>(k)] - 1);
        row = nz;
        for (const auto& pr : phase_rows_) r.fx.block(row++, 0, 1, nz) = pr.row;
        for (int i : setup_.frequency_conditions) {
            const Eigen::RowVectorXd g = frequency_condition_row(omega_.d(), i, setup_.target_rho(i - 2));
            for (Eigen::Index k = 0; k < m; ++k) r.fx(row, nz + k) = g(setup_.released[static_cast<std::size_t>(k)] - 1);
            ++row;
        }
        return r;
    }

    /// ∂F/∂ω_i for a frequency held fixed in x (used when ω_1 is the continuation parameter).
    Vector omega_column(const Result& r, int i) const {
        const auto nz = coefficient_size();
        Vector col = Vector::Zero(r.f.size());
        col.head(nz) = r.evaluation.jac_omega.col(i - 1);
        Eigen::Index row = nz + static_cast<Eigen::Index>(phase_rows_.size());
        for (int j : setup_.frequency_conditions)
            col(row++) = frequency_condition_row(omega_.d(), j, setup_.target_rho(j - 2))(i - 1);
        return col;
    }

    /// Convergence scale max(1, ‖Z(0)‖).
    double scale(const Vector& x) const { return std::max(1.0, x.head(coefficient_size()).norm()); }

private:
    SecondOrderModel model_;
    HarmonicScheme scheme_;
    ShootingOptions opts_;
    DeficitSetup setup_;
    FrequencyVector omega_;
    Vector reference_;
    std::vector<PhaseRow> phase_rows_;
};

/// Dense LU solve of a bordered Newton system; near-singular matrices raise RankDeficiency.
inline Vector solve_bordered(const Matrix& a, const Vector& b, double rank_tolerance, const std::string& context) {
    Eigen::PartialPivLU<Matrix> lu(a);
    const double rc = lu.rcond();
    if (!(rc > rank_tolerance))
        throw RankDeficiency(context + ": bordered Newton matrix is singular (rcond " + std::to_string(rc) +
                             "); a phase condition is probably missing for a released frequency");
    return lu.solve(b);
}

struct NewtonOptions {
    double epsilon = 1e-8;
    int max_iterations = 20;
    int max_halvings = 4;
    double rank_tolerance = 1e-13;
};

struct CorrectionResult {
    TorusCoefficients coeffs;
    int iterations = 0;               // Newton updates applied
    double residual_norm = 0.0;       // ‖[R; constraints]‖
    std::vector<double> history;      // residual norm before each update and at the end
    double max_phase_step_product = 0.0;  // max |row·δZ| over updates
    ShootingEvaluation evaluation;    // at the returned point, with Jacobians
};

/**
 * Damped Newton iteration on a ShootingSystem. The step is halved up to
 * `max_halvings` times while the residual norm does not decrease. The
 * reference for the phase rows is the starting point.
 */
inline CorrectionResult newton_correct(ShootingSystem& system, const TorusCoefficients& start,
                                       const NewtonOptions& nopts = {}) {
    Vector x = system.pack(start);
    system.set_reference(x);
    auto r = system(x, true);
    double norm = r.f.norm();
    CorrectionResult out;
    out.history.push_back(norm);
    while (!(norm < nopts.epsilon * system.scale(x))) {
        if (!std::isfinite(norm)) throw NonConvergence("shooting Newton produced a non-finite residual", norm);
        if (out.iterations >= nopts.max_iterations)
            throw NonConvergence("shooting Newton did not converge in " + std::to_string(nopts.max_iterations) +
                                     " iterations",
                                 norm);
        const Vector dx = solve_bordered(r.fx, -r.f, nopts.rank_tolerance, "newton_correct");
        for (const auto& pr : system.phase_rows())
            out.max_phase_step_product =
                std::max(out.max_phase_step_product, std::abs(pr.row.dot(dx.head(system.coefficient_size()))));
        double lambda = 1.0;
        for (int halving = 0;; ++halving) {
            const Vector trial = x + lambda * dx;
            bool ok = true;
            ShootingSystem::Result rt;
            try {
                rt = system(trial, true);
            } catch (const StepFailure&) {
                ok = false;
            }
            const double tn = ok ? rt.f.norm() : std::numeric_limits<double>::infinity();
            if ((ok && tn < norm) || halving >= nopts.max_halvings) {
                if (!ok) throw NonConvergence("shooting Newton: integration failed along the damped step", norm);
                x = trial;
                r = std::move(rt);
                norm = tn;
                break;
            }
            lambda *= 0.5;
        }
        ++out.iterations;
        out.history.push_back(norm);
    }
    out.coeffs = system.unpack(x);
    out.residual_norm = norm;
    out.evaluation = std::move(r.evaluation);
    return out;
}

/// Convenience overload building the system from its parts.
inline CorrectionResult newton_correct(const SecondOrderModel& model, const TorusCoefficients& start,
                                       const HarmonicScheme& scheme, const ShootingOptions& opts,
                                       const DeficitSetup& setup, const NewtonOptions& nopts = {}) {
    ShootingSystem system(model, scheme, opts, setup, start.omega);
    return newton_correct(system, start, nopts);
}

/**
 * Deficit configuration for a fixed-parameter solve or a branch.
 * Case 1: the parameter is ω_1; ω_2..ω_d are released, phase conditions for
 * e+1..d and frequency conditions for 2..e. Case 2: a model parameter with
 * ω_1..ω_e fixed by the forcing; ω_{e+1}..ω_d released with their phase
 * conditions. Case 3 (e = 0): all frequencies released with phase conditions.
 */
inline DeficitSetup deficit_setup(int deficit_case, const FrequencyVector& omega) {
    DeficitSetup s;
    const int d = omega.d(), e = omega.e();
    switch (deficit_case) {
    case 1:
        if (e < 1) throw ConfigError("case 1 requires at least one forcing frequency (e >= 1)");
        for (int i = 2; i <= d; ++i) s.released.push_back(i);
        for (int i = e + 1; i <= d; ++i) s.phase_indices.push_back(i);
        for (int i = 2; i <= e; ++i) s.frequency_conditions.push_back(i);
        s.target_rho = omega.rho();
        break;
    case 2:
        if (e < 1) throw ConfigError("case 2 requires at least one forcing frequency (e >= 1)");
        for (int i = e + 1; i <= d; ++i) {
            s.released.push_back(i);
            s.phase_indices.push_back(i);
        }
        break;
    case 3:
        if (e != 0) throw ConfigError("case 3 requires an autonomous system (e = 0)");
        for (int i = 1; i <= d; ++i) {
            s.released.push_back(i);
            s.phase_indices.push_back(i);
        }
        break;
    default:
        throw ConfigError("deficit case must be 1, 2 or 3");
    }
    return s;
}

} // namespace fse

#endif
