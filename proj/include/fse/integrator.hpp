#ifndef FSE_INTEGRATOR_HPP
#define FSE_INTEGRATOR_HPP

/**
 * @file integrator.hpp
 * @brief Average-acceleration Newmark integration of the trajectory bundle over φ_1 ∈ [0, 2π].
 *
 * Each trajectory obeys
 *
 *     ω_1² M q'' + ω_1 D q' + K q + Θ (f_nl(q, ω_1 q') - e(φ_1, φ̂_s + ρ̂ φ_1)) = 0
 *
 * where primes are derivatives in φ_1. The state carried around is (q, u) with
 * u = q' = q̇/ω_1. Sensitivities of the terminal state with respect to the
 * initial state and to the forcing frequencies are propagated alongside the
 * solution by differentiating each converged implicit step.
 */

#include <cmath>
#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/model.hpp"
#include "fse/parallel.hpp"

namespace fse {

struct NewmarkOptions {
    int steps = 512;              // S1, steps over one revolution of φ_1
    double tolerance = 1e-10;     // relative to the step's load norm
    int max_iterations = 25;
    bool sensitivities = true;
    int record_every = 0;         // store (q, u, a) every n-th step when > 0
};

/// States sampled along one trajectory (columns are nodes at `phi`).
struct TrajectoryRecord {
    std::vector<double> phi;
    Matrix q;
    Matrix u;
    Matrix a;
};

struct TrajectoryResult {
    Vector z_end;         // [q; u] at φ_1 = 2π
    Matrix psi;           // ∂z_end/∂z_0, 2n x 2n
    Matrix dz_domega;     // columns ∂z_end/∂ω_1, ∂z_end/∂ω_2, ..., ∂z_end/∂ω_e (others held fixed)
    int newton_iterations = 0;
    int max_step_iterations = 0;
    double worst_residual = 0.0;
    TrajectoryRecord record;
};

namespace detail {

/// Forcing vector e(φ_1) of one trajectory and its derivatives in the forcing frequencies.
class TrajectoryForcing {
public:
    TrajectoryForcing(const SecondOrderModel& model, const Vector& omega, const Vector& phi_tilde)
        : model_(&model), omega_(omega), phi_tilde_(phi_tilde) {
        for (const auto& term : model.forcing_terms) {
            if (term.index > omega.size())
                throw ConfigError("forcing uses frequency index " + std::to_string(term.index) +
                                  " but the torus has only d = " + std::to_string(omega.size()));
            if (term.index > 1 && term.index - 2 >= phi_tilde.size())
                throw ConfigError("forcing frequency index exceeds sample dimension");
        }
    }

    int parameter_count() const { return std::max(1, model_->max_forcing_index()); }

    /// e(φ_1); when `d_omega` is non-null it receives n x parameter_count() derivatives.
    Vector operator()(double phi1, Matrix* d_omega) const {
        const auto n = model_->n;
        Vector e = Vector::Zero(n);
        if (d_omega) d_omega->setZero(n, parameter_count());
        const double w1 = omega_(0);
        for (const auto& term : model_->forcing_terms) {
            double phase = phi1;
            double dphase_dw1 = 0.0;
            double dphase_dwj = 0.0;
            if (term.index > 1) {
                const double wj = omega_(term.index - 1);
                phase = phi_tilde_(term.index - 2) + wj / w1 * phi1;
                dphase_dw1 = -wj * phi1 / (w1 * w1);
                dphase_dwj = phi1 / w1;
            }
            e += term.amplitude * std::cos(phase);
            if (d_omega) {
                const double s = std::sin(phase);
                d_omega->col(0) -= term.amplitude * (s * dphase_dw1);
                if (term.index > 1) d_omega->col(term.index - 1) -= term.amplitude * (s * dphase_dwj);
            }
        }
        return e;
    }

private:
    const SecondOrderModel* model_;
    Vector omega_;
    Vector phi_tilde_;
};

} // namespace detail

/**
 * Integrates one trajectory from φ_1 = 0 to 2π in S1 equal steps.
 *
 * `z0 = [q_0; u_0]`, `omega` holds all d base frequencies, `phi_tilde` the
 * trajectory's position on the (d-1)-torus. Throws StepFailure when the inner
 * Newton iteration stalls and SolverFailure on a singular effective matrix.
 */
inline TrajectoryResult newmark_integrate(const SecondOrderModel& model, const Vector& z0, const Vector& omega,
                                          const Vector& phi_tilde, const NewmarkOptions& opts,
                                          std::size_t sample_index = 0) {
    const auto n = model.n;
    if (z0.size() != 2 * n) throw ConfigError("newmark_integrate: initial state has wrong length");
    if (opts.steps < 2) throw ConfigError("newmark_integrate: need at least 2 steps");
    if (!(omega(0) > 0.0)) throw ConfigError("newmark_integrate: omega_1 must be positive");

    const detail::TrajectoryForcing forcing(model, omega, phi_tilde);
    const int params = forcing.parameter_count();
    const Eigen::Index cols = 2 * n + params;
    const bool sens = opts.sensitivities;

    const double w = omega(0);
    const double h = kTwoPi / opts.steps;
    const double ca = 4.0 / (h * h);
    const double cu = 2.0 / h;
    const double cau = 4.0 / h;

    const Matrix& M = model.mass;
    const Matrix& D = model.damping;
    const Matrix& K = model.stiffness;
    const Matrix& Theta = model.force_distribution;
    const Matrix S = (w * w * ca) * M + (w * cu) * D + K;

    Vector q = z0.head(n), u = z0.tail(n), a(n);
    NonlinearForce nl;
    nl.resize(n);
    Matrix de_dw;

    // Initial acceleration from the equation of motion at φ_1 = 0.
    Eigen::LLT<Matrix> mass_llt(M);
    if (mass_llt.info() != Eigen::Success) throw SolverFailure("newmark_integrate: mass matrix not positive definite");
    model.eval_nonlinear(q, w * u, nl);
    {
        const Vector e0 = forcing(0.0, sens ? &de_dw : nullptr);
        a = mass_llt.solve(Theta * (e0 - nl.f) - w * (D * u) - K * q) / (w * w);
    }

    Matrix dq, du, da;
    if (sens) {
        dq.setZero(n, cols);
        du.setZero(n, cols);
        dq.leftCols(n).setIdentity();
        du.middleCols(n, n).setIdentity();
        const Matrix Fv_w = w * nl.df_dqdot;
        Matrix rhs = -(K * dq + (w * D) * du + Theta * (nl.df_dq * dq + Fv_w * du));
        rhs.col(2 * n) -= 2.0 * w * (M * a) + D * u + Theta * (nl.df_dqdot * u) - Theta * de_dw.col(0);
        for (int j = 1; j < params; ++j) rhs.col(2 * n + j) += Theta * de_dw.col(j);
        da = mass_llt.solve(rhs) / (w * w);
    }

    TrajectoryResult result;
    auto record = [&](int step) {
        if (opts.record_every <= 0) return;
        if (step % opts.record_every != 0 && step != opts.steps) return;
        auto& rec = result.record;
        const auto idx = static_cast<Eigen::Index>(rec.phi.size());
        rec.phi.push_back(step * h);
        rec.q.conservativeResize(n, idx + 1);
        rec.u.conservativeResize(n, idx + 1);
        rec.a.conservativeResize(n, idx + 1);
        rec.q.col(idx) = q;
        rec.u.col(idx) = u;
        rec.a.col(idx) = a;
    };
    if (opts.record_every > 0) {
        const auto nodes = static_cast<Eigen::Index>(opts.steps / opts.record_every + 2);
        result.record.phi.reserve(static_cast<std::size_t>(nodes));
    }
    record(0);

    const bool linear = !model.has_nonlinearity();
    Eigen::PartialPivLU<Matrix> lu;
    if (linear) {
        lu.compute(S);
        if (!(lu.rcond() > 1e-15)) throw SolverFailure("newmark_integrate: effective matrix is singular");
    }

    Vector q_new(n), u_new(n), a_new(n), r(n), b(n);
    Matrix J(n, n), rhs, dq_new;
    const bool has_fv = model.has_nonlinearity();

    for (int k = 0; k < opts.steps; ++k) {
        const double phi_next = (k + 1) * h;
        const Vector e_next = forcing(phi_next, sens ? &de_dw : nullptr);
        b = Theta * e_next + (w * w) * (M * (ca * q + cau * u + a)) + w * (D * (cu * q + u));
        const double b_norm = b.norm();

        q_new = q + h * u + 0.5 * h * h * a;
        int it = 0;
        double res = 0.0;
        for (;; ++it) {
            u_new = cu * (q_new - q) - u;
            model.eval_nonlinear(q_new, w * u_new, nl);
            r.noalias() = S * q_new;
            const double scale = std::max(b_norm, r.norm());
            r += Theta * nl.f - b;
            res = r.norm();
            const bool converged = res <= opts.tolerance * scale;
            if (converged || it >= opts.max_iterations) {
                if (!converged) throw StepFailure(sample_index, static_cast<std::size_t>(k + 1), res / std::max(scale, 1e-300));
                result.worst_residual = std::max(result.worst_residual, scale > 0 ? res / scale : 0.0);
                break;
            }
            if (!linear) {
                J = S + Theta * (nl.df_dq + (w * cu) * nl.df_dqdot);
                lu.compute(J);
                if (!(lu.rcond() > 1e-15))
                    throw SolverFailure("newmark_integrate: effective matrix is singular at step " +
                                        std::to_string(k + 1));
            }
            q_new -= lu.solve(r);
        }
        result.newton_iterations += it;
        result.max_step_iterations = std::max(result.max_step_iterations, it);

        // Jacobian at the converged point; one more correction with it brings the
        // residual to round-off so that the step map is smooth in its inputs.
        if (!linear) {
            J = S + Theta * (nl.df_dq + (w * cu) * nl.df_dqdot);
            lu.compute(J);
            if (!(lu.rcond() > 1e-15)) throw SolverFailure("newmark_integrate: effective matrix is singular");
        }
        if (res > 0.0) q_new -= lu.solve(r);

        u_new = cu * (q_new - q) - u;
        a_new = ca * (q_new - q) - cau * u - a;

        if (sens) {
            const Matrix A = ca * dq + cau * du + da;
            const Matrix B = cu * dq + du;
            rhs.noalias() = (w * w) * (M * A);
            rhs.noalias() += w * (D * B);
            if (has_fv && !nl.df_dqdot.isZero(0.0)) rhs.noalias() += w * (Theta * (nl.df_dqdot * B));
            rhs.col(2 * n) -= 2.0 * w * (M * a_new) + D * u_new + Theta * (nl.df_dqdot * u_new) - Theta * de_dw.col(0);
            for (int j = 1; j < params; ++j) rhs.col(2 * n + j) += Theta * de_dw.col(j);
            dq_new = lu.solve(rhs);
            const Matrix step_dq = dq_new - dq;
            da = ca * step_dq - cau * du - da;
            du = cu * step_dq - du;
            dq = std::move(dq_new);
        }

        q = q_new;
        u = u_new;
        a = a_new;
        record(k + 1);
    }

    result.z_end.resize(2 * n);
    result.z_end << q, u;
    if (sens) {
        result.psi.resize(2 * n, 2 * n);
        result.psi << dq.leftCols(2 * n), du.leftCols(2 * n);
        result.dz_domega.resize(2 * n, params);
        result.dz_domega << dq.rightCols(params), du.rightCols(params);
    }
    return result;
}

/// Terminal data of all S̃ trajectories, in state-major layout (index i·S̃ + s).
struct TrajectoryBatchResult {
    Vector terminal_states;
    std::vector<Matrix> sensitivity_blocks;   // Ψ̄_s in (q, u) coordinates
    Vector omega1_sensitivities;              // ∂z̄/∂ω_1
    Matrix forcing_frequency_sensitivities;   // column j-2 holds ∂z̄/∂ω_j, j = 2..e
    std::vector<int> newton_iterations;       // per sample
    double worst_residual = 0.0;
    std::vector<TrajectoryRecord> records;    // filled when recording was requested
};

/**
 * Integrates every sample trajectory independently on up to `workers`
 * threads. Each sample writes only its own slots, so results do not depend
 * on the worker count.
 */
inline TrajectoryBatchResult integrate_batch(const SecondOrderModel& model, const Vector& sampled_section,
                                             const Vector& omega, const HarmonicScheme& scheme,
                                             const NewmarkOptions& opts, int workers = 1) {
    const auto n = model.n;
    const auto samples = scheme.s_tilde;
    if (sampled_section.size() != 2 * n * samples) throw ConfigError("integrate_batch: sampled section has wrong length");
    if (omega.size() != scheme.d) throw ConfigError("integrate_batch: frequency vector length must equal d");

    std::vector<TrajectoryResult> per_sample(static_cast<std::size_t>(samples));
    parallel_for(workers, static_cast<std::size_t>(samples), [&](std::size_t s) {
        const auto si = static_cast<Eigen::Index>(s);
        Vector z0(2 * n);
        for (Eigen::Index i = 0; i < 2 * n; ++i) z0(i) = sampled_section(i * samples + si);
        per_sample[s] = newmark_integrate(model, z0, omega, scheme.sample(si), opts, s);
    });

    TrajectoryBatchResult out;
    out.terminal_states.resize(2 * n * samples);
    out.newton_iterations.resize(static_cast<std::size_t>(samples));
    const int params = std::max(1, model.max_forcing_index());
    if (opts.sensitivities) {
        out.omega1_sensitivities.resize(2 * n * samples);
        out.forcing_frequency_sensitivities.setZero(2 * n * samples, params - 1);
        out.sensitivity_blocks.resize(static_cast<std::size_t>(samples));
    }
    for (Eigen::Index s = 0; s < samples; ++s) {
        auto& res = per_sample[static_cast<std::size_t>(s)];
        for (Eigen::Index i = 0; i < 2 * n; ++i) {
            out.terminal_states(i * samples + s) = res.z_end(i);
            if (opts.sensitivities) {
                out.omega1_sensitivities(i * samples + s) = res.dz_domega(i, 0);
                for (int j = 1; j < params; ++j)
                    out.forcing_frequency_sensitivities(i * samples + s, j - 1) = res.dz_domega(i, j);
            }
        }
        if (opts.sensitivities) out.sensitivity_blocks[static_cast<std::size_t>(s)] = std::move(res.psi);
        out.newton_iterations[static_cast<std::size_t>(s)] = res.newton_iterations;
        out.worst_residual = std::max(out.worst_residual, res.worst_residual);
        if (opts.record_every > 0) out.records.push_back(std::move(res.record));
    }
    return out;
}

} // namespace fse

#endif
