#ifndef FSE_CONTINUATION_HPP
#define FSE_CONTINUATION_HPP

/**
 * @file continuation.hpp
 * @brief Tangent predictor and orthogonal corrector for one-parameter branches.
 *
 * The generic layer works on any F(x, p) = 0 with F: R^{N+1} -> R^N. The
 * torus layer binds it to a ShootingSystem whose parameter is either ω_1 or
 * a named model parameter.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/model.hpp"
#include "fse/shooting.hpp"
#include "fse/stability.hpp"

namespace fse {

// ---------------------------------------------------------------------------
// Generic layer

struct AugmentedEvaluation {
    Vector f;
    Matrix fx;
    Vector fp;
};

struct AugmentedSystem {
    Eigen::Index size = 0;
    /// F(x, p) and, when requested, ∂F/∂x and ∂F/∂p.
    std::function<AugmentedEvaluation(const Vector& x, double p, bool jacobian)> evaluate;
    /// Called once a point is accepted, before the next tangent is computed.
    std::function<void(const Vector& x, double p)> on_accept;
    /// Convergence scale for ‖F‖ < ε·scale(x); defaults to 1.
    std::function<double(const Vector& x)> scale;
};

/**
 * Solves [F_x F_p; t_prevᵀ] [Δx; Δp] = [0; 1] and rescales so that |Δp| = 1.
 * When Δp vanishes (a fold exactly at the point) the tangent is returned with
 * unit Euclidean norm instead.
 */
inline Vector tangent_predict(const Matrix& fx, const Vector& fp, const Vector& previous_tangent,
                              double rank_tolerance = 1e-13) {
    const auto n = fx.rows();
    if (fx.cols() != n || fp.size() != n || previous_tangent.size() != n + 1)
        throw ConfigError("tangent_predict: inconsistent dimensions");
    Matrix a(n + 1, n + 1);
    a.topLeftCorner(n, n) = fx;
    a.topRightCorner(n, 1) = fp;
    a.bottomRows(1) = previous_tangent.transpose();
    Vector b = Vector::Zero(n + 1);
    b(n) = 1.0;
    Vector t = solve_bordered(a, b, rank_tolerance, "tangent_predict");
    const double dp = std::abs(t(n));
    const double len = t.norm();
    if (dp > 1e-12 * len) t /= dp;
    else t /= len;
    return t;
}

struct CorrectorResult {
    Vector x;
    double p = 0.0;
    bool converged = false;
    int iterations = 0;
    double residual_norm = 0.0;
    double max_orthogonality = 0.0;   // max |t̂ᵀδ| over the iterations, t̂ = t/‖t‖
    AugmentedEvaluation last;         // at the returned point, with Jacobians
    std::string failure;
};

/**
 * Newton iteration on [F_x F_p; tᵀ] δ = [-F; 0] from a predicted point. The
 * caller halves the step on failure, so this never throws for divergence.
 */
inline CorrectorResult orthogonal_correct(const AugmentedSystem& sys, Vector x, double p, const Vector& tangent,
                                          double epsilon, int max_iterations = 10, double rank_tolerance = 1e-13) {
    const auto n = sys.size;
    CorrectorResult out;
    const Vector t_hat = tangent / tangent.norm();
    double first = -1.0;
    for (;;) {
        try {
            out.last = sys.evaluate(x, p, true);
        } catch (const NumericalError& e) {
            out.failure = e.what();
            break;
        }
        const double norm = out.last.f.norm();
        out.residual_norm = norm;
        if (!std::isfinite(norm)) {
            out.failure = "non-finite residual";
            break;
        }
        if (first < 0.0) first = norm;
        const double scale = sys.scale ? sys.scale(x) : 1.0;
        if (norm < epsilon * scale) {
            out.converged = true;
            break;
        }
        if (out.iterations >= max_iterations) {
            out.failure = "corrector iteration limit";
            break;
        }
        if (out.iterations > 2 && norm > 1e3 * std::max(first, epsilon)) {
            out.failure = "corrector diverged";
            break;
        }
        Matrix a(n + 1, n + 1);
        a.topLeftCorner(n, n) = out.last.fx;
        a.topRightCorner(n, 1) = out.last.fp;
        a.bottomRows(1) = tangent.transpose();
        Vector rhs(n + 1);
        rhs.head(n) = -out.last.f;
        rhs(n) = 0.0;
        Vector delta;
        try {
            delta = solve_bordered(a, rhs, rank_tolerance, "orthogonal_correct");
        } catch (const RankDeficiency& e) {
            out.failure = e.what();
            break;
        }
        out.max_orthogonality = std::max(out.max_orthogonality, std::abs(t_hat.dot(delta)));
        x += delta.head(n);
        p += delta(n);
        ++out.iterations;
    }
    out.x = std::move(x);
    out.p = p;
    return out;
}

struct StepControl {
    double s0 = 0.01;
    double s_min = 1e-6;
    double s_max = 0.1;
    double max_arc = 0.0;        // cap on the Euclidean predictor length; 0 selects s_max
    double grow = 1.3;
    double shrink = 0.5;
    int fast_iterations = 3;
    int slow_iterations = 8;
    int max_retries = 5;
    int max_points = 100;
    int max_corrector_iterations = 10;
    double epsilon = 1e-8;
    double rank_tolerance = 1e-13;
};

struct GenericPoint {
    Vector x;
    double p = 0.0;
    Vector tangent;          // |Δp|-normalized tangent used to reach the point (empty for the seed)
    double residual_norm = 0.0;
    int iterations = 0;
    double max_orthogonality = 0.0;
    double step = 0.0;
    Vector residual;         // F at the point as returned by the corrector
};

struct GenericBranch {
    std::vector<GenericPoint> points;
    std::string termination;
    bool seed_failed = false;
};

/**
 * Predictor-corrector loop between p_min and p_max starting from (x0, p0) in
 * direction ±1. The seed is corrected at fixed p, and so is a step that
 * reaches the range end, so the last point lies on the bound. `accept` may
 * stop the loop by returning false.
 */
inline GenericBranch continue_branch(const AugmentedSystem& sys, const Vector& x0, double p0, double p_min,
                                     double p_max, int direction, const StepControl& ctl,
                                     const std::function<bool(const GenericPoint&, const AugmentedEvaluation&)>&
                                         accept = {}) {
    if (direction != 1 && direction != -1) throw ConfigError("continuation direction must be +1 or -1");
    if (!(ctl.s_min > 0.0) || ctl.s_max < ctl.s_min || ctl.s0 < ctl.s_min || ctl.s0 > ctl.s_max)
        throw ConfigError("step bounds must satisfy 0 < s_min <= s0 <= s_max");
    GenericBranch br;
    const auto n = sys.size;
    const double max_arc = ctl.max_arc > 0.0 ? ctl.max_arc : ctl.s_max;
    const double p_tol = 1e-12 * std::max(1.0, std::max(std::abs(p_min), std::abs(p_max)));

    Vector prev = Vector::Zero(n + 1);
    prev(n) = direction;
    auto seed = orthogonal_correct(sys, x0, p0, prev, ctl.epsilon, 2 * ctl.max_corrector_iterations,
                                   ctl.rank_tolerance);
    if (!seed.converged) {
        br.seed_failed = true;
        br.termination = "seed correction failed: " + seed.failure;
        return br;
    }
    auto accept_point = [&](GenericPoint pt, CorrectorResult& cr) {
        pt.residual = cr.last.f;
        if (sys.on_accept) {
            sys.on_accept(pt.x, pt.p);
            cr.last = sys.evaluate(pt.x, pt.p, true);
        }
        br.points.push_back(pt);
        return accept ? accept(br.points.back(), cr.last) : true;
    };
    if (!accept_point(GenericPoint{seed.x, seed.p, Vector(), seed.residual_norm, seed.iterations,
                                   seed.max_orthogonality, 0.0, Vector()},
                      seed)) {
        br.termination = "stopped by callback";
        return br;
    }
    AugmentedEvaluation at = seed.last;

    double s = ctl.s0;
    while (static_cast<int>(br.points.size()) < ctl.max_points) {
        const GenericPoint& cur = br.points.back();
        Vector t;
        try {
            t = tangent_predict(at.fx, at.fp, prev, ctl.rank_tolerance);
        } catch (const RankDeficiency& e) {
            br.termination = std::string("singular tangent system: ") + e.what();
            return br;
        }
        Vector chi(n + 1);
        Vector e_p = Vector::Zero(n + 1);   // bordering row that pins p on a landing step
        e_p(n) = 1.0;
        chi.head(n) = cur.x;
        chi(n) = cur.p;

        int retries = 0;
        bool done = false;
        for (;;) {
            double step = std::min(s, max_arc / t.norm());
            const double dp = step * t(n);
            bool lands_on_bound = false;
            if (dp > 0.0 && cur.p + dp > p_max - p_tol) {
                step = (p_max - cur.p) / t(n);
                lands_on_bound = true;
            } else if (dp < 0.0 && cur.p + dp < p_min + p_tol) {
                step = (p_min - cur.p) / t(n);
                lands_on_bound = true;
            }
            if (!(step > 0.0)) {
                br.termination = "parameter range exhausted";
                return br;
            }
            const Vector pred = chi + step * t;
            auto cr = orthogonal_correct(sys, pred.head(n), pred(n), lands_on_bound ? e_p : t, ctl.epsilon,
                                         ctl.max_corrector_iterations, ctl.rank_tolerance);
            if (cr.converged && !lands_on_bound && (cr.p > p_max || cr.p < p_min)) {
                // the correction crossed the range end: re-correct on the bound itself
                lands_on_bound = true;
                cr = orthogonal_correct(sys, cr.x, cr.p > p_max ? p_max : p_min, e_p, ctl.epsilon,
                                        ctl.max_corrector_iterations, ctl.rank_tolerance);
            }
            if (cr.converged) {
                if (cr.iterations <= ctl.fast_iterations) s = std::min(ctl.s_max, s * ctl.grow);
                else if (cr.iterations > ctl.slow_iterations) s = std::max(ctl.s_min, s * ctl.shrink);
                GenericPoint pt{cr.x, cr.p, t, cr.residual_norm, cr.iterations, cr.max_orthogonality, step, Vector()};
                const bool go_on = accept_point(pt, cr);
                at = cr.last;
                prev = t;
                if (!go_on) {
                    br.termination = "stopped by callback";
                    return br;
                }
                const double pn = br.points.back().p;
                if (lands_on_bound || pn >= p_max - p_tol || pn <= p_min + p_tol || pn > p_max || pn < p_min) {
                    br.termination = "parameter range end reached";
                    return br;
                }
                break;
            }
            s *= ctl.shrink;
            if (++retries > ctl.max_retries || s < ctl.s_min) {
                br.termination = "step failure after " + std::to_string(retries) + " retries" +
                                 (cr.failure.empty() ? std::string() : ": " + cr.failure);
                done = true;
                break;
            }
        }
        if (done) return br;
    }
    br.termination = "maximum number of points";
    return br;
}

// ---------------------------------------------------------------------------
// Torus layer

struct ContinuationConfig {
    std::string parameter = "omega1";   // "omega1" or a model parameter name
    double p_start = 0.0;               // seed parameter value
    double p_end = 1.0;                 // branch runs towards this value
    int deficit_case = 1;
    StepControl step;
    double parameter_fd_step = 1e-6;    // relative central-difference step for model parameters
    bool stability = false;
    int n_ly = 500;
    Eigen::Index amplitude_dof = 0;
    int amplitude_subsamples = 64;      // φ_1 nodes per revolution for the amplitude metric
};

struct SolutionPoint {
    TorusCoefficients coeffs;
    double p = 0.0;
    Vector tangent;
    double residual_norm = 0.0;         // ‖[R; constraints]‖
    double shooting_residual = 0.0;     // ‖R‖
    double max_constraint = 0.0;        // max |constraint value|
    int iterations = 0;
    double max_orthogonality = 0.0;
    double amplitude = 0.0;
    std::optional<StabilityReport> stability;
};

struct Branch {
    std::vector<SolutionPoint> points;
    std::string termination;
    bool seed_failed = false;
};

/// Builds the model for a given parameter value; unused when the parameter is ω_1.
using ModelFactory = std::function<SecondOrderModel(double)>;

inline void validate_continuation(const ContinuationConfig& cfg, const FrequencyVector& omega) {
    const bool freq = cfg.parameter == "omega1";
    if (cfg.deficit_case == 1 && !freq)
        throw ConfigError("case 1 continues in omega1; set parameter to \"omega1\" or pick case 2/3");
    if (cfg.deficit_case != 1 && freq)
        throw ConfigError("cases 2 and 3 continue in a model parameter, not omega1");
    if (cfg.deficit_case == 3 && omega.e() != 0) throw ConfigError("case 3 requires e = 0");
    if (cfg.deficit_case != 3 && omega.e() < 1) throw ConfigError("cases 1 and 2 require e >= 1");
    if (cfg.amplitude_subsamples < 1) throw ConfigError("amplitude_subsamples must be positive");
}

/// max over the sample grid and `subsamples` φ_1 nodes of |q_dof|.
inline double amplitude_metric(const SecondOrderModel& model, const TorusCoefficients& c, const HarmonicScheme& scheme,
                               const NewmarkOptions& base, Eigen::Index dof, int subsamples, int workers = 1) {
    if (dof < 0 || dof >= model.n) throw ConfigError("amplitude DOF out of range");
    NewmarkOptions o = base;
    o.sensitivities = false;
    o.record_every = std::max(1, o.steps / std::max(1, subsamples));
    const auto batch = integrate_batch(model, coefficients_to_samples(c.z0, scheme), c.omega.omega(), scheme, o, workers);
    double amp = 0.0;
    for (const auto& rec : batch.records) amp = std::max(amp, rec.q.row(dof).cwiseAbs().maxCoeff());
    return amp;
}

/**
 * Runs a branch of tori. The seed is corrected at p_start, then continued
 * towards p_end. Stops on range exit, max points or repeated step failure.
 */
inline Branch run_branch(const SecondOrderModel& model, const ModelFactory& factory, const TorusCoefficients& seed,
                         const HarmonicScheme& scheme, const ShootingOptions& sopts, const ContinuationConfig& cfg) {
    validate_continuation(cfg, seed.omega);
    Branch out;
    if (cfg.p_end == cfg.p_start) {
        out.termination = "empty parameter range";
        return out;
    }
    const bool freq = cfg.parameter == "omega1";
    if (!freq && !factory) throw ConfigError("continuing in a model parameter needs a model factory");

    TorusCoefficients start = seed;
    SecondOrderModel m0 = freq ? model : factory(cfg.p_start);
    if (freq) start.omega.set(1, cfg.p_start);
    // In case 1 the forcing frequencies follow ω_1 at their seed ratios.
    DeficitSetup setup = deficit_setup(cfg.deficit_case, start.omega);
    if (freq) {
        for (int i = 2; i <= start.omega.e(); ++i) start.omega.set(i, setup.target_rho(i - 2) * cfg.p_start);
    }
    ShootingSystem sys(m0, scheme, sopts, setup, start.omega);

    std::optional<ShootingSystem::Result> last;
    auto bind = [&](double p) {
        if (freq) sys.set_frequency(1, p);
        else sys.set_model(factory(p));
    };

    AugmentedSystem aug;
    aug.size = sys.unknowns();
    aug.scale = [&](const Vector& x) { return sys.scale(x); };
    aug.evaluate = [&](const Vector& x, double p, bool jac) {
        bind(p);
        auto r = sys(x, jac);
        AugmentedEvaluation ev;
        ev.f = r.f;
        if (jac) {
            ev.fx = r.fx;
            if (freq) {
                ev.fp = sys.omega_column(r, 1);
            } else {
                const double h = cfg.parameter_fd_step * std::max(1.0, std::abs(p));
                bind(p + h);
                const Vector fplus = sys(x, false).f;
                bind(p - h);
                const Vector fminus = sys(x, false).f;
                bind(p);
                ev.fp = (fplus - fminus) / (2.0 * h);
            }
            last = std::move(r);
        }
        return ev;
    };
    aug.on_accept = [&](const Vector& x, double p) {
        bind(p);
        sys.set_reference(x);
    };

    bind(cfg.p_start);
    Vector x0;
    try {
        NewtonOptions nopts;
        nopts.epsilon = cfg.step.epsilon;
        nopts.rank_tolerance = cfg.step.rank_tolerance;
        x0 = sys.pack(newton_correct(sys, start, nopts).coeffs);
    } catch (const NumericalError& e) {
        out.seed_failed = true;
        out.termination = std::string("seed correction failed: ") + e.what();
        return out;
    }
    sys.set_reference(x0);

    auto accept = [&](const GenericPoint& gp, const AugmentedEvaluation& ev) {
        SolutionPoint sp;
        bind(gp.p);
        sp.coeffs = sys.unpack(gp.x);
        sp.p = gp.p;
        sp.tangent = gp.tangent;
        (void)ev;
        const Vector& f = gp.residual;
        sp.residual_norm = f.norm();
        const auto nz = sys.coefficient_size();
        sp.shooting_residual = f.head(nz).norm();
        sp.max_constraint = f.size() > nz ? f.tail(f.size() - nz).cwiseAbs().maxCoeff() : 0.0;
        sp.iterations = gp.iterations;
        sp.max_orthogonality = gp.max_orthogonality;
        sp.amplitude = amplitude_metric(sys.model(), sp.coeffs, scheme, sopts.newmark, cfg.amplitude_dof,
                                        cfg.amplitude_subsamples, sopts.workers);
        if (cfg.stability && last) sp.stability = analyze_stability(last->evaluation, sp.coeffs, scheme, cfg.n_ly);
        out.points.push_back(std::move(sp));
        return true;
    };

    const double p_min = std::min(cfg.p_start, cfg.p_end), p_max = std::max(cfg.p_start, cfg.p_end);
    const int direction = cfg.p_end > cfg.p_start ? 1 : -1;
    auto gb = continue_branch(aug, x0, cfg.p_start, p_min, p_max, direction, cfg.step, accept);
    out.termination = gb.termination;
    out.seed_failed = gb.seed_failed;
    return out;
}

// ---------------------------------------------------------------------------
// Seeding helpers

/**
 * Lifts a periodic solution (d = 1) to a 2-torus seed near a Neimark-Sacker
 * point: the constant slot holds the periodic section, the first harmonic of
 * φ_2 holds `relative_amplitude`·‖z‖·Re(v e^{iφ_2}) with v the monodromy
 * eigenvector of the complex multiplier closest to the unit circle, and
 * ω_2 = θ·ω_1/2π with θ = arg μ.
 */
inline TorusCoefficients neimark_sacker_seed(const TorusCoefficients& periodic, const Matrix& monodromy,
                                             const HarmonicScheme& scheme2, double relative_amplitude = 1e-3) {
    if (periodic.omega.d() != 1) throw ConfigError("neimark_sacker_seed: expected a periodic (d = 1) solution");
    if (scheme2.d != 2) throw ConfigError("neimark_sacker_seed: target scheme must have d = 2");
    int sign = 1;
    Eigen::VectorXi k1(1);
    k1 << 1;
    const Eigen::Index slot = scheme2.find_harmonic(k1, sign);
    if (slot < 0) throw ConfigError("neimark_sacker_seed: scheme lacks the first harmonic of phi_2");

    Eigen::EigenSolver<Matrix> es(monodromy, true);
    if (es.info() != Eigen::Success) throw NumericalError("neimark_sacker_seed: eigen decomposition failed");
    Eigen::Index best = -1;
    double best_gap = std::numeric_limits<double>::infinity();
    for (Eigen::Index i = 0; i < monodromy.rows(); ++i) {
        const std::complex<double> mu = es.eigenvalues()(i);
        if (mu.imag() <= 1e-12) continue;
        const double gap = std::abs(std::abs(mu) - 1.0);
        if (gap < best_gap) {
            best_gap = gap;
            best = i;
        }
    }
    if (best < 0) throw NumericalError("neimark_sacker_seed: no complex multiplier pair");
    const std::complex<double> mu = es.eigenvalues()(best);
    const Eigen::VectorXcd v = es.eigenvectors().col(best);

    const auto states = periodic.z0.size();
    const double amp = relative_amplitude * std::max(periodic.z0.norm(), 1e-12) / v.norm();
    Vector z = Vector::Zero(states * scheme2.u_tilde);
    for (Eigen::Index i = 0; i < states; ++i) {
        z(i * scheme2.u_tilde) = periodic.z0(i);
        z(i * scheme2.u_tilde + slot) = amp * v(i).real();
        z(i * scheme2.u_tilde + slot + 1) = -sign * amp * v(i).imag();
    }
    Vector omega(2);
    omega << periodic.omega[1], std::arg(mu) * periodic.omega[1] / kTwoPi;
    return TorusCoefficients{z, FrequencyVector(omega, periodic.omega.e())};
}

} // namespace fse

#endif
