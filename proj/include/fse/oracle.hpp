#ifndef FSE_ORACLE_HPP
#define FSE_ORACLE_HPP

/**
 * @file oracle.hpp
 * @brief Independent checks: adaptive Runge-Kutta in physical time, torus
 * versus time-series comparison, spectra, closed-form linear responses and
 * classical periodic shooting.
 *
 * Nothing here calls the shooting residual; the torus comparison integrates
 * trajectories of the reconstructed section only to place the torus at
 * arbitrary φ_1.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/numeric/odeint.hpp>
#include <unsupported/Eigen/FFT>

#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/integrator.hpp"
#include "fse/model.hpp"
#include "fse/shooting.hpp"

namespace fse {

struct TimeSeries {
    std::vector<double> times;
    Matrix states;      // 2n x N, column k at times[k], state [q; q̇]
    double rtol = 0.0;
    double atol = 0.0;
};

/**
 * Dormand-Prince 5(4) with dense output, sampled at t0 + k·dt up to t1.
 * Throws NumericalError when the step controller stalls.
 */
inline TimeSeries time_integrate(const SecondOrderModel& model, const Vector& omega, const Vector& x0, double t0,
                                 double t1, double dt, double rtol = 1e-10, double atol = 1e-12,
                                 int max_steps_between_samples = 100000) {
    namespace ode = boost::numeric::odeint;
    if (!(rtol > 0.0) || !(atol > 0.0)) throw ConfigError("time_integrate: tolerances must be positive");
    if (!(dt > 0.0) || !(t1 > t0)) throw ConfigError("time_integrate: need t1 > t0 and dt > 0");
    if (x0.size() != 2 * model.n) throw ConfigError("time_integrate: initial state has wrong length");

    using State = std::vector<double>;
    const FirstOrderRhs rhs(model, omega);
    const auto dim = x0.size();
    auto system = [&](const State& x, State& dxdt, double t) {
        const Vector f = rhs(Eigen::Map<const Vector>(x.data(), dim), t);
        dxdt.assign(f.data(), f.data() + dim);
    };

    const auto count = static_cast<std::size_t>(std::floor((t1 - t0) / dt + 1e-9)) + 1;
    std::vector<double> times(count);
    for (std::size_t k = 0; k < count; ++k) times[k] = t0 + static_cast<double>(k) * dt;

    TimeSeries ts;
    ts.rtol = rtol;
    ts.atol = atol;
    ts.states.resize(dim, static_cast<Eigen::Index>(count));
    State x(x0.data(), x0.data() + dim);
    auto stepper = ode::make_dense_output(atol, rtol, ode::runge_kutta_dopri5<State>());
    std::size_t k = 0;
    auto observer = [&](const State& s, double t) {
        ts.times.push_back(t);
        ts.states.col(static_cast<Eigen::Index>(k++)) = Eigen::Map<const Vector>(s.data(), dim);
    };
    try {
        ode::integrate_times(stepper, system, x, times.begin(), times.end(), dt / 4.0, observer,
                             ode::max_step_checker(max_steps_between_samples));
    } catch (const ode::step_adjustment_error& e) {
        throw NumericalError(std::string("time integration step size underflow (stiff problem?); integrate a "
                                         "shorter span or relax the tolerances: ") +
                             e.what());
    } catch (const ode::no_progress_error& e) {
        throw NumericalError(std::string("time integration made no progress (stiff problem?); integrate a "
                                         "shorter span or relax the tolerances: ") +
                             e.what());
    }
    if (!ts.states.allFinite()) throw NumericalError("time integration produced non-finite states");
    return ts;
}

// ---------------------------------------------------------------------------
// Torus evaluated in physical time

namespace detail {

/// Cubic Hermite interpolation on [0, h] with values y and slopes dy (per unit φ).
inline Vector hermite(const Vector& y0, const Vector& dy0, const Vector& y1, const Vector& dy1, double h, double s) {
    const double x = s / h;
    const double h00 = (1 + 2 * x) * (1 - x) * (1 - x), h10 = x * (1 - x) * (1 - x);
    const double h01 = x * x * (3 - 2 * x), h11 = x * x * (x - 1);
    return h00 * y0 + h10 * h * dy0 + h01 * y1 + h11 * h * dy1;
}

/// Torus state (q, q̇) at φ_1 ∈ [0, 2π] from a recorded trajectory.
inline Vector trajectory_state(const TrajectoryRecord& rec, double phi1, double omega1) {
    const auto n = rec.q.rows();
    const auto nodes = static_cast<Eigen::Index>(rec.phi.size());
    const double h = rec.phi[1] - rec.phi[0];
    auto k = static_cast<Eigen::Index>(std::floor(phi1 / h));
    k = std::clamp<Eigen::Index>(k, 0, nodes - 2);
    const double s = phi1 - rec.phi[static_cast<std::size_t>(k)];
    Vector out(2 * n);
    out.head(n) = hermite(rec.q.col(k), rec.u.col(k), rec.q.col(k + 1), rec.u.col(k + 1), h, s);
    out.tail(n) = omega1 * hermite(rec.u.col(k), rec.a.col(k), rec.u.col(k + 1), rec.a.col(k + 1), h, s);
    return out;
}

inline double wrap_angle(double x) {
    const double r = std::fmod(x, kTwoPi);
    return r < 0.0 ? r + kTwoPi : r;
}

} // namespace detail

/// Hyper-time image (φ_1, φ̃) of physical time t.
inline std::pair<double, Vector> hyper_time(const FrequencyVector& omega, double t) {
    const double phi1 = detail::wrap_angle(omega[1] * t);
    Vector phi(omega.d() - 1);
    const Vector rho = omega.rho();
    for (int j = 2; j <= omega.d(); ++j) phi(j - 2) = detail::wrap_angle(omega[j] * t - rho(j - 2) * phi1);
    return {phi1, phi};
}

struct TorusComparison {
    double max_error = 0.0;     // max over compared samples of ‖Δx‖_∞
    std::size_t compared = 0;
};

/**
 * Max pointwise state error between the torus and a series, skipping samples
 * with t < transient_skip. Trajectories from the reconstructed section are
 * integrated at `opts.steps` per revolution and interpolated in φ_1.
 */
inline TorusComparison compare_torus_to_timeseries(const SecondOrderModel& model, const TorusCoefficients& coeffs,
                                                   const HarmonicScheme& scheme, const TimeSeries& series,
                                                   double transient_skip, const NewmarkOptions& opts = {}) {
    NewmarkOptions o = opts;
    o.sensitivities = false;
    o.record_every = 1;
    const double w1 = coeffs.omega[1];
    const double period = kTwoPi / w1;
    TorusComparison cmp;
    long cached_rev = std::numeric_limits<long>::min();
    TrajectoryRecord rec;
    for (std::size_t k = 0; k < series.times.size(); ++k) {
        const double t = series.times[k];
        if (t < transient_skip) continue;
        const long rev = static_cast<long>(std::floor(t / period));
        if (rev != cached_rev) {
            // all times within one revolution share the section point φ̃ = 2π·rev·ρ
            const Vector rho = coeffs.omega.rho();
            Vector phi(rho.size());
            for (Eigen::Index j = 0; j < rho.size(); ++j)
                phi(j) = detail::wrap_angle(kTwoPi * (static_cast<double>(rev) * rho(j)));
            const Vector z0 = reconstruct(coeffs.z0, scheme, phi);
            rec = newmark_integrate(model, z0, coeffs.omega.omega(), phi, o).record;
            cached_rev = rev;
        }
        const double phi1 = std::clamp(w1 * t - rev * kTwoPi, 0.0, kTwoPi);
        const Vector x = detail::trajectory_state(rec, phi1, w1);
        cmp.max_error = std::max(cmp.max_error, (x - series.states.col(static_cast<Eigen::Index>(k))).cwiseAbs().maxCoeff());
        ++cmp.compared;
    }
    return cmp;
}

// ---------------------------------------------------------------------------
// Spectra

struct Spectrum {
    Vector frequencies;   // rad/s
    Vector amplitudes;    // single-sided cosine amplitudes
};

struct Peak {
    double frequency = 0.0;
    double amplitude = 0.0;
};

/**
 * Hann-windowed single-sided amplitude spectrum of one state component of a
 * uniformly sampled series, zero-padded by `pad_factor`.
 */
inline Spectrum spectrum(const TimeSeries& series, Eigen::Index component, int pad_factor = 8,
                         double t_begin = -std::numeric_limits<double>::infinity()) {
    std::vector<double> signal;
    double dt = 0.0;
    for (std::size_t k = 0; k < series.times.size(); ++k) {
        if (series.times[k] < t_begin) continue;
        signal.push_back(series.states(component, static_cast<Eigen::Index>(k)));
        if (k > 0 && dt == 0.0) dt = series.times[k] - series.times[k - 1];
    }
    Spectrum sp;
    const std::size_t n = signal.size();
    if (n < 4) return sp;
    if (dt == 0.0) dt = series.times[1] - series.times[0];
    double wsum = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        const double w = 0.5 - 0.5 * std::cos(kTwoPi * static_cast<double>(k) / static_cast<double>(n - 1));
        signal[k] *= w;
        wsum += w;
    }
    std::size_t nfft = 1;
    while (nfft < n * static_cast<std::size_t>(std::max(1, pad_factor))) nfft *= 2;
    signal.resize(nfft, 0.0);
    Eigen::FFT<double> fft;
    std::vector<std::complex<double>> out;
    fft.fwd(out, signal);
    const std::size_t half = nfft / 2 + 1;
    sp.frequencies.resize(static_cast<Eigen::Index>(half));
    sp.amplitudes.resize(static_cast<Eigen::Index>(half));
    for (std::size_t k = 0; k < half; ++k) {
        sp.frequencies(static_cast<Eigen::Index>(k)) = kTwoPi * static_cast<double>(k) / (static_cast<double>(nfft) * dt);
        const double scale = (k == 0 ? 1.0 : 2.0) / wsum;
        sp.amplitudes(static_cast<Eigen::Index>(k)) = scale * std::abs(out[k]);
    }
    return sp;
}

/// Local maxima above `floor`·max, refined by a parabola through the three top bins.
inline std::vector<Peak> find_peaks(const Spectrum& sp, double floor = 1e-3) {
    std::vector<Peak> peaks;
    if (sp.amplitudes.size() < 3) return peaks;
    const double top = sp.amplitudes.maxCoeff();
    if (!(top > 1e-300)) return peaks;
    const double df = sp.frequencies(1) - sp.frequencies(0);
    for (Eigen::Index k = 1; k + 1 < sp.amplitudes.size(); ++k) {
        const double a = sp.amplitudes(k - 1), b = sp.amplitudes(k), c = sp.amplitudes(k + 1);
        if (!(b > a && b >= c && b >= floor * top)) continue;
        const double denom = a - 2 * b + c;
        const double off = denom != 0.0 ? 0.5 * (a - c) / denom : 0.0;
        peaks.push_back({sp.frequencies(k) + off * df, b - 0.25 * (a - c) * off});
    }
    return peaks;
}

/**
 * Amplitudes 2|c_k| of the torus component at frequencies |k·ω| for the given
 * integer vectors k, from trajectories recorded on a fine φ̃ grid. The
 * parallelogram {φ_1, φ̃} ∈ [0, 2π]^d is a fundamental domain, so averaging
 * q·e^{-i k·(φ_1, φ̃ + ρφ_1)} over it yields the Fourier coefficient.
 * Only d = 2 is supported.
 */
inline std::vector<double> torus_harmonic_amplitudes(const SecondOrderModel& model, const TorusCoefficients& coeffs,
                                                     const HarmonicScheme& scheme, Eigen::Index dof,
                                                     const std::vector<std::pair<int, int>>& harmonics,
                                                     const NewmarkOptions& opts, int phi_samples = 64) {
    if (scheme.d != 2) throw ConfigError("torus_harmonic_amplitudes supports d = 2 only");
    NewmarkOptions o = opts;
    o.sensitivities = false;
    o.record_every = 1;
    const double rho = coeffs.omega.rho()(0);
    std::vector<std::complex<double>> acc(harmonics.size());
    double weight_total = 0.0;
    for (int s = 0; s < phi_samples; ++s) {
        Vector phi(1);
        phi(0) = kTwoPi * s / phi_samples;
        const auto rec = newmark_integrate(model, reconstruct(coeffs.z0, scheme, phi), coeffs.omega.omega(), phi, o).record;
        const auto nodes = rec.phi.size();
        for (std::size_t k = 0; k < nodes; ++k) {
            const double w = (k == 0 || k + 1 == nodes) ? 0.5 : 1.0;   // trapezoid in φ_1
            const double p1 = rec.phi[k];
            const double q = rec.q(dof, static_cast<Eigen::Index>(k));
            for (std::size_t h = 0; h < harmonics.size(); ++h) {
                const double arg = harmonics[h].first * p1 + harmonics[h].second * (phi(0) + rho * p1);
                acc[h] += w * q * std::complex<double>(std::cos(arg), -std::sin(arg));
            }
            if (s == 0) weight_total += w;
        }
    }
    std::vector<double> amps(harmonics.size());
    for (std::size_t h = 0; h < harmonics.size(); ++h) {
        const bool constant = harmonics[h].first == 0 && harmonics[h].second == 0;
        amps[h] = (constant ? 1.0 : 2.0) * std::abs(acc[h]) / (weight_total * phi_samples);
    }
    return amps;
}

// ---------------------------------------------------------------------------
// Closed-form linear response

/**
 * Steady state of M q̈ + D q̇ + K q = Θ Σ f_i cos(ω_i t) packed as torus
 * coefficients. Forcing at ω_1 fills the constant slot; forcing at ω_j fills
 * the first harmonic of φ_j. Requires the scheme to contain those harmonics.
 */
inline TorusCoefficients linear_quasiperiodic_response(const SecondOrderModel& model, const FrequencyVector& omega,
                                                       const HarmonicScheme& scheme) {
    if (model.has_nonlinearity()) throw ConfigError("linear_quasiperiodic_response: model has a nonlinear force");
    if (omega.d() != scheme.d) throw ConfigError("linear_quasiperiodic_response: d mismatch");
    const auto n = model.n;
    const auto u = scheme.u_tilde;
    const double w1 = omega[1];
    Vector z = Vector::Zero(2 * n * u);
    for (const auto& term : model.forcing_terms) {
        const double w = omega[term.index];
        Eigen::MatrixXcd a = (model.stiffness - w * w * model.mass).cast<std::complex<double>>();
        a += std::complex<double>(0.0, w) * model.damping.cast<std::complex<double>>();
        Eigen::PartialPivLU<Eigen::MatrixXcd> lu(a);
        if (!(lu.rcond() > 1e-12))
            throw NumericalError("linear_quasiperiodic_response: resonance at omega = " + std::to_string(w));
        const Eigen::VectorXcd x = lu.solve((model.force_distribution * term.amplitude).cast<std::complex<double>>());
        // q = Re(X e^{iτ}), τ = φ_1 or φ_j + ρ_j φ_1; u = ∂q/∂φ_1 = Re(i (w/ω_1) X e^{iτ})
        const Eigen::VectorXcd v = std::complex<double>(0.0, w / w1) * x;
        if (term.index == 1) {
            for (Eigen::Index i = 0; i < n; ++i) {
                z(i * u) += x(i).real();
                z((n + i) * u) += v(i).real();
            }
            continue;
        }
        Eigen::VectorXi k = Eigen::VectorXi::Zero(scheme.d - 1);
        k(term.index - 2) = 1;
        int sign = 1;
        const Eigen::Index slot = scheme.find_harmonic(k, sign);
        if (slot < 0)
            throw ConfigError("linear_quasiperiodic_response: scheme lacks the first harmonic of phi_" +
                              std::to_string(term.index));
        for (Eigen::Index i = 0; i < n; ++i) {
            // Re(X e^{iφ}) = Re X cos φ - Im X sin φ
            z(i * u + slot) += x(i).real();
            z(i * u + slot + 1) -= sign * x(i).imag();
            z((n + i) * u + slot) += v(i).real();
            z((n + i) * u + slot + 1) -= sign * v(i).imag();
        }
    }
    return TorusCoefficients{z, omega};
}

// ---------------------------------------------------------------------------
// Classical shooting (d = 1) on the Runge-Kutta integrator

struct PeriodicOrbit {
    Vector x0;          // [q; q̇] at t = 0
    double period = 0.0;
    int iterations = 0;
    double residual = 0.0;
};

/**
 * Newton on x(T) - x(0) = 0 for forcing at ω_1, with the monodromy by central
 * differences of the Runge-Kutta flow.
 */
inline PeriodicOrbit classical_shooting(const SecondOrderModel& model, double omega1, Vector x0, double tol = 1e-10,
                                        int max_iterations = 30, double rtol = 1e-11, double atol = 1e-13) {
    if (model.max_forcing_index() > 1) throw ConfigError("classical_shooting: forcing must be at omega_1 only");
    Vector omega(1);
    omega << omega1;
    const double period = kTwoPi / omega1;
    auto flow = [&](const Vector& x) {
        const auto ts = time_integrate(model, omega, x, 0.0, period, period, rtol, atol);
        return Vector(ts.states.col(ts.states.cols() - 1));
    };
    PeriodicOrbit out;
    out.period = period;
    const auto dim = x0.size();
    for (;;) {
        const Vector r = flow(x0) - x0;
        out.residual = r.norm();
        if (out.residual < tol * std::max(1.0, x0.norm())) break;
        if (out.iterations >= max_iterations) throw NonConvergence("classical shooting did not converge", out.residual);
        Matrix j(dim, dim);
        for (Eigen::Index c = 0; c < dim; ++c) {
            const double h = 1e-6 * std::max(1.0, std::abs(x0(c)));
            Vector xp = x0, xm = x0;
            xp(c) += h;
            xm(c) -= h;
            j.col(c) = (flow(xp) - flow(xm)) / (2 * h);
        }
        j -= Matrix::Identity(dim, dim);
        x0 -= j.partialPivLu().solve(r);
        ++out.iterations;
    }
    out.x0 = x0;
    return out;
}

} // namespace fse

#endif
