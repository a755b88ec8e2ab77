#ifndef FSE_STABILITY_HPP
#define FSE_STABILITY_HPP

/**
 * @file stability.hpp
 * @brief Lyapunov exponents of a torus from its per-sample transition matrices.
 *
 * The transition matrices Ψ(φ̃_s) over one revolution of φ_1 are fitted with
 * the solution's trigonometric basis, then chained along the orbit of the
 * section map φ̃ ↦ φ̃ + 2πρ with QR re-orthonormalization.
 */

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "fse/errors.hpp"
#include "fse/harmonics.hpp"
#include "fse/integrator.hpp"
#include "fse/shooting.hpp"

namespace fse {

/// Ψ(φ̃) in (q, q̇) coordinates as a trigonometric polynomial, entry by entry.
class TransitionField {
public:
    TransitionField() = default;

    /// Fits the per-sample blocks (given in (q, u) coordinates).
    TransitionField(const std::vector<Matrix>& blocks_qu, double omega1, const HarmonicScheme& scheme)
        : k_matrix_(scheme.k_matrix), omega1_(omega1) {
        if (blocks_qu.size() != static_cast<std::size_t>(scheme.s_tilde))
            throw ConfigError("transition field: need one block per sample");
        dim_ = blocks_qu.front().rows();
        Matrix values(scheme.s_tilde, dim_ * dim_);
        for (Eigen::Index s = 0; s < scheme.s_tilde; ++s) {
            const Matrix m = to_velocity_coordinates(blocks_qu[static_cast<std::size_t>(s)], omega1);
            values.row(s) = Eigen::Map<const Eigen::RowVectorXd>(m.data(), dim_ * dim_);
        }
        coeffs_ = scheme.gamma_inv * values;
    }

    /// A field that is the same matrix everywhere (already in (q, q̇) coordinates).
    static TransitionField constant(const Matrix& psi, double omega1, const HarmonicScheme& scheme) {
        TransitionField f;
        f.k_matrix_ = scheme.k_matrix;
        f.omega1_ = omega1;
        f.dim_ = psi.rows();
        f.coeffs_ = Matrix::Zero(scheme.u_tilde, f.dim_ * f.dim_);
        f.coeffs_.row(0) = Eigen::Map<const Eigen::RowVectorXd>(psi.data(), f.dim_ * f.dim_);
        return f;
    }

    /// Ψ_(q,q̇) = T Ψ_(q,u) T⁻¹ with T = diag(I, ω_1 I).
    static Matrix to_velocity_coordinates(const Matrix& psi, double omega1) {
        const auto n = psi.rows() / 2;
        Matrix m = psi;
        m.topRightCorner(n, n) /= omega1;
        m.bottomLeftCorner(n, n) *= omega1;
        return m;
    }

    Matrix operator()(const Vector& phi_tilde) const {
        const Eigen::RowVectorXd h = basis_row(k_matrix_, phi_tilde);
        const Eigen::RowVectorXd flat = h * coeffs_;
        return Eigen::Map<const Matrix>(flat.data(), dim_, dim_);
    }

    Eigen::Index dimension() const { return dim_; }
    double omega1() const { return omega1_; }
    const Matrix& coefficients() const { return coeffs_; }

private:
    IndexMatrix k_matrix_;
    Matrix coeffs_;
    Eigen::Index dim_ = 0;
    double omega1_ = 1.0;
};

inline TransitionField transition_matrix_field(const TrajectoryBatchResult& batch, const FrequencyVector& omega,
                                               const HarmonicScheme& scheme) {
    if (batch.sensitivity_blocks.empty()) throw ConfigError("transition field needs a batch with sensitivities");
    return TransitionField(batch.sensitivity_blocks, omega[1], scheme);
}

struct StabilityReport {
    Vector exponents;                 // first-order exponents, descending
    int n_ly = 0;
    Matrix history;                   // row i-1: running estimates after i periods (unsorted)
    std::vector<std::complex<double>> multipliers;   // Floquet multipliers when d = 1
    double max_exponent = 0.0;
    double band = 0.0;                // marginal band 1e-3·ω_1
    std::string flag;                 // "stable", "marginal" or "unstable"
    bool stable = false;
    double interpolation_residual = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline void classify(StabilityReport& rep, double omega1) {
    if (!rep.exponents.allFinite()) throw NumericalError("Lyapunov exponents are not finite");
    rep.max_exponent = rep.exponents.size() ? rep.exponents.maxCoeff() : 0.0;
    rep.band = 1e-3 * omega1;
    if (std::abs(rep.max_exponent) < rep.band) rep.flag = "marginal";
    else rep.flag = rep.max_exponent < 0.0 ? "stable" : "unstable";
    rep.stable = rep.flag == "stable";
}

inline Vector sorted_descending(Vector v) {
    std::sort(v.data(), v.data() + v.size(), std::greater<double>());
    return v;
}

} // namespace detail

/**
 * Chains Ψ(t_i, 0) = Ψ(φ̃^{i-1}) Ψ(t_{i-1}, 0) with φ̃^{i-1} = 2π(i-1)ρ mod 2π
 * and t_i = i·2π/ω_1. QR with positive diagonal runs every `reorth_every`
 * periods; ln V_h is the running sum of ln|R_kk| for k ≤ h and the h-th
 * exponent is (ln V_h - ln V_{h-1}) / t_i.
 */
inline StabilityReport lyapunov_exponents(const TransitionField& field, const Vector& rho, int n_ly = 500,
                                          int reorth_every = 1) {
    if (n_ly < 10) throw ConfigError("lyapunov_exponents: need at least 10 periods");
    if (reorth_every < 1) throw ConfigError("lyapunov_exponents: re-orthonormalization interval must be positive");
    const auto m = field.dimension();
    const double period = kTwoPi / field.omega1();

    StabilityReport rep;
    rep.n_ly = n_ly;
    rep.history.resize(n_ly, m);
    Matrix q = Matrix::Identity(m, m);
    Vector log_volume = Vector::Zero(m + 1);  // ln V_0 .. ln V_m
    Vector latest = Vector::Zero(m);
    for (int i = 1; i <= n_ly; ++i) {
        Vector phi(rho.size());
        for (Eigen::Index j = 0; j < rho.size(); ++j) {
            const double turns = (i - 1) * rho(j);
            phi(j) = kTwoPi * (turns - std::floor(turns));
        }
        q = field(phi) * q;
        if (i % reorth_every == 0 || i == n_ly) {
            Eigen::HouseholderQR<Matrix> qr(q);
            const Matrix r = qr.matrixQR().triangularView<Eigen::Upper>();
            Matrix qq = qr.householderQ() * Matrix::Identity(m, m);
            for (Eigen::Index h = 0; h < m; ++h) {
                const double rhh = r(h, h);
                if (rhh < 0.0) qq.col(h) = -qq.col(h);
                log_volume(h + 1) += std::log(std::abs(rhh));
            }
            // ln V_h accumulates ln|R_11..R_hh| cumulatively
            q = qq;
            Vector cumulative(m + 1);
            cumulative(0) = 0.0;
            for (Eigen::Index h = 0; h < m; ++h) cumulative(h + 1) = cumulative(h) + log_volume(h + 1);
            const double t = i * period;
            for (Eigen::Index h = 0; h < m; ++h) latest(h) = (cumulative(h + 1) - cumulative(h)) / t;
            if (!latest.allFinite()) throw NumericalError("Lyapunov iteration produced non-finite values");
        }
        rep.history.row(i - 1) = latest.transpose();
    }
    rep.exponents = detail::sorted_descending(latest);
    detail::classify(rep, field.omega1());
    return rep;
}

/// Periodic (d = 1) case: exponents ln|μ|/T_1 from the monodromy matrix.
inline StabilityReport floquet_exponents(const Matrix& monodromy_qu, double omega1) {
    const Matrix psi = TransitionField::to_velocity_coordinates(monodromy_qu, omega1);
    Eigen::EigenSolver<Matrix> es(psi, false);
    if (es.info() != Eigen::Success) throw NumericalError("monodromy eigenvalue computation failed");
    StabilityReport rep;
    const double period = kTwoPi / omega1;
    rep.exponents.resize(psi.rows());
    for (Eigen::Index i = 0; i < psi.rows(); ++i) {
        const std::complex<double> mu = es.eigenvalues()(i);
        rep.multipliers.push_back(mu);
        rep.exponents(i) = std::log(std::abs(mu)) / period;
    }
    rep.exponents = detail::sorted_descending(rep.exponents);
    detail::classify(rep, omega1);
    return rep;
}

/**
 * Relative error of the fitted field at the grid midpoints against transition
 * matrices integrated directly from the reconstructed section there.
 */
inline double interpolation_residual(const SecondOrderModel& model, const TorusCoefficients& coeffs,
                                     const HarmonicScheme& scheme, const TransitionField& field,
                                     const NewmarkOptions& opts) {
    if (scheme.d == 1) return 0.0;
    NewmarkOptions o = opts;
    o.sensitivities = true;
    o.record_every = 0;
    double worst = 0.0;
    const auto s_count = std::min<Eigen::Index>(scheme.s_tilde, 16);
    for (Eigen::Index s = 0; s < s_count; ++s) {
        Vector phi = scheme.sample(s * (scheme.s_tilde / s_count));
        for (std::size_t j = 0; j < scheme.s_list.size(); ++j)
            phi(static_cast<Eigen::Index>(j)) += std::numbers::pi / scheme.s_list[j];
        const Vector z0 = reconstruct(coeffs.z0, scheme, phi);
        const auto direct = newmark_integrate(model, z0, coeffs.omega.omega(), phi, o);
        const Matrix exact = TransitionField::to_velocity_coordinates(direct.psi, coeffs.omega[1]);
        worst = std::max(worst, (field(phi) - exact).norm() / std::max(1e-300, exact.norm()));
    }
    return worst;
}

/// Full report for a converged evaluation: Floquet for d = 1, Lyapunov otherwise.
inline StabilityReport analyze_stability(const ShootingEvaluation& ev, const TorusCoefficients& coeffs,
                                         const HarmonicScheme& scheme, int n_ly = 500) {
    if (ev.batch.sensitivity_blocks.empty()) throw ConfigError("stability analysis needs sensitivities");
    if (scheme.d == 1) {
        auto rep = floquet_exponents(ev.batch.sensitivity_blocks.front(), coeffs.omega[1]);
        rep.n_ly = 1;
        return rep;
    }
    return lyapunov_exponents(transition_matrix_field(ev.batch, coeffs.omega, scheme), coeffs.omega.rho(), n_ly);
}

} // namespace fse

#endif
