#ifndef FSE_HARMONICS_HPP
#define FSE_HARMONICS_HPP

/**
 * @file harmonics.hpp
 * @brief Multi-dimensional Fourier bases over the (d-1)-torus of initial points.
 *
 * A truncated expansion on φ̃ = (φ_2..φ_d) uses the basis
 * `H(φ̃) = [1, cos(k̃_1·φ̃), sin(k̃_1·φ̃), ..., cos(k̃_L·φ̃), sin(k̃_L·φ̃)]`
 * where the harmonic vectors k̃_l are the rows of the harmonic-index matrix.
 * Coefficient ordering follows that matrix exactly and is part of the
 * snapshot file format (`kOrderingTag`).
 */

#include <cmath>
#include <numbers>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "fse/errors.hpp"

namespace fse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using IndexMatrix = Eigen::MatrixXi;
using HarmonicList = std::vector<std::vector<int>>;

inline constexpr const char* kOrderingTag = "kmatrix-recursive-v1";
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

namespace detail {

inline void check_harmonic_list(const HarmonicList& k_list) {
    for (std::size_t j = 0; j < k_list.size(); ++j) {
        const auto& kj = k_list[j];
        const std::string where = "harmonic magnitudes K_" + std::to_string(j + 2);
        if (kj.empty() || kj.front() != 0) throw ConfigError(where + " must start with 0");
        std::set<int> seen;
        for (std::size_t i = 1; i < kj.size(); ++i) {
            if (kj[i] <= 0) throw ConfigError(where + " must have strictly positive entries after the leading 0");
            if (!seen.insert(kj[i]).second)
                throw ConfigError(where + " contains duplicate magnitude " + std::to_string(kj[i]));
        }
    }
}

inline int highest_harmonic(const std::vector<int>& kj) {
    int h = 0;
    for (int k : kj) h = std::max(h, k);
    return h;
}

} // namespace detail

/**
 * Harmonic-index matrix by the recursive selection rule: for d = 2 it is
 * [k_2; 0], and for d > 2
 *
 *     K̃^d = [ e_{L_d} ⊗ K̃^{d-1,r},   -k_d ⊗ e_{L̃^{d-1}}     ]
 *           [ e_{L_d+1} ⊗ K̃^{d-1},   [k_d; 0] ⊗ e_{L̃^{d-1}+1} ]
 *
 * where K̃^{d-1,r} drops the trailing zero row. The result has (Ũ-1)/2 + 1
 * rows, the last of which is zero.
 */
inline IndexMatrix build_k_matrix(const HarmonicList& k_list) {
    detail::check_harmonic_list(k_list);
    if (k_list.empty()) return IndexMatrix::Zero(1, 0);

    // d = 2
    const auto& k2 = k_list[0];
    IndexMatrix km(static_cast<Eigen::Index>(k2.size()), 1);
    for (std::size_t i = 1; i < k2.size(); ++i) km(static_cast<Eigen::Index>(i - 1), 0) = k2[i];
    km(km.rows() - 1, 0) = 0;

    for (std::size_t j = 1; j < k_list.size(); ++j) {
        const auto& kd = k_list[j];
        const Eigen::Index ld = static_cast<Eigen::Index>(kd.size()) - 1;
        const Eigen::Index prev_rows = km.rows(); // L̃^{d-1} + 1
        const Eigen::Index prev_l = prev_rows - 1;
        const Eigen::Index cols = km.cols();
        IndexMatrix next(ld * prev_l + (ld + 1) * prev_rows, cols + 1);
        Eigen::Index row = 0;
        // K^{d,g}
        for (Eigen::Index a = 0; a < ld; ++a) {
            for (Eigen::Index b = 0; b < prev_l; ++b, ++row) {
                next.row(row).head(cols) = km.row(b);
                next(row, cols) = -kd[static_cast<std::size_t>(a + 1)];
            }
        }
        // K̃^{d,b}
        for (Eigen::Index a = 0; a <= ld; ++a) {
            const int kval = a < ld ? kd[static_cast<std::size_t>(a + 1)] : 0;
            for (Eigen::Index b = 0; b < prev_rows; ++b, ++row) {
                next.row(row).head(cols) = km.row(b);
                next(row, cols) = kval;
            }
        }
        km = std::move(next);
    }
    return km;
}

/// Ũ = Π (2 L_j + 1).
inline Eigen::Index coefficient_count(const HarmonicList& k_list) {
    Eigen::Index u = 1;
    for (const auto& kj : k_list) u *= 2 * (static_cast<Eigen::Index>(kj.size()) - 1) + 1;
    return u;
}

/// Smallest power of two that is at least 2H_j + 2.
inline std::vector<int> default_sample_counts(const HarmonicList& k_list) {
    std::vector<int> s;
    for (const auto& kj : k_list) {
        const int need = 2 * detail::highest_harmonic(kj) + 2;
        int p = 1;
        while (p < need) p *= 2;
        s.push_back(p);
    }
    return s;
}

/**
 * Tensor grid of sample points, one column per trajectory. Direction φ_2
 * varies fastest: column s has φ_j = 2π·((s / Π_{i<j} S_i) mod S_j) / S_j.
 */
inline Matrix build_sample_grid(const HarmonicList& k_list, const std::vector<int>& s_list) {
    if (s_list.size() != k_list.size())
        throw ConfigError("need one sample count per torus direction (" + std::to_string(k_list.size()) + ")");
    Eigen::Index total = 1;
    for (std::size_t j = 0; j < s_list.size(); ++j) {
        const int h = detail::highest_harmonic(k_list[j]);
        if (s_list[j] < 2 * h + 1)
            throw ConfigError("Nyquist condition violated for direction " + std::to_string(j + 2) + ": S_" +
                              std::to_string(j + 2) + " = " + std::to_string(s_list[j]) + " < 2H+1 = " +
                              std::to_string(2 * h + 1));
        total *= s_list[j];
    }
    Matrix grid(static_cast<Eigen::Index>(s_list.size()), total);
    for (Eigen::Index s = 0; s < total; ++s) {
        Eigen::Index stride = 1;
        for (std::size_t j = 0; j < s_list.size(); ++j) {
            const Eigen::Index idx = (s / stride) % s_list[j];
            grid(static_cast<Eigen::Index>(j), s) = kTwoPi * static_cast<double>(idx) / s_list[j];
            stride *= s_list[j];
        }
    }
    return grid;
}

/// Basis row H(k̃, φ̃) of length Ũ.
inline Eigen::RowVectorXd basis_row(const IndexMatrix& k_matrix, const Vector& phi) {
    const Eigen::Index harmonics = k_matrix.rows() - 1;
    Eigen::RowVectorXd h(2 * harmonics + 1);
    h(0) = 1.0;
    for (Eigen::Index l = 0; l < harmonics; ++l) {
        const double arg = k_matrix.row(l).cast<double>().dot(phi);
        h(1 + 2 * l) = std::cos(arg);
        h(2 + 2 * l) = std::sin(arg);
    }
    return h;
}

/// Inverse DFT Γ (S̃ x Ũ) and DFT Γ⁻¹ (Ũ x S̃) on the sample grid.
inline std::pair<Matrix, Matrix> build_dft_matrices(const IndexMatrix& k_matrix, const Matrix& sample_grid) {
    const Eigen::Index samples = sample_grid.cols();
    const Eigen::Index u = 2 * (k_matrix.rows() - 1) + 1;
    Matrix gamma(samples, u);
    for (Eigen::Index s = 0; s < samples; ++s) gamma.row(s) = basis_row(k_matrix, sample_grid.col(s));
    Matrix gamma_inv = 2.0 * gamma.transpose() / static_cast<double>(samples);
    gamma_inv.row(0) *= 0.5;
    return {std::move(gamma), std::move(gamma_inv)};
}

/**
 * Rotation operator with H(φ̃ - 2πρ) = H(φ̃) R(ρ): block-diagonal with a
 * leading 1 and blocks [cos θ_l, -sin θ_l; sin θ_l, cos θ_l], θ_l = 2π k̃_l·ρ.
 */
inline Matrix rotation_matrix(const Vector& rho, const IndexMatrix& k_matrix) {
    const Eigen::Index harmonics = k_matrix.rows() - 1;
    Matrix r = Matrix::Zero(2 * harmonics + 1, 2 * harmonics + 1);
    r(0, 0) = 1.0;
    for (Eigen::Index l = 0; l < harmonics; ++l) {
        const double theta = kTwoPi * k_matrix.row(l).cast<double>().dot(rho);
        const double c = std::cos(theta), s = std::sin(theta);
        const Eigen::Index i = 1 + 2 * l;
        r(i, i) = c;
        r(i, i + 1) = -s;
        r(i + 1, i) = s;
        r(i + 1, i + 1) = c;
    }
    return r;
}

/**
 * ∂R(ρ)/∂ω_i with ρ_j = ω_j/ω_1 (i is 1-based). Each block is
 * (∂θ_l/∂ω_i)·[0,-1;1,0]·R_l with ∂θ_l/∂ω_1 = -2π k̃_l·ρ/ω_1 and
 * ∂θ_l/∂ω_i = 2π k_{i,l}/ω_1 for i ≥ 2.
 */
inline Matrix rotation_derivative(const Vector& rho, const Vector& omega, const IndexMatrix& k_matrix, int i) {
    const Eigen::Index harmonics = k_matrix.rows() - 1;
    if (i < 1 || i > omega.size()) throw ConfigError("rotation_derivative: frequency index out of range");
    const double w1 = omega(0);
    Matrix dr = Matrix::Zero(2 * harmonics + 1, 2 * harmonics + 1);
    for (Eigen::Index l = 0; l < harmonics; ++l) {
        const double kr = k_matrix.row(l).cast<double>().dot(rho);
        const double theta = kTwoPi * kr;
        const double dtheta = i == 1 ? -kTwoPi * kr / w1 : kTwoPi * k_matrix(l, i - 2) / w1;
        const double c = std::cos(theta), s = std::sin(theta);
        const Eigen::Index j = 1 + 2 * l;
        // [0,-1;1,0] * [c,-s;s,c] = [-s,-c;c,-s]
        dr(j, j) = -dtheta * s;
        dr(j, j + 1) = -dtheta * c;
        dr(j + 1, j) = dtheta * c;
        dr(j + 1, j + 1) = -dtheta * s;
    }
    return dr;
}

/// Spectral derivative ∂/∂φ_i acting on coefficients (i is 1-based, 2 ≤ i ≤ d).
inline Matrix phase_gradient(const IndexMatrix& k_matrix, int i) {
    if (i < 2 || i - 2 >= k_matrix.cols()) throw ConfigError("phase_gradient: index must satisfy 2 <= i <= d");
    const Eigen::Index harmonics = k_matrix.rows() - 1;
    Matrix g = Matrix::Zero(2 * harmonics + 1, 2 * harmonics + 1);
    for (Eigen::Index l = 0; l < harmonics; ++l) {
        const double k = k_matrix(l, i - 2);
        const Eigen::Index j = 1 + 2 * l;
        g(j, j + 1) = k;
        g(j + 1, j) = -k;
    }
    return g;
}

/// Immutable bundle of everything derived from the harmonic magnitudes and sample counts.
struct HarmonicScheme {
    int d = 1;
    HarmonicList k_list;
    std::vector<int> s_list;
    IndexMatrix k_matrix;
    Eigen::Index u_tilde = 1;
    Eigen::Index s_tilde = 1;
    Matrix sample_grid;
    Matrix gamma;
    Matrix gamma_inv;
    std::vector<Matrix> nabla_list; // entry j-2 holds ∇_{φ_j}

    /// Builds a scheme; an empty `s_list` selects the default power-of-two sample counts.
    static HarmonicScheme build(HarmonicList k_list, std::vector<int> s_list = {}) {
        HarmonicScheme sc;
        detail::check_harmonic_list(k_list);
        if (s_list.empty()) s_list = default_sample_counts(k_list);
        sc.d = static_cast<int>(k_list.size()) + 1;
        sc.k_matrix = build_k_matrix(k_list);
        sc.u_tilde = coefficient_count(k_list);
        sc.sample_grid = build_sample_grid(k_list, s_list);
        sc.s_tilde = sc.sample_grid.cols();
        std::tie(sc.gamma, sc.gamma_inv) = build_dft_matrices(sc.k_matrix, sc.sample_grid);
        for (int j = 2; j <= sc.d; ++j) sc.nabla_list.push_back(phase_gradient(sc.k_matrix, j));
        sc.k_list = std::move(k_list);
        sc.s_list = std::move(s_list);
        return sc;
    }

    /// Sample point φ̃_s.
    Vector sample(Eigen::Index s) const { return sample_grid.col(s); }

    /// Coefficient slot (cos, sin) of the harmonic equal to ±`k`, or -1 when absent.
    /// `sign` receives -1 if the stored row is -k (the sine slot then flips sign).
    Eigen::Index find_harmonic(const Eigen::VectorXi& k, int& sign) const {
        for (Eigen::Index l = 0; l + 1 < k_matrix.rows(); ++l) {
            if (k_matrix.row(l).transpose() == k) {
                sign = 1;
                return 1 + 2 * l;
            }
            if (k_matrix.row(l).transpose() == -k) {
                sign = -1;
                return 1 + 2 * l;
            }
        }
        return -1;
    }
};

} // namespace fse

#endif
