#ifndef FSE_CHECKS_HPP
#define FSE_CHECKS_HPP

/**
 * @file checks.hpp
 * @brief Self-check suite run by `fse check`: transforms, rotations,
 * Jacobians, degeneracy, determinism and an oracle comparison.
 */

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "fse/continuation.hpp"
#include "fse/harmonics.hpp"
#include "fse/integrator.hpp"
#include "fse/model.hpp"
#include "fse/oracle.hpp"
#include "fse/shooting.hpp"

namespace fse {

struct CheckItem {
    std::string name;
    bool passed = false;
    double value = 0.0;       // measured quantity
    double tolerance = 0.0;   // pass threshold on `value`
    std::string detail;
};

struct CheckOptions {
    bool break_rotation_sign = false;   // fault injection: use R(-ρ) in the shift identity
    int workers = 4;                    // compared against a single worker
    unsigned long long seed = 1;
};

namespace detail {

inline CheckItem run_check(const std::string& name, double tolerance, const std::function<double()>& measure) {
    CheckItem item{name, false, 0.0, tolerance, ""};
    try {
        item.value = measure();
        item.passed = std::isfinite(item.value) && item.value <= tolerance;
    } catch (const std::exception& e) {
        item.detail = e.what();
        item.value = std::numeric_limits<double>::infinity();
    }
    return item;
}

} // namespace detail

/// Runs every check on the given model (used for the Jacobian probes) plus built-in probes.
inline std::vector<CheckItem> run_checks(const SecondOrderModel& model, const CheckOptions& opts = {}) {
    std::mt19937_64 rng(opts.seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    std::vector<CheckItem> items;

    items.push_back(detail::run_check("transform round-trip (d=2,3)", 1e-12, [&] {
        double worst = 0.0;
        for (const HarmonicList& k : {HarmonicList{{0, 1, 3, 7}}, HarmonicList{{0, 1, 2}, {0, 1, 5}}}) {
            const auto sc = HarmonicScheme::build(k);
            worst = std::max(worst, (sc.gamma_inv * sc.gamma - Matrix::Identity(sc.u_tilde, sc.u_tilde)).cwiseAbs().maxCoeff());
        }
        return worst;
    }));

    items.push_back(detail::run_check("rotation shift identity", 1e-12, [&] {
        const auto sc = HarmonicScheme::build({{0, 1, 2}, {0, 1, 3}});
        double worst = 0.0;
        for (int trial = 0; trial < 10; ++trial) {
            Vector rho(2), phi(2);
            rho << uni(rng), uni(rng);
            phi << kTwoPi * uni(rng), kTwoPi * uni(rng);
            const Matrix r = rotation_matrix(opts.break_rotation_sign ? Vector(-rho) : rho, sc.k_matrix);
            const auto lhs = basis_row(sc.k_matrix, phi - kTwoPi * rho);
            worst = std::max(worst, (lhs - basis_row(sc.k_matrix, phi) * r).cwiseAbs().maxCoeff());
            worst = std::max(worst, (r * r.transpose() - Matrix::Identity(r.rows(), r.cols())).cwiseAbs().maxCoeff());
        }
        return worst;
    }));

    items.push_back(detail::run_check("rotation derivative vs finite differences", 1e-6, [&] {
        const auto sc = HarmonicScheme::build({{0, 1, 2}, {0, 1}});
        Vector omega(3);
        omega << 1.3, 0.9, 0.47;
        double worst = 0.0;
        for (int i = 1; i <= 3; ++i) {
            const double h = 1e-6;
            Vector wp = omega, wm = omega;
            wp(i - 1) += h;
            wm(i - 1) -= h;
            auto rho_of = [](const Vector& w) { return Vector(w.tail(w.size() - 1) / w(0)); };
            const Matrix fd = (rotation_matrix(rho_of(wp), sc.k_matrix) - rotation_matrix(rho_of(wm), sc.k_matrix)) / (2 * h);
            const Matrix an = rotation_derivative(rho_of(omega), omega, sc.k_matrix, i);
            worst = std::max(worst, (an - fd).norm() / std::max(1.0, fd.norm()));
        }
        return worst;
    }));

    items.push_back(detail::run_check("phase gradient skew-symmetry", 0.0, [&] {
        const auto sc = HarmonicScheme::build({{0, 1, 2}, {0, 3}});
        double worst = 0.0;
        for (const auto& g : sc.nabla_list) worst = std::max(worst, (g + g.transpose()).cwiseAbs().maxCoeff());
        return worst;
    }));

    items.push_back(detail::run_check("model Jacobian vs finite differences", 1e-6, [&] {
        double worst = 0.0;
        for (int trial = 0; trial < 20; ++trial) {
            Vector q(model.n), v(model.n);
            for (Eigen::Index i = 0; i < model.n; ++i) {
                q(i) = uni(rng);
                v(i) = uni(rng);
            }
            worst = std::max(worst, nonlinear_jacobian_error(model, q, v));
        }
        return worst;
    }));

    const auto duffing = make_duffing(1.0, 0.05, 0.5, {ForcingTerm{Vector::Constant(1, 0.1), 1},
                                                       ForcingTerm{Vector::Constant(1, 0.1), 2}});
    const auto duffing_scheme = HarmonicScheme::build({{0, 1, 2, 3}});
    Vector w(2);
    w << 1.3, 1.3 / std::sqrt(2.0);
    TorusCoefficients probe{Vector::Zero(2 * duffing_scheme.u_tilde), FrequencyVector(w, 2)};
    for (Eigen::Index i = 0; i < probe.z0.size(); ++i) probe.z0(i) = 0.1 * uni(rng);
    ShootingOptions so;
    so.newmark.steps = 512;

    items.push_back(detail::run_check("shooting Jacobian vs finite differences (Duffing d=2)", 1e-5, [&] {
        return jacobian_fd_check(duffing, probe, duffing_scheme, so, 1e-6).worst();
    }));

    items.push_back(detail::run_check("shooting Jacobian vs finite differences (configured model)", 1e-5, [&] {
        // d = 1 probe at the model's forcing frequency set to 1 with a small random section
        std::vector<ForcingTerm> forcing;
        for (const auto& t : model.forcing_terms)
            if (t.index == 1) forcing.push_back(t);
        SecondOrderModel m = model;
        m.forcing_terms = forcing;
        const auto sc = HarmonicScheme::build({});
        Vector om(1);
        om << 1.0;
        TorusCoefficients c{Vector::Zero(2 * m.n), FrequencyVector(om, 1)};
        for (Eigen::Index i = 0; i < c.z0.size(); ++i) c.z0(i) = 0.05 * uni(rng);
        ShootingOptions o;
        o.newmark.steps = 256;
        return jacobian_fd_check(m, c, sc, o, 1e-6).worst();
    }));

    items.push_back(detail::run_check("d=1 degeneracy: residual equals z(2pi) - z(0)", 1e-14, [&] {
        const auto sc = HarmonicScheme::build({});
        const auto m = make_duffing(1.0, 0.05, 0.5, {ForcingTerm{Vector::Constant(1, 0.1), 1}});
        Vector om(1);
        om << 1.1;
        TorusCoefficients c{Vector(2), FrequencyVector(om, 1)};
        c.z0 << 0.3, -0.2;
        const auto ev = evaluate(m, c, sc, so);
        NewmarkOptions no = so.newmark;
        no.sensitivities = false;
        const auto tr = newmark_integrate(m, c.z0, om, Vector(0), no);
        const double structure = (sc.u_tilde == 1 && sc.s_tilde == 1) ? 0.0 : 1.0;
        return std::max(structure, (ev.residual - (tr.z_end - c.z0)).cwiseAbs().maxCoeff());
    }));

    items.push_back(detail::run_check("determinism across worker counts", 0.0, [&] {
        ShootingOptions a = so, b = so;
        a.workers = 1;
        b.workers = std::max(2, opts.workers);
        const auto ea = evaluate(duffing, probe, duffing_scheme, a);
        const auto eb = evaluate(duffing, probe, duffing_scheme, b);
        return std::max({(ea.residual - eb.residual).cwiseAbs().maxCoeff(),
                         (ea.jac_z0 - eb.jac_z0).cwiseAbs().maxCoeff(),
                         (ea.jac_omega - eb.jac_omega).cwiseAbs().maxCoeff()});
    }));

    items.push_back(detail::run_check("linear torus vs Runge-Kutta oracle", 1e-6, [&] {
        const auto lin = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{Vector::Constant(1, 0.1), 1},
                                                      ForcingTerm{Vector::Constant(1, 0.08), 2}});
        const auto sc = HarmonicScheme::build({{0, 1}});
        const auto c = linear_quasiperiodic_response(lin, FrequencyVector(w, 2), sc);
        Vector x0 = reconstruct(c.z0, sc, Vector::Zero(1));
        x0(1) *= w(0);
        const double period = kTwoPi / w(0);
        const auto ts = time_integrate(lin, w, x0, 0.0, 10 * period, period / 32);
        NewmarkOptions no;
        no.steps = 16384;
        return compare_torus_to_timeseries(lin, c, sc, ts, 0.0, no).max_error;
    }));

    return items;
}

} // namespace fse

#endif
