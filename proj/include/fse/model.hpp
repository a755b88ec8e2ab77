#ifndef FSE_MODEL_HPP
#define FSE_MODEL_HPP

/**
 * @file model.hpp
 * @brief Second-order mechanical systems `M q'' + D q' + K q + Θ (f_nl(q, q') - e(Ωt)) = 0`.
 *
 * Models are plain values: dense matrices, a nonlinear force callback and a
 * list of cosine forcing terms. Callbacks must be pure so batches of
 * trajectories can evaluate them from several threads at once.
 */

#include <cmath>
#include <functional>
#include <map>
#include <set>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "fse/errors.hpp"

namespace fse {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Output slot of a nonlinear force evaluation.
struct NonlinearForce {
    Vector f;
    Matrix df_dq;
    Matrix df_dqdot;

    void resize(Eigen::Index n) {
        f.setZero(n);
        df_dq.setZero(n, n);
        df_dqdot.setZero(n, n);
    }
};

using NonlinearCallback = std::function<void(const Vector& q, const Vector& qdot, NonlinearForce& out)>;

/// One cosine excitation `amplitude * cos(ω_index t)`; `index` is 1-based into the frequency vector.
struct ForcingTerm {
    Vector amplitude;
    int index = 1;
};

struct SecondOrderModel {
    Eigen::Index n = 0;
    Matrix mass;
    Matrix damping;
    Matrix stiffness;
    Matrix force_distribution;
    NonlinearCallback nonlinear_force;
    std::vector<ForcingTerm> forcing_terms;

    bool has_nonlinearity() const { return static_cast<bool>(nonlinear_force); }

    /// Highest forcing frequency index used (0 for an autonomous model).
    int max_forcing_index() const {
        int e = 0;
        for (const auto& term : forcing_terms) e = std::max(e, term.index);
        return e;
    }

    /// Evaluates the nonlinear force; a model without one yields zeros.
    void eval_nonlinear(const Vector& q, const Vector& qdot, NonlinearForce& out) const {
        if (nonlinear_force) {
            nonlinear_force(q, qdot, out);
        } else {
            out.resize(n);
        }
    }

    /// Throws ConfigError when dimensions disagree or M is not symmetric positive definite.
    void validate() const {
        if (n <= 0) throw ConfigError("model: number of DOFs must be positive");
        auto square = [this](const Matrix& m, const char* name) {
            if (m.rows() != n || m.cols() != n)
                throw ConfigError(std::string("model: ") + name + " must be " + std::to_string(n) + "x" +
                                  std::to_string(n));
        };
        square(mass, "mass");
        square(damping, "damping");
        square(stiffness, "stiffness");
        square(force_distribution, "force_distribution");
        if ((mass - mass.transpose()).cwiseAbs().maxCoeff() > 1e-12 * (1.0 + mass.cwiseAbs().maxCoeff()))
            throw ConfigError("model: mass matrix must be symmetric");
        if (Eigen::LLT<Matrix>(mass).info() != Eigen::Success)
            throw ConfigError("model: mass matrix must be positive definite");
        for (const auto& term : forcing_terms) {
            if (term.amplitude.size() != n) throw ConfigError("model: forcing amplitude has wrong length");
            if (term.index < 1) throw ConfigError("model: forcing frequency index must be >= 1");
        }
    }
};

/// Base frequencies ω_1..ω_d, the first e of which are forcing frequencies.
class FrequencyVector {
public:
    FrequencyVector() = default;
    FrequencyVector(Vector omega, int e) : omega_(std::move(omega)), e_(e) { check(); }

    int d() const { return static_cast<int>(omega_.size()); }
    int e() const { return e_; }
    const Vector& omega() const { return omega_; }
    double operator[](int i) const { return omega_(i - 1); } // 1-based like the math

    void set(int i, double value) {
        omega_(i - 1) = value;
        check();
    }
    void set_all(const Vector& omega) {
        omega_ = omega;
        check();
    }

    /// Frequency ratios ρ_j = ω_j / ω_1, j = 2..d.
    Vector rho() const {
        if (d() <= 1) return Vector(0);
        return omega_.tail(d() - 1) / omega_(0);
    }

private:
    void check() const {
        if (omega_.size() < 1) throw ConfigError("frequency vector needs d >= 1");
        if (e_ < 0 || e_ > omega_.size()) throw ConfigError("frequency vector needs 0 <= e <= d");
        if (!(omega_(0) > 0.0)) throw ConfigError("base frequency omega_1 must be positive");
    }

    Vector omega_;
    int e_ = 0;
};

/// Sum of forcing terms at physical time t.
inline Vector forcing_at_time(const SecondOrderModel& model, const Vector& omega, double t) {
    Vector e = Vector::Zero(model.n);
    for (const auto& term : model.forcing_terms) e += term.amplitude * std::cos(omega(term.index - 1) * t);
    return e;
}

/// First-order right-hand side of the physical-time ODE, x = [q; qdot].
class FirstOrderRhs {
public:
    explicit FirstOrderRhs(const SecondOrderModel& model, Vector omega)
        : model_(&model), omega_(std::move(omega)), mass_lu_(model.mass) {
        if (mass_lu_.rcond() < 1e-14) throw SolverFailure("evaluate_rhs: mass matrix is singular");
    }

    Vector operator()(const Vector& x, double t) const {
        const auto n = model_->n;
        Vector q = x.head(n);
        Vector qdot = x.tail(n);
        NonlinearForce nl;
        model_->eval_nonlinear(q, qdot, nl);
        Vector load = model_->force_distribution * (forcing_at_time(*model_, omega_, t) - nl.f) -
                      model_->damping * qdot - model_->stiffness * q;
        Vector out(2 * n);
        out.head(n) = qdot;
        out.tail(n) = mass_lu_.solve(load);
        return out;
    }

private:
    const SecondOrderModel* model_;
    Vector omega_;
    Eigen::PartialPivLU<Matrix> mass_lu_;
};

inline Vector evaluate_rhs(const SecondOrderModel& model, const Vector& x, double t, const Vector& omega) {
    if (x.size() != 2 * model.n) throw ConfigError("evaluate_rhs: state has wrong length");
    return FirstOrderRhs(model, omega)(x, t);
}

/**
 * Worst relative error between the analytic nonlinear Jacobians and central
 * differences at (q, qdot). Errors are measured in the Frobenius norm relative
 * to max(1, |J_fd|).
 */
inline double nonlinear_jacobian_error(const SecondOrderModel& model, const Vector& q, const Vector& qdot,
                                       double h = 1e-6) {
    if (!model.has_nonlinearity()) return 0.0;
    const auto n = model.n;
    NonlinearForce base, plus, minus;
    model.eval_nonlinear(q, qdot, base);
    Matrix fd_q(n, n), fd_v(n, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        Vector qp = q, qm = q;
        qp(j) += h;
        qm(j) -= h;
        model.eval_nonlinear(qp, qdot, plus);
        model.eval_nonlinear(qm, qdot, minus);
        fd_q.col(j) = (plus.f - minus.f) / (2 * h);
        Vector vp = qdot, vm = qdot;
        vp(j) += h;
        vm(j) -= h;
        model.eval_nonlinear(q, vp, plus);
        model.eval_nonlinear(q, vm, minus);
        fd_v.col(j) = (plus.f - minus.f) / (2 * h);
    }
    const double eq = (base.df_dq - fd_q).norm() / std::max(1.0, fd_q.norm());
    const double ev = (base.df_dqdot - fd_v).norm() / std::max(1.0, fd_v.norm());
    return std::max(eq, ev);
}

// ---------------------------------------------------------------------------
// Built-in models

/// Forcing entry as read from a configuration: amplitude applied at one DOF.
struct ForcingSpec {
    double amplitude = 0.0;
    int index = 1;
    int dof = -1; // -1 selects the model default
};

inline std::vector<ForcingTerm> to_forcing_terms(const std::vector<ForcingSpec>& specs, Eigen::Index n,
                                                 Eigen::Index default_dof) {
    std::vector<ForcingTerm> out;
    for (const auto& s : specs) {
        const Eigen::Index dof = s.dof < 0 ? default_dof : s.dof;
        if (dof >= n) throw ConfigError("forcing dof " + std::to_string(dof) + " out of range");
        ForcingTerm t{Vector::Zero(n), s.index};
        t.amplitude(dof) = s.amplitude;
        out.push_back(std::move(t));
    }
    return out;
}

/// `q'' + c q' + k q + α q³ = Σ f_i cos(ω_i t)` with unit mass.
inline SecondOrderModel make_duffing(double k, double c, double alpha, std::vector<ForcingTerm> forcing = {}) {
    if (!(k > 0.0)) throw ConfigError("duffing: stiffness must be positive");
    if (c < 0.0) throw ConfigError("duffing: damping must be non-negative");
    SecondOrderModel m;
    m.n = 1;
    m.mass = Matrix::Identity(1, 1);
    m.damping = Matrix::Constant(1, 1, c);
    m.stiffness = Matrix::Constant(1, 1, k);
    m.force_distribution = Matrix::Identity(1, 1);
    if (alpha != 0.0) {
        m.nonlinear_force = [alpha](const Vector& q, const Vector&, NonlinearForce& out) {
            out.resize(1);
            out.f(0) = alpha * q(0) * q(0) * q(0);
            out.df_dq(0, 0) = 3.0 * alpha * q(0) * q(0);
        };
    }
    m.forcing_terms = std::move(forcing);
    m.validate();
    return m;
}

/**
 * Chain of n unit masses with linear springs k and cubic springs α between
 * neighbours and to the ground at both ends. Damping is stiffness-proportional,
 * D = c K.
 */
inline SecondOrderModel make_cubic_chain(Eigen::Index n, double k, double c, double alpha,
                                         std::vector<ForcingTerm> forcing = {}) {
    if (n < 1) throw ConfigError("cubic_chain: need at least one mass");
    SecondOrderModel m;
    m.n = n;
    m.mass = Matrix::Identity(n, n);
    m.stiffness = Matrix::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        m.stiffness(i, i) = 2.0 * k;
        if (i + 1 < n) {
            m.stiffness(i, i + 1) = -k;
            m.stiffness(i + 1, i) = -k;
        }
    }
    m.damping = c * m.stiffness;
    m.force_distribution = Matrix::Identity(n, n);
    if (alpha != 0.0) {
        m.nonlinear_force = [n, alpha](const Vector& q, const Vector&, NonlinearForce& out) {
            out.resize(n);
            // spring s connects node s-1 and node s (nodes -1 and n are ground)
            for (Eigen::Index s = 0; s <= n; ++s) {
                const double left = s > 0 ? q(s - 1) : 0.0;
                const double right = s < n ? q(s) : 0.0;
                const double stretch = right - left;
                const double force = alpha * stretch * stretch * stretch;
                const double stiff = 3.0 * alpha * stretch * stretch;
                if (s < n) {
                    out.f(s) += force;
                    out.df_dq(s, s) += stiff;
                }
                if (s > 0) {
                    out.f(s - 1) -= force;
                    out.df_dq(s - 1, s - 1) += stiff;
                }
                if (s > 0 && s < n) {
                    out.df_dq(s, s - 1) -= stiff;
                    out.df_dq(s - 1, s) -= stiff;
                }
            }
        };
    }
    m.forcing_terms = std::move(forcing);
    m.validate();
    return m;
}

/// Forced van der Pol oscillator `q'' - μ(1 - q²) q' + ω_n² q = Σ f_i cos(ω_i t)`.
inline SecondOrderModel make_van_der_pol(double mu, double natural_frequency, std::vector<ForcingTerm> forcing = {}) {
    if (!(natural_frequency > 0.0)) throw ConfigError("van_der_pol: natural frequency must be positive");
    SecondOrderModel m;
    m.n = 1;
    m.mass = Matrix::Identity(1, 1);
    m.damping = Matrix::Constant(1, 1, -mu);
    m.stiffness = Matrix::Constant(1, 1, natural_frequency * natural_frequency);
    m.force_distribution = Matrix::Identity(1, 1);
    m.nonlinear_force = [mu](const Vector& q, const Vector& qdot, NonlinearForce& out) {
        out.resize(1);
        out.f(0) = mu * q(0) * q(0) * qdot(0);
        out.df_dq(0, 0) = 2.0 * mu * q(0) * qdot(0);
        out.df_dqdot(0, 0) = mu * q(0) * q(0);
    };
    m.forcing_terms = std::move(forcing);
    m.validate();
    return m;
}

// ---------------------------------------------------------------------------
// Registry

using ParamMap = std::map<std::string, double>;

struct ModelSpec {
    std::string name;
    ParamMap params;
    std::vector<ForcingSpec> forcing;
};

inline double param_or(const ParamMap& p, const std::string& key, double fallback) {
    auto it = p.find(key);
    return it == p.end() ? fallback : it->second;
}

inline std::vector<std::string> registered_models() { return {"linear", "duffing", "cubic_chain", "van_der_pol"}; }

/**
 * Builds a registry model. Parameters (defaults in brackets):
 *  - linear:      m [1], c [0], k [1]
 *  - duffing:     k [1], c [0], alpha [1]
 *  - cubic_chain: n [3], k [1], c [0], alpha [1]; forcing at node n/2 by default
 *  - van_der_pol: mu [0.2], wn [1]
 */
inline SecondOrderModel make_model(const ModelSpec& spec) {
    const auto& p = spec.params;
    static const std::map<std::string, std::set<std::string>> known = {
        {"linear", {"m", "c", "k"}},
        {"duffing", {"k", "c", "alpha"}},
        {"cubic_chain", {"n", "k", "c", "alpha"}},
        {"van_der_pol", {"mu", "wn"}},
    };
    const auto entry = known.find(spec.name);
    if (entry == known.end()) throw ConfigError("unknown model '" + spec.name + "'");
    for (const auto& [key, value] : p)
        if (!entry->second.count(key)) throw ConfigError("model '" + spec.name + "' has no parameter '" + key + "'");
    if (spec.name == "linear") {
        const double mass = param_or(p, "m", 1.0);
        auto model = make_duffing(param_or(p, "k", 1.0), param_or(p, "c", 0.0), 0.0,
                                  to_forcing_terms(spec.forcing, 1, 0));
        model.mass(0, 0) = mass;
        model.validate();
        return model;
    }
    if (spec.name == "duffing")
        return make_duffing(param_or(p, "k", 1.0), param_or(p, "c", 0.0), param_or(p, "alpha", 1.0),
                            to_forcing_terms(spec.forcing, 1, 0));
    if (spec.name == "cubic_chain") {
        const double nd = param_or(p, "n", 3.0);
        if (nd < 1.0 || nd != std::floor(nd)) throw ConfigError("cubic_chain: n must be a positive integer");
        const auto n = static_cast<Eigen::Index>(nd);
        return make_cubic_chain(n, param_or(p, "k", 1.0), param_or(p, "c", 0.0), param_or(p, "alpha", 1.0),
                                to_forcing_terms(spec.forcing, n, n / 2));
    }
    if (spec.name == "van_der_pol")
        return make_van_der_pol(param_or(p, "mu", 0.2), param_or(p, "wn", 1.0), to_forcing_terms(spec.forcing, 1, 0));
    throw ConfigError("unknown model '" + spec.name + "'");
}

} // namespace fse

#endif
