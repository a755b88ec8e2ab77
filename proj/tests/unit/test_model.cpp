#include <random>

#include <Eigen/Eigenvalues>
#include <gtest/gtest.h>

#include "fse/model.hpp"

using namespace fse;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

} // namespace

TEST(Duffing, LinearCaseHasNoNonlinearForce) {
    const auto m = make_duffing(1.0, 0.0, 0.0);
    NonlinearForce out;
    m.eval_nonlinear(vec({2.0}), vec({0.0}), out);
    EXPECT_EQ(out.f(0), 0.0);
}

TEST(Duffing, CubicForceAndJacobian) {
    const auto m = make_duffing(1.0, 0.05, 1.0);
    NonlinearForce out;
    m.eval_nonlinear(vec({2.0}), vec({5.0}), out);
    EXPECT_DOUBLE_EQ(out.f(0), 8.0);
    EXPECT_DOUBLE_EQ(out.df_dq(0, 0), 12.0);
    EXPECT_DOUBLE_EQ(out.df_dqdot(0, 0), 0.0);
}

TEST(Duffing, JacobianMatchesFiniteDifferences) {
    const auto m = make_duffing(1.0, 0.05, 1.3);
    EXPECT_LT(nonlinear_jacobian_error(m, vec({0.7}), vec({0.2})), 1e-6);
}

TEST(Duffing, RejectsNonPositiveStiffness) {
    EXPECT_THROW(make_duffing(0.0, 0.0, 1.0), ConfigError);
    EXPECT_THROW(make_duffing(-1.0, 0.0, 1.0), ConfigError);
}

TEST(CubicChain, SingleNodeMatchesDuffing) {
    const auto chain = make_cubic_chain(1, 1.5, 0.1, 0.7);
    // both ground springs act on the single mass
    const auto duff = make_duffing(3.0, 0.3, 1.4);
    NonlinearForce a, b;
    chain.eval_nonlinear(vec({0.9}), vec({0.1}), a);
    duff.eval_nonlinear(vec({0.9}), vec({0.1}), b);
    EXPECT_NEAR(a.f(0), b.f(0), 1e-14);
    EXPECT_NEAR(a.df_dq(0, 0), b.df_dq(0, 0), 1e-14);
    EXPECT_NEAR(chain.stiffness(0, 0), duff.stiffness(0, 0), 1e-15);
    EXPECT_NEAR(chain.damping(0, 0), duff.damping(0, 0), 1e-15);
}

TEST(CubicChain, TridiagonalStiffness) {
    const auto m = make_cubic_chain(3, 2.0, 0.0, 0.0);
    Matrix expected(3, 3);
    expected << 4, -2, 0, -2, 4, -2, 0, -2, 4;
    EXPECT_LT((m.stiffness - expected).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_FALSE(m.has_nonlinearity());
}

TEST(CubicChain, RayleighDamping) {
    const auto m = make_cubic_chain(4, 1.0, 0.02, 0.0);
    EXPECT_LT((m.damping - 0.02 * m.stiffness).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(CubicChain, FiftyNodeJacobianSymmetricBanded) {
    const auto m = make_cubic_chain(50, 1.0, 0.01, 0.5);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    Vector q(50);
    for (Eigen::Index i = 0; i < 50; ++i) q(i) = uni(rng);
    NonlinearForce out;
    m.eval_nonlinear(q, Vector::Zero(50), out);
    EXPECT_LT((out.df_dq - out.df_dq.transpose()).cwiseAbs().maxCoeff(), 1e-14);
    for (Eigen::Index i = 0; i < 50; ++i)
        for (Eigen::Index j = 0; j < 50; ++j)
            if (std::abs(i - j) > 1) EXPECT_EQ(out.df_dq(i, j), 0.0);
}

TEST(CubicChain, RejectsZeroNodes) { EXPECT_THROW(make_cubic_chain(0, 1.0, 0.0, 0.0), ConfigError); }

TEST(CubicChain, NaturalFrequenciesMatchEigenvalues) {
    const auto m = make_cubic_chain(6, 1.0, 0.0, 0.0);
    Eigen::GeneralizedSelfAdjointEigenSolver<Matrix> es(m.stiffness, m.mass);
    for (Eigen::Index j = 0; j < 6; ++j) {
        const double exact = 2.0 - 2.0 * std::cos((j + 1) * std::numbers::pi / 7.0);
        EXPECT_NEAR(es.eigenvalues()(j), exact, 1e-10);
    }
}

TEST(Rhs, LinearOscillator) {
    const auto m = make_duffing(1.0, 0.0, 0.0);
    const Vector r = evaluate_rhs(m, vec({1.0, 0.0}), 0.37, vec({1.0}));
    EXPECT_NEAR(r(0), 0.0, 1e-15);
    EXPECT_NEAR(r(1), -1.0, 1e-15);
}

TEST(Rhs, DuffingUnitDisplacement) {
    const auto m = make_duffing(2.0, 0.0, 1.0);
    const Vector r = evaluate_rhs(m, vec({1.0, 0.0}), 0.0, vec({1.0}));
    EXPECT_NEAR(r(1), -3.0, 1e-15);
}

TEST(Rhs, ForcingEntersThroughDistribution) {
    const auto m = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{vec({0.5}), 1}, ForcingTerm{vec({0.2}), 2}});
    const double t = 0.8;
    const Vector omega = vec({1.1, 0.7});
    const Vector r = evaluate_rhs(m, vec({0.3, -0.4}), t, omega);
    const double expected = 0.5 * std::cos(1.1 * t) + 0.2 * std::cos(0.7 * t) - 0.1 * -0.4 - 0.3;
    EXPECT_NEAR(r(0), -0.4, 1e-15);
    EXPECT_NEAR(r(1), expected, 1e-14);
}

TEST(Registry, EveryModelJacobianMatchesFiniteDifferences) {
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (const auto& name : registered_models()) {
        ModelSpec spec{name, {}, {}};
        if (name == "cubic_chain") spec.params["n"] = 5;
        const auto m = make_model(spec);
        for (int trial = 0; trial < 20; ++trial) {
            Vector q(m.n), v(m.n);
            for (Eigen::Index i = 0; i < m.n; ++i) {
                q(i) = uni(rng);
                v(i) = uni(rng);
            }
            EXPECT_LT(nonlinear_jacobian_error(m, q, v), 1e-6) << name;
        }
    }
}

TEST(Registry, UnknownModelAndParameterRejected) {
    EXPECT_THROW(make_model({"pendulum", {}, {}}), ConfigError);
    EXPECT_THROW(make_model({"duffing", {{"beta", 1.0}}, {}}), ConfigError);
    EXPECT_THROW(make_model({"cubic_chain", {{"n", 2.5}}, {}}), ConfigError);
}

TEST(Registry, ForcingDofOutOfRange) {
    EXPECT_THROW(make_model({"cubic_chain", {{"n", 3}}, {ForcingSpec{1.0, 1, 5}}}), ConfigError);
}

TEST(FrequencyVectorTest, RatiosAndValidation) {
    FrequencyVector w(vec({2.0, 1.0, 0.5}), 1);
    EXPECT_EQ(w.d(), 3);
    EXPECT_DOUBLE_EQ(w.rho()(0), 0.5);
    EXPECT_DOUBLE_EQ(w.rho()(1), 0.25);
    EXPECT_THROW(FrequencyVector(vec({-1.0}), 1), ConfigError);
    EXPECT_THROW(FrequencyVector(vec({1.0}), 2), ConfigError);
}
