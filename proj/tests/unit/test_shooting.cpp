#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "fse/oracle.hpp"
#include "fse/shooting.hpp"

using namespace fse;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

SecondOrderModel duffing2() {
    return make_duffing(1.0, 0.05, 0.5, {ForcingTerm{vec({0.1}), 1}, ForcingTerm{vec({0.1}), 2}});
}

FrequencyVector omega2(double w1 = 1.3) { return FrequencyVector(vec({w1, w1 / std::sqrt(2.0)}), 2); }

ShootingOptions opts(int s1) {
    ShootingOptions o;
    o.newmark.steps = s1;
    return o;
}

TorusCoefficients random_coeffs(Eigen::Index size, const FrequencyVector& w, double scale, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    TorusCoefficients c{Vector(size), w};
    for (Eigen::Index i = 0; i < size; ++i) c.z0(i) = scale * uni(rng);
    return c;
}

// Converged Duffing torus shared by several tests.
const CorrectionResult& converged_duffing() {
    static const CorrectionResult res = [] {
        const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
        const auto w = omega2();
        TorusCoefficients seed{Vector::Zero(2 * sc.u_tilde), w};
        return newton_correct(duffing2(), seed, sc, opts(512), deficit_setup(1, w), NewtonOptions{});
    }();
    return res;
}

} // namespace

TEST(Transforms, SampleRoundTrip) {
    const auto sc = HarmonicScheme::build({{0, 1, 2}, {0, 1}});
    const auto c = random_coeffs(4 * sc.u_tilde, FrequencyVector(vec({1.0, 0.5, 0.3}), 1), 1.0, 3);
    EXPECT_LT((samples_to_coefficients(coefficients_to_samples(c.z0, sc), sc) - c.z0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Evaluate, ZeroSolutionOfUnforcedLinearSystem) {
    const auto m = make_duffing(1.0, 0.1, 0.0);
    const auto sc = HarmonicScheme::build({{0, 1}});
    TorusCoefficients c{Vector::Zero(2 * sc.u_tilde), FrequencyVector(vec({1.0, 0.6}), 2)};
    const auto ev = evaluate(m, c, sc, opts(64));
    EXPECT_EQ(ev.residual.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Evaluate, LinearAnalyticCoefficientsGiveTruncationLevelResidual) {
    const auto m = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{vec({0.1}), 1}, ForcingTerm{vec({0.08}), 2}});
    const auto sc = HarmonicScheme::build({{0, 1}});
    const auto w = omega2(1.2);
    const auto c = linear_quasiperiodic_response(m, w, sc);
    const double h = kTwoPi / 2048;
    const auto ev = evaluate(m, c, sc, opts(2048));
    // second-order truncation relative to the response size
    EXPECT_LT(ev.residual.norm(), 5.0 * h * h * c.z0.norm());
}

TEST(Evaluate, DegeneratesToClassicalShootingForPeriodicScheme) {
    const auto m = make_duffing(1.0, 0.05, 0.5, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients c{vec({0.3, -0.2}), FrequencyVector(vec({1.1}), 1)};
    const auto ev = evaluate(m, c, sc, opts(256));
    NewmarkOptions no;
    no.steps = 256;
    const auto tr = newmark_integrate(m, c.z0, vec({1.1}), Vector(0), no);
    EXPECT_EQ(sc.u_tilde, 1);
    EXPECT_EQ(ev.z_end_rotated, ev.z_end);
    EXPECT_LT((ev.residual - (tr.z_end - c.z0)).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_LT((ev.jac_z0 - (tr.psi - Matrix::Identity(2, 2))).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(Evaluate, RotationConsistency) {
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    const auto w = omega2();
    const auto c = random_coeffs(2 * sc.u_tilde, w, 0.1, 4);
    const auto ev = evaluate(duffing2(), c, sc, opts(128));
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uni(0.0, kTwoPi);
    for (int t = 0; t < 10; ++t) {
        const Vector phi = vec({uni(rng)});
        const Vector a = reconstruct(ev.z_end_rotated, sc, phi);
        const Vector b = reconstruct(ev.z_end, sc, phi - kTwoPi * w.rho());
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Evaluate, RejectsMismatchedDimensions) {
    const auto sc = HarmonicScheme::build({{0, 1}});
    TorusCoefficients c{Vector::Zero(5), omega2()};
    EXPECT_THROW(evaluate(duffing2(), c, sc, opts(32)), ConfigError);
    TorusCoefficients c3{Vector::Zero(2 * sc.u_tilde), FrequencyVector(vec({1.0, 0.5, 0.2}), 1)};
    EXPECT_THROW(evaluate(duffing2(), c3, sc, opts(32)), ConfigError);
}

TEST(Jacobian, DuffingTwoFrequencyMatchesFiniteDifferences) {
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    const auto c = random_coeffs(2 * sc.u_tilde, omega2(), 0.1, 1);
    const auto rep = jacobian_fd_check(duffing2(), c, sc, opts(512), 1e-6);
    EXPECT_LT(rep.z0_error, 1e-5);
    EXPECT_LT(rep.omega_error, 1e-5);
}

TEST(Jacobian, LinearModelNearlyExact) {
    const auto m = make_cubic_chain(2, 1.0, 0.02, 0.0, {ForcingTerm{vec({0.1, 0.0}), 1}});
    const auto sc = HarmonicScheme::build({{0, 1, 2}});
    const auto c = random_coeffs(4 * sc.u_tilde, FrequencyVector(vec({1.1, 0.77}), 1), 0.2, 2);
    EXPECT_LT(jacobian_fd_check(m, c, sc, opts(256), 1e-5).z0_error, 1e-8);
}

TEST(Jacobian, ReleasedInternalFrequencyColumn) {
    const auto m = make_van_der_pol(0.2, 1.0, {ForcingTerm{vec({0.05}), 1}});
    const auto sc = HarmonicScheme::build({{0, 1, 2}});
    const auto c = random_coeffs(2 * sc.u_tilde, FrequencyVector(vec({2.7, 1.0}), 1), 0.3, 6);
    EXPECT_LT(jacobian_fd_check(m, c, sc, opts(256), 1e-6, {2}).omega_error, 1e-5);
}

TEST(Jacobian, WorkerCountDoesNotChangeResults) {
    const auto sc = HarmonicScheme::build({{0, 1, 2}});
    const auto c = random_coeffs(2 * sc.u_tilde, omega2(), 0.1, 12);
    auto o1 = opts(128), o4 = opts(128);
    o4.workers = 4;
    const auto a = evaluate(duffing2(), c, sc, o1);
    const auto b = evaluate(duffing2(), c, sc, o4);
    EXPECT_TRUE((a.jac_z0.array() == b.jac_z0.array()).all());
    EXPECT_TRUE((a.jac_omega.array() == b.jac_omega.array()).all());
    EXPECT_TRUE((a.residual.array() == b.residual.array()).all());
}

TEST(PhaseConditions, ConstantTorusIsDegenerate) {
    const auto sc = HarmonicScheme::build({{0, 1}});
    Vector z = Vector::Zero(2 * sc.u_tilde);
    z(0) = 0.4;
    z(sc.u_tilde) = -0.1;
    const auto rows = phase_condition_rows(z, sc, duffing2(), omega2().omega(), {2});
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_TRUE(rows[0].degenerate);
    EXPECT_EQ(rows[0].row.cwiseAbs().maxCoeff(), 0.0);
}

TEST(PhaseConditions, CosineComponentSelectsSineSlot) {
    const auto sc = HarmonicScheme::build({{0, 1}});
    Vector z = Vector::Zero(2 * sc.u_tilde);
    z(1) = 0.5; // q = 0.5 cos φ2
    const auto rows = phase_condition_rows(z, sc, duffing2(), omega2().omega(), {2});
    Eigen::RowVectorXd expected = Eigen::RowVectorXd::Zero(z.size());
    expected(2) = -1.0;
    EXPECT_FALSE(rows[0].degenerate);
    EXPECT_LT((rows[0].row - expected).cwiseAbs().maxCoeff(), 1e-15);
}

TEST(PhaseConditions, FirstAngleRowIsVectorFieldOnSection) {
    // for the undamped unforced oscillator z' = (u, -q/ω1²)
    const auto m = make_duffing(1.0, 0.0, 0.0);
    const auto sc = HarmonicScheme::build({{0, 1}});
    Vector z(2 * sc.u_tilde);
    z << 0.2, 0.3, -0.1, 0.05, 0.4, 0.0;
    const double w = 1.5;
    const auto rows = phase_condition_rows(z, sc, m, vec({w, 0.4}), {1});
    Vector expected(z.size());
    expected << z.segment(3, 3), -z.segment(0, 3) / (w * w);
    EXPECT_LT((rows[0].row.transpose() - expected.normalized()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(FrequencyConditions, RowLayout) {
    const double r = 1.0 / std::sqrt(2.0);
    const auto row = frequency_condition_row(2, 2, r);
    EXPECT_DOUBLE_EQ(row(0), -r);
    EXPECT_DOUBLE_EQ(row(1), 1.0);
    EXPECT_TRUE(frequency_condition_rows(FrequencyVector(vec({1.0, 0.5}), 1), Vector(0), {}).empty());
}

TEST(DeficitCases, SetupsFillTheDeficit) {
    const auto s1 = deficit_setup(1, FrequencyVector(vec({1.0, 0.7, 0.3}), 2));
    EXPECT_EQ(s1.released, (std::vector<int>{2, 3}));
    EXPECT_EQ(s1.phase_indices, (std::vector<int>{3}));
    EXPECT_EQ(s1.frequency_conditions, (std::vector<int>{2}));
    const auto s2 = deficit_setup(2, FrequencyVector(vec({1.0, 0.7, 0.3}), 2));
    EXPECT_EQ(s2.released, (std::vector<int>{3}));
    const auto s3 = deficit_setup(3, FrequencyVector(vec({1.0, 0.7}), 0));
    EXPECT_EQ(s3.released, (std::vector<int>{1, 2}));
    EXPECT_EQ(s3.phase_indices, (std::vector<int>{1, 2}));
    EXPECT_THROW(deficit_setup(3, FrequencyVector(vec({1.0}), 1)), ConfigError);
    EXPECT_THROW(deficit_setup(4, FrequencyVector(vec({1.0}), 1)), ConfigError);
}

TEST(Newton, DuffingTwoFrequencyTorusFromZeroSeed) {
    const auto& res = converged_duffing();
    EXPECT_LT(res.residual_norm, 1e-8);
    EXPECT_LE(res.iterations, 10);
    EXPECT_LT(res.evaluation.residual.norm(), 1e-8);
    EXPECT_NEAR(res.coeffs.omega[2], res.coeffs.omega[1] / std::sqrt(2.0), 1e-12);
}

TEST(Newton, ConvergedPointIsFixed) {
    const auto& base = converged_duffing();
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    const auto res = newton_correct(duffing2(), base.coeffs, sc, opts(512), deficit_setup(1, base.coeffs.omega),
                                    NewtonOptions{});
    EXPECT_LE(res.iterations, 1);
    EXPECT_LT((res.coeffs.z0 - base.coeffs.z0).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Newton, PerturbedPointConvergesQuickly) {
    const auto& base = converged_duffing();
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    auto start = base.coeffs;
    const auto noise = random_coeffs(start.z0.size(), start.omega, 1e-3, 17);
    start.z0 += noise.z0;
    const auto res = newton_correct(duffing2(), start, sc, opts(512), deficit_setup(1, start.omega), NewtonOptions{});
    EXPECT_LE(res.iterations, 5);
    // quadratic-looking decay: each late residual well below the square-scaled previous one
    ASSERT_GE(res.history.size(), 3u);
    for (std::size_t k = 1; k + 1 < res.history.size(); ++k) EXPECT_LT(res.history[k], 0.1 * res.history[k - 1]);
}

TEST(Newton, CouplingConditionHoldsAtGridSamples) {
    const auto& res = converged_duffing();
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    const auto ev = evaluate(duffing2(), res.coeffs, sc, opts(512));
    const Vector rho = res.coeffs.omega.rho();
    for (Eigen::Index s = 0; s < sc.s_tilde; ++s) {
        const Vector start = reconstruct(res.coeffs.z0, sc, sc.sample(s));
        const Vector end = reconstruct(ev.z_end, sc, sc.sample(s) - kTwoPi * rho);
        EXPECT_LT((start - end).cwiseAbs().maxCoeff(), 1e-8);
    }
}

TEST(Newton, PeriodicDuffingMatchesClassicalShooting) {
    const auto m = make_duffing(1.0, 0.05, 0.5, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    const FrequencyVector w(vec({1.2}), 1);
    SecondOrderModel lin = m;
    lin.nonlinear_force = nullptr;
    const auto seed = linear_quasiperiodic_response(lin, w, sc);
    const auto res = newton_correct(m, seed, sc, opts(2048), DeficitSetup{}, NewtonOptions{});
    const auto orbit = classical_shooting(m, 1.2, vec({seed.z0(0), 1.2 * seed.z0(1)}));
    EXPECT_NEAR(res.coeffs.z0(0), orbit.x0(0), 1e-5);
    EXPECT_NEAR(1.2 * res.coeffs.z0(1), orbit.x0(1), 1e-5);
}

TEST(Newton, IterationLimitRaisesNonConvergence) {
    const auto sc = HarmonicScheme::build({{0, 1, 2, 3}});
    const auto w = omega2();
    TorusCoefficients seed{Vector::Zero(2 * sc.u_tilde), w};
    NewtonOptions no;
    no.max_iterations = 1;
    try {
        newton_correct(duffing2(), seed, sc, opts(256), deficit_setup(1, w), no);
        FAIL() << "expected NonConvergence";
    } catch (const NonConvergence& e) {
        EXPECT_GT(e.final_residual(), 0.0);
    }
}

TEST(Newton, MissingPhaseInformationIsRankDeficient) {
    // autonomous oscillator with a constant section: phase rows vanish
    const auto m = make_van_der_pol(0.2, 1.0);
    const auto sc = HarmonicScheme::build({{0, 1}});
    const FrequencyVector w(vec({1.0, 0.5}), 0);
    TorusCoefficients seed{Vector::Zero(2 * sc.u_tilde), w};
    seed.z0(0) = 1.0;
    EXPECT_THROW(newton_correct(m, seed, sc, opts(64), deficit_setup(3, w), NewtonOptions{}), RankDeficiency);
}

TEST(ShootingSystemTest, ConstraintCountMustMatchDeficit) {
    const auto sc = HarmonicScheme::build({{0, 1}});
    DeficitSetup bad;
    bad.released = {2};
    EXPECT_THROW(ShootingSystem(duffing2(), sc, opts(32), bad, omega2()), ConfigError);
}
