#include <cmath>

#include <gtest/gtest.h>

#include "fse/continuation.hpp"
#include "fse/oracle.hpp"

using namespace fse;

namespace {

Vector vec(std::initializer_list<double> v) {
    Vector out(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double x : v) out(i++) = x;
    return out;
}

AugmentedSystem circle() {
    AugmentedSystem sys;
    sys.size = 1;
    sys.evaluate = [](const Vector& x, double p, bool jac) {
        AugmentedEvaluation ev;
        ev.f = vec({x(0) * x(0) + p * p - 1.0});
        if (jac) {
            ev.fx = Matrix::Constant(1, 1, 2.0 * x(0));
            ev.fp = vec({2.0 * p});
        }
        return ev;
    };
    return sys;
}

} // namespace

TEST(Tangent, CircleAtRightmostPoint) {
    const Vector t = tangent_predict(Matrix::Constant(1, 1, 2.0), vec({0.0}), vec({0.0, 1.0}));
    EXPECT_NEAR(t(0), 0.0, 1e-15);
    EXPECT_NEAR(std::abs(t(1)), 1.0, 1e-15);
}

TEST(Tangent, ParameterComponentIsUnit) {
    const Vector t = tangent_predict(Matrix::Constant(1, 1, 2.0 * 0.6), vec({2.0 * 0.8}), vec({0.0, 1.0}));
    EXPECT_DOUBLE_EQ(std::abs(t(1)), 1.0);
    EXPECT_NEAR(t(0), -0.8 / 0.6, 1e-14);
}

TEST(Corrector, ExactSolutionNeedsNoCorrection) {
    const auto sys = circle();
    const auto r = orthogonal_correct(sys, vec({0.6}), 0.8, vec({-0.8 / 0.6, 1.0}), 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_EQ(r.iterations, 0);
    EXPECT_EQ(r.x(0), 0.6);
    EXPECT_EQ(r.p, 0.8);
}

TEST(Corrector, OvershootConvergesFast) {
    const auto sys = circle();
    // 10% outside the circle along the radius
    const auto r = orthogonal_correct(sys, vec({0.66}), 0.88, vec({-0.8 / 0.6, 1.0}), 1e-12);
    EXPECT_TRUE(r.converged);
    EXPECT_LE(r.iterations, 4);
    EXPECT_LT(std::abs(r.x(0) * r.x(0) + r.p * r.p - 1.0), 1e-12);
    EXPECT_LT(r.max_orthogonality, 1e-10);
}

TEST(Generic, CircleTraceStaysOnCircle) {
    const auto sys = circle();
    StepControl ctl;
    ctl.s0 = ctl.s_max = 0.05;
    ctl.max_points = 100;
    ctl.epsilon = 1e-13;
    const auto br = continue_branch(sys, vec({1.0}), 0.0, -2.0, 2.0, 1, ctl);
    ASSERT_GE(br.points.size(), 100u);
    double worst = 0.0;
    bool passed_top = false;
    for (const auto& pt : br.points) {
        worst = std::max(worst, std::abs(pt.x(0) * pt.x(0) + pt.p * pt.p - 1.0));
        if (pt.x(0) < 0.0) passed_top = true;
    }
    EXPECT_LT(worst, 1e-10);
    EXPECT_TRUE(passed_top) << "branch should go round the fold at p = 1";
}

TEST(Generic, InvalidStepBoundsRejected) {
    StepControl ctl;
    ctl.s0 = 1.0;
    ctl.s_max = 0.1;
    EXPECT_THROW(continue_branch(circle(), vec({1.0}), 0.0, -1.0, 1.0, 1, ctl), ConfigError);
    EXPECT_THROW(continue_branch(circle(), vec({1.0}), 0.0, -1.0, 1.0, 0, StepControl{}), ConfigError);
}

TEST(Generic, LandsExactlyOnRangeEnd) {
    AugmentedSystem line;
    line.size = 1;
    line.evaluate = [](const Vector& x, double p, bool jac) {
        AugmentedEvaluation ev;
        ev.f = vec({x(0) - 2.0 * p});
        if (jac) {
            ev.fx = Matrix::Constant(1, 1, 1.0);
            ev.fp = vec({-2.0});
        }
        return ev;
    };
    StepControl ctl;
    ctl.s0 = ctl.s_max = 0.3;
    const auto br = continue_branch(line, vec({0.0}), 0.0, 0.0, 1.0, 1, ctl);
    EXPECT_EQ(br.termination, "parameter range end reached");
    EXPECT_DOUBLE_EQ(br.points.back().p, 1.0);
}

TEST(Generic, CurvedBranchLandsExactlyOnRangeEnd) {
    StepControl ctl;
    ctl.s0 = ctl.s_max = 0.3;
    ctl.epsilon = 1e-13;
    const auto br = continue_branch(circle(), vec({1.0}), 0.0, -0.5, 0.7, 1, ctl);
    EXPECT_EQ(br.termination, "parameter range end reached");
    EXPECT_EQ(br.points.back().p, 0.7);
    EXPECT_LT(std::abs(br.points.back().x(0) * br.points.back().x(0) + 0.49 - 1.0), 1e-12);
}

TEST(Branch, EmptyParameterRange) {
    const auto m = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{Vector::Zero(2), FrequencyVector(vec({1.0}), 1)};
    ContinuationConfig cfg;
    cfg.p_start = cfg.p_end = 1.0;
    const auto br = run_branch(m, {}, seed, sc, ShootingOptions{}, cfg);
    EXPECT_TRUE(br.points.empty());
    EXPECT_FALSE(br.seed_failed);
}

TEST(Branch, ZeroForcingGivesZeroBranch) {
    const auto m = make_duffing(1.0, 0.1, 0.5, {ForcingTerm{vec({0.0}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{Vector::Zero(2), FrequencyVector(vec({0.8}), 1)};
    ContinuationConfig cfg;
    cfg.p_start = 0.8;
    cfg.p_end = 1.0;
    cfg.step.s0 = cfg.step.s_max = 0.05;
    ShootingOptions so;
    so.newmark.steps = 64;
    const auto br = run_branch(m, {}, seed, sc, so, cfg);
    ASSERT_FALSE(br.points.empty());
    for (const auto& pt : br.points) {
        EXPECT_EQ(pt.coeffs.z0.cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(pt.residual_norm, 0.0);
    }
}

TEST(Branch, LinearForcedMatchesFrequencyResponse) {
    const auto m = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{Vector::Zero(2), FrequencyVector(vec({0.6}), 1)};
    ContinuationConfig cfg;
    cfg.p_start = 0.6;
    cfg.p_end = 1.4;
    cfg.step.s0 = 0.05;
    cfg.step.s_max = 0.1;
    ShootingOptions so;
    so.newmark.steps = 8192;
    const auto br = run_branch(m, {}, seed, sc, so, cfg);
    EXPECT_EQ(br.termination, "parameter range end reached");
    for (const auto& pt : br.points) {
        const auto exact = linear_quasiperiodic_response(m, pt.coeffs.omega, sc);
        EXPECT_LT((pt.coeffs.z0 - exact.z0).cwiseAbs().maxCoeff(), 1e-5) << "p = " << pt.p;
        EXPECT_LT(pt.residual_norm, 1e-8);
    }
}

TEST(Branch, HardeningDuffingFold) {
    const auto m = make_duffing(1.0, 0.05, 1.0, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{Vector::Zero(2), FrequencyVector(vec({0.8}), 1)};
    ContinuationConfig cfg;
    cfg.p_start = 0.8;
    cfg.p_end = 2.0;
    cfg.step.s0 = 0.02;
    cfg.step.s_max = 0.05;
    cfg.step.max_points = 300;
    cfg.stability = true;
    ShootingOptions so;
    so.newmark.steps = 256;
    const auto br = run_branch(m, {}, seed, sc, so, cfg);
    ASSERT_GT(br.points.size(), 10u);
    int sign_changes = 0;
    for (std::size_t k = 2; k < br.points.size(); ++k) {
        const double a = br.points[k - 1].tangent(br.points[k - 1].tangent.size() - 1);
        const double b = br.points[k].tangent(br.points[k].tangent.size() - 1);
        if (a * b < 0.0) ++sign_changes;
    }
    EXPECT_GE(sign_changes, 2) << "expected the two folds of the hardening curve";
    bool unstable = false;
    for (const auto& pt : br.points) {
        EXPECT_LT(pt.residual_norm, 1e-8 * std::max(1.0, pt.coeffs.z0.norm()));
        if (pt.stability && pt.stability->flag == "unstable") unstable = true;
    }
    EXPECT_TRUE(unstable) << "middle branch between the folds is unstable";
}

TEST(Branch, TwoFrequencyTorusKeepsRatioAndConstraints) {
    const auto m = make_duffing(1.0, 0.05, 0.5, {ForcingTerm{vec({0.1}), 1}, ForcingTerm{vec({0.1}), 2}});
    const auto sc = HarmonicScheme::build({{0, 1, 2}});
    const double r = 1.0 / std::sqrt(2.0);
    TorusCoefficients seed{Vector::Zero(2 * sc.u_tilde), FrequencyVector(vec({1.3, 1.3 * r}), 2)};
    ContinuationConfig cfg;
    cfg.p_start = 1.3;
    cfg.p_end = 1.5;
    cfg.step.s0 = cfg.step.s_max = 0.05;
    ShootingOptions so;
    so.newmark.steps = 256;
    const auto br = run_branch(m, {}, seed, sc, so, cfg);
    ASSERT_FALSE(br.points.empty());
    for (const auto& pt : br.points) {
        EXPECT_LT(std::abs(pt.coeffs.omega[2] - r * pt.coeffs.omega[1]), 1e-12);
        EXPECT_LT(pt.max_constraint, 1e-10);
        EXPECT_LT(pt.max_orthogonality, 1e-10);
        if (pt.tangent.size() > 0) EXPECT_DOUBLE_EQ(std::abs(pt.tangent(pt.tangent.size() - 1)), 1.0);
    }
}

TEST(Branch, SeedFailureReportedDistinctly) {
    const auto m = make_duffing(1.0, 0.0, 50.0, {ForcingTerm{vec({5.0}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{vec({30.0, 30.0}), FrequencyVector(vec({1.0}), 1)};
    ContinuationConfig cfg;
    cfg.p_start = 1.0;
    cfg.p_end = 1.1;
    ShootingOptions so;
    so.newmark.steps = 4;
    so.newmark.max_iterations = 2;
    const auto br = run_branch(m, {}, seed, sc, so, cfg);
    EXPECT_TRUE(br.seed_failed);
    EXPECT_TRUE(br.points.empty());
}

TEST(Branch, CaseAndParameterMustAgree) {
    const auto m = make_duffing(1.0, 0.1, 0.0, {ForcingTerm{vec({0.1}), 1}});
    const auto sc = HarmonicScheme::build({});
    TorusCoefficients seed{Vector::Zero(2), FrequencyVector(vec({1.0}), 1)};
    ContinuationConfig cfg;
    cfg.parameter = "k";
    cfg.deficit_case = 1;
    EXPECT_THROW(run_branch(m, {}, seed, sc, ShootingOptions{}, cfg), ConfigError);
}
