#include <gtest/gtest.h>

#include <cmath>

#include "gnx/certify.hpp"
#include "gnx/problems.hpp"

using gnx::Matrix;
using gnx::Vector;

namespace {

gnx::MajorantSpec lipschitz_for(const gnx::CatalogEntry& entry) {
  return gnx::make_lipschitz_majorant(*entry.lipschitz_K);
}

// Hand-built trace whose error grows at step 1 while every recorded
// hypothesis stays clean; no admissible parameters can certify it.
gnx::IterationTrace synthetic_expanding_trace(const Vector& x_star) {
  gnx::IterationTrace trace;
  auto make_record = [&](int k, Vector x) {
    gnx::StepRecord rec;
    rec.k = k;
    rec.x = std::move(x);
    rec.step_norm = 0.1;
    rec.grad_norm = 1.0;
    rec.error_to_star = (rec.x - x_star).norm();
    rec.theta = 0.0;
    rec.cond_PM = 1.0;
    rec.residual_norm_P = 0.0;
    rec.bound_rhs_P = 0.0;
    rec.omega1_observed = 1.0;
    rec.omega2_observed = 0.0;
    return rec;
  };
  Vector step(2);
  step << 0.05, 0.0;
  trace.records.push_back(make_record(0, x_star + step));        // e0 = 0.05
  trace.records.push_back(make_record(1, x_star + 3.0 * step));  // e1 = 0.15 (expansion)
  trace.final_point = x_star + 2.0 * step;
  trace.final_grad_norm = 0.5;
  trace.final_error_to_star = 0.1;
  trace.termination = gnx::Termination::max_iters;
  return trace;
}

}  // namespace

TEST(CertifyTrace, AffineExactRunIsCertified) {
  const auto& entry = gnx::find_problem("affine_consistent");
  gnx::SolverConfig config;
  Vector x0 = gnx::point_at_distance(entry.problem.domain_center, 1.0, 3);
  auto trace = gnx::iterate(entry.problem, config, x0);
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, lipschitz_for(entry),
                                 entry.constants, {0.0, 1.0, 0.0});
  EXPECT_EQ(cert.overall, gnx::CertStatus::certified);
  ASSERT_EQ(cert.per_step.size(), 1u);
  EXPECT_LE(cert.per_step[0].observed_error, cert.per_step[0].q2_bound + 1e-12);
}

TEST(CertifyTrace, ZeroResidualCatalogRunCertifiedAndTight) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  auto spec = lipschitz_for(entry);
  gnx::MethodParams params{0.0, 1.0, 0.0};
  auto rep = gnx::radius(spec, entry.constants, params);
  ASSERT_TRUE(rep.feasible);
  gnx::SolverConfig config;
  Vector x0 = gnx::point_at_distance(entry.problem.domain_center, 0.5 * rep.ball_radius, 21);
  auto trace = gnx::iterate(entry.problem, config, x0);
  EXPECT_EQ(trace.termination, gnx::Termination::converged_grad);
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, spec, entry.constants,
                                 params);
  EXPECT_EQ(cert.overall, gnx::CertStatus::certified);
  // the first-step bound is meaningful, not vacuous
  ASSERT_FALSE(cert.per_step.empty());
  EXPECT_GT(cert.per_step[0].observed_error, 1e-3 * cert.per_step[0].q2_bound);
}

TEST(CertifyTrace, X0OutsideBallIsNotApplicable) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  auto spec = lipschitz_for(entry);
  gnx::SolverConfig config;
  Vector x0(2);
  x0 << 0.8, 0.0;  // inside the domain ball (kappa = 1) but outside r = 2/3
  auto trace = gnx::iterate(entry.problem, config, x0);
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, spec, entry.constants,
                                 {0.0, 1.0, 0.0});
  EXPECT_EQ(cert.overall, gnx::CertStatus::not_applicable);
}

TEST(CertifyTrace, X0AtStationaryPointIsNotApplicable) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  gnx::IterationTrace trace;
  trace.final_point = *entry.problem.stationary_point;
  trace.final_grad_norm = 0.0;
  trace.termination = gnx::Termination::converged_grad;
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, lipschitz_for(entry),
                                 entry.constants, {0.0, 1.0, 0.0});
  EXPECT_EQ(cert.overall, gnx::CertStatus::not_applicable);
}

TEST(CertifyTrace, InfeasibleParametersAreNotApplicable) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  gnx::SolverConfig config;
  Vector x0 = gnx::point_at_distance(entry.problem.domain_center, 0.1, 23);
  auto trace = gnx::iterate(entry.problem, config, x0);
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, lipschitz_for(entry),
                                 entry.constants, {0.0, 1.5, 0.999});
  EXPECT_EQ(cert.overall, gnx::CertStatus::not_applicable);
}

TEST(CertifyTrace, SyntheticExpansionIsViolated) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  const Vector& xs = *entry.problem.stationary_point;
  auto trace = synthetic_expanding_trace(xs);
  auto cert = gnx::certify_trace(trace, xs, lipschitz_for(entry), entry.constants,
                                 {0.0, 1.0, 0.0});
  EXPECT_EQ(cert.overall, gnx::CertStatus::violated);
}

// Inflating omega2 in the certifier loosens the bound but cannot flip a trace
// with a genuinely expanding step to certified.
TEST(CertifyTrace, InflatedOmega2DoesNotFlipViolatedTrace) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  const Vector& xs = *entry.problem.stationary_point;
  auto trace = synthetic_expanding_trace(xs);
  double observed_omega2 = 0.0;
  for (const auto& rec : trace.records)
    observed_omega2 = std::max(observed_omega2, rec.omega2_observed);
  double inflated = std::max(0.2, 2.0 * observed_omega2);
  auto cert = gnx::certify_trace(trace, xs, lipschitz_for(entry), entry.constants,
                                 {0.0, 1.0 + inflated, inflated});
  EXPECT_NE(cert.overall, gnx::CertStatus::certified);
  EXPECT_EQ(cert.overall, gnx::CertStatus::violated);
}

TEST(CertifyTrace, ForcingViolationInRecordsIsNotApplicable) {
  const auto& entry = gnx::find_problem("trig_newton");
  gnx::SolverConfig config;
  config.mode = gnx::SolveMode::inexact;
  config.vartheta = 0.1;
  config.forcing = gnx::ForcingPolicy::constant(5.0);
  config.residual_strategy = gnx::ResidualStrategy::random_scaled;
  config.enforce_forcing = false;
  config.seed = 31;
  config.max_iters = 4;
  Vector x0 = gnx::point_at_distance(entry.problem.domain_center, 0.05, 37);
  gnx::IterationTrace trace;
  try {
    trace = gnx::iterate(entry.problem, config, x0);
  } catch (const gnx::Error&) {
    GTEST_SKIP() << "run left the domain before recording";
  }
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, lipschitz_for(entry),
                                 entry.constants, {0.1, 1.0, 0.0});
  EXPECT_NE(cert.overall, gnx::CertStatus::certified);
}

// The bound recurrence b_{k+1} = q b_k^2 + l b_k contracts strictly to zero
// from any b_0 inside the ball.
TEST(CertifyTrace, BoundRecurrenceDecreasesToZero) {
  auto spec = gnx::make_lipschitz_majorant(1.0);
  gnx::ProblemConstants consts{0.05, 1.0, gnx::kInf};
  gnx::MethodParams params{0.1, 1.1, 0.05};
  auto rep = gnx::radius(spec, consts, params);
  ASSERT_TRUE(rep.feasible);
  double b = 0.9 * rep.ball_radius;
  auto q = gnx::q2_coefficients(spec, consts, params, b);
  for (int k = 0; k < 400; ++k) {
    double next = q.quadratic * b * b + q.linear * b;
    EXPECT_LT(next, b);
    b = next;
  }
  EXPECT_LT(b, 1e-10);
}

TEST(LemmaChecks, PinvBoundAtStationaryPointHasZeroSlack) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  std::vector<Vector> samples{*entry.problem.stationary_point};
  auto report = gnx::check_pinv_bound_lemma(entry.problem, lipschitz_for(entry),
                                            entry.constants, samples);
  EXPECT_TRUE(report.pass);
  EXPECT_EQ(report.sample_count, 1);
  EXPECT_NEAR(report.worst_slack, 0.0, 1e-9);
}

TEST(LemmaChecks, PinvBoundOnCatalogSamples) {
  for (const char* id : {"quadratic_gamma", "expfit_zero", "expfit_residual"}) {
    const auto& entry = gnx::find_problem(id);
    auto spec = lipschitz_for(entry);
    double limit = std::min(gnx::compute_nu(spec, entry.constants), entry.constants.kappa);
    auto samples = gnx::sample_ball(*entry.problem.stationary_point, 0.999 * limit, 120, 91);
    auto report = gnx::check_pinv_bound_lemma(entry.problem, spec, entry.constants, samples);
    EXPECT_TRUE(report.pass) << id << " worst slack " << report.worst_slack;
    EXPECT_GE(report.sample_count, 100) << id;
  }
}

TEST(LemmaChecks, LinearizationOnAffineIsExactlyZero) {
  const auto& entry = gnx::find_problem("affine_inconsistent");
  auto samples = gnx::sample_ball(*entry.problem.stationary_point, 1.5, 50, 97);
  auto report = gnx::check_linearization_lemma(entry.problem, lipschitz_for(entry), samples);
  EXPECT_TRUE(report.pass);
  // E_F vanishes for affine F, so the slack equals the bound e_f >= 0
  EXPECT_GE(report.worst_slack, 0.0);
}

// For F(x) = K x^2 / 2 in one dimension the linearization bound is attained
// with equality.
TEST(LemmaChecks, OneDimensionalQuadraticIsTight) {
  const double K = 2.0;
  gnx::Problem p;
  p.dimension_in = 1;
  p.dimension_out = 1;
  p.residual = [K](const Vector& x) { return Vector(0.5 * K * x.array().square()); };
  p.jacobian = [K](const Vector& x) { return Matrix(K * x.asDiagonal()); };
  Vector star = Vector::Zero(1);
  p.stationary_point = star;
  p.domain_center = star;
  p.domain_radius = 1.0;
  auto spec = gnx::make_lipschitz_majorant(K);
  auto samples = gnx::sample_ball(star, 0.99, 150, 101);
  auto report = gnx::check_linearization_lemma(p, spec, samples);
  EXPECT_TRUE(report.pass);
  EXPECT_NEAR(report.worst_slack, 0.0, 1e-12);
}

TEST(LemmaChecks, StepBoundOnCatalogSamples) {
  for (const char* id : {"quadratic_gamma", "expfit_residual", "trig_newton"}) {
    const auto& entry = gnx::find_problem(id);
    auto spec = lipschitz_for(entry);
    double limit = std::min(gnx::compute_nu(spec, entry.constants), entry.constants.kappa);
    auto samples = gnx::sample_ball(*entry.problem.stationary_point, 0.999 * limit, 120, 103);
    auto report = gnx::check_step_lemma(entry.problem, spec, entry.constants, samples);
    EXPECT_TRUE(report.pass) << id << " worst slack " << report.worst_slack;
    EXPECT_GE(report.sample_count, 100) << id;
  }
}

TEST(LemmaChecks, StepVanishesAtStationaryPointEvenWithResidual) {
  const auto& entry = gnx::find_problem("expfit_residual");
  const Vector& xs = *entry.problem.stationary_point;
  Vector step = gnx::gauss_newton_step(entry.problem.jacobian(xs), entry.problem.residual(xs));
  EXPECT_LT(step.norm(), 1e-12);
  std::vector<Vector> samples{xs};
  auto report =
      gnx::check_step_lemma(entry.problem, lipschitz_for(entry), entry.constants, samples);
  EXPECT_TRUE(report.pass);
  EXPECT_GE(report.worst_slack, -1e-12);
}

TEST(LemmaChecks, SmaleMajorantOnQuadraticEntry) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  auto spec = gnx::make_smale_majorant(*entry.smale_gamma);
  double limit = std::min({gnx::compute_nu(spec, entry.constants), entry.constants.kappa,
                           spec.domain_bound});
  auto samples = gnx::sample_ball(*entry.problem.stationary_point, 0.999 * limit, 120, 107);
  EXPECT_TRUE(gnx::check_pinv_bound_lemma(entry.problem, spec, entry.constants, samples).pass);
  EXPECT_TRUE(gnx::check_linearization_lemma(entry.problem, spec, samples).pass);
  EXPECT_TRUE(gnx::check_step_lemma(entry.problem, spec, entry.constants, samples).pass);
}

// The quadratic entry supports both majorant families; a run started inside
// the smaller of the two radii certifies under each.
TEST(CertifyTrace, QuadraticEntryCertifiesUnderBothFamilies) {
  const auto& entry = gnx::find_problem("quadratic_gamma");
  auto lip = gnx::make_lipschitz_majorant(*entry.lipschitz_K);
  auto smale = gnx::make_smale_majorant(*entry.smale_gamma);
  gnx::MethodParams params{0.0, 1.0, 0.0};
  double r_lip = gnx::radius(lip, entry.constants, params).ball_radius;
  double r_smale = gnx::radius(smale, entry.constants, params).ball_radius;
  double r_min = std::min(r_lip, r_smale);
  gnx::SolverConfig config;
  Vector x0 = gnx::point_at_distance(*entry.problem.stationary_point, 0.8 * r_min, 51);
  auto trace = gnx::iterate(entry.problem, config, x0);
  EXPECT_EQ(gnx::certify_trace(trace, *entry.problem.stationary_point, lip, entry.constants,
                               params)
                .overall,
            gnx::CertStatus::certified);
  EXPECT_EQ(gnx::certify_trace(trace, *entry.problem.stationary_point, smale, entry.constants,
                               params)
                .overall,
            gnx::CertStatus::certified);
}

TEST(CalibrateModified, ProducesCertifiedRun) {
  const auto& entry = gnx::find_problem("trig_newton");
  auto spec = lipschitz_for(entry);
  double fraction = 0.9;
  auto params = gnx::calibrate_modified_params(entry.problem, spec, entry.constants, fraction,
                                               424242);
  auto rep = gnx::radius(spec, entry.constants, params);
  ASSERT_TRUE(rep.feasible);
  gnx::SolverConfig config;
  config.mode = gnx::SolveMode::modified_gn;
  Vector x0 = gnx::point_at_distance(*entry.problem.stationary_point,
                                     fraction * rep.ball_radius, 424242);
  auto trace = gnx::iterate(entry.problem, config, x0);
  EXPECT_EQ(trace.termination, gnx::Termination::converged_grad);
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, spec, entry.constants,
                                 params);
  EXPECT_EQ(cert.overall, gnx::CertStatus::certified);
}

int main(int argc, char** argv) {
  ::testing::InitGoogleTest(&argc, argv);
  return RUN_ALL_TESTS();
}
