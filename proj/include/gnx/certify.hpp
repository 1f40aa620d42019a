#pragma once

#include <algorithm>
#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "gnx/linops.hpp"
#include "gnx/majorant.hpp"
#include "gnx/solver.hpp"

namespace gnx {

enum class CertStatus { certified, violated, not_applicable };

struct StepCheck {
  int k = 0;
  double observed_error = 0.0;
  double q2_bound = 0.0;
  bool contraction_ok = false;
  bool in_ball_ok = false;
};

/// Verdict on a full iteration trace against the per-step error bound,
/// strict contraction, and ball confinement.
struct Certificate {
  std::vector<StepCheck> per_step;
  CertStatus overall = CertStatus::not_applicable;
  std::vector<std::string> violation_details;
};

/// Aggregate result of sampling one of the majorant/operator inequalities.
struct LemmaCheckReport {
  std::string lemma_id;
  int sample_count = 0;
  double worst_slack = kInf;  // min over samples of bound - observed
  bool pass = false;
};

namespace detail {

inline constexpr double kCertSlack = 1e-9;  // relative headroom on every inequality

/// Additive floor absorbing the double-precision plateau of error norms.
inline double noise_floor(const Vector& x_star) {
  return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, x_star.norm());
}

inline std::string fmt(double v) { return std::to_string(v); }

}  // namespace detail

inline const char* to_string(CertStatus s) {
  switch (s) {
    case CertStatus::certified: return "certified";
    case CertStatus::violated: return "violated";
    case CertStatus::not_applicable: return "not_applicable";
  }
  return "?";
}

/// Uniform samples from the open ball B(center, radius), seeded.
inline std::vector<Vector> sample_ball(const Vector& center, double radius, int count,
                                       std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> radial(0.0, 1.0);
  std::vector<Vector> points;
  points.reserve(count);
  for (int i = 0; i < count; ++i) {
    Vector dir(center.size());
    double norm = 0.0;
    do {
      for (int j = 0; j < center.size(); ++j) dir(j) = normal(gen);
      norm = dir.norm();
    } while (norm == 0.0);
    double scale = radius * std::pow(radial(gen), 1.0 / center.size()) / norm;
    points.push_back(center + scale * dir);
  }
  return points;
}

/// Checks a trace against the theorem's guarantees with the q2 coefficients
/// frozen at t0 = ||x_0 - x_*||. Hypothesis failures (infeasible parameters,
/// x_0 outside the ball, recorded forcing or omega budgets exceeded) yield
/// not_applicable; bound/contraction/confinement failures yield violated.
inline Certificate certify_trace(const IterationTrace& trace, const Vector& x_star,
                                 const MajorantSpec& spec, const ProblemConstants& consts,
                                 const MethodParams& params) {
  Certificate cert;
  RadiusReport rep = radius(spec, consts, params);
  if (!rep.feasible) {
    cert.overall = CertStatus::not_applicable;
    cert.violation_details = rep.diagnostics;
    return cert;
  }

  std::vector<double> errors;
  errors.reserve(trace.records.size() + 1);
  for (const auto& rec : trace.records) errors.push_back((rec.x - x_star).norm());
  errors.push_back((trace.final_point - x_star).norm());

  double e0 = errors.front();
  if (!(e0 > 0.0)) {
    cert.overall = CertStatus::not_applicable;
    cert.violation_details.push_back("x0 coincides with the stationary point");
    return cert;
  }
  if (!(e0 < rep.ball_radius)) {
    cert.overall = CertStatus::not_applicable;
    cert.violation_details.push_back("x0 outside the certified ball: ||x0 - x_*|| = " +
                                     detail::fmt(e0) + " >= r = " +
                                     detail::fmt(rep.ball_radius));
    return cert;
  }

  bool applicable = true;
  for (const auto& rec : trace.records) {
    if (rec.theta * rec.cond_PM > params.vartheta * (1.0 + detail::kCertSlack) + 1e-300) {
      applicable = false;
      cert.violation_details.push_back(
          "forcing condition violated at k=" + std::to_string(rec.k) + ": theta*cond = " +
          detail::fmt(rec.theta * rec.cond_PM) + " > vartheta = " + detail::fmt(params.vartheta));
    }
    if (rec.residual_norm_P > rec.bound_rhs_P * (1.0 + detail::kCertSlack) + 1e-300) {
      applicable = false;
      cert.violation_details.push_back("residual condition violated at k=" +
                                       std::to_string(rec.k));
    }
    if (rec.omega1_observed > params.omega1 * (1.0 + detail::kCertSlack) + 1e-10 ||
        rec.omega2_observed > params.omega2 * (1.0 + detail::kCertSlack) + 1e-10) {
      applicable = false;
      cert.violation_details.push_back(
          "operator approximation bounds exceeded at k=" + std::to_string(rec.k) +
          ": observed (" + detail::fmt(rec.omega1_observed) + ", " +
          detail::fmt(rec.omega2_observed) + ") vs budget (" + detail::fmt(params.omega1) +
          ", " + detail::fmt(params.omega2) + ")");
    }
  }

  Q2Coefficients q2 = q2_coefficients(spec, consts, params, e0);
  const double floor = detail::noise_floor(x_star);
  bool all_ok = true;
  for (size_t k = 0; k + 1 < errors.size(); ++k) {
    StepCheck check;
    check.k = static_cast<int>(k);
    check.observed_error = errors[k + 1];
    check.q2_bound = q2.quadratic * errors[k] * errors[k] + q2.linear * errors[k];
    bool bound_ok =
        errors[k + 1] <= check.q2_bound * (1.0 + detail::kCertSlack) + floor;
    check.contraction_ok = errors[k + 1] < errors[k] || errors[k + 1] <= floor;
    check.in_ball_ok = errors[k] < rep.ball_radius * (1.0 + detail::kCertSlack) &&
                       errors[k + 1] < rep.ball_radius * (1.0 + detail::kCertSlack);
    if (!bound_ok)
      cert.violation_details.push_back("q2 bound violated at k=" + std::to_string(k) +
                                       ": observed " + detail::fmt(errors[k + 1]) +
                                       " > bound " + detail::fmt(check.q2_bound));
    if (!check.contraction_ok)
      cert.violation_details.push_back("contraction violated at k=" + std::to_string(k));
    if (!check.in_ball_ok)
      cert.violation_details.push_back("iterate left the ball at k=" + std::to_string(k));
    all_ok = all_ok && bound_ok && check.contraction_ok && check.in_ball_ok;
    cert.per_step.push_back(check);
  }

  if (!applicable)
    cert.overall = CertStatus::not_applicable;
  else
    cert.overall = all_ok ? CertStatus::certified : CertStatus::violated;
  return cert;
}

/// ||F'(x)^+|| <= beta / (1 - beta [f'(e) + 1]) and the matching difference
/// bound with the sqrt(2) beta^2 factor, sampled inside the min(nu, kappa) ball.
inline LemmaCheckReport check_pinv_bound_lemma(const Problem& problem, const MajorantSpec& spec,
                                               const ProblemConstants& consts,
                                               std::span<const Vector> samples) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("check_pinv_bound_lemma: stationary point required");
  const Vector& xs = *problem.stationary_point;
  const double limit = std::min(compute_nu(spec, consts), consts.kappa);
  Matrix pinv_star = pseudoinverse(problem.jacobian(xs));

  LemmaCheckReport report;
  report.lemma_id = "pinv_bound";
  report.pass = true;
  for (const auto& x : samples) {
    double e = (x - xs).norm();
    if (!(e < limit)) continue;
    double fp1 = spec.fprime(e) + 1.0;
    double den = 1.0 - consts.beta * fp1;
    Matrix pinv_x = pseudoinverse(problem.jacobian(x));
    double bound1 = consts.beta / den;
    double bound2 = std::sqrt(2.0) * consts.beta * consts.beta * fp1 / den;
    double slack1 = bound1 - operator_norm(pinv_x);
    double slack2 = bound2 - operator_norm(pinv_x - pinv_star);
    report.worst_slack = std::min({report.worst_slack, slack1, slack2});
    report.pass = report.pass && slack1 >= -detail::kCertSlack * std::max(1.0, bound1) &&
                  slack2 >= -detail::kCertSlack * std::max(1.0, bound2);
    ++report.sample_count;
  }
  return report;
}

/// ||F(x_*) - F(x) - F'(x)(x_* - x)|| <= e_f(||x - x_*||, 0) inside the kappa ball.
inline LemmaCheckReport check_linearization_lemma(const Problem& problem,
                                                  const MajorantSpec& spec,
                                                  std::span<const Vector> samples) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("check_linearization_lemma: stationary point required");
  const Vector& xs = *problem.stationary_point;
  Vector f_star = problem.residual(xs);

  LemmaCheckReport report;
  report.lemma_id = "linearization";
  report.pass = true;
  for (const auto& x : samples) {
    double e = (x - xs).norm();
    if (!(e < problem.domain_radius) || !(e < spec.domain_bound)) continue;
    Vector lin_err = f_star - problem.residual(x) - problem.jacobian(x) * (xs - x);
    double bound = e_f(spec, e, 0.0);
    double slack = bound - lin_err.norm();
    report.worst_slack = std::min(report.worst_slack, slack);
    report.pass = report.pass && slack >= -detail::kCertSlack * std::max(1.0, bound);
    ++report.sample_count;
  }
  return report;
}

/// Gauss-Newton step bound
/// ||S_F(x)|| <= [beta e_f(e,0) + sqrt(2) c beta^2 (f'(e)+1)] / (1 - beta (f'(e)+1)) + e.
inline LemmaCheckReport check_step_lemma(const Problem& problem, const MajorantSpec& spec,
                                         const ProblemConstants& consts,
                                         std::span<const Vector> samples) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("check_step_lemma: stationary point required");
  const Vector& xs = *problem.stationary_point;
  const double limit = std::min(compute_nu(spec, consts), consts.kappa);

  LemmaCheckReport report;
  report.lemma_id = "gauss_newton_step";
  report.pass = true;
  for (const auto& x : samples) {
    double e = (x - xs).norm();
    if (!(e < limit)) continue;
    double fp1 = spec.fprime(e) + 1.0;
    double den = 1.0 - consts.beta * fp1;
    double bound = (consts.beta * e_f(spec, e, 0.0) +
                    std::sqrt(2.0) * consts.c * consts.beta * consts.beta * fp1) /
                       den +
                   e;
    Vector step = gauss_newton_step(problem.jacobian(x), problem.residual(x));
    double slack = bound - step.norm();
    report.worst_slack = std::min(report.worst_slack, slack);
    report.pass = report.pass && slack >= -detail::kCertSlack * std::max(1.0, bound);
    ++report.sample_count;
  }
  return report;
}

/// Picks omega budgets for modified Gauss-Newton runs: the frozen operator
/// B_0 = J(x_0)^T J(x_0) drifts from J^T J across the ball, so the budget and
/// the radius it implies are solved for jointly by a deterministic probe.
inline MethodParams calibrate_modified_params(const Problem& problem, const MajorantSpec& spec,
                                              const ProblemConstants& consts, double fraction,
                                              std::uint64_t seed) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("calibrate_modified_params: stationary point required");
  const Vector& xs = *problem.stationary_point;
  double a = alpha(spec, consts);
  if (!(a < 1.0)) throw Infeasible("calibrate_modified_params: h3 fails");
  double omega2 = 0.1;
  const double omega2_cap = 0.9 * (1.0 - a) / (1.0 + a);
  for (int attempt = 0; attempt < 12; ++attempt) {
    omega2 = std::min(omega2, omega2_cap);
    MethodParams params{0.0, 1.0 + omega2, omega2};
    RadiusReport rep = radius(spec, consts, params);
    if (!rep.feasible) {
      omega2 *= 0.5;
      continue;
    }
    double e0 = fraction * rep.ball_radius;
    Vector x0 = point_at_distance(xs, e0, seed);
    Matrix jac0 = problem.jacobian(x0);
    auto lu0 = Matrix(jac0.transpose() * jac0).partialPivLu();
    double observed = 0.0;
    auto probe = [&](const Vector& pt) {
      Matrix jac = problem.jacobian(pt);
      Matrix x = lu0.solve(Matrix(jac.transpose() * jac));
      observed = std::max(observed,
                          operator_norm(x - Matrix::Identity(x.rows(), x.cols())));
    };
    // worst drift sits at the sphere of radius e0; probe it plus the segment to x0
    for (int i = 0; i < 64; ++i) probe(point_at_distance(xs, e0, seed + 11 + i));
    for (int i = 0; i <= 16; ++i) probe(xs + (x0 - xs) * (i / 16.0));
    if (observed * 1.25 <= omega2) return params;
    omega2 = std::min(observed * 1.5, omega2_cap);
  }
  throw Infeasible("calibrate_modified_params: no feasible omega budget found");
}

}  // namespace gnx
