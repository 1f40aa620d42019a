#pragma once

#include <cmath>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gnx/linops.hpp"
#include "gnx/solver.hpp"

namespace gnx {

/// A catalog problem together with its local-analysis constants. `notes`
/// records the provenance of each constant (exact vs sampled estimate).
struct CatalogEntry {
  std::string id;
  Problem problem;
  ProblemConstants constants;
  std::optional<double> lipschitz_K;
  std::optional<double> smale_gamma;
  std::string notes;
};

struct EstimatedConstants {
  ProblemConstants constants;
  double lipschitz_K = 0.0;  // sampled max of ||J(x)-J(y)||/||x-y||, inflated by 1.1
};

/// c and beta exactly from evaluations at x_*; K from sampled Jacobian
/// differences over the ball, inflated by a 1.1 safety factor.
inline EstimatedConstants estimate_constants(const Problem& problem, double ball_radius,
                                             int samples, std::uint64_t seed = 7) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("estimate_constants: stationary point required");
  const Vector& xs = *problem.stationary_point;
  EstimatedConstants out;
  out.constants.c = problem.residual(xs).norm();
  out.constants.beta = operator_norm(pseudoinverse(problem.jacobian(xs)));
  out.constants.kappa = ball_radius;

  std::mt19937_64 gen(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> radial(0.0, 1.0);
  auto draw = [&]() {
    Vector dir(xs.size());
    for (int i = 0; i < xs.size(); ++i) dir(i) = normal(gen);
    double scale = ball_radius * std::pow(radial(gen), 1.0 / xs.size()) / dir.norm();
    return Vector(xs + scale * dir);
  };
  double worst = 0.0;
  for (int i = 0; i < samples; ++i) {
    Vector u = draw(), v = draw();
    double dist = (u - v).norm();
    if (dist < 1e-12) continue;
    worst = std::max(worst, operator_norm(problem.jacobian(u) - problem.jacobian(v)) / dist);
  }
  out.lipschitz_K = 1.1 * worst;
  return out;
}

namespace detail {

inline Problem make_affine_problem(const Matrix& a, const Vector& b) {
  Problem p;
  p.dimension_in = static_cast<int>(a.cols());
  p.dimension_out = static_cast<int>(a.rows());
  p.residual = [a, b](const Vector& x) { return Vector(a * x - b); };
  p.jacobian = [a](const Vector&) { return a; };
  return p;
}

inline Matrix affine_design() {
  Matrix a(4, 2);
  a << 1, 0, 0, 1, 1, 1, -1, 2;
  return a;
}

/// Unit vector orthogonal to the columns of `a` (a left null direction).
inline Vector left_null_direction(const Matrix& a) {
  Eigen::JacobiSVD<Matrix> svd(a, Eigen::ComputeFullU);
  return svd.matrixU().col(a.cols());
}

inline Problem make_expfit_problem(const Vector& knots, const Vector& data) {
  Problem p;
  p.dimension_in = 2;
  p.dimension_out = static_cast<int>(knots.size());
  p.residual = [knots, data](const Vector& x) {
    Vector f(knots.size());
    for (int i = 0; i < knots.size(); ++i)
      f(i) = x(0) * std::exp(x(1) * knots(i)) - data(i);
    return f;
  };
  p.jacobian = [knots](const Vector& x) {
    Matrix jac(knots.size(), 2);
    for (int i = 0; i < knots.size(); ++i) {
      double e = std::exp(x(1) * knots(i));
      jac(i, 0) = e;
      jac(i, 1) = x(0) * knots(i) * e;
    }
    return jac;
  };
  return p;
}

inline std::vector<CatalogEntry> build_catalog() {
  std::vector<CatalogEntry> entries;

  const Matrix a = affine_design();
  const Vector affine_star = (Vector(2) << 0.5, -0.25).finished();
  const double beta_affine = operator_norm(pseudoinverse(a));

  {
    CatalogEntry e;
    e.id = "affine_consistent";
    e.problem = make_affine_problem(a, a * affine_star);
    e.problem.stationary_point = affine_star;
    e.problem.domain_center = affine_star;
    e.problem.domain_radius = 2.0;
    e.constants = {0.0, beta_affine, 2.0};
    e.lipschitz_K = 1e-12;
    e.notes = "affine: Jacobian constant, K is zero; stored epsilon placeholder. c, beta exact.";
    entries.push_back(std::move(e));
  }
  {
    CatalogEntry e;
    e.id = "affine_inconsistent";
    Vector w = 0.1 * left_null_direction(a);
    e.problem = make_affine_problem(a, Vector(a * affine_star + w));
    e.problem.stationary_point = affine_star;
    e.problem.domain_center = affine_star;
    e.problem.domain_radius = 2.0;
    e.constants = {w.norm(), beta_affine, 2.0};
    e.lipschitz_K = 1e-12;
    e.notes = "affine with off-range data: c = 0.1 exact, K epsilon placeholder.";
    entries.push_back(std::move(e));
  }

  const Vector knots = (Vector(5) << -0.5, -0.25, 0.0, 0.25, 0.5).finished();
  const Vector exp_star = (Vector(2) << 1.0, 0.5).finished();
  const double exp_kappa = 0.4;
  {
    Problem model = make_expfit_problem(knots, Vector::Zero(5));
    Vector clean = model.residual(exp_star);
    Matrix jac_star = model.jacobian(exp_star);
    CatalogEntry e;
    e.id = "expfit_zero";
    e.problem = make_expfit_problem(knots, clean);
    e.problem.stationary_point = exp_star;
    e.problem.domain_center = exp_star;
    e.problem.domain_radius = exp_kappa;
    auto est = estimate_constants(e.problem, exp_kappa, 400, 20240401);
    e.constants = est.constants;
    e.lipschitz_K = est.lipschitz_K;
    e.notes = "exponential fit, consistent data: c, beta exact; K sampled estimate (1.1x inflated).";
    entries.push_back(std::move(e));

    CatalogEntry r;
    r.id = "expfit_residual";
    Vector w = 0.05 * left_null_direction(jac_star);
    r.problem = make_expfit_problem(knots, Vector(clean + w));
    r.problem.stationary_point = exp_star;
    r.problem.domain_center = exp_star;
    r.problem.domain_radius = exp_kappa;
    r.constants = est.constants;
    r.constants.c = w.norm();
    r.lipschitz_K = est.lipschitz_K;
    r.notes = "exponential fit, data off the model range: c = 0.05 exact; K sampled estimate.";
    entries.push_back(std::move(r));
  }

  {
    // Quadratic residuals: F''(x_*) is the only nonvanishing higher
    // derivative, so gamma = ||F''(x_*)|| / 2 = a exactly and the Jacobian is
    // a-Lipschitz with constant 2a.
    const double aq = 0.5;
    CatalogEntry e;
    e.id = "quadratic_gamma";
    e.problem.dimension_in = 2;
    e.problem.dimension_out = 3;
    e.problem.residual = [aq](const Vector& x) {
      Vector f(3);
      f << aq * x(0) * x(0) + x(0), aq * x(1) * x(1) + x(1), 0.5 * (x(0) - x(1));
      return f;
    };
    e.problem.jacobian = [aq](const Vector& x) {
      Matrix jac(3, 2);
      jac << 2.0 * aq * x(0) + 1.0, 0.0, 0.0, 2.0 * aq * x(1) + 1.0, 0.5, -0.5;
      return jac;
    };
    Vector star = Vector::Zero(2);
    e.problem.stationary_point = star;
    e.problem.domain_center = star;
    e.problem.domain_radius = 1.0;
    e.constants = {0.0, operator_norm(pseudoinverse(e.problem.jacobian(star))), 1.0};
    e.lipschitz_K = 2.0 * aq;
    e.smale_gamma = aq;
    e.notes = "quadratic residuals: gamma = 0.5 and K = 1 exact (derivative series truncates).";
    entries.push_back(std::move(e));
  }

  {
    CatalogEntry e;
    e.id = "trig_newton";
    e.problem.dimension_in = 2;
    e.problem.dimension_out = 2;
    // phase shifts keep the second derivative nonzero at the root, so Newton
    // behaves quadratically rather than cubically
    e.problem.residual = [](const Vector& x) {
      Vector f(2);
      f << x(0) - 0.2 * (std::sin(x(1) + 0.4) - std::sin(0.4)),
          x(1) - 0.2 * (std::sin(x(0) + 0.7) - std::sin(0.7));
      return f;
    };
    e.problem.jacobian = [](const Vector& x) {
      Matrix jac(2, 2);
      jac << 1.0, -0.2 * std::cos(x(1) + 0.4), -0.2 * std::cos(x(0) + 0.7), 1.0;
      return jac;
    };
    Vector star = Vector::Zero(2);
    e.problem.stationary_point = star;
    e.problem.domain_center = star;
    e.problem.domain_radius = 1.0;
    auto est = estimate_constants(e.problem, 1.0, 400, 20240402);
    e.constants = est.constants;
    e.lipschitz_K = est.lipschitz_K;
    e.notes =
        "square zero-residual system with invertible Jacobian at the root; K sampled estimate.";
    entries.push_back(std::move(e));
  }

  return entries;
}

}  // namespace detail

/// Built-in problem catalog; entries are immutable shared values.
inline const std::vector<CatalogEntry>& catalog() {
  static const std::vector<CatalogEntry> entries = detail::build_catalog();
  return entries;
}

inline const CatalogEntry& find_problem(const std::string& id) {
  for (const auto& entry : catalog())
    if (entry.id == id) return entry;
  throw Error("unknown problem id '" + id + "'");
}

}  // namespace gnx
