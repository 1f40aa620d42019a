#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "gnx/errors.hpp"
#include "gnx/linops.hpp"
#include "gnx/majorant.hpp"

namespace gnx {

enum class SolveMode { exact_gn, modified_gn, gn_like, inexact };
enum class PreconditionerKind { identity, jacobi, user };
enum class ResidualStrategy { none, random_scaled, inner_solver_truncation };
enum class Termination { converged_grad, converged_step, max_iters, diverged, error };

/// Nonlinear least-squares instance: residual map, Jacobian, and the domain
/// ball the local analysis lives on.
struct Problem {
  std::function<Vector(const Vector&)> residual;
  std::function<Matrix(const Vector&)> jacobian;
  int dimension_in = 0;
  int dimension_out = 0;
  std::optional<Vector> stationary_point;
  Vector domain_center;
  double domain_radius = kInf;
};

/// Per-iteration forcing term theta_k. `auto_fraction` picks
/// theta_k = value * vartheta / cond(P_k M_k) at step time, which satisfies
/// the coupled forcing condition by construction for value <= 1.
struct ForcingPolicy {
  enum class Kind { zero, constant, custom_sequence, auto_fraction };
  Kind kind = Kind::zero;
  double value = 0.0;
  std::function<double(int)> sequence;

  static ForcingPolicy zero() { return {}; }
  static ForcingPolicy constant(double theta) {
    return {Kind::constant, theta, nullptr};
  }
  static ForcingPolicy custom(std::function<double(int)> seq) {
    return {Kind::custom_sequence, 0.0, std::move(seq)};
  }
  static ForcingPolicy auto_fraction(double q) {
    return {Kind::auto_fraction, q, nullptr};
  }

  double theta(int k, double cond_pm, double vartheta) const {
    switch (kind) {
      case Kind::zero:
        return 0.0;
      case Kind::constant:
        return value;
      case Kind::custom_sequence:
        return sequence ? sequence(k) : 0.0;
      case Kind::auto_fraction:
        return std::isfinite(cond_pm) && cond_pm > 0.0 ? value * vartheta / cond_pm : 0.0;
    }
    return 0.0;
  }
};

struct SolverConfig {
  SolveMode mode = SolveMode::exact_gn;
  double omega1_target = 1.0;  // gn_like construction target
  double omega2_target = 0.0;
  double vartheta = 0.0;
  ForcingPolicy forcing;
  PreconditionerKind preconditioner = PreconditionerKind::identity;
  std::function<Matrix(const Matrix&)> user_preconditioner;
  ResidualStrategy residual_strategy = ResidualStrategy::none;
  int max_iters = 200;
  double step_tol = 1e-14;
  double grad_tol = 1e-10;
  std::uint64_t seed = 0;
  // Set to false only to produce negative-control traces; the forcing
  // condition is then recorded but not enforced.
  bool enforce_forcing = true;
};

/// One completed iteration: the iterate the step started from plus every
/// quantity the convergence conditions constrain.
struct StepRecord {
  int k = 0;
  Vector x;
  double step_norm = 0.0;
  double grad_norm = 0.0;  // ||J^T F|| at x
  std::optional<double> error_to_star;
  double theta = 0.0;
  double cond_PM = 0.0;
  double residual_norm_P = 0.0;  // ||P r_k||
  double bound_rhs_P = 0.0;      // theta_k ||P J^T F||
  double omega1_observed = 0.0;
  double omega2_observed = 0.0;
};

struct IterationTrace {
  std::vector<StepRecord> records;
  Termination termination = Termination::error;
  Vector final_point;
  double final_grad_norm = 0.0;
  std::optional<double> final_error_to_star;
};

struct BuiltOperator {
  Matrix B;
  double omega1_observed = 0.0;
  double omega2_observed = 0.0;
};

struct InjectedResidual {
  Vector r;
  std::optional<Vector> step;  // present when an inner solver produced it
};

/// Gauss-Newton step S = -J^+ F, via a stable factorization of J.
inline Vector gauss_newton_step(const Matrix& jac, const Vector& fx, double tol) {
  if (jac.rows() != fx.size())
    throw Error("gauss_newton_step: dimension mismatch");
  auto rep = injectivity(jac, tol);
  if (!rep.is_injective)
    throw RankDeficient("gauss_newton_step: Jacobian not injective, smallest sv = " +
                        std::to_string(rep.smallest_singular_value));
  Eigen::BDCSVD<Matrix> svd(jac, Eigen::ComputeThinU | Eigen::ComputeThinV);
  return -svd.solve(fx);
}

inline Vector gauss_newton_step(const Matrix& jac, const Vector& fx) {
  return gauss_newton_step(jac, fx, default_injectivity_tol(jac));
}

namespace detail {

inline Matrix random_symmetric(int n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Matrix d(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) d(i, j) = d(j, i) = dist(gen);
  return d;
}

inline BuiltOperator observe(Matrix b, const Matrix& normal) {
  Matrix x = b.partialPivLu().solve(normal);
  int n = static_cast<int>(normal.rows());
  return BuiltOperator{std::move(b), operator_norm(x),
                       operator_norm(x - Matrix::Identity(n, n))};
}

}  // namespace detail

/// Builds the invertible approximation B of the normal operator M = J^T J.
/// exact_gn/inexact use M itself, modified_gn freezes M at the initial
/// Jacobian, and gn_like perturbs M so that the observed bounds
/// ||B^{-1} M|| <= omega1 and ||B^{-1} M - I|| <= omega2 hold by construction.
inline BuiltOperator build_B(SolveMode mode, const Matrix& jac_current,
                             const Matrix& jac_initial, double omega1_target,
                             double omega2_target, std::mt19937_64& gen) {
  Matrix m = jac_current.transpose() * jac_current;
  switch (mode) {
    case SolveMode::exact_gn:
    case SolveMode::inexact:
      return detail::observe(m, m);
    case SolveMode::modified_gn: {
      Matrix m0 = jac_initial.transpose() * jac_initial;
      return detail::observe(m0, m);
    }
    case SolveMode::gn_like:
      break;
  }
  const int n = static_cast<int>(m.rows());
  if (omega1_target < 1.0 - omega2_target - 1e-12)
    throw TargetUnreachable(
        "build_B: omega1 < 1 - omega2 is unreachable since ||B^{-1}M|| >= 1 - ||B^{-1}M - I||");
  if (omega2_target <= 0.0) {
    auto built = detail::observe(m, m);
    if (built.omega1_observed > omega1_target + 1e-10)
      throw TargetUnreachable("build_B: omega2 = 0 forces B = M with omega1 >= 1");
    return built;
  }
  if (omega2_target >= 1.0)
    throw TargetUnreachable("build_B: omega2 must be below 1");
  Matrix d = detail::random_symmetric(n, gen);
  auto lu_m = m.partialPivLu();
  Matrix similar = lu_m.solve(d * m);  // M^{-1} D M, similar to D
  double snorm = operator_norm(similar);
  if (!(snorm > 0.0)) throw TargetUnreachable("build_B: degenerate perturbation draw");
  double sigma = 0.999 * omega2_target / snorm;
  for (int attempt = 0; attempt < 60; ++attempt) {
    Matrix ipd = Matrix::Identity(n, n) + sigma * d;
    auto built = detail::observe(ipd.partialPivLu().solve(m), m);
    if (built.omega1_observed <= omega1_target && built.omega2_observed <= omega2_target)
      return built;
    sigma *= 0.5;
  }
  throw TargetUnreachable("build_B: could not satisfy omega targets (omega1 = " +
                          std::to_string(omega1_target) + ", omega2 = " +
                          std::to_string(omega2_target) + ")");
}

/// Preconditioner for the normal-equations system.
inline Matrix make_preconditioner(PreconditionerKind kind, const Matrix& m,
                                  const std::function<Matrix(const Matrix&)>& user = {}) {
  const int n = static_cast<int>(m.rows());
  if (m.rows() != m.cols()) throw NotSquare("make_preconditioner: M must be square");
  switch (kind) {
    case PreconditionerKind::identity:
      return Matrix::Identity(n, n);
    case PreconditionerKind::jacobi: {
      Vector diag = m.diagonal();
      double floor = 1e-14 * operator_norm(m);
      for (int i = 0; i < n; ++i)
        if (std::abs(diag(i)) <= floor)
          throw SingularPreconditioner("make_preconditioner: zero diagonal entry in M");
      return diag.cwiseInverse().asDiagonal();
    }
    case PreconditionerKind::user: {
      if (!user) throw SingularPreconditioner("make_preconditioner: no user preconditioner set");
      Matrix p = user(m);
      if (p.rows() != n || p.cols() != n)
        throw SingularPreconditioner("make_preconditioner: user preconditioner has wrong shape");
      if (!injectivity(p).is_injective)
        throw SingularPreconditioner("make_preconditioner: user preconditioner is singular");
      return p;
    }
  }
  throw SingularPreconditioner("make_preconditioner: unknown kind");
}

namespace detail {

/// Truncated CGNR on B s = -g, stopped at the first inner iterate whose
/// residual r = B s + g satisfies ||P r|| <= bound. Falls back to a direct
/// solve (r identically zero) if the bound is below the attainable floor.
inline InjectedResidual truncated_inner_solve(const Matrix& b_op, const Matrix& p,
                                              const Vector& g, double bound) {
  const Vector rhs = -g;
  const int n = static_cast<int>(g.size());
  Vector s = Vector::Zero(n);
  Vector resid = rhs;                      // rhs - B s
  if ((p * (-resid)).norm() <= bound) return {Vector(-resid), s};
  Vector z = b_op.transpose() * resid;     // CGNR direction seed
  Vector d = z;
  double zz = z.squaredNorm();
  const int max_inner = std::max(40, 10 * n);
  for (int it = 0; it < max_inner && zz > 0.0; ++it) {
    Vector bd = b_op * d;
    double denom = bd.squaredNorm();
    if (denom <= 0.0) break;
    double step_len = zz / denom;
    s += step_len * d;
    resid = rhs - b_op * s;
    Vector r = -resid;                     // B s + g
    if ((p * r).norm() <= bound) return {r, s};
    Vector z_next = b_op.transpose() * resid;
    double zz_next = z_next.squaredNorm();
    d = z_next + (zz_next / zz) * d;
    z = z_next;
    zz = zz_next;
  }
  s = b_op.partialPivLu().solve(rhs);
  return {Vector::Zero(n), s};
}

}  // namespace detail

/// Produces a residual r with ||P r|| <= theta ||P g||. random_scaled draws a
/// direction and rescales it to sit just inside the permitted magnitude; the
/// truncation strategy returns the genuine residual of a truncated inner
/// solve of B S = -g together with the step it stopped at.
inline InjectedResidual inject_residual(ResidualStrategy strategy, double theta,
                                        const Matrix& p, const Vector& g, const Matrix& b_op,
                                        std::mt19937_64& gen) {
  if (theta < 0.0) throw ForcingViolation("inject_residual: negative forcing term");
  const int n = static_cast<int>(g.size());
  double bound = theta * (p * g).norm();
  if (strategy == ResidualStrategy::none || theta == 0.0 || bound == 0.0)
    return {Vector::Zero(n), std::nullopt};
  if (strategy == ResidualStrategy::random_scaled) {
    std::normal_distribution<double> dist(0.0, 1.0);
    Vector dir(n);
    double pd_norm = 0.0;
    do {
      for (int i = 0; i < n; ++i) dir(i) = dist(gen);
      pd_norm = (p * dir).norm();
    } while (pd_norm == 0.0);
    Vector r = dir * ((1.0 - 1e-12) * bound / pd_norm);
    if ((p * r).norm() > bound * (1.0 + 1e-12))
      throw ForcingViolation("inject_residual: scaled residual exceeded bound");
    return {r, std::nullopt};
  }
  auto result = detail::truncated_inner_solve(b_op, p, g, bound);
  if ((p * result.r).norm() > bound * (1.0 + 1e-12))
    throw ForcingViolation("inject_residual: inner-solver residual exceeded bound");
  return result;
}

/// Places a point at the given distance from `center` along a seeded random
/// direction.
inline Vector point_at_distance(const Vector& center, double distance, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  Vector dir(center.size());
  double norm = 0.0;
  do {
    for (int i = 0; i < center.size(); ++i) dir(i) = dist(gen);
    norm = dir.norm();
  } while (norm == 0.0);
  return center + (distance / norm) * dir;
}

/// Worst relative deviation between the analytic Jacobian and a central
/// finite-difference estimate at x.
inline double jacobian_fd_deviation(const Problem& problem, const Vector& x) {
  const double h0 = std::cbrt(std::numeric_limits<double>::epsilon()) * (1.0 + x.norm());
  Matrix jac = problem.jacobian(x);
  Matrix fd(problem.dimension_out, problem.dimension_in);
  for (int j = 0; j < problem.dimension_in; ++j) {
    Vector xp = x, xm = x;
    xp(j) += h0;
    xm(j) -= h0;
    fd.col(j) = (problem.residual(xp) - problem.residual(xm)) / (xp(j) - xm(j));
  }
  return (fd - jac).norm() / std::max(1.0, jac.norm());
}

/// ||J(x_*)^T F(x_*)||; the stationarity defect of the declared solution.
inline double stationarity_residual(const Problem& problem) {
  if (!problem.stationary_point)
    throw StationaryPointMissing("stationarity_residual: problem has no stationary point");
  const Vector& xs = *problem.stationary_point;
  return (problem.jacobian(xs).transpose() * problem.residual(xs)).norm();
}

namespace detail {

inline void validate_config(const SolverConfig& config) {
  if (config.mode == SolveMode::exact_gn &&
      (config.forcing.kind != ForcingPolicy::Kind::zero ||
       config.residual_strategy != ResidualStrategy::none))
    throw Error("iterate: exact_gn requires a vanishing forcing sequence and no residual injection");
  if (!(config.vartheta >= 0.0 && config.vartheta < 1.0))
    throw Error("iterate: vartheta must lie in [0, 1)");
  if (config.max_iters < 1) throw Error("iterate: max_iters must be positive");
  if (config.mode == SolveMode::gn_like &&
      !(config.omega2_target >= 0.0 && config.omega2_target < config.omega1_target))
    throw Error("iterate: gn_like needs 0 <= omega2_target < omega1_target");
}

}  // namespace detail

/// Runs the iteration x_{k+1} = x_k + S_k with B(x_k) S_k = -J^T F + r_k,
/// recording every quantity the convergence conditions constrain. Stops on
/// the gradient norm, the step norm, the iteration cap, or on leaving the
/// domain ball (diverged). Throws RankDeficient when the Jacobian loses
/// injectivity and ForcingViolation when theta_k cond(P_k M_k) > vartheta.
inline IterationTrace iterate(const Problem& problem, const SolverConfig& config,
                              const Vector& x0) {
  detail::validate_config(config);
  if (x0.size() != problem.dimension_in)
    throw Error("iterate: x0 has wrong dimension");
  if ((x0 - problem.domain_center).norm() >= problem.domain_radius)
    throw Error("iterate: x0 outside the domain ball");

  std::mt19937_64 gen(config.seed);
  IterationTrace trace;
  Vector x = x0;
  Matrix jac_initial;
  if (config.mode == SolveMode::modified_gn) jac_initial = problem.jacobian(x0);

  auto error_to_star = [&](const Vector& p) -> std::optional<double> {
    if (!problem.stationary_point) return std::nullopt;
    return (p - *problem.stationary_point).norm();
  };

  for (int k = 0;; ++k) {
    Matrix jac = problem.jacobian(x);
    Vector fx = problem.residual(x);
    if (!jac.allFinite() || !fx.allFinite())
      throw Error("iterate: non-finite residual or Jacobian at iteration " + std::to_string(k));
    Vector grad = jac.transpose() * fx;
    double grad_norm = grad.norm();

    if (grad_norm <= config.grad_tol) {
      trace.termination = Termination::converged_grad;
      trace.final_point = x;
      trace.final_grad_norm = grad_norm;
      trace.final_error_to_star = error_to_star(x);
      return trace;
    }
    if (k >= config.max_iters) {
      trace.termination = Termination::max_iters;
      trace.final_point = x;
      trace.final_grad_norm = grad_norm;
      trace.final_error_to_star = error_to_star(x);
      return trace;
    }

    if (!injectivity(jac).is_injective)
      throw RankDeficient("iterate: Jacobian lost injectivity at iteration " + std::to_string(k));
    Matrix normal = jac.transpose() * jac;
    BuiltOperator built = build_B(config.mode, jac, jac_initial, config.omega1_target,
                                  config.omega2_target, gen);
    Matrix precond = make_preconditioner(config.preconditioner, normal, config.user_preconditioner);
    double cond_pm = cond(precond * normal);

    double theta = config.forcing.theta(k, cond_pm, config.vartheta);
    if (theta < 0.0) throw ForcingViolation("iterate: negative forcing term");
    if (config.enforce_forcing && theta * cond_pm > config.vartheta * (1.0 + 1e-12))
      throw ForcingViolation("iterate: theta_k cond(P_k M_k) = " +
                             std::to_string(theta * cond_pm) + " exceeds vartheta = " +
                             std::to_string(config.vartheta) + " at iteration " +
                             std::to_string(k));

    InjectedResidual injected =
        inject_residual(config.residual_strategy, theta, precond, grad, built.B, gen);
    double residual_norm_p = (precond * injected.r).norm();
    double bound_rhs_p = theta * (precond * grad).norm();

    Vector step = injected.step ? *injected.step
                                : built.B.partialPivLu().solve(Vector(-grad + injected.r));
    Vector x_next = x + step;

    StepRecord rec;
    rec.k = k;
    rec.x = x;
    rec.step_norm = step.norm();
    rec.grad_norm = grad_norm;
    rec.error_to_star = error_to_star(x);
    rec.theta = theta;
    rec.cond_PM = cond_pm;
    rec.residual_norm_P = residual_norm_p;
    rec.bound_rhs_P = bound_rhs_p;
    rec.omega1_observed = built.omega1_observed;
    rec.omega2_observed = built.omega2_observed;
    trace.records.push_back(std::move(rec));

    if ((x_next - problem.domain_center).norm() >= problem.domain_radius) {
      trace.termination = Termination::diverged;
      trace.final_point = x_next;
      Vector gf = problem.jacobian(x_next).transpose() * problem.residual(x_next);
      trace.final_grad_norm = gf.norm();
      trace.final_error_to_star = error_to_star(x_next);
      return trace;
    }
    x = x_next;
    if (step.norm() <= config.step_tol) {
      trace.termination = Termination::converged_step;
      trace.final_point = x;
      Vector gf = problem.jacobian(x).transpose() * problem.residual(x);
      trace.final_grad_norm = gf.norm();
      trace.final_error_to_star = error_to_star(x);
      return trace;
    }
  }
}

}  // namespace gnx
