#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "gnx/errors.hpp"

namespace gnx {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Scalar majorant function f on [0, R) with f(0) = 0, f'(0) = -1 (h1) and
/// f' convex, strictly increasing (h2). Validated on a sampled grid at
/// construction; use the factory functions below.
struct MajorantSpec {
  std::function<double(double)> f;
  std::function<double(double)> fprime;
  double dplus0 = 0.0;        // right derivative of f' at 0
  double domain_bound = kInf; // R
};

/// Problem-side constants of the local analysis.
struct ProblemConstants {
  double c = 0.0;     // ||F(x_*)||
  double beta = 1.0;  // ||F'(x_*)^+||
  double kappa = kInf; // radius of the domain ball around x_*
};

/// Method-side parameters: forcing cap and operator-approximation bounds.
struct MethodParams {
  double vartheta = 0.0;
  double omega1 = 1.0;
  double omega2 = 0.0;
};

/// Convergence-ball computation result.
struct RadiusReport {
  double alpha = 0.0;
  double nu = 0.0;
  double rho = 0.0;
  double ball_radius = 0.0;  // r = min(kappa, rho)
  bool feasible = false;
  std::vector<std::string> diagnostics;
};

/// Coefficients of the per-step error recurrence
/// e_{k+1} <= quadratic * e_k^2 + linear * e_k, frozen at t0 = ||x_0 - x_*||.
struct Q2Coefficients {
  double quadratic = 0.0;
  double linear = 0.0;
};

namespace detail {

inline constexpr double kBisectTol = 1e-12;
inline constexpr int kBisectMaxIter = 200;
inline constexpr double kGridCap = 1e6;
inline constexpr int kGridPoints = 257;
inline constexpr double kH1Tol = 1e-12;
inline constexpr double kConvexitySlack = 1e-12;

inline double sqrt2() { return std::sqrt(2.0); }

/// Largest t in (lo, hi) with ind(t) < 0, for increasing ind with
/// ind(lo) < 0 <= ind(hi).
inline double bisect_sup(const std::function<double(double)>& ind, double lo, double hi) {
  for (int i = 0; i < kBisectMaxIter && (hi - lo) > kBisectTol; ++i) {
    double mid = 0.5 * (lo + hi);
    if (ind(mid) < 0.0)
      lo = mid;
    else
      hi = mid;
  }
  return 0.5 * (lo + hi);
}

/// First power-of-two multiple of `start` where ind >= 0, or +inf if the
/// indicator stays negative up to overflow scale.
inline double grow_bracket(const std::function<double(double)>& ind, double start) {
  double hi = start;
  while (ind(hi) < 0.0) {
    hi *= 2.0;
    if (hi > 1e300) return kInf;
  }
  return hi;
}

inline void validate(const ProblemConstants& k) {
  if (!(k.c >= 0.0)) throw Error("constants: c must be nonnegative");
  if (!(k.beta > 0.0)) throw Error("constants: beta must be positive");
  if (!(k.kappa > 0.0)) throw Error("constants: kappa must be positive");
}

inline void validate(const MethodParams& p) {
  if (!(p.vartheta >= 0.0 && p.vartheta < 1.0))
    throw Error("params: vartheta must lie in [0, 1)");
  if (!(p.omega2 >= 0.0 && p.omega2 < p.omega1))
    throw Error("params: need 0 <= omega2 < omega1");
}

}  // namespace detail

/// Builds a MajorantSpec from user-supplied f, f', D+f'(0) and domain bound,
/// rejecting functions that fail h1 or the sampled h2 checks.
inline MajorantSpec make_majorant(std::function<double(double)> f,
                                  std::function<double(double)> fprime,
                                  double dplus0, double domain_bound) {
  if (!(domain_bound > 0.0)) throw InvalidMajorant("domain bound R must be positive");
  MajorantSpec spec{std::move(f), std::move(fprime), dplus0, domain_bound};
  if (std::abs(spec.f(0.0)) > detail::kH1Tol)
    throw InvalidMajorant("h1 violated: f(0) != 0");
  if (std::abs(spec.fprime(0.0) + 1.0) > detail::kH1Tol)
    throw InvalidMajorant("h1 violated: f'(0) != -1");

  double span = std::isinf(domain_bound) ? detail::kGridCap
                                         : domain_bound * (1.0 - 1e-9);
  std::vector<double> fp(detail::kGridPoints);
  for (int i = 0; i < detail::kGridPoints; ++i)
    fp[i] = spec.fprime(span * i / detail::kGridPoints);
  for (int i = 0; i + 1 < detail::kGridPoints; ++i)
    if (!(fp[i + 1] > fp[i]))
      throw InvalidMajorant("h2 violated: f' not strictly increasing on grid");
  for (int i = 0; i + 2 < detail::kGridPoints; ++i) {
    double scale = std::max({1.0, std::abs(fp[i]), std::abs(fp[i + 2])});
    if (!(fp[i + 1] <= 0.5 * (fp[i] + fp[i + 2]) + detail::kConvexitySlack * scale))
      throw InvalidMajorant("h2 violated: f' not convex on grid");
  }
  return spec;
}

/// Lipschitz-derivative majorant f(t) = K t^2 / 2 - t.
inline MajorantSpec make_lipschitz_majorant(double K, double domain_bound = kInf) {
  if (!(K > 0.0)) throw InvalidMajorant("Lipschitz constant K must be positive");
  return make_majorant([K](double t) { return 0.5 * K * t * t - t; },
                       [K](double t) { return K * t - 1.0; }, K, domain_bound);
}

/// Analytic (Smale-type) majorant f(t) = t / (1 - gamma t) - 2 t on [0, 1/gamma).
inline MajorantSpec make_smale_majorant(double gamma) {
  if (!(gamma > 0.0)) throw InvalidMajorant("gamma must be positive");
  return make_majorant(
      [gamma](double t) { return t / (1.0 - gamma * t) - 2.0 * t; },
      [gamma](double t) {
        double d = 1.0 - gamma * t;
        return 1.0 / (d * d) - 2.0;
      },
      2.0 * gamma, 1.0 / gamma);
}

/// alpha = sqrt(2) c beta^2 D+f'(0); hypothesis h3 requires alpha < 1.
inline double alpha(const MajorantSpec& spec, const ProblemConstants& consts) {
  detail::validate(consts);
  return detail::sqrt2() * consts.c * consts.beta * consts.beta * spec.dplus0;
}

/// Value of the feasibility combination omega1 (alpha + alpha vartheta + vartheta) + omega2,
/// which must be below 1.
inline double omega_feasibility(const MajorantSpec& spec, const ProblemConstants& consts,
                                const MethodParams& params) {
  double a = alpha(spec, consts);
  return params.omega1 * (a + a * params.vartheta + params.vartheta) + params.omega2;
}

/// nu = sup{ t in [0, R) : beta (f'(t) + 1) < 1 }, located by bisection on the
/// strictly increasing indicator.
inline double compute_nu(const MajorantSpec& spec, const ProblemConstants& consts) {
  detail::validate(consts);
  auto ind = [&](double t) { return consts.beta * (spec.fprime(t) + 1.0) - 1.0; };
  double hi;
  if (std::isinf(spec.domain_bound)) {
    hi = detail::grow_bracket(ind, 1.0);
    if (std::isinf(hi)) return kInf;
  } else {
    hi = spec.domain_bound * (1.0 - 1e-14);
    if (ind(hi) < 0.0) return spec.domain_bound;
  }
  return detail::bisect_sup(ind, 0.0, hi);
}

/// rho = sup of the t in (0, nu) where the one-step contraction inequality of
/// the convergence theorem is strict. Throws Infeasible if the parameter
/// combination rules out any positive t.
inline double compute_rho(const MajorantSpec& spec, const ProblemConstants& consts,
                          const MethodParams& params) {
  detail::validate(consts);
  detail::validate(params);
  double feas = omega_feasibility(spec, consts, params);
  if (!(feas < 1.0))
    throw Infeasible("omega feasibility violated: omega1*(alpha+alpha*vartheta+vartheta)+omega2 = " +
                     std::to_string(feas) + " >= 1");
  double nu = compute_nu(spec, consts);
  auto ind = [&](double t) {
    double fp1 = spec.fprime(t) + 1.0;
    double den = t * (1.0 - consts.beta * fp1);
    if (!(den > 0.0)) return kInf;
    double num = (1.0 + params.vartheta) * params.omega1 * consts.beta *
                 (t * spec.fprime(t) - spec.f(t) +
                  detail::sqrt2() * consts.c * consts.beta * fp1);
    return num / den + params.omega1 * params.vartheta + params.omega2 - 1.0;
  };
  double hi;
  if (std::isinf(nu)) {
    hi = detail::grow_bracket(ind, 1.0);
    if (std::isinf(hi)) return kInf;
  } else {
    hi = nu * (1.0 - 1e-14);
    if (ind(hi) < 0.0) return nu;
  }
  return detail::bisect_sup(ind, 0.0, hi);
}

/// Assembles the full report: alpha, nu, rho, r = min(kappa, rho) plus a
/// feasibility flag. Infeasible hypotheses are reported, not thrown.
inline RadiusReport radius(const MajorantSpec& spec, const ProblemConstants& consts,
                           const MethodParams& params) {
  detail::validate(consts);
  detail::validate(params);
  RadiusReport rep;
  rep.alpha = alpha(spec, consts);
  rep.nu = compute_nu(spec, consts);
  if (!(rep.alpha < 1.0))
    rep.diagnostics.push_back("h3 violated: alpha = " + std::to_string(rep.alpha) + " >= 1");
  double feas = omega_feasibility(spec, consts, params);
  if (!(feas < 1.0))
    rep.diagnostics.push_back(
        "omega feasibility violated: omega1*(alpha+alpha*vartheta+vartheta)+omega2 = " +
        std::to_string(feas) + " >= 1");
  if (!rep.diagnostics.empty()) {
    rep.feasible = false;
    rep.rho = rep.ball_radius = std::numeric_limits<double>::quiet_NaN();
    return rep;
  }
  rep.rho = compute_rho(spec, consts, params);
  rep.ball_radius = std::min(consts.kappa, rep.rho);
  rep.feasible = true;
  return rep;
}

/// Closed-form convergence radius for the Lipschitz majorant family.
inline double closed_form_radius_lipschitz(double K, const ProblemConstants& consts,
                                           const MethodParams& params) {
  if (!(K > 0.0)) throw Infeasible("closed form: K must be positive");
  detail::validate(consts);
  detail::validate(params);
  double a = detail::sqrt2() * consts.c * consts.beta * consts.beta * K;
  if (!(a < 1.0)) throw Infeasible("h3 violated: alpha >= 1");
  double feas = params.omega1 * (a + a * params.vartheta + params.vartheta) + params.omega2;
  if (!(feas < 1.0)) throw Infeasible("omega feasibility violated");
  double num = 2.0 * (1.0 - params.omega1 * params.vartheta - params.omega2) -
               2.0 * detail::sqrt2() * consts.c * K * consts.beta * consts.beta *
                   params.omega1 * (1.0 + params.vartheta);
  double den = consts.beta * K *
               (2.0 + params.omega1 - params.vartheta * params.omega1 - 2.0 * params.omega2);
  return std::min(consts.kappa, num / den);
}

/// Closed-form convergence radius for the Smale/analytic majorant family.
inline double closed_form_radius_smale(double gamma, const ProblemConstants& consts,
                                       const MethodParams& params) {
  if (!(gamma > 0.0)) throw Infeasible("closed form: gamma must be positive");
  detail::validate(consts);
  detail::validate(params);
  double alpha_s = 2.0 * detail::sqrt2() * consts.c * consts.beta * consts.beta * gamma;
  if (!(alpha_s < 1.0)) throw Infeasible("h3 violated: alpha >= 1");
  double feas = params.omega1 * (alpha_s + alpha_s * params.vartheta + params.vartheta) +
                params.omega2;
  if (!(feas < 1.0)) throw Infeasible("omega feasibility violated");
  double a = 1.0 - params.vartheta * params.omega1 - params.omega2;
  double b = (1.0 + params.vartheta) * params.omega1 * consts.beta;
  double abar = b + 2.0 * a * (1.0 + consts.beta) -
                detail::sqrt2() * gamma * consts.beta * b * consts.c;
  double disc = abar * abar -
                4.0 * a * (1.0 + consts.beta) *
                    (a - 2.0 * detail::sqrt2() * consts.c * consts.beta * b * gamma);
  if (disc < 0.0) throw Infeasible("negative discriminant in Smale closed form");
  double rho = (abar - std::sqrt(disc)) / (2.0 * a * gamma * (1.0 + consts.beta));
  return std::min(consts.kappa, rho);
}

/// Linearization error of the majorant, e_f(t, u) = f(u) - [f(t) + f'(t)(u - t)].
inline double e_f(const MajorantSpec& spec, double t, double u) {
  if (!(t >= 0.0) || !(u >= 0.0) || !(t < spec.domain_bound) || !(u < spec.domain_bound))
    throw DomainExceeded("e_f: arguments must lie in [0, R)");
  return spec.f(u) - (spec.f(t) + spec.fprime(t) * (u - t));
}

/// Coefficients of the per-step error bound, evaluated at t0 = ||x_0 - x_*||.
/// Requires 0 < t0 < r; the combination quadratic*t0 + linear stays below 1.
inline Q2Coefficients q2_coefficients(const MajorantSpec& spec, const ProblemConstants& consts,
                                      const MethodParams& params, double t0) {
  RadiusReport rep = radius(spec, consts, params);
  if (!rep.feasible) {
    std::string msg = "q2_coefficients: hypotheses infeasible";
    for (const auto& d : rep.diagnostics) msg += "; " + d;
    throw Infeasible(msg);
  }
  if (!(t0 > 0.0) || !(t0 < rep.ball_radius))
    throw OutOfBall("q2_coefficients: t0 = " + std::to_string(t0) +
                    " outside (0, r) with r = " + std::to_string(rep.ball_radius));
  double fp = spec.fprime(t0);
  double ft = spec.f(t0);
  double den = 1.0 - consts.beta * (fp + 1.0);
  double common = (1.0 + params.vartheta) * params.omega1;
  Q2Coefficients q;
  q.quadratic = common * consts.beta * (fp * t0 - ft) / (t0 * t0 * den);
  q.linear = common * detail::sqrt2() * consts.c * consts.beta * consts.beta * (fp + 1.0) /
                 (t0 * den) +
             params.omega1 * params.vartheta + params.omega2;
  return q;
}

}  // namespace gnx
