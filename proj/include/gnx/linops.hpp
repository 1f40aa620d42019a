#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "gnx/errors.hpp"

namespace gnx {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Outcome of an injectivity (full column rank) decision.
struct InjectivityReport {
  double smallest_singular_value = 0.0;
  bool is_injective = false;
  double tolerance_used = 0.0;
};

struct PerturbationBounds {
  double bound_norm = 0.0;  // upper bound on ||(A+E)^+||
  double bound_diff = 0.0;  // upper bound on ||(A+E)^+ - A^+||
};

namespace detail {

inline void require_valid(const Matrix& a, const char* what) {
  if (a.rows() < 1 || a.cols() < 1)
    throw Error(std::string(what) + ": operator must have positive dimensions");
  if (!a.allFinite())
    throw Error(std::string(what) + ": operator has non-finite entries");
}

inline Eigen::BDCSVD<Matrix> svd_values(const Matrix& a) {
  return Eigen::BDCSVD<Matrix>(a);
}

}  // namespace detail

/// Adjoint of a real operator in the Euclidean inner product (the transpose).
inline Matrix adjoint(const Matrix& a) {
  detail::require_valid(a, "adjoint");
  return a.transpose();
}

/// Spectral norm: largest singular value.
inline double operator_norm(const Matrix& a) {
  detail::require_valid(a, "operator_norm");
  return detail::svd_values(a).singularValues()(0);
}

/// Scale-invariant default rank tolerance, 1e-12 * ||A||.
inline double default_injectivity_tol(const Matrix& a) {
  double n = operator_norm(a);
  return n > 0.0 ? 1e-12 * n : 1e-12;
}

inline InjectivityReport injectivity(const Matrix& a, double tol) {
  detail::require_valid(a, "injectivity");
  if (!(tol > 0.0)) throw Error("injectivity: tolerance must be positive");
  const auto sv = detail::svd_values(a).singularValues();
  double smin = a.rows() >= a.cols() ? sv(sv.size() - 1) : 0.0;
  return InjectivityReport{smin, smin > tol, tol};
}

inline InjectivityReport injectivity(const Matrix& a) {
  return injectivity(a, default_injectivity_tol(a));
}

/// Moore-Penrose inverse of an injective operator, computed from a singular
/// value factorization rather than the normal equations.
inline Matrix pseudoinverse(const Matrix& a, double tol) {
  detail::require_valid(a, "pseudoinverse");
  Eigen::BDCSVD<Matrix> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  double smin = a.rows() >= a.cols() ? sv(sv.size() - 1) : 0.0;
  if (!(smin > tol))
    throw RankDeficient("pseudoinverse: smallest singular value " +
                        std::to_string(smin) + " <= tolerance " + std::to_string(tol));
  return svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

inline Matrix pseudoinverse(const Matrix& a) {
  return pseudoinverse(a, default_injectivity_tol(a));
}

/// Ratio of extreme singular values of a square operator; +infinity when singular.
inline double cond(const Matrix& a) {
  detail::require_valid(a, "cond");
  if (a.rows() != a.cols())
    throw NotSquare("cond: operator is " + std::to_string(a.rows()) + "x" +
                    std::to_string(a.cols()));
  const auto sv = detail::svd_values(a).singularValues();
  double smin = sv(sv.size() - 1);
  if (smin <= 0.0) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

/// Stewart/Wedin perturbation bounds for the pseudoinverse of B = A + E:
///   ||B^+||       <=  ||A^+|| / (1 - ||A^+|| ||E||)
///   ||B^+ - A^+|| <=  sqrt(2) ||A^+||^2 ||E|| / (1 - ||A^+|| ||E||)
/// Requires A injective and ||A^+|| ||E|| < 1.
inline PerturbationBounds perturbation_bounds(const Matrix& a, const Matrix& e, double tol) {
  detail::require_valid(a, "perturbation_bounds");
  detail::require_valid(e, "perturbation_bounds");
  if (a.rows() != e.rows() || a.cols() != e.cols())
    throw Error("perturbation_bounds: shape mismatch between A and E");
  auto rep = injectivity(a, tol);
  if (!rep.is_injective)
    throw RankDeficient("perturbation_bounds: A not injective at tolerance");
  double na = 1.0 / rep.smallest_singular_value;  // ||A^+|| in the spectral norm
  double ne = operator_norm(e);
  double product = na * ne;
  if (!(product < 1.0))
    throw PerturbationTooLarge("perturbation_bounds: ||A^+|| ||E|| = " +
                               std::to_string(product) + " >= 1");
  double denom = 1.0 - product;
  return PerturbationBounds{na / denom, std::sqrt(2.0) * na * na * ne / denom};
}

inline PerturbationBounds perturbation_bounds(const Matrix& a, const Matrix& e) {
  return perturbation_bounds(a, e, default_injectivity_tol(a));
}

}  // namespace gnx
