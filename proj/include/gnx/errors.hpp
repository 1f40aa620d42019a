#pragma once

#include <stdexcept>
#include <string>

namespace gnx {

/// Base class for all gnx error conditions.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Operator is not injective at the requested tolerance.
struct RankDeficient : Error {
  using Error::Error;
};

/// Operation requires a square operator.
struct NotSquare : Error {
  using Error::Error;
};

/// Perturbation bound preconditions fail: ||A^+|| ||E|| >= 1.
struct PerturbationTooLarge : Error {
  using Error::Error;
};

/// Majorant fails h1/h2 validation at construction.
struct InvalidMajorant : Error {
  using Error::Error;
};

/// Scalar argument outside the majorant domain [0, R).
struct DomainExceeded : Error {
  using Error::Error;
};

/// Hypotheses of the convergence theorem do not hold for these inputs.
struct Infeasible : Error {
  using Error::Error;
};

/// Requested expansion point lies outside the certified ball.
struct OutOfBall : Error {
  using Error::Error;
};

/// The forcing-term condition theta_k * cond(P_k M_k) <= vartheta failed,
/// or an injected residual exceeded its permitted norm.
struct ForcingViolation : Error {
  using Error::Error;
};

/// Requested omega targets for the approximate normal operator cannot be met.
struct TargetUnreachable : Error {
  using Error::Error;
};

struct SingularPreconditioner : Error {
  using Error::Error;
};

struct StationaryPointMissing : Error {
  using Error::Error;
};

/// Malformed trace / config / report file.
struct ParseError : Error {
  using Error::Error;
};

}  // namespace gnx
