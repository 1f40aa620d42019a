#pragma once

#include <charconv>
#include <istream>
#include <ostream>
#include <string>

#include <json.hpp>

#include "gnx/certify.hpp"
#include "gnx/solver.hpp"

namespace gnx {

inline const char* termination_name(Termination t) {
  switch (t) {
    case Termination::converged_grad: return "converged_grad";
    case Termination::converged_step: return "converged_step";
    case Termination::max_iters: return "max_iters";
    case Termination::diverged: return "diverged";
    case Termination::error: return "error";
  }
  return "?";
}

inline Termination termination_from(const std::string& name) {
  if (name == "converged_grad") return Termination::converged_grad;
  if (name == "converged_step") return Termination::converged_step;
  if (name == "max_iters") return Termination::max_iters;
  if (name == "diverged") return Termination::diverged;
  if (name == "error") return Termination::error;
  throw ParseError("unknown termination '" + name + "'");
}

namespace detail {

/// Decimal rendering with 17 significant digits; round-trips doubles exactly.
inline std::string fmt17(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline void append_vector(std::string& out, const Vector& v) {
  out += '[';
  for (int i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += fmt17(v(i));
  }
  out += ']';
}

inline Vector vector_from(const nlohmann::json& j) {
  Vector v(j.size());
  for (size_t i = 0; i < j.size(); ++i) v(static_cast<int>(i)) = j[i].get<double>();
  return v;
}

}  // namespace detail

/// One JSON object per iteration, then a summary line carrying the
/// termination state and final iterate.
inline void write_trace_jsonl(const IterationTrace& trace, std::ostream& os) {
  for (const auto& rec : trace.records) {
    std::string line = "{\"k\":" + std::to_string(rec.k) + ",\"x_k\":";
    detail::append_vector(line, rec.x);
    line += ",\"step_norm\":" + detail::fmt17(rec.step_norm);
    line += ",\"grad_norm\":" + detail::fmt17(rec.grad_norm);
    line += ",\"error_to_star\":";
    line += rec.error_to_star ? detail::fmt17(*rec.error_to_star) : "null";
    line += ",\"theta_k\":" + detail::fmt17(rec.theta);
    line += ",\"cond_PM\":" + detail::fmt17(rec.cond_PM);
    line += ",\"residual_norm_P\":" + detail::fmt17(rec.residual_norm_P);
    line += ",\"bound_rhs_P\":" + detail::fmt17(rec.bound_rhs_P);
    line += ",\"omega1_observed\":" + detail::fmt17(rec.omega1_observed);
    line += ",\"omega2_observed\":" + detail::fmt17(rec.omega2_observed);
    line += "}\n";
    os << line;
  }
  std::string tail = "{\"termination\":\"";
  tail += termination_name(trace.termination);
  tail += "\",\"final_x\":";
  detail::append_vector(tail, trace.final_point);
  tail += ",\"final_grad_norm\":" + detail::fmt17(trace.final_grad_norm);
  tail += ",\"final_error_to_star\":";
  tail += trace.final_error_to_star ? detail::fmt17(*trace.final_error_to_star) : "null";
  tail += "}\n";
  os << tail;
}

inline IterationTrace read_trace_jsonl(std::istream& is) {
  IterationTrace trace;
  bool got_tail = false;
  std::string line;
  int line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
    try {
      if (j.contains("termination")) {
        trace.termination = termination_from(j.at("termination").get<std::string>());
        trace.final_point = detail::vector_from(j.at("final_x"));
        trace.final_grad_norm = j.at("final_grad_norm").get<double>();
        if (!j.at("final_error_to_star").is_null())
          trace.final_error_to_star = j.at("final_error_to_star").get<double>();
        got_tail = true;
        continue;
      }
      StepRecord rec;
      rec.k = j.at("k").get<int>();
      rec.x = detail::vector_from(j.at("x_k"));
      rec.step_norm = j.at("step_norm").get<double>();
      rec.grad_norm = j.at("grad_norm").get<double>();
      if (!j.at("error_to_star").is_null())
        rec.error_to_star = j.at("error_to_star").get<double>();
      rec.theta = j.at("theta_k").get<double>();
      rec.cond_PM = j.at("cond_PM").get<double>();
      rec.residual_norm_P = j.at("residual_norm_P").get<double>();
      rec.bound_rhs_P = j.at("bound_rhs_P").get<double>();
      rec.omega1_observed = j.at("omega1_observed").get<double>();
      rec.omega2_observed = j.at("omega2_observed").get<double>();
      trace.records.push_back(std::move(rec));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (!got_tail) throw ParseError("trace file has no summary line");
  return trace;
}

inline nlohmann::json certificate_to_json(const Certificate& cert) {
  nlohmann::json j;
  j["overall"] = to_string(cert.overall);
  j["violation_details"] = cert.violation_details;
  j["per_step"] = nlohmann::json::array();
  for (const auto& s : cert.per_step) {
    j["per_step"].push_back({{"k", s.k},
                             {"observed_error", s.observed_error},
                             {"q2_bound", s.q2_bound},
                             {"contraction_ok", s.contraction_ok},
                             {"in_ball_ok", s.in_ball_ok}});
  }
  return j;
}

}  // namespace gnx
