// Command-line driver: radius reports, solver runs, trace certification, and
// batch sweeps with CSV summaries.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "gnx/certify.hpp"
#include "gnx/problems.hpp"
#include "gnx/trace_io.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitInfeasible = 2;
constexpr int kExitViolated = 3;
constexpr int kExitNotApplicable = 4;

std::filesystem::path resolve_out(const std::string& path) {
  std::filesystem::path p(path);
  if (p.is_absolute()) return p;
  if (const char* dir = std::getenv("GNX_OUT_DIR")) return std::filesystem::path(dir) / p;
  return p;
}

gnx::Vector parse_vector(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    values.push_back(std::stod(item));
  }
  gnx::Vector v(values.size());
  for (size_t i = 0; i < values.size(); ++i) v(static_cast<int>(i)) = values[i];
  return v;
}

gnx::ForcingPolicy parse_forcing(const std::string& text) {
  if (text == "zero" || text.empty()) return gnx::ForcingPolicy::zero();
  if (text.rfind("const:", 0) == 0)
    return gnx::ForcingPolicy::constant(std::stod(text.substr(6)));
  if (text.rfind("auto:", 0) == 0)
    return gnx::ForcingPolicy::auto_fraction(std::stod(text.substr(5)));
  throw gnx::ParseError("forcing must be zero, const:<theta> or auto:<fraction>");
}

gnx::SolveMode parse_mode(const std::string& text) {
  if (text == "exact_gn" || text == "exact") return gnx::SolveMode::exact_gn;
  if (text == "modified_gn" || text == "modified") return gnx::SolveMode::modified_gn;
  if (text == "gn_like") return gnx::SolveMode::gn_like;
  if (text == "inexact") return gnx::SolveMode::inexact;
  throw gnx::ParseError("unknown mode '" + text + "'");
}

gnx::PreconditionerKind parse_precond(const std::string& text) {
  if (text == "identity") return gnx::PreconditionerKind::identity;
  if (text == "jacobi") return gnx::PreconditionerKind::jacobi;
  throw gnx::ParseError("preconditioner must be identity or jacobi");
}

gnx::ResidualStrategy parse_strategy(const std::string& text) {
  if (text == "none") return gnx::ResidualStrategy::none;
  if (text == "random_scaled") return gnx::ResidualStrategy::random_scaled;
  if (text == "inner_truncation" || text == "inner_solver_truncation")
    return gnx::ResidualStrategy::inner_solver_truncation;
  throw gnx::ParseError("residual strategy must be none, random_scaled or inner_truncation");
}

double parse_kappa(const std::string& text) {
  if (text == "inf" || text == "infinity") return gnx::kInf;
  return std::stod(text);
}

/// Majorant for a catalog entry under the requested family flag.
gnx::MajorantSpec majorant_for(const gnx::CatalogEntry& entry, const std::string& family) {
  if (family == "lipschitz") {
    if (!entry.lipschitz_K) throw gnx::Error(entry.id + " has no Lipschitz constant");
    return gnx::make_lipschitz_majorant(*entry.lipschitz_K);
  }
  if (family == "smale") {
    if (!entry.smale_gamma) throw gnx::Error(entry.id + " has no Smale gamma");
    return gnx::make_smale_majorant(*entry.smale_gamma);
  }
  throw gnx::ParseError("family must be lipschitz or smale for catalog problems");
}

struct RadiusArgs {
  std::string family = "lipschitz";
  double K = 1.0;
  double gamma = 1.0;
  std::string fprime_coeffs;
  double domain_bound = gnx::kInf;
  double dplus0 = std::numeric_limits<double>::quiet_NaN();
  double beta = 1.0;
  double c = 0.0;
  std::string kappa = "inf";
  double omega1 = 1.0;
  double omega2 = 0.0;
  double vartheta = 0.0;
  std::string json_out;
};

/// Polynomial custom majorant: f' given by its coefficients, f integrated
/// term by term, D+f'(0) equal to the linear coefficient unless overridden.
gnx::MajorantSpec custom_majorant(const RadiusArgs& args) {
  gnx::Vector coeffs = parse_vector(args.fprime_coeffs);
  if (coeffs.size() < 2)
    throw gnx::ParseError("--fprime-coeffs needs at least two coefficients");
  std::vector<double> cs(coeffs.data(), coeffs.data() + coeffs.size());
  auto fprime = [cs](double t) {
    double acc = 0.0;
    for (size_t i = cs.size(); i-- > 0;) acc = acc * t + cs[i];
    return acc;
  };
  auto f = [cs](double t) {
    double acc = 0.0;
    for (size_t i = cs.size(); i-- > 0;) acc = acc * t + cs[i] / (i + 1.0);
    return acc * t;
  };
  double dplus0 = std::isnan(args.dplus0) ? cs[1] : args.dplus0;
  return gnx::make_majorant(f, fprime, dplus0, args.domain_bound);
}

int cmd_radius(const RadiusArgs& args) {
  gnx::ProblemConstants consts{args.c, args.beta, parse_kappa(args.kappa)};
  gnx::MethodParams params{args.vartheta, args.omega1, args.omega2};

  gnx::MajorantSpec spec = args.family == "lipschitz" ? gnx::make_lipschitz_majorant(args.K)
                           : args.family == "smale"   ? gnx::make_smale_majorant(args.gamma)
                                                      : custom_majorant(args);
  auto rep = gnx::radius(spec, consts, params);

  std::optional<double> r_closed, nu_closed;
  if (args.family == "lipschitz") {
    nu_closed = 1.0 / (args.beta * args.K);
    if (rep.feasible) r_closed = gnx::closed_form_radius_lipschitz(args.K, consts, params);
  } else if (args.family == "smale") {
    nu_closed = ((1.0 + args.beta) - std::sqrt(args.beta * (1.0 + args.beta))) /
                (args.gamma * (1.0 + args.beta));
    if (rep.feasible) r_closed = gnx::closed_form_radius_smale(args.gamma, consts, params);
  }

  std::ostringstream out;
  out.precision(15);
  out << "family   = " << args.family << "\n";
  out << "alpha    = " << rep.alpha << "\n";
  out << "nu       = " << rep.nu << " (bisection)";
  if (nu_closed) out << "  [closed form " << *nu_closed << ", diff "
                     << std::abs(rep.nu - *nu_closed) << "]";
  out << "\n";
  if (!rep.feasible) {
    out << "feasible = no\n";
    std::cout << out.str();
    for (const auto& d : rep.diagnostics) std::cerr << "infeasible: " << d << "\n";
    return kExitInfeasible;
  }
  out << "rho      = " << rep.rho << " (bisection)\n";
  char rbuf[64];
  std::snprintf(rbuf, sizeof(rbuf), "%.6g", rep.ball_radius);
  out << "r = " << rbuf << " (bisection)";
  if (r_closed) out << "  [closed form " << *r_closed << ", diff "
                    << std::abs(rep.ball_radius - *r_closed) << "]";
  out << "\nfeasible = yes\n";
  std::cout << out.str();

  if (!args.json_out.empty()) {
    nlohmann::json j;
    j["family"] = args.family;
    j["alpha"] = rep.alpha;
    j["nu"] = rep.nu;
    if (nu_closed) j["nu_closed_form"] = *nu_closed;
    j["rho"] = rep.rho;
    j["r"] = rep.ball_radius;
    if (r_closed) {
      j["r_closed_form"] = *r_closed;
      j["r_route_difference"] = std::abs(rep.ball_radius - *r_closed);
    }
    j["feasible"] = rep.feasible;
    j["diagnostics"] = rep.diagnostics;
    std::ofstream os(resolve_out(args.json_out));
    os << j.dump(2) << "\n";
  }
  return kExitOk;
}

struct SolveArgs {
  std::string problem_id;
  std::string mode = "exact_gn";
  double vartheta = 0.0;
  double omega1 = 1.0;
  double omega2 = 0.0;
  std::string forcing = "zero";
  std::string precond = "identity";
  std::string strategy = "none";
  std::string x0_text;
  double radius_fraction = -1.0;
  std::string family = "lipschitz";
  bool calibrate_modified = false;
  std::uint64_t seed = 0;
  int max_iters = 200;
  double grad_tol = 1e-10;
  double step_tol = 1e-14;
  std::string out;
};

int cmd_solve(const SolveArgs& args) {
  const auto& entry = gnx::find_problem(args.problem_id);
  gnx::SolverConfig config;
  config.mode = parse_mode(args.mode);
  config.vartheta = args.vartheta;
  config.omega1_target = args.omega1;
  config.omega2_target = args.omega2;
  config.forcing = parse_forcing(args.forcing);
  config.preconditioner = parse_precond(args.precond);
  config.residual_strategy = parse_strategy(args.strategy);
  config.max_iters = args.max_iters;
  config.grad_tol = args.grad_tol;
  config.step_tol = args.step_tol;
  config.seed = args.seed;

  gnx::MethodParams params{args.vartheta, args.omega1, args.omega2};
  gnx::MajorantSpec spec = majorant_for(entry, args.family);
  if (args.calibrate_modified) {
    if (config.mode != gnx::SolveMode::modified_gn)
      throw gnx::Error("--calibrate-modified only applies to modified_gn");
    double fraction = args.radius_fraction > 0.0 ? args.radius_fraction : 0.5;
    params = gnx::calibrate_modified_params(entry.problem, spec, entry.constants, fraction,
                                            args.seed);
  }

  gnx::Vector x0;
  if (!args.x0_text.empty()) {
    x0 = parse_vector(args.x0_text);
  } else if (args.radius_fraction > 0.0) {
    if (!(args.radius_fraction < 1.0))
      throw gnx::Error("--radius-fraction must lie in (0, 1)");
    auto rep = gnx::radius(spec, entry.constants, params);
    if (!rep.feasible) {
      for (const auto& d : rep.diagnostics) std::cerr << "infeasible: " << d << "\n";
      return kExitInfeasible;
    }
    x0 = gnx::point_at_distance(*entry.problem.stationary_point,
                                args.radius_fraction * rep.ball_radius, args.seed);
  } else {
    throw gnx::Error("provide --x0 or --radius-fraction");
  }

  auto trace = gnx::iterate(entry.problem, config, x0);

  std::ofstream os(resolve_out(args.out), std::ios::binary);
  if (!os) throw gnx::Error("cannot open output file " + args.out);
  gnx::write_trace_jsonl(trace, os);

  std::cout << "iterations=" << trace.records.size()
            << " termination=" << gnx::termination_name(trace.termination)
            << " final_grad_norm=" << trace.final_grad_norm;
  if (trace.final_error_to_star)
    std::cout << " final_error_to_star=" << *trace.final_error_to_star;
  if (args.calibrate_modified)
    std::cout << " omega1=" << params.omega1 << " omega2=" << params.omega2;
  std::cout << " trace=" << resolve_out(args.out).string() << "\n";
  return kExitOk;
}

struct CertifyArgs {
  std::string trace_path;
  std::string problem_id;
  std::string family = "lipschitz";
  double vartheta = 0.0;
  double omega1 = 1.0;
  double omega2 = 0.0;
  std::string out;
};

/// Smallest relative margin (bound - observed) / bound over the cert steps.
double worst_relative_slack(const gnx::Certificate& cert) {
  double worst = gnx::kInf;
  for (const auto& s : cert.per_step)
    if (s.q2_bound > 0.0)
      worst = std::min(worst, (s.q2_bound - s.observed_error) / s.q2_bound);
  return worst;
}

int cmd_certify(const CertifyArgs& args) {
  std::ifstream is(resolve_out(args.trace_path));
  if (!is) {
    std::cerr << "cannot open trace file " << args.trace_path << "\n";
    return kExitUsage;
  }
  auto trace = gnx::read_trace_jsonl(is);
  const auto& entry = gnx::find_problem(args.problem_id);
  if (!entry.problem.stationary_point) throw gnx::Error("problem has no stationary point");
  gnx::MajorantSpec spec = majorant_for(entry, args.family);
  gnx::MethodParams params{args.vartheta, args.omega1, args.omega2};
  auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, spec, entry.constants,
                                 params);
  std::cout << "overall=" << gnx::to_string(cert.overall) << " steps=" << cert.per_step.size();
  double slack = worst_relative_slack(cert);
  if (std::isfinite(slack)) std::cout << " worst_slack=" << slack;
  std::cout << "\n";
  for (const auto& d : cert.violation_details) std::cerr << d << "\n";
  if (!args.out.empty()) {
    std::ofstream os(resolve_out(args.out));
    os << gnx::certificate_to_json(cert).dump(2) << "\n";
  }
  switch (cert.overall) {
    case gnx::CertStatus::certified: return kExitOk;
    case gnx::CertStatus::violated: return kExitViolated;
    case gnx::CertStatus::not_applicable: return kExitNotApplicable;
  }
  return kExitUsage;
}

struct SweepArgs {
  std::string config_path;
  std::string out;
};

std::string csv_escape(std::string s) {
  for (auto& ch : s)
    if (ch == ',') ch = ';';
  return s;
}

int cmd_sweep(const SweepArgs& args) {
  std::ifstream is(resolve_out(args.config_path));
  if (!is) {
    std::cerr << "cannot open sweep config " << args.config_path << "\n";
    return kExitUsage;
  }
  nlohmann::json cfg;
  try {
    cfg = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config parse error: " << e.what() << "\n";
    return kExitUsage;
  }

  std::ofstream os(resolve_out(args.out), std::ios::binary);
  if (!os) {
    std::cerr << "cannot open output file " << args.out << "\n";
    return kExitUsage;
  }
  os << "problem,mode,family,vartheta,omega1,omega2,forcing,preconditioner,residual_strategy,"
        "fraction,seed,radius,iterations,termination,certified,worst_slack,note\n";

  const auto problems = cfg.value("problems", std::vector<std::string>{});
  const auto fractions = cfg.value("fractions", std::vector<double>{0.5});
  const auto modes = cfg.value("modes", nlohmann::json::array());
  const std::uint64_t base_seed = cfg.value("seed", 20240808ull);
  const std::string default_family = cfg.value("family", "lipschitz");

  bool any_violation = false;
  std::uint64_t row_seed = base_seed;
  for (const auto& problem_id : problems) {
    for (const auto& mode_cfg : modes) {
      for (double fraction : fractions) {
        ++row_seed;
        const auto& entry = gnx::find_problem(problem_id);
        std::string family = mode_cfg.value("family", default_family);
        std::string mode_text = mode_cfg.value("mode", "exact_gn");
        std::string forcing_text = mode_cfg.value("forcing", "zero");
        std::string precond_text = mode_cfg.value("preconditioner", "identity");
        std::string strategy_text = mode_cfg.value("residual", "none");
        double vartheta = mode_cfg.value("vartheta", 0.0);
        gnx::MethodParams params{vartheta, mode_cfg.value("omega1", 1.0),
                                 mode_cfg.value("omega2", 0.0)};

        auto emit = [&](double radius_value, size_t iterations, const std::string& termination,
                        const std::string& certified, double slack, const std::string& note) {
          os << problem_id << ',' << mode_text << ',' << family << ',' << vartheta << ','
             << params.omega1 << ',' << params.omega2 << ',' << forcing_text << ','
             << precond_text << ',' << strategy_text << ',' << fraction << ',' << row_seed
             << ',' << radius_value << ',' << iterations << ',' << termination << ','
             << certified << ',';
          if (std::isfinite(slack)) os << slack;
          os << ',' << csv_escape(note) << "\n";
        };

        try {
          gnx::MajorantSpec spec = majorant_for(entry, family);
          if (mode_cfg.value("calibrate", false))
            params = gnx::calibrate_modified_params(entry.problem, spec, entry.constants,
                                                    fraction, row_seed);
          auto rep = gnx::radius(spec, entry.constants, params);
          if (!rep.feasible) {
            std::string why;
            for (const auto& d : rep.diagnostics) why += d + "; ";
            emit(0.0, 0, "-", "infeasible", gnx::kInf, why);
            continue;
          }
          gnx::SolverConfig config;
          config.mode = parse_mode(mode_text);
          config.vartheta = vartheta;
          config.omega1_target = params.omega1;
          config.omega2_target = params.omega2;
          config.forcing = parse_forcing(forcing_text);
          config.preconditioner = parse_precond(precond_text);
          config.residual_strategy = parse_strategy(strategy_text);
          config.max_iters = mode_cfg.value("max_iters", 500);
          config.seed = row_seed;
          gnx::Vector x0 = gnx::point_at_distance(*entry.problem.stationary_point,
                                                  fraction * rep.ball_radius, row_seed);
          auto trace = gnx::iterate(entry.problem, config, x0);
          auto cert = gnx::certify_trace(trace, *entry.problem.stationary_point, spec,
                                         entry.constants, params);
          bool good = cert.overall == gnx::CertStatus::certified;
          if (!good) any_violation = true;
          std::string note = cert.violation_details.empty() ? "" : cert.violation_details[0];
          emit(rep.ball_radius, trace.records.size(),
               gnx::termination_name(trace.termination), gnx::to_string(cert.overall),
               worst_relative_slack(cert), note);
        } catch (const gnx::Error& e) {
          any_violation = true;
          emit(0.0, 0, "error", "error", gnx::kInf, e.what());
        }
      }
    }
  }
  os.flush();
  std::cout << "sweep summary written to " << resolve_out(args.out).string() << "\n";
  return any_violation ? kExitViolated : kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"inexact Gauss-Newton solver with certified local convergence radii"};
  app.require_subcommand(1);

  RadiusArgs radius_args;
  auto* radius_cmd = app.add_subcommand("radius", "compute convergence-radius report");
  radius_cmd->add_option("--family", radius_args.family, "lipschitz|smale|custom");
  radius_cmd->add_option("--K", radius_args.K, "Lipschitz constant of the Jacobian");
  radius_cmd->add_option("--gamma", radius_args.gamma, "Smale analytic constant");
  radius_cmd->add_option("--fprime-coeffs", radius_args.fprime_coeffs,
                         "custom family: polynomial coefficients of f' (c0 must be -1)");
  radius_cmd->add_option("--domain-bound", radius_args.domain_bound, "custom family: R");
  radius_cmd->add_option("--dplus0", radius_args.dplus0, "custom family: D+f'(0)");
  radius_cmd->add_option("--beta", radius_args.beta, "norm of the pseudoinverse at x_*");
  radius_cmd->add_option("--c", radius_args.c, "residual norm at x_*");
  radius_cmd->add_option("--kappa", radius_args.kappa, "domain-ball radius or 'inf'");
  radius_cmd->add_option("--omega1", radius_args.omega1, "operator approximation bound");
  radius_cmd->add_option("--omega2", radius_args.omega2, "operator deviation bound");
  radius_cmd->add_option("--vartheta", radius_args.vartheta, "forcing cap");
  radius_cmd->add_option("--json", radius_args.json_out, "write report as JSON");

  SolveArgs solve_args;
  auto* solve_cmd = app.add_subcommand("solve", "run an iteration and write a JSONL trace");
  solve_cmd->add_option("--problem", solve_args.problem_id, "catalog problem id")->required();
  solve_cmd->add_option("--mode", solve_args.mode, "exact_gn|modified_gn|gn_like|inexact");
  solve_cmd->add_option("--vartheta", solve_args.vartheta, "forcing cap");
  solve_cmd->add_option("--omega1", solve_args.omega1, "omega1 budget / gn_like target");
  solve_cmd->add_option("--omega2", solve_args.omega2, "omega2 budget / gn_like target");
  solve_cmd->add_option("--forcing", solve_args.forcing, "zero|const:<v>|auto:<q>");
  solve_cmd->add_option("--precond", solve_args.precond, "identity|jacobi");
  solve_cmd->add_option("--residual", solve_args.strategy,
                        "none|random_scaled|inner_truncation");
  solve_cmd->add_option("--x0", solve_args.x0_text, "start point as comma-separated floats");
  solve_cmd->add_option("--radius-fraction", solve_args.radius_fraction,
                        "start at this fraction of the certified radius");
  solve_cmd->add_option("--family", solve_args.family, "majorant family for the radius");
  solve_cmd->add_flag("--calibrate-modified", solve_args.calibrate_modified,
                      "pick omega budgets for modified_gn by probing");
  solve_cmd->add_option("--seed", solve_args.seed, "run seed");
  solve_cmd->add_option("--max-iters", solve_args.max_iters, "iteration cap");
  solve_cmd->add_option("--grad-tol", solve_args.grad_tol, "gradient-norm stop");
  solve_cmd->add_option("--step-tol", solve_args.step_tol, "step-norm stop");
  solve_cmd->add_option("--out", solve_args.out, "trace output path")->required();

  CertifyArgs certify_args;
  auto* certify_cmd = app.add_subcommand("certify", "check a trace against the error bounds");
  certify_cmd->add_option("--trace", certify_args.trace_path, "trace JSONL path")->required();
  certify_cmd->add_option("--problem", certify_args.problem_id, "catalog problem id")
      ->required();
  certify_cmd->add_option("--family", certify_args.family, "majorant family");
  certify_cmd->add_option("--vartheta", certify_args.vartheta, "forcing cap");
  certify_cmd->add_option("--omega1", certify_args.omega1, "omega1 budget");
  certify_cmd->add_option("--omega2", certify_args.omega2, "omega2 budget");
  certify_cmd->add_option("--out", certify_args.out, "certificate JSON path");

  SweepArgs sweep_args;
  auto* sweep_cmd = app.add_subcommand("sweep", "run a problem x mode x parameter grid");
  sweep_cmd->add_option("--config", sweep_args.config_path, "sweep config JSON")->required();
  sweep_cmd->add_option("--out", sweep_args.out, "summary CSV path")->required();

  try {
    app.parse(argc, argv);
    if (radius_cmd->parsed()) return cmd_radius(radius_args);
    if (solve_cmd->parsed()) return cmd_solve(solve_args);
    if (certify_cmd->parsed()) return cmd_certify(certify_args);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_args);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  } catch (const gnx::Infeasible& e) {
    std::cerr << "infeasible: " << e.what() << "\n";
    return kExitInfeasible;
  } catch (const gnx::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
  return kExitUsage;
}
