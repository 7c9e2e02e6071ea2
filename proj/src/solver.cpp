#include "minkflow/solver.hpp"

#include <filesystem>
#include <fstream>
#include <future>
#include <json.hpp>

namespace minkflow {

std::pair<SupportField, double> rescale_to_solution(const SupportField& u, double eta_value,
                                                    double alpha) {
  if (!(eta_value > 0.0))
    throw std::invalid_argument("rescale_to_solution: eta must be positive");
  const int n = u.grid->dim;
  double c = std::pow(eta_value, alpha / (n * alpha + 1.0));
  return {rescale(u, c), 1.0 / c};
}

VerifyReport verify_solution(const SupportField& u, const DensityField& f, double alpha,
                             double tol) {
  VerifyReport rep;
  const auto& grid = *u.grid;
  auto conv = convexity_report(u);
  if (!conv.convex) {
    rep.l1_residual = std::numeric_limits<double>::infinity();
    rep.pass = false;
    return rep;
  }
  const double inv_alpha = 1.0 / alpha;
  std::vector<double> lhs(grid.size());
  double l1 = 0.0, mass = 0.0, mean_f = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j) {
    lhs[j] = std::pow(u.u[j], inv_alpha) * conv.sigma[j];
    l1 += grid.weights[j] * std::abs(lhs[j] - f.f[j]);
    mass += grid.weights[j] * lhs[j];
    mean_f += grid.weights[j] * f.f[j];
  }
  rep.l1_residual = l1 / grid.omega();
  rep.mass_lhs = mass;
  rep.mass_rhs = mean_f;  // omega_n * mean(f)
  rep.mass_rel_err = std::abs(rep.mass_lhs - rep.mass_rhs) / rep.mass_rhs;

  // weak-form residuals against the first n+2 spherical harmonics
  std::vector<std::function<double(const Vec3&)>> tests = {
      [](const Vec3&) { return 1.0; }, [](const Vec3& x) { return x.x; },
      [](const Vec3& x) { return x.y; }, [](const Vec3& x) { return x.z; }};
  tests.resize(grid.dim + 2);
  for (const auto& phi : tests) {
    double acc = 0.0;
    for (std::size_t j = 0; j < grid.size(); ++j)
      acc += grid.weights[j] * phi(grid.nodes[j]) * (lhs[j] - f.f[j]);
    rep.weak_residuals.push_back(std::abs(acc) / grid.omega());
  }
  rep.pass = rep.l1_residual <= tol && rep.mass_rel_err <= 1e-6;
  return rep;
}

namespace {

void validate_config(const SolveConfig& cfg) {
  if (cfg.dim != 1 && cfg.dim != 2) throw std::invalid_argument("solve: dim must be 1 or 2");
  if (!(cfg.alpha > 1.0 / (cfg.dim + 2)))
    throw std::invalid_argument("solve: alpha must exceed 1/(n+2)");
  if (cfg.resolution < 64) throw std::invalid_argument("solve: resolution must be >= 64");
  int sources = (!cfg.density_name.empty()) + (!cfg.density_csv.empty()) +
                cfg.density_values.has_value() + (!cfg.measure_path.empty());
  if (sources != 1)
    throw std::invalid_argument("solve: exactly one density/measure source is required");
}

SolveReport solve_impl(const SolveConfig& cfg, bool retried) {
  validate_config(cfg);
  auto grid = make_grid(cfg.dim, cfg.resolution);

  MeasureSpec raw;
  const bool is_measure = !cfg.measure_path.empty();
  if (is_measure) {
    raw = load_measure(cfg.measure_path, grid);
  } else if (cfg.density_values) {
    raw = measure_from_density(make_density(grid, *cfg.density_values));
  } else if (!cfg.density_csv.empty()) {
    raw = measure_from_density(make_density(grid, load_node_csv(cfg.density_csv, grid->size())));
  } else {
    raw = measure_from_density(builtin_density(cfg.density_name, grid));
  }

  SolveReport rep;
  rep.input_scale = raw.total_mass();
  rep.resolution_used = cfg.resolution;
  rep.retried = retried;
  MeasureSpec mu = normalize(std::move(raw));

  rep.hypothesis = check_hypothesis(mu, cfg.alpha, *grid);
  if (!rep.hypothesis.ok) throw HypothesisError(rep.hypothesis);

  if (is_measure && cfg.mollify_k < 2)
    throw std::invalid_argument("solve: measure sources require a mollification level k >= 2");
  DensityField f = (is_measure || cfg.mollify_k >= 2) ? mollify(mu, cfg.mollify_k, grid)
                                                      : normalize(*mu.ac_density);
  rep.f = f;

  SupportField u0 = make_ball(grid);
  if (cfg.initial_support)
    for (std::size_t j = 0; j < grid->size(); ++j) u0.u[j] = cfg.initial_support(grid->nodes[j]);

  std::ofstream history_out, entropy_out;
  RunOptions opt;
  opt.tol = cfg.tol;
  opt.t_max = cfg.t_max;
  opt.dt_max = cfg.dt_max;
  opt.keep_history = true;
  if (!cfg.out_dir.empty()) {
    std::filesystem::create_directories(cfg.out_dir);
    rep.history_path = cfg.out_dir + "/history.csv";
    rep.entropy_trace_path = cfg.out_dir + "/entropy_trace.csv";
    history_out.open(rep.history_path);
    entropy_out.open(rep.entropy_trace_path);
    opt.history_csv = &history_out;
    opt.entropy_csv = &entropy_out;
  }

  rep.run = run_flow(std::move(u0), f, cfg.alpha, opt);
  if (rep.run.stop_reason == "step_failure")
    throw FlowError("flow step failed at t = " + std::to_string(rep.run.state.t));
  rep.flow_converged = rep.run.converged;
  rep.stop_reason = rep.run.stop_reason;
  rep.eta_final = rep.run.eta_final;
  rep.residual_final = rep.run.residual_final;

  rep.normalized_body = rep.run.state.u;
  auto [usol, lambda] = rescale_to_solution(rep.normalized_body, rep.eta_final, cfg.alpha);
  rep.lambda = lambda;

  rep.verify = verify_solution(usol, f, cfg.alpha, 10.0 * cfg.tol);
  if (!rep.verify.pass) {
    if (!retried) {
      SolveConfig again = cfg;
      again.resolution *= 2;
      return solve_impl(again, true);
    }
    throw VerificationError(rep.verify);
  }

  rep.entropy_body = entropy(rep.normalized_body, f, cfg.alpha).value;
  rep.entropy_ball = entropy(make_ball(grid), f, cfg.alpha).value;
  rep.entropy_certificate_ok = rep.entropy_body <= rep.entropy_ball + 1e-6;

  if (cfg.alpha < 1.0) {
    double p = 1.0 - 1.0 / cfg.alpha;
    rep.lambda_bound = std::pow(2.0, std::abs(p) / (std::abs(p) + cfg.dim));
    rep.lambda_bound_ok = rep.lambda <= 1.05 * rep.lambda_bound;
  }

  // undo the input normalization so `body` solves the equation for the raw data
  double back = std::pow(rep.input_scale, cfg.alpha / (cfg.dim * cfg.alpha + 1.0));
  rep.body = rescale(usol, back);

  if (!cfg.out_dir.empty()) {
    if (cfg.dim == 1) {
      rep.body_path = cfg.out_dir + "/body.csv";
      write_boundary_csv(rep.body, rep.body_path);
    } else {
      rep.body_path = cfg.out_dir + "/body.obj";
      write_boundary_obj(rep.body, rep.body_path);
    }
    rep.report_path = cfg.out_dir + "/report.json";
    nlohmann::json j;
    j["dim"] = cfg.dim;
    j["alpha"] = cfg.alpha;
    j["resolution"] = rep.resolution_used;
    j["mollify_k"] = cfg.mollify_k;
    j["tol"] = cfg.tol;
    j["seed"] = cfg.seed;
    j["input_scale"] = rep.input_scale;
    j["lambda"] = rep.lambda;
    j["eta_final"] = rep.eta_final;
    j["residual_final"] = rep.residual_final;
    j["stop_reason"] = rep.stop_reason;
    j["flow_converged"] = rep.flow_converged;
    j["steps"] = rep.run.steps;
    j["recenter_events"] = rep.run.recenter_events;
    j["entropy_increases"] = rep.run.entropy_increases;
    j["max_volume_err"] = rep.run.max_volume_err;
    j["min_ratio"] = rep.run.min_ratio;
    j["min_u_final"] = rep.run.state.min_u;
    j["retried"] = rep.retried;
    j["hypothesis"] = {{"ok", rep.hypothesis.ok},
                       {"case", rep.hypothesis.case_id},
                       {"delta", rep.hypothesis.delta},
                       {"tau", rep.hypothesis.tau},
                       {"witness", rep.hypothesis.witness}};
    j["verify"] = {{"l1_residual", rep.verify.l1_residual},
                   {"mass_lhs", rep.verify.mass_lhs},
                   {"mass_rhs", rep.verify.mass_rhs},
                   {"mass_rel_err", rep.verify.mass_rel_err},
                   {"weak_residuals", rep.verify.weak_residuals},
                   {"pass", rep.verify.pass}};
    j["entropy_certificate"] = {{"body", rep.entropy_body},
                                {"ball", rep.entropy_ball},
                                {"ok", rep.entropy_certificate_ok}};
    if (cfg.alpha < 1.0)
      j["lambda_bound"] = {{"bound", rep.lambda_bound}, {"ok", rep.lambda_bound_ok}};
    j["paths"] = {{"history", rep.history_path},
                  {"entropy_trace", rep.entropy_trace_path},
                  {"body", rep.body_path}};
    std::ofstream out(rep.report_path);
    out << j.dump(2) << "\n";
  }
  return rep;
}

}  // namespace

SolveReport solve(const SolveConfig& config) { return solve_impl(config, false); }

std::vector<SweepOutcome> sweep(const std::vector<SolveConfig>& configs) {
  std::vector<std::future<SweepOutcome>> futures;
  futures.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i) {
    futures.push_back(std::async(std::launch::async, [i, &configs]() {
      SweepOutcome out;
      out.index = i;
      try {
        auto rep = solve(configs[i]);
        out.ok = true;
        out.message = "residual " + std::to_string(rep.residual_final) + ", lambda " +
                      std::to_string(rep.lambda);
      } catch (const HypothesisError& e) {
        out.exit_code = 2;
        out.message = e.what();
      } catch (const FlowError& e) {
        out.exit_code = 3;
        out.message = e.what();
      } catch (const VerificationError& e) {
        out.exit_code = 4;
        out.message = e.what();
      } catch (const std::exception& e) {
        out.exit_code = 1;
        out.message = e.what();
      }
      return out;
    }));
  }
  std::vector<SweepOutcome> outcomes;
  outcomes.reserve(futures.size());
  for (auto& fu : futures) outcomes.push_back(fu.get());
  return outcomes;
}

std::vector<SolveConfig> load_sweep_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_sweep_config: cannot open " + path);
  nlohmann::json j;
  in >> j;
  if (!j.contains("runs") || !j["runs"].is_array())
    throw std::runtime_error("load_sweep_config: expected a top-level \"runs\" array");
  std::vector<SolveConfig> configs;
  for (const auto& r : j["runs"]) {
    SolveConfig c;
    c.dim = r.value("dim", 1);
    c.alpha = r.value("alpha", 1.0);
    c.resolution = r.value("resolution", 256);
    c.mollify_k = r.value("mollify", 0);
    c.dt_max = r.value("dt_max", 0.05);
    c.t_max = r.value("tmax", 80.0);
    c.tol = r.value("tol", 1e-5);
    c.out_dir = r.value("out", std::string());
    c.seed = r.value("seed", 0);
    c.density_name = r.value("density", std::string());
    c.density_csv = r.value("density_csv", std::string());
    c.measure_path = r.value("measure", std::string());
    configs.push_back(std::move(c));
  }
  return configs;
}

}  // namespace minkflow
