// Command-line driver: solve / check / sweep.
#include <CLI11.hpp>
#include <cstdio>

#include "minkflow/solver.hpp"

namespace {

int run_solve(const minkflow::SolveConfig& cfg) {
  try {
    auto rep = minkflow::solve(cfg);
    std::printf("solved: dim=%d alpha=%g resolution=%d\n", cfg.dim, cfg.alpha,
                rep.resolution_used);
    std::printf("  stop=%s steps=%d residual=%.3e eta=%.6f lambda=%.6f\n",
                rep.stop_reason.c_str(), rep.run.steps, rep.residual_final, rep.eta_final,
                rep.lambda);
    std::printf("  verify: L1=%.3e mass_rel=%.3e pass=%d\n", rep.verify.l1_residual,
                rep.verify.mass_rel_err, rep.verify.pass ? 1 : 0);
    std::printf("  entropy certificate: body=%.6e ball=%.6e ok=%d\n", rep.entropy_body,
                rep.entropy_ball, rep.entropy_certificate_ok ? 1 : 0);
    if (!rep.report_path.empty()) std::printf("  report: %s\n", rep.report_path.c_str());
    return 0;
  } catch (const minkflow::HypothesisError& e) {
    std::fprintf(stderr, "hypothesis violation: %s\n", e.report.witness.c_str());
    return 2;
  } catch (const minkflow::FlowError& e) {
    std::fprintf(stderr, "flow failure: %s\n", e.what());
    return 3;
  } catch (const minkflow::VerificationError& e) {
    std::fprintf(stderr, "verification failure: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"L^p-Minkowski solver: normalized anisotropic Gauss-curvature flow on S^1/S^2"};
  app.require_subcommand(1);

  minkflow::SolveConfig cfg;
  std::string density, measure, sweep_path;

  auto* solve_cmd = app.add_subcommand("solve", "solve u^{1/alpha} det(hess u + u g) = f");
  solve_cmd->add_option("--dim", cfg.dim, "sphere dimension (1 or 2)")->default_val(1);
  solve_cmd->add_option("--alpha", cfg.alpha, "curvature power, alpha > 1/(n+2)")->required();
  solve_cmd->add_option("--density", density, "builtin name (uniform|cos2|bumps:<seed>) or csv:PATH");
  solve_cmd->add_option("--measure", measure, "measure spec file");
  solve_cmd->add_option("--resolution", cfg.resolution, "grid resolution")->default_val(256);
  solve_cmd->add_option("--mollify", cfg.mollify_k, "mollification level k (0 = none)")
      ->default_val(0);
  solve_cmd->add_option("--tol", cfg.tol, "residual stopping tolerance")->default_val(1e-5);
  solve_cmd->add_option("--tmax", cfg.t_max, "maximum flow time")->default_val(80.0);
  solve_cmd->add_option("--dtmax", cfg.dt_max, "maximum time step")->default_val(0.05);
  solve_cmd->add_option("--out", cfg.out_dir, "output directory");
  solve_cmd->add_option("--seed", cfg.seed, "seed recorded in the report")->default_val(0);

  double check_alpha = 1.0;
  int check_resolution = 256, check_dim = 1;
  std::string check_measure, check_density;
  auto* check_cmd = app.add_subcommand("check", "check the solvability hypothesis for a measure");
  check_cmd->add_option("--alpha", check_alpha, "curvature power")->required();
  check_cmd->add_option("--measure", check_measure, "measure spec file");
  check_cmd->add_option("--density", check_density, "builtin density name or csv:PATH");
  check_cmd->add_option("--dim", check_dim, "sphere dimension")->default_val(1);
  check_cmd->add_option("--resolution", check_resolution, "sweep grid resolution")
      ->default_val(256);

  auto* sweep_cmd = app.add_subcommand("sweep", "run a grid of solves in parallel");
  sweep_cmd->add_option("--config", sweep_path, "JSON config with a \"runs\" array")->required();

  CLI11_PARSE(app, argc, argv);

  if (solve_cmd->parsed()) {
    if (!density.empty()) {
      if (density.rfind("csv:", 0) == 0)
        cfg.density_csv = density.substr(4);
      else
        cfg.density_name = density;
    }
    cfg.measure_path = measure;
    return run_solve(cfg);
  }

  if (check_cmd->parsed()) {
    try {
      auto grid = minkflow::make_grid(check_dim, check_resolution);
      minkflow::MeasureSpec mu;
      if (!check_measure.empty()) {
        mu = minkflow::load_measure(check_measure, grid);
      } else if (!check_density.empty()) {
        if (check_density.rfind("csv:", 0) == 0)
          mu = minkflow::measure_from_density(minkflow::make_density(
              grid, minkflow::load_node_csv(check_density.substr(4), grid->size())));
        else
          mu = minkflow::measure_from_density(minkflow::builtin_density(check_density, grid));
      } else {
        std::fprintf(stderr, "check: need --measure or --density\n");
        return 1;
      }
      auto rep = minkflow::check_hypothesis(minkflow::normalize(std::move(mu)), check_alpha, *grid);
      std::printf("case %d: ok=%d delta=%.6g tau=%.6g%s%s\n", rep.case_id, rep.ok ? 1 : 0,
                  rep.delta, rep.tau, rep.witness.empty() ? "" : " note: ",
                  rep.witness.c_str());
      return rep.ok ? 0 : 2;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "error: %s\n", e.what());
      return 1;
    }
  }

  // sweep
  try {
    auto configs = minkflow::load_sweep_config(sweep_path);
    auto outcomes = minkflow::sweep(configs);
    int failures = 0;
    for (const auto& o : outcomes) {
      std::printf("run %zu: %s (%s)\n", o.index, o.ok ? "ok" : "failed", o.message.c_str());
      if (!o.ok) ++failures;
    }
    return failures == 0 ? 0 : 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
