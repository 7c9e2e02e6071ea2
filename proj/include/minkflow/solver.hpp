// Orchestration: hypothesis check, mollification, flow, rescaling to a
// solution of u^{1/alpha} det(nabla^2 u + u g) = f, verification, and report
// emission.
#pragma once

#include <cstdint>

#include "minkflow/flow.hpp"

namespace minkflow {

struct SolveConfig {
  int dim = 1;
  double alpha = 1.0;
  int resolution = 256;
  int mollify_k = 0;  // 0 = none; measure sources require k >= 2
  double dt_max = 0.05;
  double t_max = 80.0;
  double tol = 1e-5;
  std::string out_dir;  // empty: no files written
  std::uint64_t seed = 0;

  // exactly one source: a builtin density name, a node-value CSV, raw node
  // values, or a measure file
  std::string density_name;
  std::string density_csv;
  std::optional<std::vector<double>> density_values;
  std::string measure_path;

  // optional initial body (defaults to the unit ball)
  std::function<double(const Vec3&)> initial_support;
};

struct VerifyReport {
  double l1_residual = 0.0;              // mean |u^{1/alpha} sigma - f|
  double mass_lhs = 0.0, mass_rhs = 0.0; // int u^{1-p} dS vs omega_n mean(f)
  double mass_rel_err = 0.0;
  std::vector<double> weak_residuals;    // against low-order harmonics
  bool pass = false;
};

struct SolveReport {
  SupportField body;             // solves the equation for the raw input density
  SupportField normalized_body;  // volume-|B(1)| certificate body
  DensityField f;                // normalized density the flow ran on
  double lambda = 0.0;           // |lambda Omega| = |B(1)| for the normalized problem
  double eta_final = 0.0;
  double residual_final = 0.0;
  double input_scale = 1.0;      // total mass of the raw input (undone on `body`)
  HypothesisReport hypothesis;
  VerifyReport verify;
  double entropy_body = 0.0, entropy_ball = 0.0;
  bool entropy_certificate_ok = false;
  double lambda_bound = 0.0;  // explicit bound for 1/(n+2) < alpha < 1, else 0
  bool lambda_bound_ok = true;
  bool flow_converged = false;
  std::string stop_reason;
  int resolution_used = 0;
  bool retried = false;
  RunResult run;
  std::string history_path, entropy_trace_path, body_path, report_path;
};

struct HypothesisError : std::runtime_error {
  HypothesisReport report;
  explicit HypothesisError(HypothesisReport rep)
      : std::runtime_error("hypothesis violated: " + rep.witness), report(std::move(rep)) {}
};

struct FlowError : std::runtime_error {
  explicit FlowError(const std::string& what) : std::runtime_error(what) {}
};

struct VerificationError : std::runtime_error {
  VerifyReport report;
  explicit VerificationError(VerifyReport rep)
      : std::runtime_error("verification failed: L1 residual " +
                           std::to_string(rep.l1_residual)),
        report(std::move(rep)) {}
};

// c u with c = eta^{alpha/(n alpha + 1)} and lambda = 1/c; scaling multiplies
// u^{1/alpha} sigma_n by c^{n + 1/alpha} = eta.
std::pair<SupportField, double> rescale_to_solution(const SupportField& u, double eta_value,
                                                    double alpha);

// Always returns a report; pass requires the L1 residual under tol and the
// L_p mass identity within 1e-6 relative.
VerifyReport verify_solution(const SupportField& u, const DensityField& f, double alpha,
                             double tol);

// check_hypothesis -> mollify -> flow from B(1) -> rescale -> verify -> emit.
// Throws HypothesisError / FlowError / VerificationError; on verification
// failure retries once at doubled resolution.
SolveReport solve(const SolveConfig& config);

struct SweepOutcome {
  std::size_t index = 0;
  bool ok = false;
  int exit_code = 0;  // 0 ok, 2 hypothesis, 3 flow, 4 verification
  std::string message;
};

// Independent solves in parallel, each isolated and writing to its own
// out_dir.
std::vector<SweepOutcome> sweep(const std::vector<SolveConfig>& configs);

// JSON config for the sweep subcommand: {"runs": [{...}, ...]}.
std::vector<SolveConfig> load_sweep_config(const std::string& path);

}  // namespace minkflow
