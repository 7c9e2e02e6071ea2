#include "minkflow/flow.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

namespace minkflow {

namespace {

void check_run_inputs(const SupportField& body, const DensityField& f, double alpha,
                      bool require_normalized = true) {
  if (body.grid.get() != f.grid.get())
    throw std::invalid_argument("flow: body and density live on different grids");
  if (!(alpha > 1.0 / (body.grid->dim + 2)))
    throw std::invalid_argument("flow: alpha must exceed 1/(n+2)");
  if (require_normalized && (!f.normalized || std::abs(f.grid->mean(f.f) - 1.0) > 1e-9))
    throw std::invalid_argument("flow: density must be normalized to mean 1");
}

struct FieldAnalysis {
  std::vector<double> sigma;
  double sigma_max = 0.0, min_eig = 0.0, min_u = 0.0, volume = 0.0;
  bool convex = false;
};

FieldAnalysis analyze(const SphereGrid& grid, const std::vector<double>& u) {
  FieldAnalysis a;
  auto hess = grid.hessian_plus_metric(u);
  a.sigma.resize(hess.size());
  a.sigma_max = -std::numeric_limits<double>::infinity();
  a.min_eig = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < hess.size(); ++j) {
    a.sigma[j] = sym_det(hess[j], grid.dim);
    a.sigma_max = std::max(a.sigma_max, a.sigma[j]);
    a.min_eig = std::min(a.min_eig, sym_min_eigenvalue(hess[j], grid.dim));
  }
  a.min_u = *std::min_element(u.begin(), u.end());
  a.convex = a.min_u > 0.0 && std::isfinite(a.min_eig) &&
             a.min_eig > kConvexityTol * a.sigma_max;
  if (a.convex) a.volume = volume_from_sigma(grid, u, a.sigma);
  return a;
}

// speed = f^alpha K^alpha / mean(f^alpha K^{alpha-1})
void refresh_speed(FlowState& s) {
  const auto& grid = *s.u.grid;
  const std::size_t n = grid.size();
  s.speed.resize(n);
  double denom = 0.0;
  for (std::size_t j = 0; j < n; ++j) {
    double ka = std::pow(s.sigma[j], -s.alpha);  // K^alpha
    s.speed[j] = s.f_alpha[j] * ka;
    denom += grid.weights[j] * s.f_alpha[j] * ka * s.sigma[j];  // f^a K^{a-1}
  }
  s.denom = denom / grid.omega();
  if (!(s.denom > 0.0)) throw std::runtime_error("flow: nonpositive speed normalizer");
  for (auto& v : s.speed) v /= s.denom;
}

// Per-node bound on the largest eigenvalue of the discrete second-derivative
// operator; the longitudinal term carries the 1/sin^2 pole clustering.
std::vector<double> stencil_eigenvalue_bound(const SphereGrid& grid) {
  std::vector<double> lam(grid.size());
  if (grid.dim == 1) {
    double v = 4.0 / (grid.dtheta * grid.dtheta);
    std::fill(lam.begin(), lam.end(), v);
    return lam;
  }
  double dcolat_min = grid.colat[0];
  for (int r = 0; r + 1 < grid.n_lat; ++r)
    dcolat_min = std::min(dcolat_min, grid.colat[r + 1] - grid.colat[r]);
  for (int r = 0; r < grid.n_lat; ++r) {
    double s = grid.sin_colat[r] * grid.dlon;
    double v = 5.4 / (dcolat_min * dcolat_min) + 5.4 / (s * s);
    for (int ccol = 0; ccol < grid.n_lon; ++ccol) lam[grid.index(r, ccol)] = v;
  }
  return lam;
}

// Explicit-Euler stability limit for the curvature term: the linearization is
// a diffusion with coefficient alpha * speed / (smallest Hessian eigenvalue).
double stability_cap(const FlowState& s) {
  const auto& grid = *s.u.grid;
  double worst = 0.0;
  if (grid.dim == 1) {
    for (std::size_t j = 0; j < grid.size(); ++j)
      worst = std::max(worst, s.alpha * s.speed[j] / s.sigma[j] * s.stencil_scale[j]);
  } else {
    double floor = std::max(1e-12, 1e-6 * s.sigma_max);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double eig = std::max(s.min_eig, floor);
      worst = std::max(worst, s.alpha * s.speed[j] / eig * s.stencil_scale[j]);
    }
  }
  return 1.8 / worst;
}

void adopt(FlowState& s, std::vector<double> u, FieldAnalysis a) {
  s.u.u = std::move(u);
  s.sigma = std::move(a.sigma);
  s.sigma_max = a.sigma_max;
  s.min_eig = a.min_eig;
  s.min_u = a.min_u;
  s.volume = a.volume;
  s.convex = a.convex;
  refresh_speed(s);
  s.dt_stable = stability_cap(s);
}

// E_{alpha,f}(Omega, 0) on a field known to be positive
double origin_entropy(const SphereGrid& grid, const DensityField& f, const std::vector<double>& u,
                      double alpha) {
  double acc = 0.0;
  if (std::abs(alpha - 1.0) < 1e-12) {
    for (std::size_t j = 0; j < u.size(); ++j)
      acc += grid.weights[j] * f.f[j] * std::log(u[j]);
    return acc / grid.omega();
  }
  double p = 1.0 - 1.0 / alpha;
  for (std::size_t j = 0; j < u.size(); ++j)
    acc += grid.weights[j] * f.f[j] * std::pow(u[j], p);
  return std::log(acc / grid.omega()) / p;
}

struct DiagAccum {
  double eta = 0.0, ratio = 1.0, residual = 0.0, mass_misfit = 0.0;
};

// One pass over the cached state: eta, dissipation ratio, L1 residual and the
// L_p mass-identity misfit.
DiagAccum state_diagnostics(const FlowState& s, const DensityField& f) {
  const auto& grid = *s.u.grid;
  const std::size_t n = grid.size();
  const double inv_alpha = 1.0 / s.alpha;
  double m_h = 0.0, m_h1 = 0.0, m_ha = 0.0, mass = 0.0, mean_f = 0.0;
  std::vector<double> lhs(n);
  for (std::size_t j = 0; j < n; ++j) {
    double w = grid.weights[j];
    double ds = s.u.u[j] * s.sigma[j];  // dsigma/dtheta
    double h = f.f[j] * std::pow(s.u.u[j], -inv_alpha) / s.sigma[j];
    double ha = std::pow(h, s.alpha);
    m_h += w * ds * h;
    m_ha += w * ds * ha;
    m_h1 += w * ds * h * ha;
    lhs[j] = std::pow(s.u.u[j], inv_alpha) * s.sigma[j];
    mass += w * lhs[j];
    mean_f += w * f.f[j];
  }
  double omega = grid.omega();
  DiagAccum d;
  d.eta = m_h / omega;
  d.ratio = (m_h1 / omega) / ((m_h / omega) * (m_ha / omega));
  double res = 0.0;
  for (std::size_t j = 0; j < n; ++j)
    res += grid.weights[j] * std::abs(lhs[j] - f.f[j] / d.eta);
  d.residual = res / omega;
  d.mass_misfit = std::abs(d.eta * mass / mean_f - 1.0);
  return d;
}

}  // namespace

std::vector<double> velocity(const SupportField& body, const DensityField& f, double alpha) {
  // degree-0 homogeneous in f, so any positive scaling is accepted
  check_run_inputs(body, f, alpha, false);
  const auto& grid = *body.grid;
  auto a = analyze(grid, body.u);
  if (!a.convex) throw NonConvexError("velocity: field is not strictly convex");
  double denom = 0.0;
  std::vector<double> v(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double ka = std::pow(a.sigma[j], -alpha);
    v[j] = std::pow(f.f[j], alpha) * ka;
    denom += grid.weights[j] * std::pow(f.f[j], alpha) * ka * a.sigma[j];
  }
  denom /= grid.omega();
  for (std::size_t j = 0; j < grid.size(); ++j) v[j] = body.u[j] - v[j] / denom;
  return v;
}

FlowState make_flow_state(SupportField u0, const DensityField& f, double alpha, double dt_max) {
  check_run_inputs(u0, f, alpha);
  const auto& grid = *u0.grid;
  FlowState s;
  s.alpha = alpha;
  s.u = std::move(u0);
  s.f_alpha.resize(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) s.f_alpha[j] = std::pow(f.f[j], alpha);

  auto a = analyze(grid, s.u.u);
  if (!a.convex) throw NonConvexError("flow: initial field is not strictly convex");
  double c = std::pow(grid.ball_volume() / a.volume, 1.0 / (grid.dim + 1));
  for (auto& v : s.u.u) v *= c;
  a = analyze(grid, s.u.u);
  s.stencil_scale = stencil_eigenvalue_bound(grid);
  adopt(s, std::move(s.u.u), std::move(a));

  double min_sigma = *std::min_element(s.sigma.begin(), s.sigma.end());
  double max_speed_raw = 0.0;
  for (std::size_t j = 0; j < grid.size(); ++j)
    max_speed_raw = std::max(max_speed_raw, s.speed[j] * s.denom);
  s.dt = std::min({1e-3 * min_sigma / max_speed_raw, dt_max, s.dt_stable});
  s.diag.volume_pre_renorm = s.volume;
  s.entropy_origin = origin_entropy(grid, f, s.u.u, alpha);
  return s;
}

bool flow_step(FlowState& s, const DensityField& f, double dt_max) {
  const auto& grid = *s.u.grid;
  const std::size_t n = grid.size();
  const double ball = grid.ball_volume();
  std::vector<double> cand(n);
  for (int attempt = 0; attempt < 20; ++attempt) {
    const double dt = std::min(s.dt, s.dt_stable);
    const double growth = std::exp(dt);
    bool positive = true;
    for (std::size_t j = 0; j < n; ++j) {
      cand[j] = growth * s.u.u[j] - dt * s.speed[j];
      if (cand[j] <= 0.0) {
        positive = false;
        break;
      }
    }
    if (positive) {
      auto a = analyze(grid, cand);
      if (a.convex) {
        double volume_pre = a.volume;
        double c = std::pow(ball / volume_pre, 1.0 / (grid.dim + 1));
        for (auto& v : cand) v *= c;
        auto b = analyze(grid, cand);
        // Lyapunov guard: the origin entropy must not increase
        double e_cand = b.convex ? origin_entropy(grid, f, cand, s.alpha) : 0.0;
        if (b.convex && e_cand <= s.entropy_origin + 1e-10) {
          adopt(s, std::move(cand), std::move(b));
          s.t += dt;
          s.last_dt = dt;
          s.entropy_origin = e_cand;
          s.diag.volume_pre_renorm = volume_pre;
          ++s.accept_streak;
          s.dt = dt;
          if (s.accept_streak % 5 == 0) s.dt = std::min(s.dt * 1.2, dt_max);
          return true;
        }
      }
      cand.resize(n);
    }
    s.dt *= 0.5;
    s.accept_streak = 0;
  }
  return false;
}

double eta(const FlowState& state, const DensityField& f, double alpha) {
  if (alpha != state.alpha) throw std::invalid_argument("eta: alpha mismatch with flow state");
  if (!(state.min_u > 0.0)) throw std::domain_error("eta: support function not positive");
  return state_diagnostics(state, f).eta;
}

double dissipation_ratio(const FlowState& state, const DensityField& f, double alpha) {
  if (alpha != state.alpha)
    throw std::invalid_argument("dissipation_ratio: alpha mismatch with flow state");
  if (!(state.min_u > 0.0)) throw std::domain_error("dissipation_ratio: support not positive");
  return state_diagnostics(state, f).ratio;
}

double residual(const FlowState& state, const DensityField& f, double alpha) {
  if (alpha != state.alpha) throw std::invalid_argument("residual: alpha mismatch with flow state");
  if (!(state.min_u > 0.0)) throw std::domain_error("residual: support not positive");
  return state_diagnostics(state, f).residual;
}

double trial_step_volume(const SupportField& body, const DensityField& f, double alpha,
                         double dt) {
  FlowState s = make_flow_state(body, f, alpha, dt);
  const auto& grid = *s.u.grid;
  std::vector<double> cand(grid.size());
  double growth = std::exp(dt);
  for (std::size_t j = 0; j < grid.size(); ++j)
    cand[j] = growth * s.u.u[j] - dt * s.speed[j];
  auto a = analyze(grid, cand);
  if (!a.convex) throw NonConvexError("trial_step_volume: step lost convexity");
  return a.volume;
}

void write_history_header(std::ostream& out) {
  out << "t,dt,entropy,volume_pre_renorm,diameter,eta,ratio,residual,min_u,min_curv_eig,"
         "recenter_flag\n";
}

void write_history_row(std::ostream& out, const HistoryRow& row) {
  auto p = out.precision(17);
  out << row.t << ',' << row.dt << ',' << row.diag.entropy << ',' << row.diag.volume_pre_renorm
      << ',' << row.diag.diameter << ',' << row.diag.eta << ',' << row.diag.ratio << ','
      << row.diag.residual << ',' << row.diag.min_u << ',' << row.diag.min_curv_eig << ','
      << row.diag.recentered << '\n';
  out.precision(p);
}

RunResult run_flow(SupportField u0, const DensityField& f, double alpha, const RunOptions& opt) {
  RunResult res;
  res.state = make_flow_state(std::move(u0), f, alpha, opt.dt_max);
  FlowState& s = res.state;
  const auto& grid = *s.u.grid;
  const double ball = grid.ball_volume();

  if (opt.history_csv) write_history_header(*opt.history_csv);
  if (opt.entropy_csv) *opt.entropy_csv << "t,entropy,zx,zy,zz,iterations,converged\n";

  auto full_sup = [&](bool multistart) {
    EntropyResult er = multistart ? entropy(s.u, f, alpha)
                                  : entropy_refine(s.u, f, alpha, res.z_star);
    res.z_star = er.z_star;
    if (opt.entropy_csv) {
      auto p = opt.entropy_csv->precision(17);
      *opt.entropy_csv << s.t << ',' << er.value << ',' << er.z_star.x << ',' << er.z_star.y << ','
                       << er.z_star.z << ',' << er.iterations << ',' << (er.converged ? 1 : 0)
                       << '\n';
      opt.entropy_csv->precision(p);
    }
    return er.value;
  };

  double entropy_prev = full_sup(true);
  s.diag.entropy = entropy_prev;

  auto record = [&](double dt_used) {
    auto d = state_diagnostics(s, f);
    s.diag.eta = d.eta;
    s.diag.ratio = d.ratio;
    s.diag.residual = d.residual;
    s.diag.diameter = diameter(s.u);
    s.diag.min_u = s.min_u;
    s.diag.min_curv_eig = s.min_eig;
    res.min_ratio = std::min(res.min_ratio, d.ratio);
    res.max_volume_err = std::max(res.max_volume_err, std::abs(s.volume - ball) / ball);
    HistoryRow row{s.t, dt_used, s.diag};
    if (opt.keep_history) res.history.push_back(row);
    if (opt.history_csv) write_history_row(*opt.history_csv, row);
    return d;
  };
  record(0.0);

  int settle = 0;
  double mass_misfit = 1.0;
  while (true) {
    if (s.t >= opt.t_max) {
      res.stop_reason = "t_max";
      break;
    }
    if (!flow_step(s, f, opt.dt_max)) {
      res.stop_reason = "step_failure";
      break;
    }
    double dt_used = s.last_dt;
    ++res.steps;

    s.diag.recentered = 0;
    if (s.min_u < opt.u_floor) {
      Vec3 c = centroid(s.u);
      SupportField moved = recenter(s.u, c);
      auto a = analyze(grid, moved.u);
      if (a.convex) {
        double cs = std::pow(ball / a.volume, 1.0 / (grid.dim + 1));
        for (auto& v : moved.u) v *= cs;
        auto b = analyze(grid, moved.u);
        adopt(s, std::move(moved.u), std::move(b));
        s.entropy_origin = origin_entropy(grid, f, s.u.u, alpha);
        res.z_star = res.z_star - c;
        ++res.recenter_events;
        s.diag.recentered = 1;
      }
    }

    // entropy: full inner sup every sup_every-th step, tracked z* in between
    double e_now;
    if (res.steps % opt.sup_every == 0) {
      e_now = full_sup(false);
      // The translation mode of the normalized flow is unstable (it grows
      // like e^t from roundoff). At any solved state the origin is the
      // entropy maximizer, so recentering at z* stabilizes the drift without
      // shifting the fixed points.
      double drift = norm(res.z_star);
      if (drift > 1e-13 && drift < 0.5 * s.min_u) {
        SupportField moved = recenter(s.u, res.z_star);
        auto a = analyze(grid, moved.u);
        if (a.convex) {
          double cs = std::pow(ball / a.volume, 1.0 / (grid.dim + 1));
          for (auto& v : moved.u) v *= cs;
          auto b = analyze(grid, moved.u);
          adopt(s, std::move(moved.u), std::move(b));
          s.entropy_origin = origin_entropy(grid, f, s.u.u, alpha);
          res.z_star = {0, 0, 0};
          ++res.drift_corrections;
          res.max_drift_correction = std::max(res.max_drift_correction, drift);
        }
      }
    } else {
      try {
        e_now = entropy_at(s.u, f, alpha, res.z_star);
      } catch (const std::domain_error&) {
        e_now = full_sup(false);
      }
    }
    s.diag.entropy = e_now;
    double de = e_now - entropy_prev;
    if (de > 1e-8) {
      ++res.entropy_increases;
      res.max_entropy_increase = std::max(res.max_entropy_increase, de);
    }
    entropy_prev = e_now;

    auto d = record(dt_used);
    mass_misfit = d.mass_misfit;
    settle = d.residual <= opt.tol ? settle + 1 : 0;
    if (settle >= opt.settle_steps && mass_misfit <= opt.mass_tol) {
      res.converged = true;
      res.stop_reason = "residual_tol";
      break;
    }
  }

  auto d = state_diagnostics(s, f);
  res.eta_final = d.eta;
  res.residual_final = d.residual;
  res.mass_misfit_final = d.mass_misfit;
  return res;
}

}  // namespace minkflow
