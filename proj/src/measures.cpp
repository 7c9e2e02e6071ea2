#include "minkflow/measures.hpp"

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace minkflow {

DensityField make_density(std::shared_ptr<const SphereGrid> grid, std::vector<double> values) {
  if (values.size() != grid->size())
    throw std::invalid_argument("make_density: value count does not match grid");
  for (double v : values)
    if (!(v >= 0.0)) throw std::invalid_argument("make_density: density must be nonnegative");
  return {std::move(grid), std::move(values), false};
}

DensityField normalize(DensityField field) {
  double m = field.grid->mean(field.f);
  if (!(m > 0.0)) throw std::invalid_argument("normalize: density has nonpositive mean");
  for (auto& v : field.f) v /= m;
  field.normalized = true;
  return field;
}

DensityField uniform_density(std::shared_ptr<const SphereGrid> grid) {
  DensityField f{grid, std::vector<double>(grid->size(), 1.0), true};
  return f;
}

DensityField builtin_density(const std::string& name, std::shared_ptr<const SphereGrid> grid) {
  if (name == "uniform") return uniform_density(grid);
  if (name == "cos2") {
    std::vector<double> v(grid->size());
    for (std::size_t j = 0; j < v.size(); ++j) {
      const Vec3& x = grid->nodes[j];
      if (grid->dim == 1) {
        // cos(2 theta) = x^2 - y^2 on S^1
        v[j] = 1.0 + 0.5 * (x.x * x.x - x.y * x.y);
      } else {
        v[j] = 1.0 + 0.25 * (3.0 * x.z * x.z - 1.0);
      }
    }
    return normalize(make_density(grid, std::move(v)));
  }
  if (name.rfind("bumps:", 0) == 0) {
    std::uint64_t seed = std::stoull(name.substr(6));
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> coef(-0.6, 0.6);
    std::vector<double> v(grid->size());
    if (grid->dim == 1) {
      std::array<double, 4> a{}, b{};
      for (int m = 0; m < 4; ++m) {
        a[m] = coef(rng) / (m + 1);
        b[m] = coef(rng) / (m + 1);
      }
      for (std::size_t j = 0; j < v.size(); ++j) {
        double t = grid->theta[j], g = 0.0;
        for (int m = 0; m < 4; ++m) g += a[m] * std::cos((m + 1) * t) + b[m] * std::sin((m + 1) * t);
        v[j] = std::exp(g);
      }
    } else {
      std::array<double, 6> c{};
      for (auto& ci : c) ci = coef(rng);
      for (std::size_t j = 0; j < v.size(); ++j) {
        const Vec3& x = grid->nodes[j];
        double g = c[0] * x.x + c[1] * x.y + c[2] * x.z + c[3] * (x.x * x.x - x.y * x.y) +
                   c[4] * x.x * x.y + c[5] * (x.z * x.z - 1.0 / 3.0);
        v[j] = std::exp(g);
      }
    }
    return normalize(make_density(grid, std::move(v)));
  }
  throw std::invalid_argument("builtin_density: unknown density '" + name + "'");
}

double MeasureSpec::total_mass() const {
  double m = 0.0;
  for (const auto& a : atoms) m += a.mass;
  if (ac_density) m += ac_density->grid->mean(ac_density->f);
  return m;
}

MeasureSpec normalize(MeasureSpec mu) {
  double m = mu.total_mass();
  if (!(m > 0.0)) throw std::invalid_argument("normalize: measure has nonpositive total mass");
  for (auto& a : mu.atoms) a.mass /= m;
  if (mu.ac_density)
    for (auto& v : mu.ac_density->f) v /= m;
  return mu;
}

MeasureSpec measure_from_density(DensityField f) {
  MeasureSpec mu;
  mu.ac_density = std::move(f);
  return mu;
}

double pair_measure(const MeasureSpec& mu, const std::function<double(const Vec3&)>& phi) {
  double s = 0.0;
  for (const auto& a : mu.atoms) s += a.mass * phi(a.dir);
  if (mu.ac_density) {
    const auto& g = *mu.ac_density->grid;
    double acc = 0.0;
    for (std::size_t j = 0; j < g.size(); ++j)
      acc += g.weights[j] * mu.ac_density->f[j] * phi(g.nodes[j]);
    s += acc / g.omega();
  }
  return s;
}

Subspace make_subspace(std::vector<Vec3> spanning) {
  Subspace L;
  for (const auto& v : spanning) {
    Vec3 w = v;
    for (const auto& b : L.basis) w = w - dot(w, b) * b;
    double n = norm(w);
    if (n > 1e-10) L.basis.push_back((1.0 / n) * w);
  }
  if (L.basis.empty() || L.basis.size() > 2)
    throw std::invalid_argument("make_subspace: need a subspace of dimension 1 <= l <= n");
  return L;
}

double collar_distance(const Vec3& x, const Subspace& L) {
  double proj2 = 0.0;
  for (const auto& b : L.basis) {
    double d = dot(x, b);
    proj2 += d * d;
  }
  return std::sqrt(std::max(0.0, 1.0 - proj2));
}

namespace {

void check_collar_args(double delta, double power) {
  if (!(delta >= 0.0 && delta < 1.0))
    throw std::invalid_argument("collar_mass: delta must lie in [0, 1)");
  if (!(power >= 1.0)) throw std::invalid_argument("collar_mass: power must be >= 1");
}

double interval_overlap(double a1, double a2, double b1, double b2) {
  return std::max(0.0, std::min(a2, b2) - std::max(a1, b1));
}

// S^1 density integral over two arcs [c1-a, c1+a] and [c2-a, c2+a], with the
// node cells clipped exactly against the arc boundaries.
double s1_arc_integral(const SphereGrid& g, const std::vector<double>& f, double power,
                       double c1, double c2, double a) {
  if (a <= 0.0) return 0.0;
  const double h = g.dtheta;
  double acc = 0.0;
  for (int j = 0; j < g.n_theta; ++j) {
    double frac = 0.0;
    for (double c : {c1, c2}) {
      // position the cell relative to the arc center, wrapped to [-pi, pi)
      double d = std::remainder(g.theta[j] - c, 2.0 * M_PI);
      frac += interval_overlap(d - 0.5 * h, d + 0.5 * h, -a, a) / h;
    }
    if (frac > 0.0)
      acc += g.weights[j] * std::min(frac, 1.0) *
             (power == 1.0 ? f[j] : std::pow(f[j], power));
  }
  return acc / g.omega();
}

// Nodes and atoms projected onto a single coordinate s = <x, axis>, with
// per-node linear extents so thin collars integrate to the right mass.
struct CoordProfile {
  std::vector<double> s, c, e;  // sorted by s; atoms carry e = 0
  std::vector<double> prefix;   // prefix[i] = sum of c[0..i)
  double e_max = 0.0;

  static CoordProfile build(const SphereGrid& grid, const std::vector<double>* density,
                            double power, const std::vector<Atom>& atoms, const Vec3& axis) {
    std::vector<std::array<double, 3>> entries;  // (s, c, e)
    entries.reserve(grid.size() + atoms.size());
    if (density) {
      const auto& f = *density;
      for (std::size_t j = 0; j < grid.size(); ++j) {
        double cj = grid.weights[j] * (power == 1.0 ? f[j] : std::pow(f[j], power)) / grid.omega();
        if (cj == 0.0) continue;
        double sj = dot(grid.nodes[j], axis);
        double grad = std::sqrt(std::max(0.0, 1.0 - sj * sj));
        double ext = grid.dim == 1 ? grad * grid.dtheta : grad * std::sqrt(grid.weights[j]);
        entries.push_back({sj, cj, ext});
      }
    }
    for (const auto& a : atoms) entries.push_back({dot(a.dir, axis), a.mass, 0.0});
    std::sort(entries.begin(), entries.end(),
              [](const auto& x, const auto& y) { return x[0] < y[0]; });
    CoordProfile p;
    p.s.resize(entries.size());
    p.c.resize(entries.size());
    p.e.resize(entries.size());
    p.prefix.assign(entries.size() + 1, 0.0);
    for (std::size_t i = 0; i < entries.size(); ++i) {
      p.s[i] = entries[i][0];
      p.c[i] = entries[i][1];
      p.e[i] = entries[i][2];
      p.prefix[i + 1] = p.prefix[i] + p.c[i];
      p.e_max = std::max(p.e_max, p.e[i]);
    }
    return p;
  }

  double mass_interval(double lo, double hi) const {
    if (s.empty() || hi <= lo) return 0.0;
    auto lb = [&](double v) {
      return static_cast<std::size_t>(std::lower_bound(s.begin(), s.end(), v) - s.begin());
    };
    double margin = 0.5 * e_max;
    std::size_t i0 = lb(lo - margin), i1 = lb(hi + margin);
    std::size_t j0 = lb(lo + margin), j1 = lb(hi - margin);
    double acc = 0.0;
    if (j1 > j0) {
      acc += prefix[j1] - prefix[j0];
    } else {
      j0 = j1 = i0;  // interval narrower than a cell: treat everything as edge
    }
    auto edge = [&](std::size_t from, std::size_t to) {
      for (std::size_t i = from; i < to; ++i) {
        if (e[i] <= 1e-300) {
          if (s[i] >= lo && s[i] <= hi) acc += c[i];
        } else {
          acc += c[i] * interval_overlap(s[i] - 0.5 * e[i], s[i] + 0.5 * e[i], lo, hi) / e[i];
        }
      }
    };
    edge(i0, j0);
    edge(std::max(j1, j0), i1);
    return acc;
  }

  double mass_band(double w) const { return mass_interval(-w, w); }
  double mass_caps(double s0) const { return mass_interval(s0, 2.0) + mass_interval(-2.0, -s0); }
};

}  // namespace

double collar_mass(const DensityField& f, const Subspace& L, double delta, double power) {
  check_collar_args(delta, power);
  const auto& g = *f.grid;
  if (g.dim == 1) {
    // collar of L = span(v): caps of angular radius asin(delta) around +-v
    double t0 = std::atan2(L.basis[0].y, L.basis[0].x);
    return s1_arc_integral(g, f.f, power, t0, t0 + M_PI, std::asin(delta));
  }
  if (L.basis.size() == 1) {
    auto p = CoordProfile::build(g, &f.f, power, {}, L.basis[0]);
    return p.mass_caps(std::sqrt(std::max(0.0, 1.0 - delta * delta)));
  }
  const Vec3& b0 = L.basis[0];
  const Vec3& b1 = L.basis[1];
  Vec3 z = normalized(Vec3{b0.y * b1.z - b0.z * b1.y, b0.z * b1.x - b0.x * b1.z,
                           b0.x * b1.y - b0.y * b1.x});
  auto p = CoordProfile::build(g, &f.f, power, {}, z);
  return p.mass_band(delta);
}

double collar_mass(const MeasureSpec& mu, const Subspace& L, double delta, double power) {
  check_collar_args(delta, power);
  if (!mu.atoms.empty() && power != 1.0)
    throw std::invalid_argument("collar_mass: power must be 1 for atomic measures");
  double s = 0.0;
  for (const auto& a : mu.atoms)
    if (collar_distance(a.dir, L) <= delta) s += a.mass;
  if (mu.ac_density) s += collar_mass(*mu.ac_density, L, delta, power);
  return s;
}

namespace {

constexpr double kAlphaOneTol = 1e-12;
constexpr double kOnSubspaceTol = 1e-10;

std::vector<double> delta_ladder() {
  std::vector<double> ladder;
  for (double d = 0.45; d > 1e-7; d *= 0.82) ladder.push_back(d);
  return ladder;
}

// mass of the band {|<x, z>| <= w} around the great subsphere z^perp
double band_mass(const MeasureSpec& mu, const SphereGrid& grid, const Vec3& z, double w,
                 double power) {
  double acc = 0.0;
  for (const auto& a : mu.atoms)
    if (std::abs(dot(a.dir, z)) <= w) acc += a.mass;
  if (mu.ac_density) {
    if (grid.dim == 1) {
      double tz = std::atan2(z.y, z.x);
      acc += s1_arc_integral(grid, mu.ac_density->f, power, tz + 0.5 * M_PI, tz - 0.5 * M_PI,
                             std::asin(std::min(w, 1.0)));
    } else {
      auto p = CoordProfile::build(grid, &mu.ac_density->f, power, {}, z);
      acc += p.mass_band(w);
    }
  }
  return acc;
}

// mass of the collar of a subspace (caps for l=1, band for l=n on S^2)
double subspace_collar_mass(const MeasureSpec& mu, const Subspace& L, double w) {
  double acc = 0.0;
  for (const auto& a : mu.atoms)
    if (collar_distance(a.dir, L) <= w) acc += a.mass;
  if (mu.ac_density) acc += collar_mass(*mu.ac_density, L, std::min(w, 1.0 - 1e-15), 1.0);
  return acc;
}

std::string format_dir(const Vec3& v) {
  std::ostringstream os;
  os.precision(6);
  os << "(" << v.x << ", " << v.y << ", " << v.z << ")";
  return os.str();
}

// Sweep directions: grid nodes (strided), inter-node midpoints for S^1, and a
// seeded random net; atoms are prepended by the callers that need them.
std::vector<Vec3> direction_net(const SphereGrid& grid) {
  std::vector<Vec3> net;
  if (grid.dim == 1) {
    net = grid.nodes;
    for (int j = 0; j < grid.n_theta; ++j) {
      double t = grid.theta[j] + 0.5 * grid.dtheta;
      net.push_back({std::cos(t), std::sin(t), 0.0});
    }
    return net;
  }
  std::size_t stride = std::max<std::size_t>(1, grid.size() / 512);
  for (std::size_t j = 0; j < grid.size(); j += stride) net.push_back(grid.nodes[j]);
  std::mt19937_64 rng(20240229u);
  std::normal_distribution<double> gauss;
  for (int i = 0; i < 256; ++i)
    net.push_back(normalized(Vec3{gauss(rng), gauss(rng), gauss(rng)}));
  return net;
}

std::vector<Vec3> perturbed_directions(const Vec3& z, double h) {
  std::vector<Vec3> out;
  Vec3 t1 = std::abs(z.z) < 0.9 ? normalized(Vec3{-z.y, z.x, 0.0})
                                : normalized(Vec3{0.0, -z.z, z.y});
  Vec3 t2{z.y * t1.z - z.z * t1.y, z.z * t1.x - z.x * t1.z, z.x * t1.y - z.y * t1.x};
  for (int i = -2; i <= 2; ++i)
    for (int j = -2; j <= 2; ++j)
      if (i != 0 || j != 0) out.push_back(normalized(z + (0.25 * i * h) * t1 + (0.25 * j * h) * t2));
  return out;
}

double atom_mass_on_subspace(const MeasureSpec& mu, const Subspace& L) {
  double m = 0.0;
  for (const auto& a : mu.atoms)
    if (collar_distance(a.dir, L) <= kOnSubspaceTol) m += a.mass;
  return m;
}

// (b): atoms outside L must span a subspace complementary to L, and there can
// be no absolutely continuous part.
bool equality_case_admissible(const MeasureSpec& mu, const Subspace& L, int ambient_dim) {
  if (mu.ac_density) {
    double ac_mass = mu.ac_density->grid->mean(mu.ac_density->f);
    if (ac_mass > 1e-14) return false;
  }
  std::vector<Vec3> rest;
  for (const auto& a : mu.atoms)
    if (collar_distance(a.dir, L) > kOnSubspaceTol) rest.push_back(a.dir);
  std::vector<Vec3> basis;
  for (const auto& v : rest) {
    Vec3 w = v;
    for (const auto& b : basis) w = w - dot(w, b) * b;
    if (norm(w) > 1e-10) basis.push_back((1.0 / norm(w)) * w);
  }
  if (static_cast<int>(basis.size() + L.basis.size()) > ambient_dim) return false;
  std::vector<Vec3> joint = L.basis;
  for (const auto& v : basis) {
    Vec3 w = v;
    for (const auto& b : joint) w = w - dot(w, b) * b;
    if (norm(w) <= 1e-10) return false;
    joint.push_back((1.0 / norm(w)) * w);
  }
  return true;
}

}  // namespace

HypothesisReport check_hypothesis(const MeasureSpec& mu, double alpha, const SphereGrid& grid) {
  const int n = grid.dim;
  if (!(alpha > 1.0 / (n + 2)))
    throw std::invalid_argument("check_hypothesis: alpha must exceed 1/(n+2)");
  if (std::abs(mu.total_mass() - 1.0) > 1e-9)
    throw std::invalid_argument("check_hypothesis: measure must be normalized");

  const auto ladder = delta_ladder();
  HypothesisReport rep;

  if (alpha > 1.0 + kAlphaOneTol) {
    // Case (i): the mass of every band about a great subsphere stays below 1.
    rep.case_id = 1;
    auto net = direction_net(grid);
    for (const auto& a : mu.atoms) {
      net.push_back(a.dir);
      Vec3 perp = std::abs(a.dir.z) < 0.9 ? Vec3{-a.dir.y, a.dir.x, 0.0}
                                          : Vec3{0.0, -a.dir.z, a.dir.y};
      net.push_back(normalized(perp));
    }
    double fallback_worst = 0.0;
    Vec3 fallback_z;
    double h = grid.dim == 1 ? grid.dtheta : grid.dlon;
    for (double delta : ladder) {
      double worst = 0.0;
      Vec3 worst_z;
      for (const auto& z : net) {
        double m = band_mass(mu, grid, z, 2.0 * delta, 1.0);
        if (m > worst) {
          worst = m;
          worst_z = z;
        }
      }
      for (const auto& z : perturbed_directions(worst_z, h)) {
        double m = band_mass(mu, grid, z, 2.0 * delta, 1.0);
        if (m > worst) {
          worst = m;
          worst_z = z;
        }
      }
      if (worst <= 1.0 - 2.0 * delta) {
        rep.ok = true;
        rep.delta = delta;
        rep.tau = delta;
        return rep;
      }
      fallback_worst = worst;
      fallback_z = worst_z;
    }
    rep.ok = false;
    rep.witness = "collar about z^perp with z=" + format_dir(fallback_z) +
                  " carries mass " + std::to_string(fallback_worst);
    return rep;
  }

  if (std::abs(alpha - 1.0) <= kAlphaOneTol) {
    // Case (ii): subspace concentration conditions (a), (b).
    rep.case_id = 2;
    std::vector<std::pair<Subspace, int>> candidates;  // (L, l)
    auto add_candidate = [&](std::vector<Vec3> span, int l) {
      try {
        Subspace L = make_subspace(std::move(span));
        if (static_cast<int>(L.basis.size()) == l) candidates.emplace_back(std::move(L), l);
      } catch (const std::invalid_argument&) {
      }
    };
    for (const auto& a : mu.atoms) add_candidate({a.dir}, 1);
    if (n == 2)
      for (std::size_t i = 0; i < mu.atoms.size(); ++i)
        for (std::size_t j = i + 1; j < mu.atoms.size(); ++j)
          add_candidate({mu.atoms[i].dir, mu.atoms[j].dir}, 2);
    auto net = direction_net(grid);
    for (const auto& z : net) {
      add_candidate({z}, 1);
      if (n == 2) {
        Vec3 t1 = std::abs(z.z) < 0.9 ? normalized(Vec3{-z.y, z.x, 0.0})
                                      : normalized(Vec3{0.0, -z.z, z.y});
        add_candidate({z, t1}, 2);
      }
    }

    bool equality_case = false;
    for (const auto& [L, l] : candidates) {
      double m = atom_mass_on_subspace(mu, L);
      double bound = static_cast<double>(l) / (n + 1);
      if (m > bound + 1e-12) {
        rep.ok = false;
        rep.witness = "mu(L cap S^n) = " + std::to_string(m) + " > " + std::to_string(bound) +
                      " for L spanned by " + format_dir(L.basis[0]);
        return rep;
      }
      if (m > bound - 1e-9) {
        if (!equality_case_admissible(mu, L, n + 1)) {
          rep.ok = false;
          rep.witness = "equality in the subspace mass bound at L spanned by " +
                        format_dir(L.basis[0]) + " without a complementary subspace";
          return rep;
        }
        equality_case = true;
      }
    }

    if (!equality_case) {
      std::vector<char> feasible(ladder.size(), 1);
      for (const auto& [L, l] : candidates) {
        double bound_scale = static_cast<double>(l) / (n + 1);
        for (std::size_t i = 0; i < ladder.size(); ++i)
          if (feasible[i] &&
              !(subspace_collar_mass(mu, L, 2.0 * ladder[i]) <
                (1.0 - 2.0 * ladder[i]) * bound_scale))
            feasible[i] = 0;
      }
      for (std::size_t i = 0; i < ladder.size(); ++i)
        if (feasible[i]) {
          rep.ok = true;
          rep.delta = ladder[i];
          rep.tau = ladder[i];
          return rep;
        }
    }
    // (a)+(b) hold but only with equality (or no strict margin resolvable at
    // this resolution): solvable, no diameter bound certified.
    rep.ok = true;
    rep.delta = 0.0;
    rep.tau = 0.0;
    rep.witness = equality_case ? "equality in (a); no strict collar margin certified"
                                : "no strict collar margin certified at this resolution";
    return rep;
  }

  // Case (iii): 1/(n+2) < alpha < 1 requires an L^r density.
  rep.case_id = 3;
  if (!mu.atoms.empty()) {
    rep.ok = false;
    rep.witness = "atomic part present; the subcritical case requires d mu = f d theta";
    return rep;
  }
  if (!mu.ac_density) {
    rep.ok = false;
    rep.witness = "measure has no density part";
    return rep;
  }
  double p = 1.0 - 1.0 / alpha;
  double r = (n + 1.0) / (n + 1.0 + p);
  double tau = 0.5 * std::pow(2.0, -std::abs(p) * (n + 1.0) / (std::abs(p) + n));
  double threshold = std::pow(0.5 * tau, r);
  auto net = direction_net(grid);
  double fallback_worst = 0.0;
  Vec3 fallback_z;
  for (double delta : ladder) {
    double worst = 0.0;
    Vec3 wz;
    for (const auto& z : net) {
      double m = band_mass(mu, grid, z, 2.0 * delta, r);
      if (m > worst) {
        worst = m;
        wz = z;
      }
    }
    if (worst <= threshold) {
      rep.ok = true;
      rep.delta = delta;
      rep.tau = tau;
      return rep;
    }
    fallback_worst = worst;
    fallback_z = wz;
  }
  rep.ok = false;
  rep.witness = "collar L^r integral " + std::to_string(fallback_worst) + " exceeds " +
                std::to_string(threshold) + " near z=" + format_dir(fallback_z);
  return rep;
}

// ---------------------------------------------------------------------------
// Mollification

namespace {

double smoothstep(double t) {
  t = std::clamp(t, 0.0, 1.0);
  return t * t * t * (10.0 + t * (-15.0 + 6.0 * t));
}

struct Cell {
  std::vector<int> node_ids;
  std::vector<double> node_dist;  // distance of each member node to the cell boundary
  double mass = 0.0;
  double area = 0.0;       // analytic area (length for S^1)
  double perimeter = 0.0;  // analytic boundary size
  double diam = 0.0;
};

}  // namespace

DensityField mollify(const MeasureSpec& mu, int k, std::shared_ptr<const SphereGrid> grid) {
  if (k < 2) throw std::invalid_argument("mollify: k must be >= 2");
  if (std::abs(mu.total_mass() - 1.0) > 1e-9)
    throw std::invalid_argument("mollify: measure must be normalized");
  if (mu.ac_density && mu.ac_density->grid.get() != grid.get())
    throw std::invalid_argument("mollify: density grid mismatch");

  const SphereGrid& g = *grid;
  const double target = 1.0 / k;
  std::vector<Cell> cells;
  std::vector<int> cell_of_node(g.size(), -1);
  auto atom_cell = std::vector<int>(mu.atoms.size(), -1);

  if (g.dim == 1) {
    double h = g.dtheta;
    if (h >= 0.5 * target)
      throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");
    int m = static_cast<int>(std::ceil(2.0 * M_PI / (target - h)));
    // arc edges snapped to inter-node midpoints so every node keeps a margin
    std::vector<double> edges(m);
    for (int i = 0; i < m; ++i) {
      double t = 2.0 * M_PI * i / m;
      double jmid = std::round(t / h - 0.5);
      edges[i] = (jmid + 0.5) * h;
    }
    for (int i = 1; i < m; ++i)
      if (edges[i] <= edges[i - 1] + 0.5 * h) edges[i] = edges[i - 1] + h;
    cells.resize(m);
    auto locate = [&](double t) {
      t = std::fmod(t - edges[0], 2.0 * M_PI);
      if (t < 0) t += 2.0 * M_PI;
      int c = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), edges[0] + t) -
                               edges.begin()) -
              1;
      return std::clamp(c, 0, m - 1);
    };
    for (int i = 0; i < m; ++i) {
      double lo = edges[i];
      double hi = (i + 1 < m) ? edges[i + 1] : edges[0] + 2.0 * M_PI;
      cells[i].area = hi - lo;
      cells[i].perimeter = 2.0;
      cells[i].diam = hi - lo;
      if (cells[i].diam > target + 1e-12)
        throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");
    }
    for (int j = 0; j < g.n_theta; ++j) {
      int c = locate(g.theta[j]);
      double lo = edges[c];
      double hi = (c + 1 < m) ? edges[c + 1] : edges[0] + 2.0 * M_PI;
      double t = g.theta[j];
      if (t < lo) t += 2.0 * M_PI;
      cell_of_node[j] = c;
      cells[c].node_ids.push_back(j);
      cells[c].node_dist.push_back(std::min(t - lo, hi - t));
    }
    for (std::size_t a = 0; a < mu.atoms.size(); ++a)
      atom_cell[a] = locate(std::atan2(mu.atoms[a].dir.y, mu.atoms[a].dir.x));
  } else {
    // latitude bands x longitude sectors, polar caps as single cells
    double hlat = std::max(g.colat.front(), M_PI - g.colat.back());
    for (int r = 0; r + 1 < g.n_lat; ++r) hlat = std::max(hlat, g.colat[r + 1] - g.colat[r]);
    if (hlat > 0.1 * target || g.dlon > 0.1 * target)
      throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");
    double band_target = 0.35 * target;
    int nb = static_cast<int>(std::ceil(M_PI / band_target));
    std::vector<double> mids(g.n_lat - 1);
    for (int r = 0; r + 1 < g.n_lat; ++r) mids[r] = 0.5 * (g.colat[r] + g.colat[r + 1]);
    std::vector<double> t_edges(nb + 1);
    t_edges[0] = 0.0;
    t_edges[nb] = M_PI;
    for (int i = 1; i < nb; ++i) {
      double t = M_PI * i / nb;
      auto it = std::lower_bound(mids.begin(), mids.end(), t);
      double cand = (it == mids.end()) ? mids.back() : *it;
      if (it != mids.begin() && std::abs(*(it - 1) - t) < std::abs(cand - t)) cand = *(it - 1);
      t_edges[i] = cand;
    }
    std::vector<std::vector<double>> band_sectors(nb);  // longitude edges per band
    std::vector<int> band_first_cell(nb + 1, 0);
    std::vector<double> lon_mids(g.n_lon);
    for (int c = 0; c < g.n_lon; ++c) lon_mids[c] = (c + 0.5) * g.dlon;
    int total = 0;
    for (int i = 0; i < nb; ++i) {
      band_first_cell[i] = total;
      if (i == 0 || i == nb - 1) {
        total += 1;  // polar cap
        continue;
      }
      double smax = std::max(std::sin(t_edges[i]), std::sin(t_edges[i + 1]));
      if (t_edges[i] < 0.5 * M_PI && t_edges[i + 1] > 0.5 * M_PI) smax = 1.0;
      int ns = std::max(1, static_cast<int>(std::ceil(2.0 * M_PI * smax / band_target)));
      auto& edges = band_sectors[i];
      edges.resize(ns);
      for (int s = 0; s < ns; ++s) {
        double t = 2.0 * M_PI * s / ns;
        double jmid = std::round(t / g.dlon - 0.5);
        edges[s] = (jmid + 0.5) * g.dlon;
      }
      for (int s = 1; s < ns; ++s)
        if (edges[s] <= edges[s - 1] + 0.5 * g.dlon) edges[s] = edges[s - 1] + g.dlon;
      total += ns;
    }
    band_first_cell[nb] = total;
    cells.resize(total);

    auto locate = [&](double colat, double lonv) {
      int band = static_cast<int>(std::upper_bound(t_edges.begin() + 1, t_edges.end(), colat) -
                                  (t_edges.begin() + 1));
      band = std::clamp(band, 0, nb - 1);
      if (band == 0 || band == nb - 1) return band_first_cell[band];
      const auto& edges = band_sectors[band];
      int ns = static_cast<int>(edges.size());
      double t = std::fmod(lonv - edges[0], 2.0 * M_PI);
      if (t < 0) t += 2.0 * M_PI;
      int s = static_cast<int>(std::upper_bound(edges.begin(), edges.end(), edges[0] + t) -
                               edges.begin()) -
              1;
      return band_first_cell[band] + std::clamp(s, 0, ns - 1);
    };

    // analytic area/perimeter/diameter per cell
    for (int i = 0; i < nb; ++i) {
      double t0 = t_edges[i], t1 = t_edges[i + 1];
      if (i == 0 || i == nb - 1) {
        Cell& cell = cells[band_first_cell[i]];
        double rad = (i == 0) ? t1 : M_PI - t0;
        cell.area = 2.0 * M_PI * (1.0 - std::cos(rad));
        cell.perimeter = 2.0 * M_PI * std::sin(rad);
        cell.diam = 2.0 * rad;
        if (cell.diam > target + 1e-12)
          throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");
        continue;
      }
      const auto& edges = band_sectors[i];
      int ns = static_cast<int>(edges.size());
      double smax = std::max(std::sin(t0), std::sin(t1));
      if (t0 < 0.5 * M_PI && t1 > 0.5 * M_PI) smax = 1.0;
      for (int s = 0; s < ns; ++s) {
        double lo = edges[s];
        double hi = (s + 1 < ns) ? edges[s + 1] : edges[0] + 2.0 * M_PI;
        Cell& cell = cells[band_first_cell[i] + s];
        cell.area = (hi - lo) * (std::cos(t0) - std::cos(t1));
        cell.perimeter = 2.0 * (t1 - t0) + (hi - lo) * (std::sin(t0) + std::sin(t1));
        cell.diam = std::hypot(t1 - t0, smax * (hi - lo));
        if (cell.diam > target + 1e-12)
          throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");
      }
    }

    for (int r = 0; r < g.n_lat; ++r) {
      for (int c = 0; c < g.n_lon; ++c) {
        int j = g.index(r, c);
        int ci = locate(g.colat[r], g.lon[c]);
        cell_of_node[j] = ci;
        int band = static_cast<int>(std::upper_bound(band_first_cell.begin() + 1,
                                                     band_first_cell.end(), ci) -
                                    (band_first_cell.begin() + 1));
        double t0 = t_edges[band], t1 = t_edges[band + 1];
        double d;
        if (band == 0)
          d = t1 - g.colat[r];
        else if (band == nb - 1)
          d = g.colat[r] - t0;
        else {
          const auto& edges = band_sectors[band];
          int ns = static_cast<int>(edges.size());
          int s = ci - band_first_cell[band];
          double lo = edges[s];
          double hi = (s + 1 < ns) ? edges[s + 1] : edges[0] + 2.0 * M_PI;
          double lv = g.lon[c];
          if (lv < lo) lv += 2.0 * M_PI;
          double sc = g.sin_colat[r];
          d = std::min({g.colat[r] - t0, t1 - g.colat[r], sc * (lv - lo), sc * (hi - lv)});
        }
        cells[ci].node_ids.push_back(j);
        cells[ci].node_dist.push_back(d);
      }
    }
    for (std::size_t a = 0; a < mu.atoms.size(); ++a) {
      const Vec3& d = mu.atoms[a].dir;
      double lonv = std::atan2(d.y, d.x);
      if (lonv < 0) lonv += 2.0 * M_PI;
      atom_cell[a] = locate(std::acos(std::clamp(d.z, -1.0, 1.0)), lonv);
    }
  }

  for (const auto& cell : cells)
    if (cell.node_ids.empty())
      throw std::invalid_argument("mollify: grid too coarse to resolve cells of diameter 1/k");

  // cell masses
  for (std::size_t a = 0; a < mu.atoms.size(); ++a) cells[atom_cell[a]].mass += mu.atoms[a].mass;
  if (mu.ac_density)
    for (std::size_t j = 0; j < g.size(); ++j)
      cells[cell_of_node[j]].mass += g.weights[j] * mu.ac_density->f[j] / g.omega();

  // floor + plateau bumps; the ramp width keeps both the analytic sub-max
  // region under area/k and every grid node on the plateau
  std::vector<double> ft(g.size(), 1.0 / k);
  for (auto& cell : cells) {
    if (cell.mass <= 0.0) continue;
    double min_d = *std::min_element(cell.node_dist.begin(), cell.node_dist.end());
    double w = std::min(0.5 * min_d, cell.area / (2.0 * k * cell.perimeter));
    double wsum = 0.0;
    std::vector<double> s(cell.node_ids.size());
    for (std::size_t i = 0; i < cell.node_ids.size(); ++i) {
      s[i] = w > 0.0 ? smoothstep(cell.node_dist[i] / w) : 1.0;
      wsum += g.weights[cell.node_ids[i]] * s[i];
    }
    double plateau = cell.mass * g.omega() / wsum;
    for (std::size_t i = 0; i < cell.node_ids.size(); ++i)
      ft[cell.node_ids[i]] += plateau * s[i];
  }

  return normalize(make_density(grid, std::move(ft)));
}

// ---------------------------------------------------------------------------
// I/O

std::vector<double> load_node_csv(const std::string& path, std::size_t expected_size) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_node_csv: cannot open " + path);
  std::vector<double> vals;
  std::string line;
  while (std::getline(in, line)) {
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    double v;
    if (ls >> v) vals.push_back(v);
  }
  if (vals.size() != expected_size)
    throw std::runtime_error("load_node_csv: expected " + std::to_string(expected_size) +
                             " values, got " + std::to_string(vals.size()));
  return vals;
}

MeasureSpec load_measure(const std::string& path, std::shared_ptr<const SphereGrid> grid) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_measure: cannot open " + path);
  MeasureSpec mu;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string kind;
    if (!(ls >> kind)) continue;
    auto fail = [&](const std::string& msg) {
      throw std::runtime_error("load_measure: " + path + ":" + std::to_string(lineno) + ": " + msg);
    };
    if (kind == "atom") {
      std::vector<double> nums;
      double v;
      while (ls >> v) nums.push_back(v);
      if (static_cast<int>(nums.size()) != grid->dim + 2)
        fail("atom needs " + std::to_string(grid->dim + 1) + " coordinates and a mass");
      Vec3 dir{nums[0], nums[1], grid->dim == 2 ? nums[2] : 0.0};
      double mass = nums.back();
      if (norm(dir) < 1e-12) fail("atom direction is zero");
      if (!(mass > 0.0)) fail("atom mass must be positive");
      mu.atoms.push_back({normalized(dir), mass});
    } else if (kind == "density") {
      if (mu.ac_density) fail("multiple density blocks");
      std::string what;
      if (!(ls >> what)) fail("density needs a source");
      if (what == "grid-csv") {
        std::string csv;
        if (!(ls >> csv)) fail("grid-csv needs a path");
        mu.ac_density = make_density(grid, load_node_csv(csv, grid->size()));
      } else {
        mu.ac_density = builtin_density(what, grid);
      }
    } else {
      fail("unknown directive '" + kind + "'");
    }
  }
  if (mu.atoms.empty() && !mu.ac_density)
    throw std::runtime_error("load_measure: " + path + " defines an empty measure");
  return mu;
}

}  // namespace minkflow
