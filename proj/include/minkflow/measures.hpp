// Densities and Borel measures on S^n: normalization, collar masses over
// neighborhoods of great subspheres, solvability hypothesis checks, and the
// cell-bump mollification of general measures into smooth positive densities.
#pragma once

#include <functional>
#include <optional>
#include <string>

#include "minkflow/sphere_grid.hpp"

namespace minkflow {

// Sampled nonnegative density; when `normalized`, mean(f) = 1, i.e.
// f dtheta / omega_n is a probability measure.
struct DensityField {
  std::shared_ptr<const SphereGrid> grid;
  std::vector<double> f;
  bool normalized = false;
};

DensityField make_density(std::shared_ptr<const SphereGrid> grid, std::vector<double> values);
DensityField normalize(DensityField field);
DensityField uniform_density(std::shared_ptr<const SphereGrid> grid);

// Named builtins: "uniform", "cos2", "bumps:<seed>".
DensityField builtin_density(const std::string& name, std::shared_ptr<const SphereGrid> grid);

struct Atom {
  Vec3 dir;
  double mass = 0.0;
};

// atoms + optional absolutely continuous part; the a.c. density is stored so
// that mean(ac_density) equals its mass share.
struct MeasureSpec {
  std::vector<Atom> atoms;
  std::optional<DensityField> ac_density;

  double total_mass() const;
};

MeasureSpec normalize(MeasureSpec mu);
MeasureSpec measure_from_density(DensityField f);

// integral of phi against the measure
double pair_measure(const MeasureSpec& mu, const std::function<double(const Vec3&)>& phi);

// Linear subspace L of R^{n+1}, 1 <= dim L <= n, as an orthonormal basis.
struct Subspace {
  std::vector<Vec3> basis;
};

Subspace make_subspace(std::vector<Vec3> spanning);

// sup_{y in L^perp cap S^n} <x, y> = |proj_{L^perp} x|
double collar_distance(const Vec3& x, const Subspace& L);

// Normalized integral of f^power over the collar
// Psi(L cap S^n, delta) = {x : |proj_{L^perp} x| <= delta}.
double collar_mass(const DensityField& f, const Subspace& L, double delta, double power = 1.0);
// Measure of the collar; power must be 1 when an atomic part is present.
double collar_mass(const MeasureSpec& mu, const Subspace& L, double delta, double power = 1.0);

struct HypothesisReport {
  bool ok = false;
  int case_id = 0;  // 1: alpha>1, 2: alpha=1, 3: 1/(n+2)<alpha<1
  double delta = 0.0;
  double tau = 0.0;
  std::string witness;  // violating direction/subspace when !ok, notes otherwise
};

// Checks the solvability hypothesis matching alpha over a finite sweep of
// directions/subspaces (atom-spanned plus a seeded coarse net) and a
// descending delta ladder. The report certifies only the tested family.
HypothesisReport check_hypothesis(const MeasureSpec& mu, double alpha, const SphereGrid& grid);

// Smooth positive probability density approximating mu: partitions S^n into
// spherically convex cells of diameter <= 1/k, places one plateau bump per
// cell carrying exactly the cell's mass, floors at 1/k, and renormalizes.
DensityField mollify(const MeasureSpec& mu, int k, std::shared_ptr<const SphereGrid> grid);

// Text format: lines "atom x y [z] mass", "density uniform|cos2|bumps:<seed>",
// "density grid-csv <path>". Comments start with '#'.
MeasureSpec load_measure(const std::string& path, std::shared_ptr<const SphereGrid> grid);

std::vector<double> load_node_csv(const std::string& path, std::size_t expected_size);

}  // namespace minkflow
