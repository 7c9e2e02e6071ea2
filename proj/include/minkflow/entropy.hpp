// The entropy functional E_{alpha,f}(Omega) = sup_z E_{alpha,f}(Omega, z),
// its inner maximization over translation points, the refined Holder
// inequality, and the entropy/diameter estimate checks.
#pragma once

#include "minkflow/measures.hpp"
#include "minkflow/support_field.hpp"

namespace minkflow {

struct EntropyResult {
  double value = 0.0;
  Vec3 z_star;
  int iterations = 0;
  bool converged = false;
};

// E_{alpha,f}(Omega, z): (alpha/(alpha-1)) log mean(f u_z^{1-1/alpha}) for
// alpha != 1, mean(f log u_z) for alpha = 1. z must be strictly interior and
// f normalized.
double entropy_at(const SupportField& body, const DensityField& f, double alpha, const Vec3& z);

// Gradient of entropy_at in z (analytic).
Vec3 entropy_gradient(const SupportField& body, const DensityField& f, double alpha,
                      const Vec3& z);

// sup over interior z by projected gradient ascent with backtracking,
// multi-started from the centroid and 2(n+1) axis-shifted seeds.
EntropyResult entropy(const SupportField& body, const DensityField& f, double alpha);

// Single ascent warm-started from z0 (used to track the maximizer along a flow).
EntropyResult entropy_refine(const SupportField& body, const DensityField& f, double alpha,
                             const Vec3& z0);

// Refined Holder inequality: returns (lhs, rhs) with
//   lhs = int F G dmu,
//   rhs = |F|_p |G|_q (1 - beta int (F^{p/2}/|F^{p/2}|_2 - G^{q/2}/|G^{q/2}|_2)^2 dmu),
// beta = min(1/p, 1/q); lhs <= rhs always.
std::pair<double, double> refined_holder_gap(std::span<const double> F, std::span<const double> G,
                                             std::span<const double> mu_weights, double p);

struct DiameterCheckReport {
  int case_id = 0;       // 1: alpha>1 (logged only), 2: alpha=1, 3: alpha<1
  bool asserted = false; // case 1 has an unspecified constant and is not asserted
  bool holds = false;
  double entropy_value = 0.0;
  double diameter = 0.0;
  double lhs = 0.0, rhs = 0.0;            // the compared quantities (cases 1, 2)
  double branch1 = 0.0, branch2 = 0.0;    // dichotomy bounds (case 3)
};

// Evaluates the applicable entropy/diameter estimate for a volume-normalized
// body: alpha=1 lower bound, alpha<1 dichotomy, alpha>1 logged only.
DiameterCheckReport diameter_estimate_check(const SupportField& body, const DensityField& f,
                                            double alpha, double delta, double tau);

}  // namespace minkflow
