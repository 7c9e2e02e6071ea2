// Support-function representation of convex bodies with the origin interior,
// and the geometric functionals built on it: curvature, surface area measure,
// volume, diameter, centroid, recentering.
#pragma once

#include <stdexcept>
#include <string>

#include "minkflow/sphere_grid.hpp"

namespace minkflow {

// A field is considered strictly convex when the smallest eigenvalue of
// nabla^2 u + u*g exceeds kConvexityTol * max(sigma_n).
inline constexpr double kConvexityTol = 1e-8;

struct NonConvexError : std::runtime_error {
  explicit NonConvexError(const std::string& what) : std::runtime_error(what) {}
};

// Sampled support function u(x) = max_{z in Omega} <x, z>, u > 0.
struct SupportField {
  std::shared_ptr<const SphereGrid> grid;
  std::vector<double> u;
};

SupportField make_ball(std::shared_ptr<const SphereGrid> grid, double radius = 1.0);

struct ConvexityReport {
  std::vector<double> sigma;  // det(nabla^2 u + u*g) per node
  double sigma_max = 0.0;
  double min_eigenvalue = 0.0;
  double min_u = 0.0;
  bool convex = false;  // min_eigenvalue > kConvexityTol * sigma_max and u > 0
};

// Non-throwing; used by the flow's accept/reject logic.
ConvexityReport convexity_report(const SupportField& body);

bool is_valid(const SupportField& body);

// sigma_n = det(nabla^2 u + u*g); throws NonConvexError if any value or
// eigenvalue is out of range.
std::vector<double> det_hess(const SupportField& body);

// K = 1/sigma_n.
std::vector<double> gauss_curvature(const SupportField& body);

// (1/(n+1)) * sum w_j u_j sigma_j. Enclosed area for n=1, volume for n=2.
double volume(const SupportField& body);
double volume_from_sigma(const SphereGrid& grid, std::span<const double> u,
                         std::span<const double> sigma);

// Maximal width max_x (u(x) + u(-x)), which equals the diameter.
double diameter(const SupportField& body);

// Boundary points X(x) = u(x)*x + grad_S u(x).
std::vector<Vec3> boundary_points(const SupportField& body);

// Centroid of the reconstructed body (polygon for n=1, triangulated fan for n=2).
Vec3 centroid(const SupportField& body);

// u(x) - <z, x>; z must be strictly interior.
SupportField recenter(const SupportField& body, const Vec3& z);

SupportField rescale(const SupportField& body, double c);

struct BodyStats {
  double volume = 0.0;
  double diameter = 0.0;
  Vec3 centroid;
  double min_curv_eig = 0.0;
};

BodyStats body_stats(const SupportField& body);

// Geometry export: CSV polyline (x,y) for n=1, Wavefront OBJ for n=2.
void write_boundary_csv(const SupportField& body, const std::string& path);
void write_boundary_obj(const SupportField& body, const std::string& path);

}  // namespace minkflow
