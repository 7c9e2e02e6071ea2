// Discretizations of S^1 and S^2: quadrature nodes/weights and the
// finite-difference stencils for covariant derivatives of sampled fields.
#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <vector>

namespace minkflow {

struct Vec3 {
  double x = 0.0, y = 0.0, z = 0.0;
};

inline Vec3 operator+(const Vec3& a, const Vec3& b) { return {a.x + b.x, a.y + b.y, a.z + b.z}; }
inline Vec3 operator-(const Vec3& a, const Vec3& b) { return {a.x - b.x, a.y - b.y, a.z - b.z}; }
inline Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
inline Vec3 operator*(double s, const Vec3& a) { return {s * a.x, s * a.y, s * a.z}; }
inline double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }
inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
inline double distance(const Vec3& a, const Vec3& b) { return norm(a - b); }
inline Vec3 normalized(const Vec3& a) {
  double n = norm(a);
  return {a.x / n, a.y / n, a.z / n};
}

// Symmetric 2x2 matrix [[a, b], [b, c]] in an orthonormal tangent frame.
// Grids on S^1 use only `a`.
struct SymMatrix {
  double a = 0.0, b = 0.0, c = 0.0;
};

double sym_det(const SymMatrix& m, int dim);
double sym_min_eigenvalue(const SymMatrix& m, int dim);

// Immutable after construction; shareable across threads.
struct SphereGrid {
  int dim = 1;  // n, the sphere dimension

  std::vector<Vec3> nodes;     // unit vectors in R^{n+1}
  std::vector<double> weights; // positive, sum to omega_n

  // dim == 1: uniform periodic angles theta_j = 2*pi*j/N
  int n_theta = 0;
  double dtheta = 0.0;
  std::vector<double> theta;

  // dim == 2: Gauss-Legendre colatitudes x uniform longitudes, no polar nodes.
  // Node layout is row-major: index(row, col) = row * n_lon + col.
  int n_lat = 0, n_lon = 0;
  double dlon = 0.0;
  std::vector<double> colat, sin_colat, cos_colat, lon;
  struct LatStencil {
    int first_row = 0;                 // stencil spans rows first_row..first_row+4
    std::array<double, 5> d1{}, d2{};  // weights for d/dcolat and d^2/dcolat^2
  };
  std::vector<LatStencil> lat_stencils;

  std::size_t size() const { return nodes.size(); }
  double omega() const { return dim == 1 ? 2.0 * M_PI : 4.0 * M_PI; }
  double ball_volume() const { return omega() / (dim + 1); }
  int index(int row, int col) const { return row * n_lon + col; }
  int antipode(int i) const;

  // Normalized average (1/omega_n) * sum w_j field_j.
  double mean(std::span<const double> field) const;

  // Covariant Hessian plus the metric term, nabla^2 u + u*g, per node.
  std::vector<SymMatrix> hessian_plus_metric(std::span<const double> u) const;

  // Tangential gradient of a sampled field, in ambient coordinates.
  std::vector<Vec3> surface_gradient(std::span<const double> u) const;

  // Evaluate a sampled field in an arbitrary direction (linear/bilinear
  // interpolation; exact at nodes).
  double value_at(std::span<const double> field, const Vec3& direction) const;
};

// dim = 1: `resolution` uniform angles (even, >= 4).
// dim = 2: `resolution` Gauss-Legendre latitudes x 2*resolution longitudes
// (resolution >= 16).
std::shared_ptr<const SphereGrid> make_grid(int dim, int resolution);

// Finite-difference weights for derivative orders 0..2 at x0 on arbitrary
// nodes (Fornberg's recursion). weights[order][i] multiplies f(xs[i]).
std::array<std::vector<double>, 3> fd_weights(double x0, std::span<const double> xs);

// Gauss-Legendre nodes (descending in [-1,1]) and weights.
void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w);

}  // namespace minkflow
