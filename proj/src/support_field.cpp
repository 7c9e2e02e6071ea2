#include "minkflow/support_field.hpp"

#include <algorithm>
#include <fstream>
#include <limits>

namespace minkflow {

SupportField make_ball(std::shared_ptr<const SphereGrid> grid, double radius) {
  if (radius <= 0.0) throw std::invalid_argument("make_ball: radius must be positive");
  SupportField f;
  f.u.assign(grid->size(), radius);
  f.grid = std::move(grid);
  return f;
}

ConvexityReport convexity_report(const SupportField& body) {
  const auto& grid = *body.grid;
  ConvexityReport rep;
  auto hess = grid.hessian_plus_metric(body.u);
  rep.sigma.resize(hess.size());
  rep.sigma_max = -std::numeric_limits<double>::infinity();
  rep.min_eigenvalue = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < hess.size(); ++j) {
    rep.sigma[j] = sym_det(hess[j], grid.dim);
    rep.sigma_max = std::max(rep.sigma_max, rep.sigma[j]);
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, sym_min_eigenvalue(hess[j], grid.dim));
  }
  rep.min_u = *std::min_element(body.u.begin(), body.u.end());
  rep.convex = rep.min_u > 0.0 && std::isfinite(rep.min_eigenvalue) &&
               rep.min_eigenvalue > kConvexityTol * rep.sigma_max;
  return rep;
}

bool is_valid(const SupportField& body) { return convexity_report(body).convex; }

std::vector<double> det_hess(const SupportField& body) {
  auto rep = convexity_report(body);
  if (!rep.convex) throw NonConvexError("det_hess: field is not strictly convex");
  return std::move(rep.sigma);
}

std::vector<double> gauss_curvature(const SupportField& body) {
  auto sigma = det_hess(body);
  for (auto& s : sigma) s = 1.0 / s;
  return sigma;
}

double volume_from_sigma(const SphereGrid& grid, std::span<const double> u,
                         std::span<const double> sigma) {
  double s = 0.0;
  for (std::size_t j = 0; j < u.size(); ++j) s += grid.weights[j] * u[j] * sigma[j];
  return s / (grid.dim + 1);
}

double volume(const SupportField& body) {
  auto sigma = det_hess(body);
  return volume_from_sigma(*body.grid, body.u, sigma);
}

double diameter(const SupportField& body) {
  const auto& grid = *body.grid;
  double best = 0.0;
  for (std::size_t j = 0; j < body.u.size(); ++j) {
    double w = body.u[j] + grid.value_at(body.u, -grid.nodes[j]);
    best = std::max(best, w);
  }
  return best;
}

std::vector<Vec3> boundary_points(const SupportField& body) {
  const auto& grid = *body.grid;
  auto grad = grid.surface_gradient(body.u);
  std::vector<Vec3> pts(grid.size());
  for (std::size_t j = 0; j < pts.size(); ++j)
    pts[j] = body.u[j] * grid.nodes[j] + grad[j];
  return pts;
}

namespace {

Vec3 polygon_centroid(const std::vector<Vec3>& p) {
  double area2 = 0.0, cx = 0.0, cy = 0.0;
  const std::size_t n = p.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vec3& a = p[i];
    const Vec3& b = p[(i + 1) % n];
    double cr = a.x * b.y - b.x * a.y;
    area2 += cr;
    cx += (a.x + b.x) * cr;
    cy += (a.y + b.y) * cr;
  }
  return {cx / (3.0 * area2), cy / (3.0 * area2), 0.0};
}

// Fan of tetrahedra from the origin over the grid's natural triangulation,
// with synthesized pole vertices closing the caps.
Vec3 fan_centroid(const SphereGrid& grid, const std::vector<Vec3>& p) {
  Vec3 north{0, 0, 0}, south{0, 0, 0};
  for (int c = 0; c < grid.n_lon; ++c) {
    north = north + p[grid.index(0, c)];
    south = south + p[grid.index(grid.n_lat - 1, c)];
  }
  north = (1.0 / grid.n_lon) * north;
  south = (1.0 / grid.n_lon) * south;

  double vol6 = 0.0;
  Vec3 moment{0, 0, 0};
  auto add_tet = [&](const Vec3& a, const Vec3& b, const Vec3& c) {
    double det = a.x * (b.y * c.z - b.z * c.y) - a.y * (b.x * c.z - b.z * c.x) +
                 a.z * (b.x * c.y - b.y * c.x);
    vol6 += det;
    moment = moment + (det / 4.0) * (a + b + c);
  };
  for (int r = 0; r + 1 < grid.n_lat; ++r)
    for (int c = 0; c < grid.n_lon; ++c) {
      int c2 = (c + 1) % grid.n_lon;
      const Vec3 &a = p[grid.index(r, c)], &b = p[grid.index(r, c2)];
      const Vec3 &d = p[grid.index(r + 1, c)], &e = p[grid.index(r + 1, c2)];
      add_tet(a, b, e);
      add_tet(a, e, d);
    }
  for (int c = 0; c < grid.n_lon; ++c) {
    int c2 = (c + 1) % grid.n_lon;
    add_tet(north, p[grid.index(0, c2)], p[grid.index(0, c)]);
    add_tet(south, p[grid.index(grid.n_lat - 1, c)], p[grid.index(grid.n_lat - 1, c2)]);
  }
  return (1.0 / vol6) * moment;
}

}  // namespace

Vec3 centroid(const SupportField& body) {
  if (!is_valid(body)) throw NonConvexError("centroid: field is not strictly convex");
  auto pts = boundary_points(body);
  return body.grid->dim == 1 ? polygon_centroid(pts) : fan_centroid(*body.grid, pts);
}

SupportField recenter(const SupportField& body, const Vec3& z) {
  SupportField out{body.grid, body.u};
  for (std::size_t j = 0; j < out.u.size(); ++j) {
    out.u[j] -= dot(z, body.grid->nodes[j]);
    if (out.u[j] <= 0.0)
      throw std::invalid_argument("recenter: translation point not strictly interior");
  }
  return out;
}

SupportField rescale(const SupportField& body, double c) {
  if (c <= 0.0) throw std::invalid_argument("rescale: factor must be positive");
  SupportField out{body.grid, body.u};
  for (auto& v : out.u) v *= c;
  return out;
}

BodyStats body_stats(const SupportField& body) {
  auto rep = convexity_report(body);
  if (!rep.convex) throw NonConvexError("body_stats: field is not strictly convex");
  BodyStats st;
  st.volume = volume_from_sigma(*body.grid, body.u, rep.sigma);
  st.diameter = diameter(body);
  st.centroid = centroid(body);
  st.min_curv_eig = rep.min_eigenvalue;
  return st;
}

void write_boundary_csv(const SupportField& body, const std::string& path) {
  if (body.grid->dim != 1)
    throw std::invalid_argument("write_boundary_csv: polyline export is for S^1 bodies");
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_boundary_csv: cannot open " + path);
  out << "x,y\n";
  out.precision(17);
  for (const auto& p : boundary_points(body)) out << p.x << "," << p.y << "\n";
}

void write_boundary_obj(const SupportField& body, const std::string& path) {
  if (body.grid->dim != 2)
    throw std::invalid_argument("write_boundary_obj: mesh export is for S^2 bodies");
  const auto& grid = *body.grid;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_boundary_obj: cannot open " + path);
  out.precision(12);
  auto pts = boundary_points(body);
  Vec3 north{0, 0, 0}, south{0, 0, 0};
  for (int c = 0; c < grid.n_lon; ++c) {
    north = north + pts[grid.index(0, c)];
    south = south + pts[grid.index(grid.n_lat - 1, c)];
  }
  north = (1.0 / grid.n_lon) * north;
  south = (1.0 / grid.n_lon) * south;
  for (const auto& p : pts) out << "v " << p.x << " " << p.y << " " << p.z << "\n";
  out << "v " << north.x << " " << north.y << " " << north.z << "\n";
  out << "v " << south.x << " " << south.y << " " << south.z << "\n";
  const int vn = static_cast<int>(pts.size()) + 1;  // 1-based OBJ indices
  const int vs = vn + 1;
  for (int r = 0; r + 1 < grid.n_lat; ++r)
    for (int c = 0; c < grid.n_lon; ++c) {
      int c2 = (c + 1) % grid.n_lon;
      int a = grid.index(r, c) + 1, b = grid.index(r, c2) + 1;
      int d = grid.index(r + 1, c) + 1, e = grid.index(r + 1, c2) + 1;
      out << "f " << a << " " << b << " " << e << "\n";
      out << "f " << a << " " << e << " " << d << "\n";
    }
  for (int c = 0; c < grid.n_lon; ++c) {
    int c2 = (c + 1) % grid.n_lon;
    out << "f " << vn << " " << grid.index(0, c2) + 1 << " " << grid.index(0, c) + 1 << "\n";
    out << "f " << vs << " " << grid.index(grid.n_lat - 1, c) + 1 << " "
        << grid.index(grid.n_lat - 1, c2) + 1 << "\n";
  }
}

}  // namespace minkflow
