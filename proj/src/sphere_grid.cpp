#include "minkflow/sphere_grid.hpp"

#include <algorithm>
#include <stdexcept>

namespace minkflow {

double sym_det(const SymMatrix& m, int dim) {
  return dim == 1 ? m.a : m.a * m.c - m.b * m.b;
}

double sym_min_eigenvalue(const SymMatrix& m, int dim) {
  if (dim == 1) return m.a;
  double tr = m.a + m.c;
  double disc = std::sqrt(std::max(0.0, 0.25 * (m.a - m.c) * (m.a - m.c) + m.b * m.b));
  return 0.5 * tr - disc;
}

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double t = std::cos(M_PI * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      // Legendre recurrence for P_n(t) and P_n'(t)
      double p0 = 1.0, p1 = t;
      for (int k = 2; k <= n; ++k) {
        double p2 = ((2 * k - 1) * t * p1 - (k - 1) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n * (t * p1 - p0) / (t * t - 1.0);
      double dt = p1 / dp;
      t -= dt;
      if (std::abs(dt) < 1e-15) break;
    }
    x[i] = t;
    x[n - 1 - i] = -t;
    w[i] = w[n - 1 - i] = 2.0 / ((1.0 - t * t) * dp * dp);
  }
  if (n % 2 == 1) x[n / 2] = 0.0;
}

std::array<std::vector<double>, 3> fd_weights(double x0, std::span<const double> xs) {
  const int n = static_cast<int>(xs.size());
  const int m = 2;
  std::vector<std::array<double, 3>> c(n, {0.0, 0.0, 0.0});
  double c1 = 1.0;
  double c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    int mn = std::min(i, m);
    double c2 = 1.0;
    double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int k = mn; k >= 1; --k)
          c[i][k] = c1 * (k * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int k = mn; k >= 1; --k)
        c[j][k] = (c4 * c[j][k] - k * c[j][k - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::array<std::vector<double>, 3> out;
  for (int k = 0; k <= 2; ++k) {
    out[k].resize(n);
    for (int i = 0; i < n; ++i) out[k][i] = c[i][k];
  }
  return out;
}

std::shared_ptr<const SphereGrid> make_grid(int dim, int resolution) {
  if (dim != 1 && dim != 2) throw std::invalid_argument("make_grid: dim must be 1 or 2");
  auto grid = std::make_shared<SphereGrid>();
  grid->dim = dim;
  if (dim == 1) {
    if (resolution < 4) throw std::invalid_argument("make_grid: resolution too small (need >= 4)");
    if (resolution % 2 != 0)
      throw std::invalid_argument("make_grid: S^1 resolution must be even (antipodal closure)");
    int n = resolution;
    grid->n_theta = n;
    grid->dtheta = 2.0 * M_PI / n;
    grid->theta.resize(n);
    grid->nodes.resize(n);
    grid->weights.assign(n, grid->dtheta);
    for (int j = 0; j < n; ++j) {
      grid->theta[j] = grid->dtheta * j;
      grid->nodes[j] = {std::cos(grid->theta[j]), std::sin(grid->theta[j]), 0.0};
    }
    return grid;
  }

  if (resolution < 16) throw std::invalid_argument("make_grid: resolution too small (need >= 16)");
  int nlat = resolution;
  int nlon = 2 * resolution;
  grid->n_lat = nlat;
  grid->n_lon = nlon;
  grid->dlon = 2.0 * M_PI / nlon;

  std::vector<double> mu, glw;
  gauss_legendre(nlat, mu, glw);  // mu descending: colatitudes ascending
  grid->colat.resize(nlat);
  grid->sin_colat.resize(nlat);
  grid->cos_colat.resize(nlat);
  for (int r = 0; r < nlat; ++r) {
    double t = std::acos(std::clamp(mu[r], -1.0, 1.0));
    grid->colat[r] = t;
  }
  // enforce exact north/south symmetry so antipodes are on-grid
  for (int r = 0; r < nlat / 2; ++r) {
    double t = 0.5 * (grid->colat[r] + (M_PI - grid->colat[nlat - 1 - r]));
    grid->colat[r] = t;
    grid->colat[nlat - 1 - r] = M_PI - t;
  }
  if (nlat % 2 == 1) grid->colat[nlat / 2] = 0.5 * M_PI;
  for (int r = 0; r < nlat; ++r) {
    grid->sin_colat[r] = std::sin(grid->colat[r]);
    grid->cos_colat[r] = std::cos(grid->colat[r]);
  }

  grid->lon.resize(nlon);
  for (int c = 0; c < nlon; ++c) grid->lon[c] = grid->dlon * c;

  grid->nodes.resize(static_cast<std::size_t>(nlat) * nlon);
  grid->weights.resize(grid->nodes.size());
  for (int r = 0; r < nlat; ++r) {
    double st = grid->sin_colat[r], ct = grid->cos_colat[r];
    for (int c = 0; c < nlon; ++c) {
      grid->nodes[grid->index(r, c)] = {st * std::cos(grid->lon[c]), st * std::sin(grid->lon[c]), ct};
      grid->weights[grid->index(r, c)] = glw[r] * grid->dlon;
    }
  }

  // 5-point colatitude stencils: centered in the interior, offset at the two
  // rows adjacent to each pole (keeps the cot(colat)-amplified terms at
  // second order in the max norm).
  grid->lat_stencils.resize(nlat);
  for (int r = 0; r < nlat; ++r) {
    int first = std::clamp(r - 2, 0, nlat - 5);
    auto w5 = fd_weights(grid->colat[r], std::span<const double>(grid->colat.data() + first, 5));
    grid->lat_stencils[r].first_row = first;
    for (int i = 0; i < 5; ++i) {
      grid->lat_stencils[r].d1[i] = w5[1][i];
      grid->lat_stencils[r].d2[i] = w5[2][i];
    }
  }
  return grid;
}

int SphereGrid::antipode(int i) const {
  if (dim == 1) return (i + n_theta / 2) % n_theta;
  int r = i / n_lon, c = i % n_lon;
  return index(n_lat - 1 - r, (c + n_lon / 2) % n_lon);
}

double SphereGrid::mean(std::span<const double> field) const {
  if (field.size() != size()) throw std::invalid_argument("mean: field length mismatch");
  double s = 0.0;
  for (std::size_t j = 0; j < field.size(); ++j) s += weights[j] * field[j];
  return s / omega();
}

namespace {

// 4th-order periodic central differences along a uniform row.
void lon_derivatives(std::span<const double> row, double h, std::span<double> d1,
                     std::span<double> d2) {
  const int n = static_cast<int>(row.size());
  for (int j = 0; j < n; ++j) {
    double m2 = row[(j - 2 + n) % n], m1 = row[(j - 1 + n) % n];
    double p1 = row[(j + 1) % n], p2 = row[(j + 2) % n];
    d1[j] = (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h);
    d2[j] = (-p2 + 16.0 * p1 - 30.0 * row[j] + 16.0 * m1 - m2) / (12.0 * h * h);
  }
}

}  // namespace

std::vector<SymMatrix> SphereGrid::hessian_plus_metric(std::span<const double> u) const {
  if (u.size() != size()) throw std::invalid_argument("hessian_plus_metric: field length mismatch");
  std::vector<SymMatrix> out(size());
  if (dim == 1) {
    const int n = n_theta;
    const double h2 = dtheta * dtheta;
    for (int j = 0; j < n; ++j) {
      double upp = (u[(j + 1) % n] - 2.0 * u[j] + u[(j - 1 + n) % n]) / h2;
      out[j].a = upp + u[j];
    }
    return out;
  }

  const int nr = n_lat, nc = n_lon;
  std::vector<double> ul(size()), ull(size());
  for (int r = 0; r < nr; ++r)
    lon_derivatives(u.subspan(static_cast<std::size_t>(r) * nc, nc), dlon,
                    std::span<double>(ul.data() + static_cast<std::size_t>(r) * nc, nc),
                    std::span<double>(ull.data() + static_cast<std::size_t>(r) * nc, nc));

  for (int r = 0; r < nr; ++r) {
    const auto& st = lat_stencils[r];
    double sc = sin_colat[r], cc = cos_colat[r];
    double cot = cc / sc;
    for (int c = 0; c < nc; ++c) {
      double ut = 0.0, utt = 0.0, utl = 0.0;
      for (int i = 0; i < 5; ++i) {
        int idx = index(st.first_row + i, c);
        ut += st.d1[i] * u[idx];
        utt += st.d2[i] * u[idx];
        utl += st.d1[i] * ul[idx];
      }
      int j = index(r, c);
      out[j].a = utt + u[j];
      out[j].b = (utl - cot * ul[j]) / sc;
      out[j].c = ull[j] / (sc * sc) + cot * ut + u[j];
    }
  }
  return out;
}

std::vector<Vec3> SphereGrid::surface_gradient(std::span<const double> u) const {
  if (u.size() != size()) throw std::invalid_argument("surface_gradient: field length mismatch");
  std::vector<Vec3> out(size());
  if (dim == 1) {
    const int n = n_theta;
    for (int j = 0; j < n; ++j) {
      double up = (u[(j + 1) % n] - u[(j - 1 + n) % n]) / (2.0 * dtheta);
      out[j] = up * Vec3{-std::sin(theta[j]), std::cos(theta[j]), 0.0};
    }
    return out;
  }
  const int nr = n_lat, nc = n_lon;
  std::vector<double> ul(size()), ull(size());
  for (int r = 0; r < nr; ++r)
    lon_derivatives(u.subspan(static_cast<std::size_t>(r) * nc, nc), dlon,
                    std::span<double>(ul.data() + static_cast<std::size_t>(r) * nc, nc),
                    std::span<double>(ull.data() + static_cast<std::size_t>(r) * nc, nc));
  for (int r = 0; r < nr; ++r) {
    const auto& st = lat_stencils[r];
    double sc = sin_colat[r], cc = cos_colat[r];
    for (int c = 0; c < nc; ++c) {
      double ut = 0.0;
      for (int i = 0; i < 5; ++i) ut += st.d1[i] * u[index(st.first_row + i, c)];
      double cl = std::cos(lon[c]), sl = std::sin(lon[c]);
      Vec3 e_t{cc * cl, cc * sl, -sc};
      Vec3 e_l{-sl, cl, 0.0};
      out[index(r, c)] = ut * e_t + (ul[index(r, c)] / sc) * e_l;
    }
  }
  return out;
}

double SphereGrid::value_at(std::span<const double> field, const Vec3& direction) const {
  if (field.size() != size()) throw std::invalid_argument("value_at: field length mismatch");
  Vec3 d = normalized(direction);
  if (dim == 1) {
    double t = std::atan2(d.y, d.x);
    if (t < 0) t += 2.0 * M_PI;
    double pos = t / dtheta;
    int j0 = static_cast<int>(std::floor(pos)) % n_theta;
    double fr = pos - std::floor(pos);
    return (1.0 - fr) * field[j0] + fr * field[(j0 + 1) % n_theta];
  }
  double t = std::acos(std::clamp(d.z, -1.0, 1.0));
  double l = std::atan2(d.y, d.x);
  if (l < 0) l += 2.0 * M_PI;
  double pos = l / dlon;
  int c0 = static_cast<int>(std::floor(pos)) % n_lon;
  double fl = pos - std::floor(pos);
  // clamp colatitude into the covered band; the polar gap is tiny
  int r0;
  double ft;
  if (t <= colat.front()) {
    r0 = 0;
    ft = 0.0;
  } else if (t >= colat.back()) {
    r0 = n_lat - 2;
    ft = 1.0;
  } else {
    r0 = static_cast<int>(std::upper_bound(colat.begin(), colat.end(), t) - colat.begin()) - 1;
    r0 = std::clamp(r0, 0, n_lat - 2);
    ft = (t - colat[r0]) / (colat[r0 + 1] - colat[r0]);
  }
  int c1 = (c0 + 1) % n_lon;
  double v0 = (1.0 - fl) * field[index(r0, c0)] + fl * field[index(r0, c1)];
  double v1 = (1.0 - fl) * field[index(r0 + 1, c0)] + fl * field[index(r0 + 1, c1)];
  return (1.0 - ft) * v0 + ft * v1;
}

}  // namespace minkflow
