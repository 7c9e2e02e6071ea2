#include <doctest.h>

#include <algorithm>

#include "minkflow/sphere_grid.hpp"

using namespace minkflow;

TEST_CASE("S^1 grid basics") {
  auto g = make_grid(1, 4);
  REQUIRE(g->size() == 4);
  for (int j = 0; j < 4; ++j) {
    CHECK(g->theta[j] == doctest::Approx(0.5 * M_PI * j).epsilon(1e-15));
    CHECK(g->weights[j] == doctest::Approx(0.5 * M_PI).epsilon(1e-15));
  }

  auto g256 = make_grid(1, 256);
  double wsum = 0.0;
  for (double w : g256->weights) wsum += w;
  CHECK(wsum == doctest::Approx(2.0 * M_PI).epsilon(1e-13));
  for (const auto& x : g256->nodes) CHECK(std::abs(norm(x) - 1.0) < 1e-14);

  CHECK_THROWS_AS(make_grid(3, 64), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1, 2), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(1, 17), std::invalid_argument);
  CHECK_THROWS_AS(make_grid(2, 8), std::invalid_argument);
}

TEST_CASE("S^2 grid: weights sum to 4 pi, no polar nodes, antipodes on-grid") {
  auto g = make_grid(2, 64);
  double wsum = 0.0;
  for (double w : g->weights) wsum += w;
  CHECK(std::abs(wsum - 4.0 * M_PI) / (4.0 * M_PI) < 1e-12);
  for (const auto& x : g->nodes) {
    CHECK(std::abs(norm(x) - 1.0) < 1e-14);
    CHECK(std::abs(x.z) < 1.0);
  }
  for (std::size_t j = 0; j < g->size(); j += 97) {
    Vec3 a = g->nodes[g->antipode(j)];
    CHECK(norm(a + g->nodes[j]) < 1e-12);
  }
}

TEST_CASE("mean: normalized averages") {
  auto g = make_grid(1, 256);
  std::vector<double> c(g->size(), 3.7), cosv(g->size()), cos2(g->size());
  for (std::size_t j = 0; j < g->size(); ++j) {
    cosv[j] = std::cos(g->theta[j]);
    cos2[j] = cosv[j] * cosv[j];
  }
  CHECK(g->mean(c) == doctest::Approx(3.7).epsilon(1e-14));
  CHECK(std::abs(g->mean(cosv)) < 1e-12);
  CHECK(g->mean(cos2) == doctest::Approx(0.5).epsilon(1e-10));

  std::vector<double> wrong(3, 1.0);
  CHECK_THROWS_AS((void)g->mean(wrong), std::invalid_argument);
}

TEST_CASE("quadrature exactness") {
  // S^1: trapezoid on periodic trig polynomials of degree < N/2
  auto g1 = make_grid(1, 32);
  std::vector<double> f(g1->size());
  for (std::size_t j = 0; j < g1->size(); ++j)
    f[j] = std::cos(7.0 * g1->theta[j]) + std::sin(15.0 * g1->theta[j]);
  CHECK(std::abs(g1->mean(f)) < 1e-14);

  // S^2: low-degree polynomial moments against closed forms
  auto g2 = make_grid(2, 24);
  std::vector<double> z2(g2->size()), x2y2(g2->size()), p4(g2->size());
  for (std::size_t j = 0; j < g2->size(); ++j) {
    const Vec3& x = g2->nodes[j];
    z2[j] = x.z * x.z;
    x2y2[j] = x.x * x.x * x.y * x.y;
    double c = x.z;
    p4[j] = (35.0 * c * c * c * c - 30.0 * c * c + 3.0) / 8.0;
  }
  CHECK(g2->mean(z2) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
  CHECK(g2->mean(x2y2) == doctest::Approx(1.0 / 15.0).epsilon(1e-12));
  CHECK(std::abs(g2->mean(p4)) < 1e-13);
}

TEST_CASE("hessian_plus_metric on S^1") {
  auto g = make_grid(1, 256);
  std::vector<double> ones(g->size(), 1.0), u(g->size());
  auto h1 = g->hessian_plus_metric(ones);
  for (const auto& m : h1) CHECK(m.a == doctest::Approx(1.0).epsilon(1e-12));

  for (std::size_t j = 0; j < g->size(); ++j) u[j] = 1.0 + 0.2 * std::cos(2.0 * g->theta[j]);
  auto h = g->hessian_plus_metric(u);
  double err = 0.0;
  for (std::size_t j = 0; j < g->size(); ++j)
    err = std::max(err, std::abs(h[j].a - (1.0 - 0.6 * std::cos(2.0 * g->theta[j]))));
  double hstep = g->dtheta;
  CHECK(err < hstep * hstep);  // second order with a small constant
}

TEST_CASE("linear functions lie in the kernel of hessian_plus_metric") {
  const Vec3 v{0.4, -0.7, 0.5};
  for (int dim : {1, 2}) {
    double prev = 0.0;
    for (int res : {24, 48, 96}) {
      if (dim == 1 && res == 24) continue;
      auto g = make_grid(dim, res);
      std::vector<double> u(g->size());
      for (std::size_t j = 0; j < g->size(); ++j) u[j] = dot(g->nodes[j], v);
      auto h = g->hessian_plus_metric(u);
      double err = 0.0;
      for (const auto& m : h)
        err = std::max({err, std::abs(m.a), std::abs(m.b), std::abs(m.c)});
      if (prev > 0.0) CHECK(prev / err >= 3.5);
      prev = err;
    }
    CHECK(prev < 1e-3);
  }
}

TEST_CASE("hessian_plus_metric on S^2 matches closed forms and converges") {
  // u = 1 + a P2(cos t) + b sin^2 t cos 2l, closed-form frame components
  const double a = 0.15, b = 0.1;
  auto exact = [&](double t, double l, SymMatrix& m) {
    double ct = std::cos(t), st = std::sin(t);
    double p2 = 0.5 * (3.0 * ct * ct - 1.0);
    double u = 1.0 + a * p2 + b * st * st * std::cos(2.0 * l);
    double h11 = u + a * (-3.0 * std::cos(2.0 * t)) + b * 2.0 * std::cos(2.0 * t) * std::cos(2.0 * l);
    double h22 = u + a * (-3.0 * ct * ct) +
                 b * (-4.0 * std::cos(2.0 * l) + 2.0 * ct * ct * std::cos(2.0 * l));
    double h12 = -2.0 * b * ct * std::sin(2.0 * l);
    m = {h11, h12, h22};
  };
  double prev = 0.0;
  for (int res : {24, 48, 96}) {
    auto g = make_grid(2, res);
    std::vector<double> u(g->size());
    for (int r = 0; r < g->n_lat; ++r)
      for (int c = 0; c < g->n_lon; ++c) {
        double t = g->colat[r], l = g->lon[c];
        double ct = std::cos(t), st = std::sin(t);
        u[g->index(r, c)] =
            1.0 + a * 0.5 * (3.0 * ct * ct - 1.0) + b * st * st * std::cos(2.0 * l);
      }
    auto h = g->hessian_plus_metric(u);
    double err = 0.0;
    for (int r = 0; r < g->n_lat; ++r)
      for (int c = 0; c < g->n_lon; ++c) {
        SymMatrix m;
        exact(g->colat[r], g->lon[c], m);
        const auto& d = h[g->index(r, c)];
        err = std::max({err, std::abs(d.a - m.a), std::abs(d.b - m.b), std::abs(d.c - m.c)});
      }
    if (prev > 0.0) CHECK(prev / err >= 3.5);
    prev = err;
  }
  CHECK(prev < 5e-5);
}

TEST_CASE("second-order convergence of the S^1 kernel per doubling") {
  double prev = 0.0;
  for (int res : {64, 128, 256, 512}) {
    auto g = make_grid(1, res);
    std::vector<double> u(g->size());
    for (std::size_t j = 0; j < g->size(); ++j) u[j] = 1.0 + 0.2 * std::cos(2.0 * g->theta[j]);
    auto h = g->hessian_plus_metric(u);
    double err = 0.0;
    for (std::size_t j = 0; j < g->size(); ++j)
      err = std::max(err, std::abs(h[j].a - (1.0 - 0.6 * std::cos(2.0 * g->theta[j]))));
    if (prev > 0.0) CHECK(prev / err >= 3.5);
    prev = err;
  }
}

TEST_CASE("value_at interpolation is exact at nodes and O(h^2) between") {
  auto g = make_grid(2, 32);
  std::vector<double> u(g->size());
  for (std::size_t j = 0; j < g->size(); ++j) u[j] = 1.0 + 0.3 * g->nodes[j].z + 0.2 * g->nodes[j].x;
  for (std::size_t j = 0; j < g->size(); j += 53)
    CHECK(g->value_at(u, g->nodes[j]) == doctest::Approx(u[j]).epsilon(1e-12));
  Vec3 d = normalized(Vec3{0.3, 0.55, 0.78});
  CHECK(g->value_at(u, d) == doctest::Approx(1.0 + 0.3 * d.z + 0.2 * d.x).epsilon(1e-3));
}
