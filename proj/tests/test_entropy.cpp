#include <doctest.h>

#include <random>

#include "minkflow/entropy.hpp"
#include "oracles.hpp"

using namespace minkflow;

TEST_CASE("entropy_at: balls and closed forms") {
  auto g = make_grid(1, 256);
  auto f = uniform_density(g);
  auto ball = make_ball(g);
  for (double alpha : {0.5, 1.0, 2.0})
    CHECK(std::abs(entropy_at(ball, f, alpha, {0, 0, 0})) < 1e-14);
  for (double c : {0.5, 3.0}) {
    auto b = make_ball(g, c);
    CHECK(entropy_at(b, f, 1.0, {0, 0, 0}) == doctest::Approx(std::log(c)).epsilon(1e-12));
    CHECK(entropy_at(b, f, 2.0, {0, 0, 0}) == doctest::Approx(std::log(c)).epsilon(1e-12));
    CHECK(entropy_at(b, f, 0.4, {0, 0, 0}) == doctest::Approx(std::log(c)).epsilon(1e-12));
  }
  CHECK_THROWS_AS((void)entropy_at(ball, f, 1.0, Vec3{1.5, 0, 0}), std::domain_error);
  CHECK_THROWS_AS((void)entropy_at(ball, f, 0.2, Vec3{0, 0, 0}), std::invalid_argument);
  DensityField unnorm{g, std::vector<double>(g->size(), 2.0), false};
  CHECK_THROWS_AS((void)entropy_at(ball, unnorm, 1.0, Vec3{0, 0, 0}), std::invalid_argument);
}

TEST_CASE("entropy: the unit ball has zero entropy, argmax at the center") {
  auto g = make_grid(1, 256);
  auto f = uniform_density(g);
  auto ball = make_ball(g);
  for (double alpha : {0.5, 1.0, 2.0}) {
    auto r = entropy(ball, f, alpha);
    CHECK(std::abs(r.value) < 1e-8);
    CHECK(norm(r.z_star) < 1e-6);
    CHECK(r.converged);
    // grid-search oracle over interior translation points: sup stays <= 0
    double best = -1e300;
    for (double rx = -0.8; rx <= 0.8; rx += 0.1)
      for (double ry = -0.8; ry <= 0.8; ry += 0.1)
        if (rx * rx + ry * ry < 0.81)
          best = std::max(best, entropy_at(ball, f, alpha, {rx, ry, 0}));
    CHECK(best <= 1e-12);
  }
}

TEST_CASE("entropy: translated balls are equivalent to centered ones") {
  auto g = make_grid(1, 256);
  auto f = uniform_density(g);
  Vec3 z0{0.4, -0.25, 0.0};
  SupportField t{g, std::vector<double>(g->size())};
  for (std::size_t j = 0; j < g->size(); ++j) t.u[j] = 1.0 + dot(z0, g->nodes[j]);
  auto r = entropy(t, f, 1.0);
  CHECK(std::abs(r.value) < 1e-6);
  CHECK(norm(r.z_star - z0) < 1e-6);
}

TEST_CASE("entropy: ball value is at most log 2 for admissible densities") {
  auto g = make_grid(1, 256);
  auto ball = make_ball(g);
  std::mt19937_64 rng(101);
  const double alphas[3] = {0.4, 1.0, 2.0};
  for (int trial = 0; trial < 30; ++trial) {
    auto f = oracles::random_density_s1(g, rng);
    auto r = entropy(ball, f, alphas[trial % 3]);
    CHECK(r.value <= std::log(2.0) + 1e-9);
    CHECK(r.value >= entropy_at(ball, f, alphas[trial % 3], centroid(ball)) - 1e-12);
  }
}

TEST_CASE("entropy: scaling law E(c Omega) = E(Omega) + log c") {
  auto g = make_grid(1, 256);
  std::mt19937_64 rng(55);
  for (int trial = 0; trial < 10; ++trial) {
    auto body = oracles::random_body_s1(g, rng);
    auto f = oracles::random_density_s1(g, rng);
    double alpha = (trial % 3 == 0) ? 1.0 : 0.45 + 0.5 * trial;
    double c = 0.5 + 0.31 * (trial % 5);
    double e0 = entropy(body, f, alpha).value;
    double e1 = entropy(rescale(body, c), f, alpha).value;
    CHECK(e1 - e0 == doctest::Approx(std::log(c)).epsilon(1e-8));
  }
}

TEST_CASE("entropy: translation equivariance of the sup") {
  auto g = make_grid(1, 256);
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 8; ++trial) {
    auto body = oracles::random_body_s1(g, rng, false);
    auto f = oracles::random_density_s1(g, rng);
    double alpha = 0.5 + 0.4 * trial;
    double e0 = entropy(body, f, alpha).value;
    Vec3 shift{0.2, -0.15, 0.0};
    SupportField shifted{g, body.u};
    for (std::size_t j = 0; j < g->size(); ++j) shifted.u[j] += dot(shift, g->nodes[j]);
    double e1 = entropy(shifted, f, alpha).value;
    CHECK(std::abs(e1 - e0) <= 1e-6);
  }
}

TEST_CASE("entropy_at is concave along interior segments") {
  auto g = make_grid(1, 256);
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unif(-0.3, 0.3);
  for (int trial = 0; trial < 12; ++trial) {
    auto body = oracles::random_body_s1(g, rng, false);
    auto f = oracles::random_density_s1(g, rng);
    double alpha = trial % 2 == 0 ? 0.6 : 1.7;
    Vec3 z1{unif(rng), unif(rng), 0.0}, z2{unif(rng), unif(rng), 0.0};
    double e1 = entropy_at(body, f, alpha, z1);
    double e2 = entropy_at(body, f, alpha, z2);
    double em = entropy_at(body, f, alpha, 0.5 * (z1 + z2));
    CHECK(em >= 0.5 * (e1 + e2) - 1e-6);
  }
}

TEST_CASE("entropy gradient matches finite differences") {
  auto g = make_grid(1, 256);
  std::mt19937_64 rng(13);
  auto body = oracles::random_body_s1(g, rng, false);
  auto f = oracles::random_density_s1(g, rng);
  for (double alpha : {0.6, 1.0, 2.5}) {
    Vec3 z{0.12, -0.08, 0.0};
    Vec3 grad = entropy_gradient(body, f, alpha, z);
    double h = 1e-6;
    for (int i = 0; i < 2; ++i) {
      Vec3 dz{i == 0 ? h : 0.0, i == 1 ? h : 0.0, 0.0};
      double fd = (entropy_at(body, f, alpha, z + dz) - entropy_at(body, f, alpha, z - dz)) /
                  (2.0 * h);
      double gi = i == 0 ? grad.x : grad.y;
      CHECK(gi == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("refined Holder inequality: equality cases and random sweep") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> unif(0.0, 2.0);
  std::uniform_real_distribution<double> pd(1.0001, 5.0);

  // F = G, p = q = 2: Cauchy-Schwarz with identical normalized profiles
  std::vector<double> F(32), G(32), w(32, 0.25);
  for (auto& v : F) v = unif(rng);
  auto [l0, r0] = refined_holder_gap(F, F, w, 2.0);
  CHECK(l0 == doctest::Approx(r0).epsilon(1e-13));

  // classical equality case F^p prop G^q: deficit and slack both vanish
  double p = 3.0, q = p / (p - 1.0);
  for (std::size_t j = 0; j < F.size(); ++j) G[j] = std::pow(F[j], p / q);
  auto [l1, r1] = refined_holder_gap(F, G, w, p);
  CHECK(r1 - l1 <= 1e-12 * std::max(1.0, r1));

  // random sweep: lhs <= rhs always
  for (int trial = 0; trial < 2000; ++trial) {
    std::size_t m = 2 + trial % 40;
    std::vector<double> Ft(m), Gt(m), wt(m);
    for (std::size_t j = 0; j < m; ++j) {
      Ft[j] = unif(rng);
      Gt[j] = unif(rng);
      wt[j] = unif(rng);
    }
    Ft[trial % m] = 0.0;  // exercise zeros
    double pt = pd(rng);
    auto [lhs, rhs] = refined_holder_gap(Ft, Gt, wt, pt);
    CHECK(lhs <= rhs + 1e-12 * std::max(1.0, std::abs(rhs)));
  }

  std::vector<double> zeros(8, 0.0), ones(8, 1.0);
  CHECK_THROWS_AS((void)refined_holder_gap(zeros, ones, ones, 2.0), std::invalid_argument);
  CHECK_THROWS_AS((void)refined_holder_gap(ones, ones, ones, 0.5), std::invalid_argument);
  CHECK_THROWS_AS((void)refined_holder_gap(ones, zeros, std::vector<double>(3, 1.0), 2.0),
                  std::invalid_argument);
}

TEST_CASE("diameter_estimate_check across the three cases") {
  auto g = make_grid(1, 256);
  auto f = uniform_density(g);
  auto ball = make_ball(g);

  // alpha = 1: E = 0 >= tau log D + log delta - 4 log(n+1), rhs negative
  auto r2 = diameter_estimate_check(ball, f, 1.0, 0.1, 0.5);
  CHECK(r2.case_id == 2);
  CHECK(r2.asserted);
  CHECK(r2.holds);
  CHECK(r2.rhs < 0.0);
  CHECK(std::abs(r2.lhs) < 1e-8);

  // alpha < 1: first branch of the dichotomy is generous for small delta
  auto r3 = diameter_estimate_check(ball, f, 0.5, 0.1, 0.25);
  CHECK(r3.case_id == 3);
  CHECK(r3.asserted);
  CHECK(r3.holds);
  CHECK(r3.diameter <= r3.branch1);

  // alpha > 1: logged only, never asserted
  auto r1 = diameter_estimate_check(ball, f, 2.0, 0.1, 0.5);
  CHECK(r1.case_id == 1);
  CHECK_FALSE(r1.asserted);
  CHECK(r1.lhs > 0.0);
  CHECK(r1.rhs > 0.0);

  // volume precondition
  CHECK_THROWS_AS((void)diameter_estimate_check(make_ball(g, 2.0), f, 1.0, 0.1, 0.5),
                  std::invalid_argument);
}
