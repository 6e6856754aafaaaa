#include <doctest.h>

#include <cmath>

#include "mathonet/benchmarks.hpp"
#include "mathonet/rng.hpp"

using namespace mathonet;

TEST_CASE("lorenz_rhs: fixed point and hand arithmetic") {
  LorenzParams p;
  double out[3];
  const double zero[3] = {0, 0, 0};
  lorenz_rhs(p, zero, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);
  CHECK(out[2] == 0.0);

  const double ones[3] = {1, 1, 1};
  lorenz_rhs(p, ones, out);
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[1] == doctest::Approx(26.0));
  CHECK(out[2] == doctest::Approx(1.0 - 8.0 / 3.0));

  const double s[3] = {1, 2, 3};
  lorenz_rhs(p, s, out);
  CHECK(out[0] == doctest::Approx(10.0));
  CHECK(out[1] == doctest::Approx(23.0));
  CHECK(out[2] == doctest::Approx(-6.0));
}

TEST_CASE("lv_rhs: fixed points and hand arithmetic") {
  LotkaVolterraParams p;
  double out[2];
  const double zero[2] = {0, 0};
  lv_rhs(p, zero, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 0.0);

  const double eq[2] = {p.gamma / p.delta, p.alpha / p.beta};
  lv_rhs(p, eq, out);
  CHECK(out[0] == doctest::Approx(0.0));
  CHECK(out[1] == doctest::Approx(0.0));

  const double ones[2] = {1, 1};
  lv_rhs(p, ones, out);
  CHECK(out[0] == doctest::Approx(0.4));
  CHECK(out[1] == doctest::Approx(-1.0));
}

TEST_CASE("fisher_rhs: constants and the exact quadratic second difference") {
  FisherParams p;
  const int n = 11;
  const double dx = 0.1;
  std::vector<double> grid(n, 0.0), out(n);
  fisher_rhs(p, grid, dx, out);
  for (double v : out) CHECK(v == doctest::Approx(0.0));

  grid.assign(n, 1.0);
  fisher_rhs(p, grid, dx, out);
  for (double v : out) CHECK(v == doctest::Approx(0.0));

  for (int i = 0; i < n; ++i) {
    const double x = i * dx;
    grid[i] = x * x;
  }
  fisher_rhs(p, grid, dx, out);
  for (int i = 1; i + 1 < n; ++i) {
    const double x = i * dx;
    const double expect = 2.0 * p.d + p.r * x * x * (1.0 - x * x);
    CHECK(out[i] == doctest::Approx(expect).epsilon(1e-9));
  }
}

TEST_CASE("rk4_step: exponential growth accuracy and order") {
  RhsFn expo = [](std::span<const double> s, std::span<double> o) { o[0] = s[0]; };
  const double y0[1] = {1.0};
  const auto y1 = rk4_step(expo, y0, 0.1);
  // one classical step: 1 + h + h^2/2 + h^3/6 + h^4/24
  CHECK(std::fabs(y1[0] - 1.1051708333333332) < 1e-12);
  // local truncation error ~ h^5 / 120
  CHECK(std::fabs(y1[0] - std::exp(0.1)) < 1e-7);

  RhsFn still = [](std::span<const double>, std::span<double> o) { o[0] = 0.0; };
  const auto y2 = rk4_step(still, y0, 0.5);
  CHECK(y2[0] == doctest::Approx(1.0));
}

TEST_CASE("rk4 order check on Lorenz via Richardson comparison") {
  LorenzParams p;
  RhsFn rhs = [&p](std::span<const double> s, std::span<double> o) { lorenz_rhs(p, s, o); };
  auto integrate = [&](double dt) {
    std::vector<double> s{-8.0, 7.0, 27.0};
    const int steps = static_cast<int>(std::llround(1.0 / dt));
    for (int i = 0; i < steps; ++i) s = rk4_step(rhs, s, dt);
    return s;
  };
  const auto ref = integrate(0.01 / 8.0);
  auto err = [&](double dt) {
    const auto s = integrate(dt);
    double e = 0.0;
    for (int d = 0; d < 3; ++d) e = std::max(e, std::fabs(s[d] - ref[d]));
    return e;
  };
  const double e1 = err(0.01);
  const double e2 = err(0.005);
  const double ratio = e1 / e2;
  CHECK(ratio > 8.0);   // fourth order gives ~16
  CHECK(ratio < 32.0);
}

TEST_CASE("generate_dataset: noise-free targets equal the exact right-hand side") {
  const SystemSpec spec = SystemSpec::lorenz_default();
  const Dataset data = generate_dataset(spec, 0.0, 1);
  REQUIRE(data.rows() == 1000);
  REQUIRE(data.n_in == 3);
  REQUIRE(data.n_out == 3);
  double out[3];
  for (std::size_t r = 0; r < data.rows(); r += 97) {
    lorenz_rhs(spec.lorenz, data.x_row(r), out);
    for (int d = 0; d < 3; ++d) CHECK(data.y_row(r)[d] == out[d]);
  }
}

TEST_CASE("generate_dataset: Lotka-Volterra emits exactly 300 x 2") {
  const Dataset data = generate_dataset(SystemSpec::lotka_volterra_default(), 0.0, 1);
  CHECK(data.rows() == 300);
  CHECK(data.n_in == 2);
  CHECK(data.n_out == 2);
}

TEST_CASE("generate_dataset: Fisher window rows cover interior points only") {
  const SystemSpec spec = SystemSpec::fisher_default();
  const Dataset data = generate_dataset(spec, 0.0, 1);
  CHECK(data.rows() == 24 * 11);
  CHECK(data.n_in == 3);
  CHECK(data.n_out == 1);
  // windows are consistent with the full-grid right-hand side
  const double dx = spec.fisher_dx();
  for (std::size_t r = 0; r < data.rows(); r += 31) {
    const auto w = data.x_row(r);
    const double second = (w[0] - 2.0 * w[1] + w[2]) / (dx * dx);
    const double expect = spec.fisher.d * second + spec.fisher.r * w[1] * (1.0 - w[1]);
    CHECK(data.y_row(r)[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("Lotka-Volterra first integral drifts less than 1e-5 over the trajectory") {
  const SystemSpec spec = SystemSpec::lotka_volterra_default();
  const Dataset data = generate_dataset(spec, 0.0, 1);
  const double v0 = lv_first_integral(spec.lv, data.x_row(0)[0], data.x_row(0)[1]);
  double worst = 0.0;
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const double v = lv_first_integral(spec.lv, data.x_row(r)[0], data.x_row(r)[1]);
    worst = std::max(worst, std::fabs(v - v0) / std::fabs(v0));
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("Lorenz trajectory stays inside the attractor box") {
  const Dataset data = generate_dataset(SystemSpec::lorenz_default(), 0.0, 1);
  for (std::size_t r = 0; r < data.rows(); ++r) {
    const auto s = data.x_row(r);
    CHECK(std::fabs(s[0]) < 30.0);
    CHECK(std::fabs(s[1]) < 30.0);
    CHECK(s[2] > 0.0);
    CHECK(s[2] < 60.0);
  }
}

TEST_CASE("noise statistics match the requested sigma") {
  const SystemSpec spec = SystemSpec::lotka_volterra_default();
  const Dataset clean = generate_dataset(spec, 0.0, 5);
  const double sigma = 0.5;
  const Dataset noisy = generate_dataset(spec, sigma, 5);
  const std::size_t n = clean.Y.size();
  double sum = 0.0, sum_sq = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = noisy.Y[i] - clean.Y[i];
    sum += d;
    sum_sq += d * d;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  CHECK(std::fabs(mean) < 3.0 * sigma / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(sigma * sigma).epsilon(0.10));
  // deterministic under the seed
  const Dataset again = generate_dataset(spec, sigma, 5);
  CHECK(again.Y == noisy.Y);
}
