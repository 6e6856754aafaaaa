#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mathonet/benchmarks.hpp"
#include "mathonet/grad.hpp"
#include "mathonet/pde.hpp"
#include "test_helpers.hpp"

using namespace mathonet;

namespace {

// reaction g(p) = lin * p + quad * p^2 via one identity neuron:
// h = (quad p + lin) * p, oper identity w = 1, q = const 1
MathONet reaction_net(double lin, double quad) {
  MathONet net = make_net(1, {1}, {UnaryKind::Identity});
  net.layers[0].neurons[0].polys[0].w[0] = quad;
  net.layers[0].neurons[0].polys[0].w[1] = lin;
  net.layers[0].neurons[0].oper.w[0] = 1.0;
  net.output_polys[0].w[1] = 1.0;
  return net;
}

MathONet zero_reaction() {
  MathONet net = make_net(1, {1}, {UnaryKind::Identity});
  net.layers[0].neurons[0].oper.w[0] = 1.0;
  return net;  // q = 0 everywhere
}

}  // namespace

TEST_CASE("stencil_apply: constant, linear, quadratic fields") {
  const double kernel[3] = {1.0, -2.0, 1.0};
  const double dx = 0.1;
  std::vector<double> p(9, 3.7);
  for (double v : stencil_apply(kernel, p, dx)) CHECK(v == doctest::Approx(0.0));

  for (int i = 0; i < 9; ++i) p[i] = 0.5 * i * dx;
  for (double v : stencil_apply(kernel, p, dx)) CHECK(v == doctest::Approx(0.0));

  for (int i = 0; i < 9; ++i) p[i] = (i * dx) * (i * dx);
  for (double v : stencil_apply(kernel, p, dx)) CHECK(v == doctest::Approx(2.0));

  std::vector<double> tiny{1.0, 2.0};
  CHECK_THROWS_AS(stencil_apply(kernel, tiny, dx), std::invalid_argument);
}

TEST_CASE("stencil_apply is linear in kernel and field") {
  Rng rng(301);
  const double dx = 0.04;
  std::vector<double> p1(12), p2(12);
  for (int i = 0; i < 12; ++i) {
    p1[i] = rng.uniform(-1, 1);
    p2[i] = rng.uniform(-1, 1);
  }
  double k1[3], k2[3], ksum[3];
  for (int i = 0; i < 3; ++i) {
    k1[i] = rng.uniform(-2, 2);
    k2[i] = rng.uniform(-2, 2);
    ksum[i] = k1[i] + 0.5 * k2[i];
  }
  const auto a = stencil_apply(k1, p1, dx);
  const auto b = stencil_apply(k2, p1, dx);
  const auto c = stencil_apply(ksum, p1, dx);
  for (std::size_t i = 0; i < a.size(); ++i)
    CHECK(c[i] == doctest::Approx(a[i] + 0.5 * b[i]).epsilon(1e-12));

  std::vector<double> mix(12);
  for (int i = 0; i < 12; ++i) mix[i] = 2.0 * p1[i] - 3.0 * p2[i];
  const auto fa = stencil_apply(k1, p1, dx);
  const auto fb = stencil_apply(k1, p2, dx);
  const auto fc = stencil_apply(k1, mix, dx);
  for (std::size_t i = 0; i < fa.size(); ++i)
    CHECK(fc[i] == doctest::Approx(2.0 * fa[i] - 3.0 * fb[i]).epsilon(1e-12));
}

TEST_CASE("hybrid_forward: pure diffusion matches the benchmark operator") {
  const SystemSpec spec = SystemSpec::fisher_default();
  const double dx = spec.fisher_dx();
  StencilModel model;
  model.kernel = {1.0, -2.0, 1.0};
  model.outer_coeff = spec.fisher.d;
  model.reaction = zero_reaction();
  model.dx = dx;
  const std::vector<double>& p = spec.initial;
  std::vector<double> full(p.size());
  FisherParams diffusion_only{spec.fisher.d, 0.0};
  fisher_rhs(diffusion_only, p, dx, full);
  const auto hybrid = hybrid_forward(model, p, dx);
  for (std::size_t i = 0; i < hybrid.size(); ++i)
    CHECK(hybrid[i] == doctest::Approx(full[i + 1]).epsilon(1e-12));
}

TEST_CASE("hybrid_forward: pure reaction matches the benchmark operator") {
  const SystemSpec spec = SystemSpec::fisher_default();
  const double dx = spec.fisher_dx();
  StencilModel model;
  model.kernel = {0.0, 0.0, 0.0};
  model.outer_coeff = 0.0;
  model.reaction = reaction_net(1.0, -1.0);  // r p (1 - p)
  model.dx = dx;
  const std::vector<double>& p = spec.initial;
  std::vector<double> full(p.size());
  FisherParams reaction_only{0.0, 1.0};
  fisher_rhs(reaction_only, p, dx, full);
  const auto hybrid = hybrid_forward(model, p, dx);
  for (std::size_t i = 0; i < hybrid.size(); ++i)
    CHECK(hybrid[i] == doctest::Approx(full[i + 1]).epsilon(1e-12));
}

TEST_CASE("hybrid_forward: ground-truth parameters reproduce fisher_rhs exactly") {
  const SystemSpec spec = SystemSpec::fisher_default();
  const double dx = spec.fisher_dx();
  StencilModel model;
  model.kernel = {1.0, -2.0, 1.0};
  model.outer_coeff = spec.fisher.d;
  model.reaction = reaction_net(1.0, -1.0);
  model.dx = dx;
  std::vector<double> p = spec.initial;
  // march a few steps so the field is generic
  RhsFn rhs = [&spec, dx](std::span<const double> g, std::span<double> o) {
    fisher_rhs(spec.fisher, g, dx, o);
  };
  for (int s = 0; s < 50; ++s) p = rk4_step(rhs, p, spec.dt);
  std::vector<double> full(p.size());
  fisher_rhs(spec.fisher, p, dx, full);
  const auto hybrid = hybrid_forward(model, p, dx);
  for (std::size_t i = 0; i < hybrid.size(); ++i)
    CHECK(std::fabs(hybrid[i] - full[i + 1]) < 1e-12 * (1.0 + std::fabs(full[i + 1])));
}

TEST_CASE("rescale_stencil: exact and deviating kernels") {
  {
    StencilModel m;
    m.kernel = {1.0, -2.0, 1.0};
    m.outer_coeff = 6.25;
    const auto res = rescale_stencil(m);
    CHECK(res.d_equiv == doctest::Approx(6.25));
    CHECK(res.normalized[0] == doctest::Approx(1.0));
    CHECK(res.normalized[1] == doctest::Approx(-2.0));
    CHECK(res.normalized[2] == doctest::Approx(1.0));
  }
  {
    StencilModel m;
    m.kernel = {2.0, -4.0, 2.0};
    m.outer_coeff = 1.0;
    const auto res = rescale_stencil(m);
    CHECK(res.d_equiv == doctest::Approx(2.0));
    CHECK(res.normalized[0] == doctest::Approx(1.0));
  }
  {
    // a kernel that is not proportional to [1, -2, 1]: report the deviation
    StencilModel m;
    m.kernel = {1.9276, -2.2245, 1.9276};
    m.outer_coeff = 3.2424;
    const auto res = rescale_stencil(m);
    CHECK(res.normalized[1] == doctest::Approx(-2.0));
    CHECK(res.normalized[0] == doctest::Approx(1.7331).epsilon(1e-3));
    CHECK(res.kernel_sum == doctest::Approx(1.6307).epsilon(1e-3));
  }
  {
    StencilModel m;
    m.kernel = {1.0, 0.0, 1.0};
    CHECK_THROWS_AS(rescale_stencil(m), std::invalid_argument);
  }
}

TEST_CASE("identify_hybrid: zero-sum correction recovers the growth rate") {
  const double dx = 0.04;
  // decomposition with part of the linear reaction absorbed into the center
  // tap: kernel sum is non-zero, the corrected r should still be 1
  StencilModel m;
  const double shift = 0.7;  // amount of linear term moved into the stencil
  m.kernel = {1.0, -2.0 + shift * dx * dx / 6.25, 1.0};
  m.outer_coeff = 6.25;
  m.reaction = reaction_net(1.0 - shift, -1.0);
  m.dx = dx;
  const auto id = identify_hybrid(m, 1e-8);
  CHECK(id.r_linear == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(id.r_quadratic == doctest::Approx(1.0));
  CHECK(id.reaction_linear == doctest::Approx(1.0 - shift));
}

TEST_CASE("hybrid joint gradient matches finite differences") {
  Rng rng(307);
  StencilModel seed_model;
  seed_model.dx = 0.04;
  seed_model.reaction = make_net(1, {2}, {UnaryKind::Identity, UnaryKind::Sin});
  auto model = make_hybrid_model(std::move(seed_model));
  model->init_weights(rng, 0.5, 1.0);

  const double x[3] = {0.3, 0.5, 0.4};
  const double target = -2.0;
  std::vector<double> w0;
  model->get_weights(w0);

  std::vector<double> analytic(model->layout().total, 0.0);
  const double y = model->forward_trace(x);
  model->backprop_into(y - target, analytic);  // d/dw (1/2)(y - target)^2

  auto energy = [&](std::span<const double> w) {
    model->set_weights(w);
    const double yy = model->forward_trace(x);
    return 0.5 * (yy - target) * (yy - target);
  };
  const auto numeric = fd_gradient(energy, w0, 1e-6);
  model->set_weights(w0);
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double scale = std::max({std::fabs(analytic[i]), std::fabs(numeric[i]), 1.0});
    CHECK(std::fabs(analytic[i] - numeric[i]) / scale < 1e-5);
  }
}

TEST_CASE("hybrid training on exact windows recovers d and r") {
  const SystemSpec spec = SystemSpec::fisher_default();
  const Dataset data = generate_dataset(spec, 0.0, 2);
  TrainConfig cfg;
  cfg.hidden = {2};
  cfg.unary_set = {UnaryKind::Identity};
  cfg.lambda_grid = {1e-8};
  cfg.n_cycle = 4;
  cfg.n_epoch = 300;
  cfg.decay_every = 300;
  cfg.restarts = 2;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 32;
  cfg.jobs = 1;
  cfg.seed = 8;
  const auto report = discover_hybrid(data, cfg, spec.fisher_dx());
  REQUIRE(report.winner >= 0);
  const auto& model = report.runs[report.winner].final_model;
  const auto id = identify_hybrid(model, 1e-3);
  CHECK(id.rescale.d_equiv == doctest::Approx(6.25).epsilon(0.15));
  CHECK(id.r_linear == doctest::Approx(1.0).epsilon(0.15));
  CHECK(id.r_quadratic == doctest::Approx(1.0).epsilon(0.15));
}
