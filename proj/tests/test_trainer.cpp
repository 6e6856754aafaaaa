#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mathonet/benchmarks.hpp"
#include "mathonet/grad.hpp"
#include "mathonet/io.hpp"
#include "mathonet/trainer.hpp"
#include "test_helpers.hpp"

using namespace mathonet;

namespace {

// y = w x with w stored in the constant slot of the only poly.
MathONet linear_net(double w) {
  MathONet net = make_net(1, {1}, {UnaryKind::Identity});
  net.layers[0].neurons[0].polys[0].w[1] = w;
  net.layers[0].neurons[0].oper.w[0] = 1.0;
  net.output_polys[0].w[1] = 1.0;
  return net;
}

Dataset single_sample_dataset() {
  Dataset d;
  d.n_in = 1;
  d.n_out = 1;
  d.X = {1.0};
  d.Y = {1.0};
  return d;
}

TrainConfig tiny_config() {
  TrainConfig cfg;
  cfg.hidden = {1};
  cfg.unary_set = {UnaryKind::Identity};
  cfg.lambda = 0.0;
  cfg.lambda_g = 0.0;
  cfg.n_epoch = 1;
  cfg.n_cycle = 1;
  cfg.batch_size = 8;
  cfg.decay_every = 1000000;
  return cfg;
}

}  // namespace

TEST_CASE("train_epoch: one full-batch gradient-descent step lands exactly") {
  Dataset data = single_sample_dataset();
  TrainConfig cfg = tiny_config();
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 0.1;
  TrainJob job(make_net_model(linear_net(0.0)), data, {0}, {0}, cfg, 1);
  job.train_epoch();
  std::vector<double> w;
  job.model().get_weights(w);
  // d/dw (1/2)(w x - 1)^2 = -1 at w = 0; one step of lr 0.1 gives 0.1
  CHECK(w[1] == doctest::Approx(0.1));
}

TEST_CASE("train_epoch: unregularized descent strictly decreases the objective") {
  Dataset data;
  data.n_in = 1;
  data.n_out = 1;
  for (int i = 0; i < 16; ++i) {
    const double x = 0.2 * (i - 8);
    data.X.push_back(x);
    data.Y.push_back(3.0 * x);
  }
  TrainConfig cfg = tiny_config();
  cfg.optimizer = OptimizerKind::Sgd;
  cfg.learning_rate = 0.02;
  cfg.batch_size = 16;
  std::vector<int> all;
  for (int i = 0; i < 16; ++i) all.push_back(i);
  TrainJob job(make_net_model(linear_net(0.0)), data, all, {0}, cfg, 1);
  double prev = job.train_epoch();
  for (int e = 0; e < 20; ++e) {
    const double cur = job.train_epoch();
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("train_epoch: a fully masked model never moves") {
  Dataset data = single_sample_dataset();
  TrainConfig cfg = tiny_config();
  TrainJob job(make_net_model(linear_net(0.7)), data, {0}, {0}, cfg, 1);
  for (auto& bit : job.reg().c) bit = 0;
  for (auto& bit : job.reg().cg) bit = 0;
  std::vector<double> before;
  job.model().get_weights(before);
  job.train_epoch();
  std::vector<double> after;
  job.model().get_weights(after);
  CHECK(before == after);
}

TEST_CASE("estimate_sigma2") {
  const double residuals[2] = {1.0, -1.0};
  CHECK(estimate_sigma2(residuals, Sigma2Mode::Residual, 0.0, 1e-8) == doctest::Approx(1.0));
  const double perfect[3] = {0.0, 0.0, 0.0};
  CHECK(estimate_sigma2(perfect, Sigma2Mode::Residual, 0.0, 1e-8) == doctest::Approx(1e-8));
  CHECK(estimate_sigma2(perfect, Sigma2Mode::Fixed, 0.5, 1e-8) == doctest::Approx(0.5));
}

TEST_CASE("select_model: Occam window rules") {
  {
    const std::vector<Candidate> c{{4, 1.0, 1, 0}, {2, 1.05, 2, 1}};
    CHECK(select_model(c) == 1);
  }
  {
    const std::vector<Candidate> c{{4, 1.0, 1, 0}, {2, 2.0, 2, 1}};
    CHECK(select_model(c) == 0);
  }
  {
    const std::vector<Candidate> c{{7, 3.0, 9, 0}};
    CHECK(select_model(c) == 0);
  }
  {
    // ties break by lower mse then lower seed
    const std::vector<Candidate> c{{2, 1.02, 5, 0}, {2, 1.01, 9, 1}, {2, 1.01, 3, 2}};
    CHECK(select_model(c) == 2);
  }
  CHECK_THROWS_AS(select_model({}), std::invalid_argument);
}

TEST_CASE("run_cycle on an all-zero net prunes everything") {
  Dataset data;
  data.n_in = 2;
  data.n_out = 1;
  Rng rng(3);
  for (int i = 0; i < 20; ++i) {
    data.X.push_back(rng.uniform(-1, 1));
    data.X.push_back(rng.uniform(-1, 1));
    data.Y.push_back(rng.uniform(-1, 1));
  }
  TrainConfig cfg = tiny_config();
  cfg.hidden = {2};
  cfg.unary_set = {UnaryKind::Identity, UnaryKind::Sin};
  cfg.n_epoch = 2;
  std::vector<int> train{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  std::vector<int> val{10, 11, 12, 13};
  // all weights start (and stay) at zero: gradients vanish at the saddle
  TrainJob job(make_net_model(make_net(2, {2}, cfg.unary_set)), data, train, val, cfg, 1);
  job.run_cycle(1);
  const auto rec = job.run_cycle(2);
  CHECK(rec.active_connections == 0);
  CHECK(rec.term_count == 0);
}

TEST_CASE("cycle 1 equals an independent sparse-group-Lasso trainer") {
  // oracle: a hand-rolled Adam + sparse-group-lasso loop over the same data,
  // seeds, and shuffle stream, independent of TrainJob's bookkeeping
  const SystemSpec spec = SystemSpec::lotka_volterra_default();
  Dataset data = generate_dataset(spec, 0.0, 3);

  TrainConfig cfg;
  cfg.hidden = {2};
  cfg.unary_set = {UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos};
  cfg.lambda = 1e-3;
  cfg.lambda_g = 1e-3;
  cfg.n_epoch = 5;
  cfg.n_cycle = 1;
  cfg.batch_size = 16;
  cfg.learning_rate = 0.01;
  cfg.decay_every = 1000000;
  cfg.target_dim = 0;

  std::vector<int> train_idx, val_idx;
  split_dataset(data.rows(), 0.9, cfg.seed, train_idx, val_idx);

  const std::uint64_t run_seed = 77;
  TrainJob job(make_net_model(make_net(2, cfg.hidden, cfg.unary_set)), data, train_idx,
               val_idx, cfg, run_seed);
  job.init_weights();
  for (int e = 0; e < cfg.n_epoch; ++e) job.train_epoch();
  std::vector<double> via_job;
  job.model().get_weights(via_job);

  // --- independent oracle ---
  MathONet net = make_net(2, cfg.hidden, cfg.unary_set);
  const NetLayout layout = layout_of(net);
  Rng rng(run_seed);
  std::vector<double> w(layout.total);
  for (int i = 0; i < layout.total; ++i)
    w[i] = layout.is_bias(i) ? 0.0 : rng.uniform(-cfg.init_scale, cfg.init_scale);
  unpack_weights(w, net);

  std::vector<double> m(layout.total, 0.0), v(layout.total, 0.0), grad(layout.total);
  long t = 0;
  std::vector<int> order = train_idx;
  EvalTrace trace;
  for (int e = 0; e < cfg.n_epoch; ++e) {
    for (std::size_t i = order.size(); i > 1; --i) {
      const std::size_t j = rng.below(i);
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t s = start; s < stop; ++s) {
        const int row = order[s];
        const double y = forward(net, data.x_row(row), &trace);
        const double r = y - data.y_row(row)[0];
        accumulate_dydw(net, trace, layout, r / static_cast<double>(stop - start), grad);
      }
      for (int i = 0; i < layout.total; ++i)
        if (w[i] != 0.0) grad[i] += cfg.lambda * (w[i] > 0.0 ? 1.0 : -1.0);
      for (const auto& blk : layout.blocks) {
        double sq = 0.0;
        for (int i = 0; i < blk.len; ++i) sq += w[blk.offset + i] * w[blk.offset + i];
        const double norm = std::sqrt(sq);
        if (norm == 0.0) continue;
        for (int i = 0; i < blk.len; ++i)
          grad[blk.offset + i] += cfg.lambda_g * w[blk.offset + i] / norm;
      }
      ++t;
      const double bc1 = 1.0 - std::pow(0.9, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(0.999, static_cast<double>(t));
      for (int i = 0; i < layout.total; ++i) {
        m[i] = 0.9 * m[i] + 0.1 * grad[i];
        v[i] = 0.999 * v[i] + 0.001 * grad[i] * grad[i];
        w[i] -= cfg.learning_rate * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + 1e-8);
      }
      unpack_weights(w, net);
    }
  }
  for (std::size_t i = 0; i < via_job.size(); ++i)
    CHECK(via_job[i] == doctest::Approx(w[i]).epsilon(1e-12));
}

TEST_CASE("discover is deterministic and reports sparse-group-lasso mode for one cycle") {
  Dataset data;
  data.n_in = 1;
  data.n_out = 1;
  Rng rng(9);
  for (int i = 0; i < 40; ++i) {
    const double x = rng.uniform(-2, 2);
    data.X.push_back(x);
    data.Y.push_back(2.0 * x);
  }
  TrainConfig cfg;
  cfg.hidden = {1};
  cfg.unary_set = {UnaryKind::Identity};
  cfg.lambda_grid = {1e-3, 1e-5};
  cfg.n_cycle = 1;
  cfg.n_epoch = 10;
  cfg.restarts = 2;
  cfg.learning_rate = 0.05;
  cfg.jobs = 1;
  const DiscoveryReport a = discover(data, cfg);
  const DiscoveryReport b = discover(data, cfg);
  CHECK(a.mode == "sparse_group_lasso_baseline");
  REQUIRE(a.winner >= 0);
  CHECK(a.winner == b.winner);
  CHECK(report_to_json(a) == report_to_json(b));
}

TEST_CASE("discover recovers a clean linear law end to end") {
  Dataset data;
  data.n_in = 2;
  data.n_out = 1;
  Rng rng(11);
  for (int i = 0; i < 120; ++i) {
    const double x = rng.uniform(-2, 2);
    const double y = rng.uniform(-2, 2);
    data.X.push_back(x);
    data.X.push_back(y);
    data.Y.push_back(1.5 * x - 0.5 * y);
  }
  TrainConfig cfg;
  cfg.hidden = {2};
  cfg.unary_set = {UnaryKind::Identity, UnaryKind::Sin};
  cfg.lambda_grid = {1e-4};
  cfg.n_cycle = 6;
  cfg.n_epoch = 120;
  cfg.decay_every = 120;
  cfg.restarts = 3;
  cfg.learning_rate = 0.03;
  cfg.batch_size = 16;
  cfg.jobs = 1;
  cfg.seed = 4;
  const DiscoveryReport report = discover(data, cfg);
  REQUIRE(report.winner >= 0);
  const RunResult& run = report.runs[report.winner];
  const ExprPtr expr = simplify(extract_expression(run.final_net), 1e-2);
  const int px[2] = {1, 0};
  const int py[2] = {0, 1};
  auto cx = monomial_coeff(*expr, px);
  auto cy = monomial_coeff(*expr, py);
  REQUIRE(cx.has_value());
  REQUIRE(cy.has_value());
  CHECK(*cx == doctest::Approx(1.5).epsilon(0.02));
  CHECK(*cy == doctest::Approx(-0.5).epsilon(0.02));
}

TEST_CASE("masks never revive and pruned weights never move across cycles") {
  const SystemSpec spec = SystemSpec::lotka_volterra_default();
  Dataset data = generate_dataset(spec, 0.0, 13);
  TrainConfig cfg;
  cfg.hidden = {2};
  cfg.unary_set = {UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos};
  cfg.lambda = 1e-4;
  cfg.n_cycle = 6;
  cfg.n_epoch = 40;
  cfg.decay_every = 40;
  cfg.learning_rate = 0.02;
  cfg.target_dim = 1;
  std::vector<int> train_idx, val_idx;
  split_dataset(data.rows(), 0.9, 0, train_idx, val_idx);
  TrainJob job(make_net_model(make_net(2, cfg.hidden, cfg.unary_set)), data, train_idx,
               val_idx, cfg, 21);
  job.init_weights();
  std::vector<std::uint8_t> prev_c;
  long prev_terms = -1;
  for (int c = 1; c <= cfg.n_cycle; ++c) {
    const CycleRecord rec = job.run_cycle(c);
    const auto& cur = job.reg().c;
    if (!prev_c.empty()) {
      for (std::size_t i = 0; i < cur.size(); ++i) CHECK(cur[i] <= prev_c[i]);
    }
    if (prev_terms >= 0) CHECK(rec.term_count <= prev_terms);
    prev_terms = rec.term_count;
    prev_c = cur;
  }
}
