#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "mathonet/layout.hpp"
#include "mathonet/net.hpp"
#include "test_helpers.hpp"

using namespace mathonet;
using test_helpers::random_net;

TEST_CASE("poly_eval: hand arithmetic") {
  PolyNet p;
  p.w = {2.0, -1.0, 3.0};  // coeff x, coeff y, const
  p.mask = {1, 1, 1};
  const double x[2] = {1.0, 1.0};
  CHECK(poly_eval(p, x) == doctest::Approx(4.0));

  p.mask = {1, 0, 1};
  CHECK(poly_eval(p, x) == doctest::Approx(5.0));

  p.mask = {0, 0, 0};
  CHECK(poly_eval(p, x) == 0.0);

  p.mask = {1, 1, 1};
  p.group_mask = 0;
  CHECK(poly_eval(p, x) == 0.0);
}

TEST_CASE("poly_eval: shape errors") {
  PolyNet p;
  p.w = {1.0, 2.0};
  p.mask = {1, 1};
  const double x[2] = {1.0, 1.0};
  CHECK_THROWS_AS(poly_eval(p, x), std::invalid_argument);  // needs len(x)+1 weights
}

TEST_CASE("oper_eval: identity, sin, masked slots") {
  const UnaryKind id_only[] = {UnaryKind::Identity};
  OperNet o;
  o.w = {1.0};
  o.mask = {1};
  CHECK(oper_eval(o, 7.0, id_only) == doctest::Approx(7.0));

  const UnaryKind id_sin[] = {UnaryKind::Identity, UnaryKind::Sin};
  OperNet o2;
  o2.w = {2.0, M_PI / 2.0};
  o2.mask = {1, 1};
  CHECK(oper_eval(o2, 1.0, id_sin) == doctest::Approx(3.0));

  // a masked slot contributes exactly zero, not f(0)
  const UnaryKind cos_only[] = {UnaryKind::Cos};
  OperNet o3;
  o3.w = {0.5};
  o3.mask = {0};
  CHECK(oper_eval(o3, 3.0, cos_only) == 0.0);
}

TEST_CASE("forward: hand-wired affine and quadratic nets") {
  const MathONet net_x = test_helpers::lorenz_net_x();
  const double s1[3] = {1.0, 0.0, 0.0};
  CHECK(forward(net_x, s1) == doctest::Approx(-10.0));

  const MathONet net_z = test_helpers::lorenz_net_z();
  const double s2[3] = {2.0, 3.0, 3.0};
  CHECK(forward(net_z, s2) == doctest::Approx(-2.0));  // 2*3 - (8/3)*3
}

TEST_CASE("forward: all-zero weights with identity unary give zero") {
  const MathONet net = make_net(3, {2}, {UnaryKind::Identity});
  const double x[3] = {0.3, -1.2, 4.0};
  CHECK(forward(net, x) == 0.0);
}

TEST_CASE("forward: finite on harsh inputs with all unaries") {
  Rng rng(7);
  for (int rep = 0; rep < 50; ++rep) {
    const MathONet net = random_net(rng, 3, {3}, {UnaryKind::Identity, UnaryKind::Sin,
                                                  UnaryKind::Cos, UnaryKind::Log,
                                                  UnaryKind::Exp},
                                    2.0);
    const double x[3] = {rng.uniform(-50, 50), rng.uniform(-50, 50), rng.uniform(-50, 50)};
    CHECK(std::isfinite(forward(net, x)));
  }
}

TEST_CASE("mask screening: masked weight value cannot influence the output") {
  Rng rng(11);
  for (int rep = 0; rep < 30; ++rep) {
    MathONet net = random_net(rng, 3, {2}, {UnaryKind::Identity, UnaryKind::Sin}, 0.8, 0.4);
    const double x[3] = {rng.uniform(-3, 3), rng.uniform(-3, 3), rng.uniform(-3, 3)};
    // pick some masked slot if one exists
    for (Layer& layer : net.layers) {
      for (Neuron& neuron : layer.neurons) {
        for (PolyNet& p : neuron.polys) {
          for (std::size_t j = 0; j < p.mask.size(); ++j) {
            if (p.mask[j]) continue;
            const double before = forward(net, x);
            const double keep = p.w[j];
            p.w[j] = 1234.5678;
            const double after = forward(net, x);
            p.w[j] = keep;
            CHECK(before == after);  // bit-identical
          }
        }
      }
    }
  }
}

TEST_CASE("group consistency: group_mask zero blanks the whole block") {
  Rng rng(13);
  MathONet net = random_net(rng, 2, {2}, {UnaryKind::Identity, UnaryKind::Cos}, 1.0);
  net.layers[0].neurons[0].oper.group_mask = 0;
  for (auto& m : net.layers[0].neurons[0].oper.mask) m = 0;
  const double x[2] = {0.4, -0.9};
  EvalTrace trace;
  forward(net, x, &trace);
  CHECK(trace.layers[0][0].a == 0.0);
}

TEST_CASE("forward determinism") {
  Rng rng(17);
  const MathONet net = random_net(rng, 3, {3}, {UnaryKind::Identity, UnaryKind::Exp}, 0.7);
  const double x[3] = {0.1, 0.2, 0.3};
  CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("degree bound: identity-only single layer is a cubic polynomial") {
  Rng rng(19);
  for (int rep = 0; rep < 20; ++rep) {
    const MathONet net = random_net(rng, 3, {3}, {UnaryKind::Identity}, 0.6);
    const auto oracle = test_helpers::brute_force_expand(net);
    for (const auto& [powers, coeff] : oracle) {
      int degree = 0;
      for (int p : powers) degree += p;
      CHECK(degree <= 3);
    }
    for (int pt = 0; pt < 20; ++pt) {
      const double x[3] = {rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(-2, 2)};
      const double via_net = forward(net, x);
      const double via_poly = test_helpers::eval_monomials(oracle, x);
      CHECK(via_net == doctest::Approx(via_poly).epsilon(1e-10));
    }
  }
}

TEST_CASE("count_active_connections") {
  MathONet net = make_net(3, {3}, {UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos,
                                   UnaryKind::Log, UnaryKind::Exp});
  // paper-style architecture: 3 neurons x (3 polys x 4 + 5 oper) + 3 x 4 output
  CHECK(count_active_connections(net) == 63);

  // fully masked
  for (Layer& layer : net.layers)
    for (Neuron& neuron : layer.neurons) {
      for (PolyNet& p : neuron.polys) {
        p.group_mask = 0;
        for (auto& m : p.mask) m = 0;
      }
      neuron.oper.group_mask = 0;
      for (auto& m : neuron.oper.mask) m = 0;
    }
  for (PolyNet& q : net.output_polys) {
    q.group_mask = 0;
    for (auto& m : q.mask) m = 0;
  }
  CHECK(count_active_connections(net) == 0);
}

TEST_CASE("structural term count of the dense benchmark architectures") {
  const MathONet lorenz = make_net(3, {3}, {UnaryKind::Identity, UnaryKind::Sin,
                                            UnaryKind::Cos, UnaryKind::Log, UnaryKind::Exp});
  // per neuron: identity expands 3 polys x 4 weights = 12 terms, the 4 other
  // unaries are one atom each; output poly distributes 4 weights over it
  CHECK(structural_term_count(lorenz) == 3 * 4 * (12 + 4));

  const MathONet truth = test_helpers::lorenz_net_z();
  MathONet pruned = truth;  // prune to the true structure's masks
  for (Layer& layer : pruned.layers)
    for (Neuron& neuron : layer.neurons) {
      for (PolyNet& p : neuron.polys)
        for (std::size_t j = 0; j < p.mask.size(); ++j) p.mask[j] = p.w[j] != 0.0;
      for (std::size_t j = 0; j < neuron.oper.mask.size(); ++j)
        neuron.oper.mask[j] = neuron.oper.w[j] != 0.0;
    }
  for (PolyNet& q : pruned.output_polys)
    for (std::size_t j = 0; j < q.mask.size(); ++j) q.mask[j] = q.w[j] != 0.0;
  CHECK(structural_term_count(pruned) == 2);  // x*y and -beta z
}

TEST_CASE("expression_space_size") {
  CHECK(expression_space_size(9) == "512");
  CHECK(expression_space_size(0) == "1");
  CHECK(expression_space_size(20) == "1048576");
  CHECK(expression_space_size(100) == "1267650600228229401496703205376");
}

TEST_CASE("validate rejects malformed nets") {
  MathONet net = make_net(2, {2}, {UnaryKind::Identity});
  net.layers[0].neurons[0].polys[0].w.push_back(1.0);
  CHECK_THROWS_AS(validate(net), std::invalid_argument);
}

TEST_CASE("layout: pack / unpack round trip") {
  Rng rng(23);
  MathONet net = random_net(rng, 3, {2, 2}, {UnaryKind::Identity, UnaryKind::Sin}, 0.9);
  const NetLayout layout = layout_of(net);
  std::vector<double> flat;
  pack_weights(net, flat);
  CHECK(static_cast<int>(flat.size()) == layout.total);
  MathONet copy = make_net(3, {2, 2}, {UnaryKind::Identity, UnaryKind::Sin});
  unpack_weights(flat, copy);
  std::vector<double> flat2;
  pack_weights(copy, flat2);
  CHECK(flat == flat2);
  // bias slots are marked groupless
  int n_bias = 0;
  for (int i = 0; i < layout.total; ++i) n_bias += layout.is_bias(i) ? 1 : 0;
  CHECK(n_bias == 4);
}
