#include "mathonet/net.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mathonet {

double unary_eval(UnaryKind op, double z) {
  switch (op) {
    case UnaryKind::Identity:
      return z;
    case UnaryKind::Sin:
      return std::sin(z);
    case UnaryKind::Cos:
      return std::cos(z);
    case UnaryKind::Log:
      return std::log(std::fabs(z) + kLogEps);
    case UnaryKind::Exp:
      return std::exp(std::clamp(z, -kExpClamp, kExpClamp));
  }
  return 0.0;
}

double unary_deriv(UnaryKind op, double z) {
  switch (op) {
    case UnaryKind::Identity:
      return 1.0;
    case UnaryKind::Sin:
      return std::cos(z);
    case UnaryKind::Cos:
      return -std::sin(z);
    case UnaryKind::Log: {
      if (z == 0.0) return 0.0;
      const double s = z > 0.0 ? 1.0 : -1.0;
      return s / (std::fabs(z) + kLogEps);
    }
    case UnaryKind::Exp:
      return std::fabs(z) < kExpClamp ? std::exp(z) : 0.0;
  }
  return 0.0;
}

std::string_view unary_name(UnaryKind op) {
  switch (op) {
    case UnaryKind::Identity:
      return "identity";
    case UnaryKind::Sin:
      return "sin";
    case UnaryKind::Cos:
      return "cos";
    case UnaryKind::Log:
      return "log";
    case UnaryKind::Exp:
      return "exp";
  }
  return "?";
}

std::optional<UnaryKind> unary_from_name(std::string_view name) {
  if (name == "identity") return UnaryKind::Identity;
  if (name == "sin") return UnaryKind::Sin;
  if (name == "cos") return UnaryKind::Cos;
  if (name == "log") return UnaryKind::Log;
  if (name == "exp") return UnaryKind::Exp;
  return std::nullopt;
}

MathONet make_net(int n_inputs, const std::vector<int>& hidden,
                  std::vector<UnaryKind> unary_set) {
  if (n_inputs < 1) throw std::invalid_argument("make_net: n_inputs must be >= 1");
  if (hidden.empty()) throw std::invalid_argument("make_net: need at least one hidden layer");
  if (unary_set.empty()) throw std::invalid_argument("make_net: empty unary set");
  MathONet net;
  net.n_inputs = n_inputs;
  net.unary_set = std::move(unary_set);
  const int n_ops = static_cast<int>(net.unary_set.size());
  int fan_in = n_inputs;
  for (int width : hidden) {
    if (width < 1) throw std::invalid_argument("make_net: layer width must be >= 1");
    Layer layer;
    layer.neurons.resize(width);
    for (Neuron& neuron : layer.neurons) {
      neuron.polys.resize(fan_in);
      for (PolyNet& p : neuron.polys) {
        p.w.assign(n_inputs + 1, 0.0);
        p.mask.assign(n_inputs + 1, 1);
      }
      neuron.oper.w.assign(n_ops, 0.0);
      neuron.oper.mask.assign(n_ops, 1);
    }
    net.layers.push_back(std::move(layer));
    fan_in = width;
  }
  net.output_polys.resize(hidden.back());
  for (PolyNet& q : net.output_polys) {
    q.w.assign(n_inputs + 1, 0.0);
    q.mask.assign(n_inputs + 1, 1);
  }
  return net;
}

double poly_eval(const PolyNet& poly, std::span<const double> x) {
  const std::size_t n = poly.w.size();
  if (poly.mask.size() != n)
    throw std::invalid_argument("poly_eval: weight/mask length mismatch");
  if (x.size() + 1 != n)
    throw std::invalid_argument("poly_eval: input dimension mismatch");
  if (!poly.group_mask) return 0.0;
  double acc = poly.mask[n - 1] ? poly.w[n - 1] : 0.0;
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (poly.mask[i]) acc += poly.w[i] * x[i];
  }
  return acc;
}

double oper_eval(const OperNet& oper, double h, std::span<const UnaryKind> unary_set) {
  const std::size_t n = oper.w.size();
  if (oper.mask.size() != n)
    throw std::invalid_argument("oper_eval: weight/mask length mismatch");
  if (unary_set.size() != n)
    throw std::invalid_argument("oper_eval: unary set size mismatch");
  if (!oper.group_mask) return 0.0;
  double acc = 0.0;
  for (std::size_t o = 0; o < n; ++o) {
    if (oper.mask[o]) acc += unary_eval(unary_set[o], oper.w[o] * h);
  }
  return acc;
}

double forward(const MathONet& net, std::span<const double> x, EvalTrace* trace) {
  if (static_cast<int>(x.size()) != net.n_inputs)
    throw std::invalid_argument("forward: input dimension mismatch");
  const std::size_t n_ops = net.unary_set.size();

  if (trace) {
    trace->input.assign(x.begin(), x.end());
    trace->layers.resize(net.layers.size());
    trace->out_poly_vals.resize(net.output_polys.size());
  }

  std::vector<double> prev;      // activations of the previous layer
  std::vector<double> current;
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    current.assign(layer.neurons.size(), 0.0);
    if (trace) trace->layers[l].resize(layer.neurons.size());
    for (std::size_t k = 0; k < layer.neurons.size(); ++k) {
      const Neuron& neuron = layer.neurons[k];
      const std::size_t fan_in = neuron.polys.size();
      EvalTrace::NeuronTrace* nt = trace ? &trace->layers[l][k] : nullptr;
      if (nt) {
        nt->poly_vals.resize(fan_in);
        nt->z.resize(n_ops);
      }
      double h = neuron.bias;
      for (std::size_t i = 0; i < fan_in; ++i) {
        const double p = poly_eval(neuron.polys[i], x);
        const double in_i = (l == 0) ? x[i] : prev[i];
        h += p * in_i;
        if (nt) nt->poly_vals[i] = p;
      }
      double a = 0.0;
      const OperNet& oper = neuron.oper;
      for (std::size_t o = 0; o < n_ops; ++o) {
        const double z = oper.w[o] * h;
        if (nt) nt->z[o] = z;
        if (oper.group_mask && oper.mask[o]) a += unary_eval(net.unary_set[o], z);
      }
      current[k] = a;
      if (nt) {
        nt->h = h;
        nt->a = a;
      }
    }
    prev.swap(current);
  }

  double y = 0.0;
  for (std::size_t k = 0; k < net.output_polys.size(); ++k) {
    const double q = poly_eval(net.output_polys[k], x);
    y += q * prev[k];
    if (trace) trace->out_poly_vals[k] = q;
  }
  if (trace) trace->output = y;
  if (!std::isfinite(y))
    throw std::runtime_error("forward: non-finite output");
  return y;
}

namespace {

long active_bits(const std::vector<std::uint8_t>& mask, std::uint8_t group_mask) {
  if (!group_mask) return 0;
  long n = 0;
  for (std::uint8_t m : mask) n += m ? 1 : 0;
  return n;
}

}  // namespace

long count_active_connections(const MathONet& net) {
  long total = 0;
  for (const Layer& layer : net.layers) {
    for (const Neuron& neuron : layer.neurons) {
      for (const PolyNet& p : neuron.polys) total += active_bits(p.mask, p.group_mask);
      total += active_bits(neuron.oper.mask, neuron.oper.group_mask);
    }
  }
  for (const PolyNet& q : net.output_polys) total += active_bits(q.mask, q.group_mask);
  return total;
}

std::string expression_space_size(int n_connections) {
  if (n_connections < 0) throw std::invalid_argument("expression_space_size: negative count");
  // Repeated doubling in base 1e9.
  std::vector<std::uint32_t> limbs{1};
  for (int i = 0; i < n_connections; ++i) {
    std::uint32_t carry = 0;
    for (std::uint32_t& limb : limbs) {
      const std::uint64_t v = 2ULL * limb + carry;
      limb = static_cast<std::uint32_t>(v % 1000000000ULL);
      carry = static_cast<std::uint32_t>(v / 1000000000ULL);
    }
    if (carry) limbs.push_back(carry);
  }
  std::string out = std::to_string(limbs.back());
  for (auto it = limbs.rbegin() + 1; it != limbs.rend(); ++it) {
    std::string part = std::to_string(*it);
    out += std::string(9 - part.size(), '0') + part;
  }
  return out;
}

long structural_term_count(const MathONet& net) {
  // terms(h) for layer l given per-neuron term counts of layer l-1.
  std::vector<long> prev_terms;  // terms of a^{l-1}_i (inputs count as 1)
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const Layer& layer = net.layers[l];
    std::vector<long> cur(layer.neurons.size(), 0);
    for (std::size_t k = 0; k < layer.neurons.size(); ++k) {
      const Neuron& neuron = layer.neurons[k];
      long h_terms = 0;
      for (std::size_t i = 0; i < neuron.polys.size(); ++i) {
        const long feature_terms = (l == 0) ? 1 : prev_terms[i];
        h_terms += active_bits(neuron.polys[i].mask, neuron.polys[i].group_mask) * feature_terms;
      }
      long a_terms = 0;
      const OperNet& oper = neuron.oper;
      if (oper.group_mask) {
        for (std::size_t o = 0; o < oper.w.size(); ++o) {
          if (!oper.mask[o]) continue;
          a_terms += (net.unary_set[o] == UnaryKind::Identity) ? h_terms : 1;
        }
      }
      cur[k] = a_terms;
    }
    prev_terms.swap(cur);
  }
  long total = 0;
  for (std::size_t k = 0; k < net.output_polys.size(); ++k) {
    total += active_bits(net.output_polys[k].mask, net.output_polys[k].group_mask) *
             prev_terms[k];
  }
  return total;
}

namespace {

void validate_block(const std::vector<double>& w, const std::vector<std::uint8_t>& mask,
                    std::uint8_t group_mask, std::size_t expect_len, const char* what) {
  if (w.size() != expect_len || mask.size() != expect_len)
    throw std::invalid_argument(std::string("validate: bad ") + what + " length");
  if (!group_mask) {
    for (std::uint8_t m : mask)
      if (m) throw std::invalid_argument(std::string("validate: group-masked ") + what +
                                         " has live mask bits");
  }
}

}  // namespace

void validate(const MathONet& net) {
  const std::size_t poly_len = static_cast<std::size_t>(net.n_inputs) + 1;
  const std::size_t n_ops = net.unary_set.size();
  std::size_t fan_in = static_cast<std::size_t>(net.n_inputs);
  for (const Layer& layer : net.layers) {
    for (const Neuron& neuron : layer.neurons) {
      if (neuron.polys.size() != fan_in)
        throw std::invalid_argument("validate: neuron fan-in mismatch");
      for (const PolyNet& p : neuron.polys) validate_block(p.w, p.mask, p.group_mask, poly_len, "poly");
      validate_block(neuron.oper.w, neuron.oper.mask, neuron.oper.group_mask, n_ops, "oper");
    }
    fan_in = layer.neurons.size();
  }
  if (net.output_polys.size() != fan_in)
    throw std::invalid_argument("validate: output poly count mismatch");
  for (const PolyNet& q : net.output_polys) validate_block(q.w, q.mask, q.group_mask, poly_len, "output poly");
}

}  // namespace mathonet
