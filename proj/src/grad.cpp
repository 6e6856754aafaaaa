#include "mathonet/grad.hpp"

#include <cmath>
#include <stdexcept>

namespace mathonet {

void accumulate_dydw(const MathONet& net, const EvalTrace& trace, const NetLayout& layout,
                     double scale, std::span<double> grad) {
  if (static_cast<int>(grad.size()) != layout.total)
    throw std::invalid_argument("accumulate_dydw: gradient size mismatch");
  const std::size_t n_layers = net.layers.size();
  const std::size_t n_ops = net.unary_set.size();
  const std::span<const double> x(trace.input);

  // Walk the layout in the same order it was built so offsets line up.
  std::size_t block = 0;
  std::vector<std::vector<int>> poly_block(n_layers);  // per layer: fan_in blocks per neuron
  std::vector<std::vector<int>> oper_block(n_layers);  // per layer: one per neuron
  std::vector<int> out_block(net.output_polys.size());
  std::vector<std::size_t> neuron_base(n_layers, 0);   // layer-major neuron offset
  {
    std::size_t neuron_i = 0;
    for (std::size_t l = 0; l < n_layers; ++l) {
      neuron_base[l] = neuron_i;
      const Layer& layer = net.layers[l];
      for (std::size_t k = 0; k < layer.neurons.size(); ++k, ++neuron_i) {
        for (std::size_t i = 0; i < layer.neurons[k].polys.size(); ++i)
          poly_block[l].push_back(static_cast<int>(block++));
        oper_block[l].push_back(static_cast<int>(block++));
      }
    }
    for (std::size_t k = 0; k < net.output_polys.size(); ++k)
      out_block[k] = static_cast<int>(block++);
  }

  // d y / d a^L_k = q_k(x)
  std::vector<double> d_a(net.layers.back().neurons.size());
  for (std::size_t k = 0; k < net.output_polys.size(); ++k) {
    d_a[k] = trace.out_poly_vals[k];
    const PolyNet& q = net.output_polys[k];
    if (q.group_mask) {
      const double a_last = trace.layers[n_layers - 1][k].a;
      const int off = layout.blocks[out_block[k]].offset;
      const std::size_t n = q.w.size();
      for (std::size_t j = 0; j < n; ++j) {
        if (!q.mask[j]) continue;
        const double feat = (j + 1 == n) ? 1.0 : x[j];
        grad[off + j] += scale * feat * a_last;
      }
    } else {
      d_a[k] = 0.0;
    }
  }

  std::vector<double> d_prev;
  for (std::size_t lr = n_layers; lr-- > 0;) {
    const Layer& layer = net.layers[lr];
    d_prev.assign(lr > 0 ? net.layers[lr - 1].neurons.size() : 0, 0.0);
    for (std::size_t k = 0; k < layer.neurons.size(); ++k) {
      const Neuron& neuron = layer.neurons[k];
      const EvalTrace::NeuronTrace& nt = trace.layers[lr][k];
      const double da = d_a[k];

      // a = sum_o m_o f_o(w_o h);  dz_o = w_o h
      double dh = 0.0;
      const OperNet& oper = neuron.oper;
      const int oper_off = layout.blocks[oper_block[lr][k]].offset;
      for (std::size_t o = 0; o < n_ops; ++o) {
        if (!oper.group_mask || !oper.mask[o]) continue;
        const double fprime = unary_deriv(net.unary_set[o], nt.z[o]);
        grad[oper_off + static_cast<int>(o)] += scale * da * fprime * nt.h;
        dh += da * fprime * oper.w[o];
      }

      grad[layout.bias_offsets[neuron_base[lr] + k]] += scale * dh;

      for (std::size_t i = 0; i < neuron.polys.size(); ++i) {
        const double in_i = (lr == 0) ? x[i] : trace.layers[lr - 1][i].a;
        const PolyNet& p = neuron.polys[i];
        if (p.group_mask) {
          const int off = layout.blocks[poly_block[lr][k * neuron.polys.size() + i]].offset;
          const std::size_t n = p.w.size();
          for (std::size_t j = 0; j < n; ++j) {
            if (!p.mask[j]) continue;
            const double feat = (j + 1 == n) ? 1.0 : x[j];
            grad[off + j] += scale * dh * in_i * feat;
          }
          if (lr > 0) d_prev[i] += dh * nt.poly_vals[i];
        }
      }
    }
    if (lr > 0) d_a = d_prev;
  }
}

std::vector<double> backward(const MathONet& net, const EvalTrace& trace, double residual,
                             double sigma2) {
  if (sigma2 <= 0.0) throw std::invalid_argument("backward: sigma2 must be positive");
  const NetLayout layout = layout_of(net);
  std::vector<double> grad(layout.total, 0.0);
  accumulate_dydw(net, trace, layout, -residual / sigma2, grad);
  return grad;
}

std::vector<double> gauss_newton_diag(const MathONet& net, std::span<const double> X,
                                      int n_inputs, double sigma2) {
  if (sigma2 <= 0.0) throw std::invalid_argument("gauss_newton_diag: sigma2 must be positive");
  const NetLayout layout = layout_of(net);
  std::vector<double> h(layout.total, 0.0);
  std::vector<double> dydw(layout.total);
  EvalTrace trace;
  const std::size_t rows = n_inputs > 0 ? X.size() / static_cast<std::size_t>(n_inputs) : 0;
  for (std::size_t r = 0; r < rows; ++r) {
    forward(net, X.subspan(r * n_inputs, n_inputs), &trace);
    std::fill(dydw.begin(), dydw.end(), 0.0);
    accumulate_dydw(net, trace, layout, 1.0, dydw);
    for (int i = 0; i < layout.total; ++i) h[i] += dydw[i] * dydw[i] / sigma2;
  }
  return h;
}

std::vector<double> fd_gradient(const std::function<double(std::span<const double>)>& f,
                                std::span<const double> w0, double step) {
  if (step <= 0.0) throw std::invalid_argument("fd_gradient: step must be positive");
  std::vector<double> w(w0.begin(), w0.end());
  std::vector<double> grad(w.size(), 0.0);
  for (std::size_t i = 0; i < w.size(); ++i) {
    const double keep = w[i];
    w[i] = keep + step;
    const double fp = f(w);
    w[i] = keep - step;
    const double fm = f(w);
    w[i] = keep;
    grad[i] = (fp - fm) / (2.0 * step);
  }
  return grad;
}

std::vector<double> finite_diff_gradient(const MathONet& net, std::span<const double> x,
                                         double y_target, double sigma2, double step) {
  const NetLayout layout = layout_of(net);
  std::vector<std::uint8_t> active;
  pack_mask(net, active);
  std::vector<double> w0;
  pack_weights(net, w0);
  MathONet scratch = net;
  auto energy = [&](std::span<const double> w) {
    unpack_weights(w, scratch);
    const double r = y_target - forward(scratch, x);
    return r * r / (2.0 * sigma2);
  };
  std::vector<double> grad = fd_gradient(energy, w0, step);
  for (int i = 0; i < layout.total; ++i)
    if (!active[i]) grad[i] = 0.0;
  return grad;
}

}  // namespace mathonet
