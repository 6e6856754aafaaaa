#include "mathonet/validation.hpp"

#include <cmath>
#include <stdexcept>

#include "mathonet/layout.hpp"
#include "mathonet/rng.hpp"

namespace mathonet {

Trajectory simulate_rhs(const RhsFn& rhs, std::span<const double> x0, double dt, int steps,
                        double blowup) {
  Trajectory traj;
  traj.dim = static_cast<int>(x0.size());
  traj.dt = dt;
  traj.states.assign(x0.begin(), x0.end());
  std::vector<double> state(x0.begin(), x0.end());
  for (int s = 0; s < steps; ++s) {
    double norm_sq = 0.0;
    try {
      state = rk4_step(rhs, state, dt);
    } catch (const std::runtime_error&) {
      traj.diverged = true;
      break;
    }
    for (double v : state) norm_sq += v * v;
    if (!std::isfinite(norm_sq) || norm_sq > blowup * blowup) {
      traj.diverged = true;
      break;
    }
    traj.states.insert(traj.states.end(), state.begin(), state.end());
  }
  return traj;
}

Trajectory simulate_discovered(const std::vector<MathONet>& nets, std::span<const double> x0,
                               double dt, int steps, double blowup) {
  if (nets.size() != x0.size())
    throw std::invalid_argument("simulate_discovered: one net per state dimension required");
  for (const MathONet& net : nets)
    if (net.n_inputs != static_cast<int>(x0.size()))
      throw std::invalid_argument("simulate_discovered: net input dimension mismatch");
  RhsFn rhs = [&nets](std::span<const double> s, std::span<double> out) {
    for (std::size_t k = 0; k < nets.size(); ++k) out[k] = forward(nets[k], s);
  };
  return simulate_rhs(rhs, x0, dt, steps, blowup);
}

double trajectory_rmse(const Trajectory& a, const Trajectory& b, std::size_t horizon) {
  if (a.dim != b.dim) throw std::invalid_argument("trajectory_rmse: dimension mismatch");
  if (horizon > a.rows() || horizon > b.rows())
    throw std::invalid_argument("trajectory_rmse: horizon exceeds trajectory length");
  if (horizon == 0) return 0.0;
  double acc = 0.0;
  for (std::size_t t = 0; t < horizon; ++t) {
    const auto ra = a.row(t);
    const auto rb = b.row(t);
    for (int d = 0; d < a.dim; ++d) {
      const double diff = ra[d] - rb[d];
      acc += diff * diff;
    }
  }
  return std::sqrt(acc / static_cast<double>(horizon));
}

UncertaintyBand mc_uncertainty(const MathONet& net, const RegState& reg,
                               std::span<const double> X_test, int n_inputs, int T,
                               std::uint64_t seed) {
  if (T < 1) throw std::invalid_argument("mc_uncertainty: need at least one sample");
  const NetLayout layout = layout_of(net);
  if (reg.zeta.size() != static_cast<std::size_t>(layout.total))
    throw std::invalid_argument("mc_uncertainty: regularization state does not match the net");
  const std::size_t rows = n_inputs > 0 ? X_test.size() / static_cast<std::size_t>(n_inputs) : 0;

  std::vector<double> mean_w;
  pack_weights(net, mean_w);
  std::vector<std::uint8_t> active;
  pack_mask(net, active);

  UncertaintyBand band;
  band.samples = T;
  band.mean.assign(rows, 0.0);
  band.variance.assign(rows, 0.0);
  std::vector<double> sum(rows, 0.0), sum_sq(rows, 0.0);

  MathONet sample_net = net;
  std::vector<double> w(mean_w.size());
  for (int t = 0; t < T; ++t) {
    Rng rng(mix_seed(seed, 0x6d63ULL, static_cast<std::uint64_t>(t)));
    for (std::size_t i = 0; i < w.size(); ++i) {
      const bool live = active[i] && reg.c[i];
      if (!live) {
        w[i] = layout.is_bias(static_cast<int>(i)) ? mean_w[i] : 0.0;
        if (!reg.c[i]) w[i] = 0.0;
        continue;
      }
      const double z = reg.zeta[i];
      w[i] = z > 0.0 ? rng.normal(mean_w[i], std::sqrt(z)) : mean_w[i];
    }
    unpack_weights(w, sample_net);
    for (std::size_t r = 0; r < rows; ++r) {
      const double y = forward(sample_net, X_test.subspan(r * n_inputs, n_inputs));
      sum[r] += y;
      sum_sq[r] += y * y;
    }
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const double m = sum[r] / T;
    band.mean[r] = m;
    band.variance[r] = std::max(0.0, sum_sq[r] / T - m * m);
  }
  return band;
}

}  // namespace mathonet
