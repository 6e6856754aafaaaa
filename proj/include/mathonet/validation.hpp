#pragma once

#include <span>
#include <vector>

#include "mathonet/bayes.hpp"
#include "mathonet/benchmarks.hpp"
#include "mathonet/net.hpp"

namespace mathonet {

struct Trajectory {
  int dim = 0;
  double dt = 0.0;
  std::vector<double> states;  // row-major, includes the initial state
  bool diverged = false;

  std::size_t rows() const { return dim > 0 ? states.size() / static_cast<std::size_t>(dim) : 0; }
  std::span<const double> row(std::size_t r) const {
    return {states.data() + r * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
};

// RK4 integration of an arbitrary right-hand side; truncates with the
// diverged flag once the state norm passes `blowup` (chaotic mis-fits
// otherwise overflow).
Trajectory simulate_rhs(const RhsFn& rhs, std::span<const double> x0, double dt, int steps,
                        double blowup = 1e6);

// Uses one discovered net per state dimension as the right-hand side.
Trajectory simulate_discovered(const std::vector<MathONet>& nets, std::span<const double> x0,
                               double dt, int steps, double blowup = 1e6);

// Root-mean-square pointwise state distance over the first `horizon` rows.
double trajectory_rmse(const Trajectory& a, const Trajectory& b, std::size_t horizon);

struct UncertaintyBand {
  std::vector<double> mean;
  std::vector<double> variance;  // population variance over the T draws
  int samples = 0;
};

// Monte-Carlo predictive band: T draws of the active weights from the
// diagonal posterior N(w_i, zeta_i) (masked weights stay zero), evaluated on
// each row of X_test. Deterministic per-sample substreams.
UncertaintyBand mc_uncertainty(const MathONet& net, const RegState& reg,
                               std::span<const double> X_test, int n_inputs, int T,
                               std::uint64_t seed);

}  // namespace mathonet
