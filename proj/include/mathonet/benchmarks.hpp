#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "mathonet/dataset.hpp"

namespace mathonet {

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;
};

struct LotkaVolterraParams {
  double alpha = 1.3;
  double beta = 0.9;
  double delta = 0.8;
  double gamma = 1.8;
};

struct FisherParams {
  double d = 6.25;
  double r = 1.0;
};

// Ground-truth dynamics and sampling plan for one benchmark system.
struct SystemSpec {
  enum class Kind { Lorenz, LotkaVolterra, FisherKpp };
  Kind kind = Kind::Lorenz;
  LorenzParams lorenz;
  LotkaVolterraParams lv;
  FisherParams fisher;

  std::vector<double> initial;  // state (ODE) or grid field (PDE)
  double dt = 0.01;             // integrator step
  int steps = 1000;             // emitted samples
  int sample_stride = 1;        // integrator steps per emitted sample

  // Fisher grid
  int grid_points = 26;
  double x_min = 0.0, x_max = 1.0;
  int time_samples = 11;
  double t_end = 1.0;

  static SystemSpec lorenz_default();
  static SystemSpec lotka_volterra_default();  // emits exactly 300 samples
  static SystemSpec fisher_default();          // 26-point grid, 11 time samples
  static SystemSpec by_name(const std::string& name);

  std::string name() const;
  double fisher_dx() const { return (x_max - x_min) / (grid_points - 1); }
};

void lorenz_rhs(const LorenzParams& p, std::span<const double> state, std::span<double> out);
void lv_rhs(const LotkaVolterraParams& p, std::span<const double> state, std::span<double> out);

// Method-of-lines right-hand side on the full grid; interior points use the
// three-point second difference, boundaries reflect (zero flux).
void fisher_rhs(const FisherParams& p, std::span<const double> grid, double dx,
                std::span<double> out);

using RhsFn = std::function<void(std::span<const double>, std::span<double>)>;

// Classical fourth-order Runge-Kutta step. Throws on non-finite results.
std::vector<double> rk4_step(const RhsFn& rhs, std::span<const double> state, double dt);

// Integrates the spec's trajectory, stacks visited states as X and exact
// right-hand sides as Y, then adds i.i.d. Gaussian noise to Y only. For
// Fisher-KPP each row is the three-point window (left, center, right) around
// one interior grid point with the center's time derivative as target.
Dataset generate_dataset(const SystemSpec& spec, double noise_sigma, std::uint64_t seed);

// Conserved quantity of the Lotka-Volterra flow; used to validate integrator
// accuracy.
double lv_first_integral(const LotkaVolterraParams& p, double x, double y);

}  // namespace mathonet
