#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "mathonet/dataset.hpp"
#include "mathonet/net.hpp"
#include "mathonet/trainer.hpp"

namespace mathonet {

// Trainable three-point spatial stencil with an outer coefficient plus a
// scalar-input reaction net. Predicts the time derivative at interior grid
// points: w_c * (s . window) / dx^2 + reaction(p_center).
struct StencilModel {
  std::array<double, 3> kernel{};
  std::uint8_t kernel_group_mask = 1;  // the stencil and w_c live or die together
  double outer_coeff = 0.0;
  MathONet reaction;  // one input (the center value)
  double dx = 0.0;
};

// (s1 p_{i-1} + s2 p_i + s3 p_{i+1}) / dx^2 at every valid interior window.
// Throws on grids shorter than 3 points.
std::vector<double> stencil_apply(std::span<const double> kernel, std::span<const double> p,
                                  double dx);

// Predicted dp/dt at interior points.
std::vector<double> hybrid_forward(const StencilModel& model, std::span<const double> p,
                                   double dx);

struct RescaleResult {
  double d_equiv = 0.0;                   // outer_coeff * (-s2 / 2)
  std::array<double, 3> normalized{};     // kernel / (-s2 / 2)
  double kernel_sum = 0.0;                // raw zero-sum deviation
};

// Normalizes the center tap to -2. Throws on s2 == 0.
RescaleResult rescale_stencil(const StencilModel& model);

// Reads the identified physics out of a trained hybrid. The growth-rate
// estimate moves any zero-sum deviation of the stencil into the linear
// reaction coefficient (the center tap and a linear reaction term are
// interchangeable on pointwise data, their sum is not).
struct HybridIdentification {
  RescaleResult rescale;
  double reaction_constant = 0.0;
  double reaction_linear = 0.0;     // raw linear coefficient of the reaction net
  double reaction_quadratic = 0.0;
  double r_linear = 0.0;     // reaction_linear + w_c * sum(kernel) / dx^2
  double r_quadratic = 0.0;  // -reaction_quadratic
  bool reaction_is_polynomial = true;
};
HybridIdentification identify_hybrid(const StencilModel& model, double coeff_floor);

// Function-level identification: least-squares projection of the learned
// reaction onto quadratics over the sampled center values. Robust to how the
// net parameterizes the function; fit_rms reports how far the learned
// reaction is from an actual quadratic on that support.
struct HybridFunctionFit {
  double constant = 0.0;
  double linear = 0.0;       // before the zero-sum correction
  double quadratic = 0.0;
  double r_linear = 0.0;     // linear + w_c * sum(kernel) / dx^2
  double r_quadratic = 0.0;  // -quadratic
  double fit_rms = 0.0;
};
HybridFunctionFit fit_reaction_quadratic(const StencilModel& model,
                                         std::span<const double> p_samples);

std::unique_ptr<TrainableModel> make_hybrid_model(StencilModel model);

struct HybridRunResult {
  int grid_index = 0;
  int restart = 0;
  double lambda = 0.0;
  double lambda_g = 0.0;
  std::uint64_t run_seed = 0;
  std::string status;
  std::vector<CycleRecord> cycles;
  StencilModel final_model;
  RegState final_reg;
  double final_val_mse = 0.0;
  long final_term_count = 0;
  std::string final_expression;
};

struct HybridDiscoveryReport {
  std::uint64_t seed = 0;
  int winner = -1;
  std::vector<HybridRunResult> runs;
};

// Same sweep protocol as discover(), on window datasets (left, center,
// right) -> dp/dt produced by the Fisher generator.
HybridDiscoveryReport discover_hybrid(const Dataset& data, const TrainConfig& cfg, double dx);

}  // namespace mathonet
