#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "mathonet/layout.hpp"

namespace mathonet {

struct RegConfig {
  double kappa_alpha = 1e3;    // per-connection pruning threshold on alpha
  double kappa_alpha_g = 1e3;  // group pruning threshold on alpha_g
  double beta_min = 1e-6;
  double beta_max = 1e6;
};

// Per-weight and per-group bookkeeping for the sparse group Bayesian
// updates. Slots follow NetLayout order (biases are groupless weights);
// groups are the PolyNet/OperNet/output-poly blocks.
struct RegState {
  std::vector<double> nu, alpha, beta, zeta;  // per flat slot
  std::vector<double> nu_g, alpha_g, beta_g;  // per block
  std::vector<std::uint8_t> c;                // per flat slot
  std::vector<std::uint8_t> cg;               // per block

  // Hyper-parameters start at one, every connection retained.
  static RegState make(int total_slots, int n_groups);
};

// zeta = (nu^-1 + H)^-1 in diagonal form. nu = 0 marks a dead weight and
// yields zeta = 0.
double update_zeta(double nu, double h_ii);

// alpha = -zeta / nu^2 + 1 / nu, beta = sqrt(|alpha|) clipped to
// [beta_min, beta_max]. A dead weight (nu = 0) gets alpha = +inf so the mask
// update removes it.
std::pair<double, double> update_alpha_beta(double nu, double zeta,
                                            const RegConfig& cfg = {});

// Group variant: alpha_g sums the per-member contributions computed with the
// shared group variance; beta_g is one scalar for the whole group.
std::pair<double, double> update_group_alpha(double nu_g,
                                             std::span<const double> zeta_members,
                                             const RegConfig& cfg = {});

double update_nu(double w, double beta);
double update_group_nu(std::span<const double> w_members, double beta_g);

// One full hyper-parameter refresh from the current weights and Hessian
// diagonal: zeta -> alpha, beta (per weight and per group) -> nu. Mask bits
// are untouched; call update_masks afterwards.
void bayes_update(RegState& reg, const NetLayout& layout, std::span<const double> w_flat,
                  std::span<const double> h_diag, const RegConfig& cfg);

// Threshold alpha / alpha_g, intersect with the previous decision (pruning
// is monotone) and enforce group dominance (a removed group removes all of
// its members).
void update_masks(RegState& reg, const NetLayout& layout, const RegConfig& cfg);

struct GroupSpan {
  int offset = 0;
  int len = 0;
};

// E + lambda * sum |w_i| + lambda_g * sum_g ||W_g||_2
double loss_sgl(double energy, std::span<const double> w, std::span<const GroupSpan> groups,
                double lambda, double lambda_g);

// E + lambda * sum beta_i c_i |w_i| + lambda_g * sum_g beta_g cg_g ||W_g||_2.
// With unit beta and all-on masks this equals loss_sgl bit for bit.
double loss_bayes(double energy, std::span<const double> w, std::span<const std::uint8_t> c,
                  std::span<const double> beta, std::span<const GroupSpan> groups,
                  std::span<const std::uint8_t> cg, std::span<const double> beta_g,
                  double lambda, double lambda_g);

}  // namespace mathonet
