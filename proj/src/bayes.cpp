#include "mathonet/bayes.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace mathonet {

RegState RegState::make(int total_slots, int n_groups) {
  RegState reg;
  reg.nu.assign(total_slots, 1.0);
  reg.alpha.assign(total_slots, 0.0);
  reg.beta.assign(total_slots, 1.0);
  reg.zeta.assign(total_slots, 1.0);
  reg.c.assign(total_slots, 1);
  reg.nu_g.assign(n_groups, 1.0);
  reg.alpha_g.assign(n_groups, 0.0);
  reg.beta_g.assign(n_groups, 1.0);
  reg.cg.assign(n_groups, 1);
  return reg;
}

double update_zeta(double nu, double h_ii) {
  if (nu < 0.0 || h_ii < 0.0) throw std::invalid_argument("update_zeta: negative input");
  if (nu == 0.0) return 0.0;
  // the double reciprocal can land an ulp above nu when h_ii is tiny
  return std::min(nu, 1.0 / (1.0 / nu + h_ii));
}

std::pair<double, double> update_alpha_beta(double nu, double zeta, const RegConfig& cfg) {
  double alpha;
  if (nu <= 0.0) {
    alpha = std::numeric_limits<double>::infinity();
  } else {
    // (nu - zeta) / nu^2; the subtraction form keeps alpha exactly
    // non-negative when zeta <= nu (division round-off can push the
    // reciprocal form a few ulps below zero)
    alpha = (nu - std::min(zeta, nu)) / (nu * nu);
  }
  const double beta = std::clamp(std::sqrt(std::fabs(alpha)), cfg.beta_min, cfg.beta_max);
  return {alpha, beta};
}

std::pair<double, double> update_group_alpha(double nu_g, std::span<const double> zeta_members,
                                             const RegConfig& cfg) {
  double alpha_g;
  if (nu_g <= 0.0) {
    alpha_g = std::numeric_limits<double>::infinity();
  } else {
    alpha_g = 0.0;
    for (double z : zeta_members) alpha_g += (nu_g - std::min(z, nu_g)) / (nu_g * nu_g);
  }
  const double beta_g = std::clamp(std::sqrt(std::fabs(alpha_g)), cfg.beta_min, cfg.beta_max);
  return {alpha_g, beta_g};
}

double update_nu(double w, double beta) {
  if (beta <= 0.0) throw std::invalid_argument("update_nu: beta must be positive");
  return std::fabs(w) / beta;
}

double update_group_nu(std::span<const double> w_members, double beta_g) {
  if (beta_g <= 0.0) throw std::invalid_argument("update_group_nu: beta must be positive");
  double sq = 0.0;
  for (double w : w_members) sq += w * w;
  return std::sqrt(sq) / beta_g;
}

void bayes_update(RegState& reg, const NetLayout& layout, std::span<const double> w_flat,
                  std::span<const double> h_diag, const RegConfig& cfg) {
  const int total = layout.total;
  if (static_cast<int>(w_flat.size()) != total || static_cast<int>(h_diag.size()) != total)
    throw std::invalid_argument("bayes_update: size mismatch");

  for (int i = 0; i < total; ++i) {
    reg.zeta[i] = update_zeta(reg.nu[i], std::max(0.0, h_diag[i]));
    const auto [a, b] = update_alpha_beta(reg.nu[i], reg.zeta[i], cfg);
    reg.alpha[i] = a;
    reg.beta[i] = b;
  }

  std::vector<double> zeta_members;
  for (std::size_t g = 0; g < layout.blocks.size(); ++g) {
    const NetLayout::Block& blk = layout.blocks[g];
    zeta_members.clear();
    for (int i = 0; i < blk.len; ++i)
      zeta_members.push_back(update_zeta(reg.nu_g[g], std::max(0.0, h_diag[blk.offset + i])));
    const auto [ag, bg] = update_group_alpha(reg.nu_g[g], zeta_members, cfg);
    reg.alpha_g[g] = ag;
    reg.beta_g[g] = bg;
  }

  for (int i = 0; i < total; ++i) reg.nu[i] = update_nu(w_flat[i], reg.beta[i]);
  for (std::size_t g = 0; g < layout.blocks.size(); ++g) {
    const NetLayout::Block& blk = layout.blocks[g];
    reg.nu_g[g] = update_group_nu(w_flat.subspan(blk.offset, blk.len), reg.beta_g[g]);
  }
}

void update_masks(RegState& reg, const NetLayout& layout, const RegConfig& cfg) {
  if (cfg.kappa_alpha <= 0.0 || cfg.kappa_alpha_g <= 0.0)
    throw std::invalid_argument("update_masks: thresholds must be positive");
  for (std::size_t i = 0; i < reg.c.size(); ++i) {
    const std::uint8_t keep = reg.alpha[i] > cfg.kappa_alpha ? 0 : 1;
    reg.c[i] = reg.c[i] & keep;
  }
  for (std::size_t g = 0; g < reg.cg.size(); ++g) {
    const std::uint8_t keep = reg.alpha_g[g] > cfg.kappa_alpha_g ? 0 : 1;
    reg.cg[g] = reg.cg[g] & keep;
    if (!reg.cg[g]) {
      const NetLayout::Block& blk = layout.blocks[g];
      for (int i = 0; i < blk.len; ++i) reg.c[blk.offset + i] = 0;
    }
  }
}

double loss_sgl(double energy, std::span<const double> w, std::span<const GroupSpan> groups,
                double lambda, double lambda_g) {
  if (lambda < 0.0 || lambda_g < 0.0) throw std::invalid_argument("loss_sgl: negative lambda");
  double loss = energy;
  for (double wi : w) loss += lambda * std::fabs(wi);
  for (const GroupSpan& g : groups) {
    double sq = 0.0;
    for (int i = 0; i < g.len; ++i) sq += w[g.offset + i] * w[g.offset + i];
    loss += lambda_g * std::sqrt(sq);
  }
  return loss;
}

double loss_bayes(double energy, std::span<const double> w, std::span<const std::uint8_t> c,
                  std::span<const double> beta, std::span<const GroupSpan> groups,
                  std::span<const std::uint8_t> cg, std::span<const double> beta_g,
                  double lambda, double lambda_g) {
  if (w.size() != c.size() || w.size() != beta.size() || groups.size() != cg.size() ||
      groups.size() != beta_g.size())
    throw std::invalid_argument("loss_bayes: shape mismatch");
  double loss = energy;
  for (std::size_t i = 0; i < w.size(); ++i)
    loss += lambda * beta[i] * (c[i] ? 1.0 : 0.0) * std::fabs(w[i]);
  for (std::size_t g = 0; g < groups.size(); ++g) {
    if (!cg[g]) continue;
    double sq = 0.0;
    for (int i = 0; i < groups[g].len; ++i) {
      const double wi = w[groups[g].offset + i];
      sq += wi * wi;
    }
    loss += lambda_g * beta_g[g] * std::sqrt(sq);
  }
  return loss;
}

}  // namespace mathonet
