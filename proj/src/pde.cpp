#include "mathonet/pde.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>

#include "mathonet/grad.hpp"
#include "mathonet/layout.hpp"

namespace mathonet {

std::vector<double> stencil_apply(std::span<const double> kernel, std::span<const double> p,
                                  double dx) {
  if (kernel.size() != 3) throw std::invalid_argument("stencil_apply: kernel must have 3 taps");
  if (p.size() < 3) throw std::invalid_argument("stencil_apply: grid too short");
  if (dx <= 0.0) throw std::invalid_argument("stencil_apply: dx must be positive");
  const double inv_dx2 = 1.0 / (dx * dx);
  std::vector<double> out(p.size() - 2);
  for (std::size_t i = 1; i + 1 < p.size(); ++i)
    out[i - 1] = (kernel[0] * p[i - 1] + kernel[1] * p[i] + kernel[2] * p[i + 1]) * inv_dx2;
  return out;
}

std::vector<double> hybrid_forward(const StencilModel& model, std::span<const double> p,
                                   double dx) {
  std::vector<double> out(p.size() - 2, 0.0);
  if (model.kernel_group_mask) {
    out = stencil_apply(model.kernel, p, dx);
    for (double& v : out) v *= model.outer_coeff;
  }
  std::vector<double> center(1);
  for (std::size_t i = 1; i + 1 < p.size(); ++i) {
    center[0] = p[i];
    out[i - 1] += forward(model.reaction, center);
  }
  return out;
}

RescaleResult rescale_stencil(const StencilModel& model) {
  const double s2 = model.kernel[1];
  if (s2 == 0.0) throw std::invalid_argument("rescale_stencil: degenerate stencil (s2 = 0)");
  const double factor = -s2 / 2.0;
  RescaleResult res;
  res.d_equiv = model.outer_coeff * factor;
  for (int i = 0; i < 3; ++i) res.normalized[i] = model.kernel[i] / factor;
  res.kernel_sum = model.kernel[0] + model.kernel[1] + model.kernel[2];
  return res;
}

HybridIdentification identify_hybrid(const StencilModel& model, double coeff_floor) {
  HybridIdentification id;
  id.rescale = rescale_stencil(model);
  const ExprPtr expr = simplify(extract_expression(model.reaction), coeff_floor);
  auto coeff = [&](int power) {
    const int powers[1] = {power};
    for (const TermView& tv : term_views(expr)) {
      auto p = monomial_powers(*tv.unit, 1);
      if (p && (*p)[0] == power) return tv.coeff;
    }
    (void)powers;
    return 0.0;
  };
  for (const TermView& tv : term_views(expr))
    if (!monomial_powers(*tv.unit, 1)) id.reaction_is_polynomial = false;
  id.reaction_constant = coeff(0);
  id.reaction_linear = coeff(1);
  id.reaction_quadratic = coeff(2);
  const double stencil_linear =
      model.kernel_group_mask
          ? model.outer_coeff * id.rescale.kernel_sum / (model.dx * model.dx)
          : 0.0;
  id.r_linear = id.reaction_linear + stencil_linear;
  id.r_quadratic = -id.reaction_quadratic;
  return id;
}

HybridFunctionFit fit_reaction_quadratic(const StencilModel& model,
                                         std::span<const double> p_samples) {
  if (p_samples.size() < 3)
    throw std::invalid_argument("fit_reaction_quadratic: need at least 3 samples");
  // normal equations for g(p) ~ c0 + c1 p + c2 p^2
  double m[5] = {0, 0, 0, 0, 0};  // moments of p^1 .. p^4
  double b0 = 0, b1 = 0, b2 = 0;
  std::vector<double> g(p_samples.size());
  double center[1];
  for (std::size_t i = 0; i < p_samples.size(); ++i) {
    const double p = p_samples[i];
    center[0] = p;
    g[i] = forward(model.reaction, center);
    const double p2 = p * p;
    m[0] += p;
    m[1] += p2;
    m[2] += p2 * p;
    m[3] += p2 * p2;
    b0 += g[i];
    b1 += g[i] * p;
    b2 += g[i] * p2;
  }
  const double n = static_cast<double>(p_samples.size());
  double A[3][3] = {{n, m[0], m[1]}, {m[0], m[1], m[2]}, {m[1], m[2], m[3]}};
  double rhs[3] = {b0, b1, b2};
  // Gaussian elimination with partial pivoting
  for (int col = 0; col < 3; ++col) {
    int pivot = col;
    for (int row = col + 1; row < 3; ++row)
      if (std::fabs(A[row][col]) > std::fabs(A[pivot][col])) pivot = row;
    std::swap(A[col], A[pivot]);
    std::swap(rhs[col], rhs[pivot]);
    if (A[col][col] == 0.0) throw std::invalid_argument("fit_reaction_quadratic: degenerate support");
    for (int row = col + 1; row < 3; ++row) {
      const double f = A[row][col] / A[col][col];
      for (int k = col; k < 3; ++k) A[row][k] -= f * A[col][k];
      rhs[row] -= f * rhs[col];
    }
  }
  double c[3];
  for (int row = 3; row-- > 0;) {
    double acc = rhs[row];
    for (int k = row + 1; k < 3; ++k) acc -= A[row][k] * c[k];
    c[row] = acc / A[row][row];
  }
  HybridFunctionFit fit;
  fit.constant = c[0];
  fit.linear = c[1];
  fit.quadratic = c[2];
  double rss = 0.0;
  for (std::size_t i = 0; i < p_samples.size(); ++i) {
    const double p = p_samples[i];
    const double e = g[i] - (c[0] + c[1] * p + c[2] * p * p);
    rss += e * e;
  }
  fit.fit_rms = std::sqrt(rss / n);
  const double stencil_linear =
      model.kernel_group_mask
          ? model.outer_coeff * (model.kernel[0] + model.kernel[1] + model.kernel[2]) /
                (model.dx * model.dx)
          : 0.0;
  fit.r_linear = fit.linear + stencil_linear;
  fit.r_quadratic = -fit.quadratic;
  return fit;
}

namespace {

// Trains the stencil(+outer coefficient) jointly with the reaction net on
// window rows. Flat slots: the reaction net first, then [s1, s2, s3, w_c]
// as one group that is only prunable as a whole.
class HybridModel final : public TrainableModel {
 public:
  explicit HybridModel(StencilModel model, double p_scale = 1.0, double y_scale = 1.0)
      : model_(std::move(model)), p_scale_(p_scale), y_scale_(y_scale) {
    validate(model_.reaction);
    if (model_.reaction.n_inputs != 1)
      throw std::invalid_argument("HybridModel: reaction must take one input");
    if (model_.dx <= 0.0) throw std::invalid_argument("HybridModel: dx must be positive");
    net_layout_ = layout_of(model_.reaction);
    layout_ = net_layout_;
    kernel_block_ = static_cast<int>(layout_.blocks.size());
    layout_.blocks.push_back({NetLayout::BlockKind::HiddenPoly, -2, -1, -1, layout_.total, 4});
    for (int i = 0; i < 4; ++i) layout_.group_of.push_back(kernel_block_);
    layout_.total += 4;
  }

  int n_inputs() const override { return 3; }
  const NetLayout& layout() const override { return layout_; }

  double forward_trace(std::span<const double> x) override {
    if (x.size() != 3) throw std::invalid_argument("HybridModel: rows are 3-point windows");
    window_ = {x[0] / p_scale_, x[1] / p_scale_, x[2] / p_scale_};
    conv_ = (model_.kernel[0] * window_[0] + model_.kernel[1] * window_[1] +
             model_.kernel[2] * window_[2]) /
            (model_.dx * model_.dx);
    center_[0] = window_[1];
    double y = forward(model_.reaction, center_, &trace_);
    if (model_.kernel_group_mask) y += model_.outer_coeff * conv_;
    return y_scale_ * y;
  }

  void backprop_into(double scale, std::span<double> grad) override {
    scale *= y_scale_;
    accumulate_dydw(model_.reaction, trace_, net_layout_, scale,
                    grad.subspan(0, net_layout_.total));
    if (!model_.kernel_group_mask) return;
    const int base = net_layout_.total;
    const double inv_dx2 = 1.0 / (model_.dx * model_.dx);
    for (int i = 0; i < 3; ++i)
      grad[base + i] += scale * model_.outer_coeff * window_[i] * inv_dx2;
    grad[base + 3] += scale * conv_;
  }

  void get_weights(std::vector<double>& flat) const override {
    pack_weights(model_.reaction, flat);
    flat.push_back(model_.kernel[0]);
    flat.push_back(model_.kernel[1]);
    flat.push_back(model_.kernel[2]);
    flat.push_back(model_.outer_coeff);
  }

  void set_weights(std::span<const double> flat) override {
    unpack_weights(flat.subspan(0, net_layout_.total), model_.reaction);
    const int base = net_layout_.total;
    model_.kernel = {flat[base], flat[base + 1], flat[base + 2]};
    model_.outer_coeff = flat[base + 3];
  }

  void init_weights(Rng& rng, double scale, double nonlinear_damp) override {
    std::vector<double> flat(layout_.total, 0.0);
    for (int i = 0; i < layout_.total; ++i) {
      if (i < net_layout_.total && net_layout_.is_bias(i)) continue;
      double s = scale;
      if (i < net_layout_.total) {
        const NetLayout::Block& blk = net_layout_.blocks[net_layout_.group_of[i]];
        if (blk.kind == NetLayout::BlockKind::Oper &&
            model_.reaction.unary_set[i - blk.offset] != UnaryKind::Identity)
          s *= nonlinear_damp;
      }
      flat[i] = rng.uniform(-s, s);
    }
    set_weights(flat);
  }

  double trace_preactivation(int flat) const override {
    if (flat >= net_layout_.total) return 0.0;
    const NetLayout::Block& blk = net_layout_.blocks[net_layout_.group_of[flat]];
    return trace_.layers[blk.layer][blk.neuron].h;
  }

  std::vector<int> nonlinear_slots() const override {
    std::vector<int> slots;
    for (const NetLayout::Block& blk : net_layout_.blocks) {
      if (blk.kind != NetLayout::BlockKind::Oper) continue;
      for (int j = 0; j < blk.len; ++j)
        if (model_.reaction.unary_set[j] != UnaryKind::Identity) slots.push_back(blk.offset + j);
    }
    return slots;
  }

  void park_slot(int flat) override {
    const NetLayout::Block& blk = net_layout_.blocks[net_layout_.group_of[flat]];
    model_.reaction.layers[blk.layer].neurons[blk.neuron].oper.mask[flat - blk.offset] = 0;
    if (std::find(parked_.begin(), parked_.end(), flat) == parked_.end())
      parked_.push_back(flat);
  }

  void unpark_slot(int flat, double weight) override {
    const NetLayout::Block& blk = net_layout_.blocks[net_layout_.group_of[flat]];
    model_.reaction.layers[blk.layer].neurons[blk.neuron].oper.mask[flat - blk.offset] = 1;
    std::vector<double> w;
    get_weights(w);
    w[flat] = weight;
    set_weights(w);
    parked_.erase(std::remove(parked_.begin(), parked_.end(), flat), parked_.end());
  }

  void protect_masks(RegState& reg) const override {
    // no per-tap pruning: the stencil group lives or dies as a unit
    const NetLayout::Block& blk = layout_.blocks[kernel_block_];
    for (int i = 0; i < blk.len; ++i) reg.c[blk.offset + i] = reg.cg[kernel_block_];
  }

  void apply_masks(RegState& reg) override {
    std::span<std::uint8_t> c_net(reg.c.data(), net_layout_.total);
    std::span<std::uint8_t> cg_net(reg.cg.data(), net_layout_.blocks.size());
    mathonet::apply_masks(model_.reaction, c_net, cg_net);
    prune_unreachable(model_.reaction, c_net, cg_net, net_layout_);
    std::vector<double> flat;
    pack_weights(model_.reaction, flat);
    for (int off : net_layout_.bias_offsets)
      if (!reg.c[off]) flat[off] = 0.0;
    unpack_weights(flat, model_.reaction);
    if (!reg.cg[kernel_block_]) {
      model_.kernel_group_mask = 0;
      model_.kernel = {0.0, 0.0, 0.0};
      model_.outer_coeff = 0.0;
    }
  }

  long active_connections() const override {
    return count_active_connections(discovery_reaction()) +
           (model_.kernel_group_mask ? 4 : 0);
  }

  long structural_terms() const override {
    return structural_term_count(discovery_reaction()) + (model_.kernel_group_mask ? 1 : 0);
  }

  MathONet discovery_reaction() const {
    if (parked_.empty()) return model_.reaction;
    MathONet view = model_.reaction;
    for (int flat : parked_) {
      const NetLayout::Block& blk = net_layout_.blocks[net_layout_.group_of[flat]];
      view.layers[blk.layer].neurons[blk.neuron].oper.mask[flat - blk.offset] = 1;
    }
    return view;
  }

  ExprPtr extract() const override { return extract_expression(raw_model().reaction); }

  std::string expression_string(double coeff_floor, int decimals) const override {
    const StencilModel raw = raw_model();
    std::string out;
    if (raw.kernel_group_mask) {
      char buf[128];
      std::snprintf(buf, sizeof(buf), "%.*f·stencil[%.*f, %.*f, %.*f]/dx^2 + ", decimals,
                    raw.outer_coeff, decimals, raw.kernel[0], decimals, raw.kernel[1],
                    decimals, raw.kernel[2]);
      out = buf;
    }
    std::vector<std::string> names{"p"};
    out += to_string(*simplify(extract_expression(raw.reaction), coeff_floor), decimals,
                     names);
    return out;
  }

  // change of units: the window divides by p_scale and the output multiplies
  // by y_scale, so the raw outer coefficient picks up y_scale / p_scale
  StencilModel raw_model() const {
    StencilModel raw = model_;
    raw.outer_coeff *= y_scale_ / p_scale_;
    const std::vector<double> xs{p_scale_};
    unscale_net(raw.reaction, xs, y_scale_);
    return raw;
  }

  RegState raw_reg(const RegState& reg) const {
    RegState out = reg;
    RegState net_part;
    const int nt = net_layout_.total;
    const int ng = static_cast<int>(net_layout_.blocks.size());
    auto head = [](const std::vector<double>& v, int len) {
      return std::vector<double>(v.begin(), v.begin() + len);
    };
    net_part.nu = head(reg.nu, nt);
    net_part.alpha = head(reg.alpha, nt);
    net_part.beta = head(reg.beta, nt);
    net_part.zeta = head(reg.zeta, nt);
    net_part.c.assign(reg.c.begin(), reg.c.begin() + nt);
    net_part.nu_g = head(reg.nu_g, ng);
    net_part.alpha_g = head(reg.alpha_g, ng);
    net_part.beta_g = head(reg.beta_g, ng);
    net_part.cg.assign(reg.cg.begin(), reg.cg.begin() + ng);
    const std::vector<double> xs{p_scale_};
    unscale_reg(net_part, model_.reaction, xs, y_scale_);
    std::copy(net_part.nu.begin(), net_part.nu.end(), out.nu.begin());
    std::copy(net_part.alpha.begin(), net_part.alpha.end(), out.alpha.begin());
    std::copy(net_part.beta.begin(), net_part.beta.end(), out.beta.begin());
    std::copy(net_part.zeta.begin(), net_part.zeta.end(), out.zeta.begin());
    std::copy(net_part.nu_g.begin(), net_part.nu_g.end(), out.nu_g.begin());
    const double s_wc = y_scale_ / p_scale_;
    const int wc_slot = nt + 3;
    out.nu[wc_slot] *= s_wc * s_wc;
    out.zeta[wc_slot] *= s_wc * s_wc;
    if (std::isfinite(out.alpha[wc_slot])) out.alpha[wc_slot] /= s_wc * s_wc;
    out.beta[wc_slot] /= s_wc;
    return out;
  }

 private:
  StencilModel model_;
  double p_scale_ = 1.0;
  double y_scale_ = 1.0;
  std::vector<int> parked_;
  NetLayout net_layout_;
  NetLayout layout_;
  int kernel_block_ = 0;
  EvalTrace trace_;
  std::array<double, 3> window_{};
  std::array<double, 1> center_{};
  double conv_ = 0.0;
};

}  // namespace

std::unique_ptr<TrainableModel> make_hybrid_model(StencilModel model) {
  return std::make_unique<HybridModel>(std::move(model));
}

HybridDiscoveryReport discover_hybrid(const Dataset& data, const TrainConfig& cfg, double dx) {
  if (data.n_in != 3) throw std::invalid_argument("discover_hybrid: expected window rows");
  std::vector<double> grid = cfg.lambda_grid.empty() ? std::vector<double>{cfg.lambda}
                                                     : cfg.lambda_grid;
  std::vector<int> train_idx, val_idx;
  split_dataset(data.rows(), cfg.train_fraction, cfg.seed, train_idx, val_idx);

  const int n_runs = static_cast<int>(grid.size()) * cfg.restarts;
  HybridDiscoveryReport report;
  report.seed = cfg.seed;
  report.runs.resize(n_runs);

  const int workers = cfg.jobs > 0 ? cfg.jobs
                                   : std::max(1u, std::thread::hardware_concurrency());
  run_jobs(n_runs, workers, [&](int run_i) {
    const int grid_i = run_i / cfg.restarts;
    const int restart = run_i % cfg.restarts;
    TrainConfig local = cfg;
    local.lambda = grid[grid_i];
    local.lambda_g = cfg.lambda_g < 0.0 ? grid[grid_i] : cfg.lambda_g;
    const std::uint64_t run_seed = run_seed_for(cfg.seed, grid_i, restart);

    HybridRunResult& result = report.runs[run_i];
    result.grid_index = grid_i;
    result.restart = restart;
    result.lambda = local.lambda;
    result.lambda_g = local.lambda_g;
    result.run_seed = run_seed;

    StencilModel seed_model;
    seed_model.dx = dx;
    seed_model.reaction = make_net(1, local.hidden, local.unary_set);
    double p_scale = 1.0, y_scale = 1.0;
    if (cfg.standardize) {
      const auto rms = column_rms(data, train_idx);
      p_scale = rms[1];  // center column; all three carry the same field
      y_scale = rms[3];
    }
    TrainJob job(std::make_unique<HybridModel>(std::move(seed_model), p_scale, y_scale), data,
                 train_idx, val_idx, local, run_seed);
    job.init_weights();
    try {
      for (int c = 1; c <= local.n_cycle; ++c) result.cycles.push_back(job.run_cycle(c));
      result.status = "ok";
    } catch (const TrainingDiverged&) {
      result.status = "diverged";
    }
    const auto& hybrid = dynamic_cast<const HybridModel&>(job.model());
    result.final_model = hybrid.raw_model();
    result.final_reg = hybrid.raw_reg(job.reg());
    if (result.status == "ok") {
      result.final_val_mse = job.mse(true);
      const ExprPtr expr = simplify(job.model().extract(), cfg.coeff_floor);
      result.final_term_count =
          term_count(*expr) + (result.final_model.kernel_group_mask ? 1 : 0);
      result.final_expression = hybrid.expression_string(cfg.coeff_floor, 4);
      if (!std::isfinite(result.final_val_mse)) result.status = "diverged";
    }
  });

  std::vector<Candidate> candidates;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const HybridRunResult& run = report.runs[i];
    if (run.status != "ok") continue;
    candidates.push_back(
        {run.final_term_count, run.final_val_mse, run.run_seed, static_cast<int>(i)});
  }
  if (!candidates.empty()) report.winner = candidates[select_model(candidates)].index;
  return report;
}

}  // namespace mathonet
