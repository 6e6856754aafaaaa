#include "mathonet/trainer.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "mathonet/grad.hpp"
#include "mathonet/layout.hpp"

namespace mathonet {

namespace {

// Multiplicative change of units per flat slot: raw_w = factor * trained_w
// for a net trained on x / x_scales with target y / y_scale.
std::vector<double> unit_factors(const MathONet& net, const NetLayout& layout,
                                 std::span<const double> x_scales, double y_scale) {
  const int n = net.n_inputs;
  std::vector<double> factors(layout.total, 1.0);
  for (const NetLayout::Block& blk : layout.blocks) {
    if (blk.kind == NetLayout::BlockKind::Oper) continue;
    for (int j = 0; j < blk.len; ++j) {
      const bool constant_slot = (j == n);
      double f = 1.0;
      if (!constant_slot) f /= x_scales[j];
      if (blk.kind == NetLayout::BlockKind::HiddenPoly && blk.layer == 0)
        f /= x_scales[blk.index];
      if (blk.kind == NetLayout::BlockKind::OutputPoly) f *= y_scale;
      factors[blk.offset + j] = f;
    }
  }
  return factors;
}

}  // namespace

void unscale_net(MathONet& net, std::span<const double> x_scales, double y_scale) {
  const NetLayout layout = layout_of(net);
  const auto factors = unit_factors(net, layout, x_scales, y_scale);
  std::vector<double> flat;
  pack_weights(net, flat);
  for (int i = 0; i < layout.total; ++i) flat[i] *= factors[i];
  unpack_weights(flat, net);
}

void unscale_reg(RegState& reg, const MathONet& scaled_net, std::span<const double> x_scales,
                 double y_scale) {
  const NetLayout layout = layout_of(scaled_net);
  const auto factors = unit_factors(scaled_net, layout, x_scales, y_scale);
  for (int i = 0; i < layout.total; ++i) {
    const double s = std::fabs(factors[i]);
    reg.nu[i] *= s * s;
    reg.zeta[i] *= s * s;
    if (s > 0.0 && std::isfinite(reg.alpha[i])) reg.alpha[i] /= s * s;
    if (s > 0.0) reg.beta[i] /= s;
  }
  // group scalars mix slots with different units; refresh nu_g from the
  // transformed weights and keep alpha_g / beta_g as training-time values
  MathONet raw = scaled_net;
  unscale_net(raw, x_scales, y_scale);
  std::vector<double> w;
  pack_weights(raw, w);
  for (std::size_t g = 0; g < layout.blocks.size(); ++g) {
    const NetLayout::Block& blk = layout.blocks[g];
    reg.nu_g[g] = update_group_nu({w.data() + blk.offset, static_cast<std::size_t>(blk.len)},
                                  reg.beta_g[g]);
  }
}

std::vector<double> column_rms(const Dataset& data, std::span<const int> rows) {
  std::vector<double> rms(data.n_in + data.n_out, 0.0);
  for (int row : rows) {
    const auto x = data.x_row(row);
    const auto y = data.y_row(row);
    for (int i = 0; i < data.n_in; ++i) rms[i] += x[i] * x[i];
    for (int i = 0; i < data.n_out; ++i) rms[data.n_in + i] += y[i] * y[i];
  }
  for (double& v : rms) {
    v = std::sqrt(v / static_cast<double>(rows.size()));
    if (v < 1e-12) v = 1.0;
  }
  return rms;
}

namespace {

class MathONetModel final : public TrainableModel {
 public:
  explicit MathONetModel(MathONet net, std::vector<double> x_scales = {}, double y_scale = 1.0)
      : net_(std::move(net)),
        layout_(layout_of(net_)),
        x_scales_(std::move(x_scales)),
        y_scale_(y_scale) {
    validate(net_);
    if (x_scales_.empty()) x_scales_.assign(net_.n_inputs, 1.0);
    if (static_cast<int>(x_scales_.size()) != net_.n_inputs)
      throw std::invalid_argument("MathONetModel: scale dimension mismatch");
    x_buf_.resize(net_.n_inputs);
  }

  int n_inputs() const override { return net_.n_inputs; }
  const NetLayout& layout() const override { return layout_; }

  double forward_trace(std::span<const double> x) override {
    for (int i = 0; i < net_.n_inputs; ++i) x_buf_[i] = x[i] / x_scales_[i];
    return y_scale_ * forward(net_, x_buf_, &trace_);
  }

  void backprop_into(double scale, std::span<double> grad) override {
    accumulate_dydw(net_, trace_, layout_, scale * y_scale_, grad);
  }

  void get_weights(std::vector<double>& flat) const override { pack_weights(net_, flat); }
  void set_weights(std::span<const double> flat) override { unpack_weights(flat, net_); }

  void init_weights(Rng& rng, double scale, double nonlinear_damp) override {
    std::vector<double> flat(layout_.total, 0.0);
    for (int i = 0; i < layout_.total; ++i) {
      if (layout_.is_bias(i)) continue;
      double s = scale;
      const NetLayout::Block& blk = layout_.blocks[layout_.group_of[i]];
      if (blk.kind == NetLayout::BlockKind::Oper &&
          net_.unary_set[i - blk.offset] != UnaryKind::Identity)
        s *= nonlinear_damp;
      flat[i] = rng.uniform(-s, s);
    }
    unpack_weights(flat, net_);
  }

  std::vector<int> nonlinear_slots() const override {
    std::vector<int> slots;
    for (const NetLayout::Block& blk : layout_.blocks) {
      if (blk.kind != NetLayout::BlockKind::Oper) continue;
      for (int j = 0; j < blk.len; ++j)
        if (net_.unary_set[j] != UnaryKind::Identity) slots.push_back(blk.offset + j);
    }
    return slots;
  }

  void park_slot(int flat) override {
    set_oper_mask(flat, 0);
    if (std::find(parked_.begin(), parked_.end(), flat) == parked_.end())
      parked_.push_back(flat);
  }

  double trace_preactivation(int flat) const override {
    const NetLayout::Block& blk = layout_.blocks[layout_.group_of[flat]];
    return trace_.layers[blk.layer][blk.neuron].h;
  }

  UnaryKind slot_kind(int flat) const override {
    const NetLayout::Block& blk = layout_.blocks[layout_.group_of[flat]];
    return net_.unary_set[flat - blk.offset];
  }

  double identity_weight_of(int flat) const override {
    const NetLayout::Block& blk = layout_.blocks[layout_.group_of[flat]];
    const OperNet& oper = net_.layers[blk.layer].neurons[blk.neuron].oper;
    if (!oper.group_mask) return 0.0;
    for (std::size_t o = 0; o < net_.unary_set.size(); ++o)
      if (net_.unary_set[o] == UnaryKind::Identity && oper.mask[o]) return oper.w[o];
    return 0.0;
  }

  int bias_slot_of(int flat) const override {
    const NetLayout::Block& blk = layout_.blocks[layout_.group_of[flat]];
    int neuron_index = 0;
    for (int l = 0; l < blk.layer; ++l)
      neuron_index += static_cast<int>(net_.layers[l].neurons.size());
    neuron_index += blk.neuron;
    return layout_.bias_offsets[neuron_index];
  }
  void unpark_slot(int flat, double weight) override {
    set_oper_mask(flat, 1);
    std::vector<double> w;
    pack_weights(net_, w);
    w[flat] = weight;
    unpack_weights(w, net_);
    parked_.erase(std::remove(parked_.begin(), parked_.end(), flat), parked_.end());
  }

  void apply_masks(RegState& reg) override {
    mathonet::apply_masks(net_, reg.c, reg.cg);
    prune_unreachable(net_, reg.c, reg.cg, layout_);
    // biases carry no net-level mask; freeze them here
    std::vector<double> flat;
    pack_weights(net_, flat);
    for (int off : layout_.bias_offsets)
      if (!reg.c[off]) flat[off] = 0.0;
    unpack_weights(flat, net_);
  }

  // parked slots are live discovery state, only silenced by the curriculum
  long active_connections() const override {
    return count_active_connections(discovery_net());
  }
  long structural_terms() const override { return structural_term_count(discovery_net()); }

  ExprPtr extract() const override { return extract_expression(raw_net()); }

  std::string expression_string(double coeff_floor, int decimals) const override {
    return to_string(*simplify(extract(), coeff_floor), decimals);
  }

  MathONet raw_net() const {
    MathONet raw = net_;
    unscale_net(raw, x_scales_, y_scale_);
    return raw;
  }

  MathONet discovery_net() const {
    if (parked_.empty()) return net_;
    MathONet view = net_;
    const NetLayout layout = layout_of(view);
    for (int flat : parked_) {
      const NetLayout::Block& blk = layout.blocks[layout.group_of[flat]];
      view.layers[blk.layer].neurons[blk.neuron].oper.mask[flat - blk.offset] = 1;
    }
    return view;
  }

  RegState raw_reg(const RegState& reg) const {
    RegState out = reg;
    unscale_reg(out, net_, x_scales_, y_scale_);
    return out;
  }

 private:
  void set_oper_mask(int flat, std::uint8_t bit) {
    const NetLayout::Block& blk = layout_.blocks[layout_.group_of[flat]];
    if (blk.kind != NetLayout::BlockKind::Oper)
      throw std::logic_error("park/unpark: not an operator slot");
    net_.layers[blk.layer].neurons[blk.neuron].oper.mask[flat - blk.offset] = bit;
  }

  MathONet net_;
  NetLayout layout_;
  std::vector<double> x_scales_;
  double y_scale_;
  std::vector<double> x_buf_;
  std::vector<int> parked_;
  EvalTrace trace_;
};

}  // namespace

std::unique_ptr<TrainableModel> make_net_model(MathONet net) {
  return std::make_unique<MathONetModel>(std::move(net));
}

std::unique_ptr<TrainableModel> make_net_model(MathONet net, std::vector<double> x_scales,
                                               double y_scale) {
  return std::make_unique<MathONetModel>(std::move(net), std::move(x_scales), y_scale);
}

TrainJob::TrainJob(std::unique_ptr<TrainableModel> model, const Dataset& data,
                   std::vector<int> train_idx, std::vector<int> val_idx,
                   const TrainConfig& cfg, std::uint64_t run_seed)
    : model_(std::move(model)),
      data_(&data),
      train_idx_(std::move(train_idx)),
      val_idx_(std::move(val_idx)),
      cfg_(cfg),
      reg_(RegState::make(model_->layout().total,
                          static_cast<int>(model_->layout().blocks.size()))),
      rng_(run_seed) {
  if (cfg_.target_dim < 0 || cfg_.target_dim >= data.n_out)
    throw std::invalid_argument("TrainJob: target dimension out of range");
  if (data.n_in != model_->n_inputs())
    throw std::invalid_argument("TrainJob: dataset / model input dimension mismatch");
  const int total = model_->layout().total;
  w_.assign(total, 0.0);
  grad_.assign(total, 0.0);
  m_.assign(total, 0.0);
  v_.assign(total, 0.0);
  dydw_.assign(total, 0.0);
  lambda_ = cfg_.lambda;
  lambda_g_ = cfg_.lambda_g < 0.0 ? cfg_.lambda : cfg_.lambda_g;
  lr_ = cfg_.learning_rate;
  model_->get_weights(w_);
}

void TrainJob::init_weights() {
  model_->init_weights(rng_, cfg_.init_scale, cfg_.nonlinear_init_damp);
  model_->get_weights(w_);
  if (cfg_.nonlinear_warmup_epochs > 0) {
    parked_slots_ = model_->nonlinear_slots();
    parked_weights_.clear();
    for (int slot : parked_slots_) {
      parked_weights_.push_back(w_[slot]);
      model_->park_slot(slot);
      w_[slot] = 0.0;
    }
    model_->set_weights(w_);
    parked_active_ = !parked_slots_.empty();
  }
}

void TrainJob::release_parked() {
  if (!parked_active_) return;
  // Snapshot the backbone; the released operators must beat it on
  // validation within the probation window or the run rolls back.
  trial_val0_ = mse(true);
  snap_w_ = w_;
  snap_m_ = m_;
  snap_v_ = v_;
  snap_reg_ = reg_;
  trial_pending_ = true;
  trial_deadline_ = epoch_counter_ + static_cast<long>(cfg_.release_trial_cycles) *
                                         static_cast<long>(cfg_.n_epoch);

  // Released weights are sized so |w * h| starts small for every neuron (the
  // internal pre-activation scale is unconstrained and exp / log shocks grow
  // with it), and the constant each unary emits at its operating point is
  // cancelled through the bias when an identity slot is there to carry it.
  std::vector<double> h_sq(parked_slots_.size(), 0.0);
  const std::size_t probe_rows = std::min<std::size_t>(train_idx_.size(), 200);
  for (std::size_t r = 0; r < probe_rows; ++r) {
    model_->forward_trace(data_->x_row(train_idx_[r]));
    for (std::size_t s = 0; s < parked_slots_.size(); ++s) {
      const double h = model_->trace_preactivation(parked_slots_[s]);
      h_sq[s] += h * h;
    }
  }
  for (std::size_t s = 0; s < parked_slots_.size(); ++s) {
    const int slot = parked_slots_[s];
    if (!reg_.c[slot]) continue;
    const double rms = std::sqrt(h_sq[s] / static_cast<double>(probe_rows));
    const double cap = 0.25 * cfg_.nonlinear_init_damp * cfg_.init_scale;
    const double eps = std::min(0.02, cap / std::max(1.0, rms));
    const double w_release = parked_weights_[s] < 0.0 ? -eps : eps;
    model_->unpark_slot(slot, w_release);
    const double leak = unary_eval(model_->slot_kind(slot), w_release * rms);
    const double w_id = model_->identity_weight_of(slot);
    if (leak != 0.0 && std::fabs(w_id) > 0.05) {
      const int bias = model_->bias_slot_of(slot);
      std::vector<double> w;
      model_->get_weights(w);
      w[bias] -= leak / w_id;
      model_->set_weights(w);
    }
    reg_.nu[slot] = 1.0;
    reg_.beta[slot] = 1.0;
    reg_.zeta[slot] = 1.0;
    reg_.alpha[slot] = 0.0;
  }
  model_->get_weights(w_);
  parked_active_ = false;
}

void TrainJob::resolve_trial() {
  trial_pending_ = false;
  const double val = mse(true);
  if (std::isfinite(val) && val <= cfg_.release_gain * trial_val0_) return;  // earned
  // roll back to the backbone and prune the nonlinear operators
  w_ = snap_w_;
  m_ = snap_m_;
  v_ = snap_v_;
  reg_ = snap_reg_;
  for (int slot : parked_slots_) reg_.c[slot] = 0;
  model_->set_weights(w_);
  model_->apply_masks(reg_);
  model_->get_weights(w_);
}

void TrainJob::optimizer_step(std::span<const double> grad) {
  const int total = static_cast<int>(w_.size());
  if (cfg_.optimizer == OptimizerKind::Sgd) {
    for (int i = 0; i < total; ++i) {
      if (!reg_.c[i]) continue;
      w_[i] -= lr_ * grad[i];
    }
    return;
  }
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  ++adam_t_;
  const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(adam_t_));
  const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(adam_t_));
  for (int i = 0; i < total; ++i) {
    if (!reg_.c[i]) continue;
    m_[i] = kBeta1 * m_[i] + (1.0 - kBeta1) * grad[i];
    v_[i] = kBeta2 * v_[i] + (1.0 - kBeta2) * grad[i] * grad[i];
    const double mhat = m_[i] / bc1;
    const double vhat = v_[i] / bc2;
    w_[i] -= lr_ * mhat / (std::sqrt(vhat) + kEps);
  }
}

double TrainJob::train_epoch() {
  if (parked_active_ && epoch_counter_ >= cfg_.nonlinear_warmup_epochs) release_parked();
  if (trial_pending_ && epoch_counter_ >= trial_deadline_) resolve_trial();
  const NetLayout& layout = model_->layout();
  const int total = layout.total;
  const std::size_t n_train = train_idx_.size();
  if (n_train == 0) throw std::invalid_argument("train_epoch: empty training set");

  // in-place shuffle; deterministic per run
  for (std::size_t i = n_train; i > 1; --i) {
    const std::size_t j = rng_.below(i);
    std::swap(train_idx_[i - 1], train_idx_[j]);
  }

  const int batch = std::max(1, std::min<int>(cfg_.batch_size, static_cast<int>(n_train)));
  double sq_sum = 0.0;
  for (std::size_t start = 0; start < n_train; start += batch) {
    const std::size_t stop = std::min(n_train, start + batch);
    const double inv_b = 1.0 / static_cast<double>(stop - start);
    std::fill(grad_.begin(), grad_.end(), 0.0);
    for (std::size_t s = start; s < stop; ++s) {
      const int row = train_idx_[s];
      const double y = model_->forward_trace(data_->x_row(row));
      const double r = y - data_->y_row(row)[cfg_.target_dim];
      sq_sum += r * r;
      model_->backprop_into(r * inv_b, grad_);
    }
    // subgradients of the weighted l1 / group l2 penalties
    if (lambda_ > 0.0 || lambda_g_ > 0.0) {
      for (int i = 0; i < total; ++i) {
        if (!reg_.c[i] || w_[i] == 0.0) continue;
        grad_[i] += lambda_ * reg_.beta[i] * (w_[i] > 0.0 ? 1.0 : -1.0);
      }
      for (std::size_t g = 0; g < layout.blocks.size(); ++g) {
        if (!reg_.cg[g]) continue;
        const NetLayout::Block& blk = layout.blocks[g];
        double sq = 0.0;
        for (int i = 0; i < blk.len; ++i) sq += w_[blk.offset + i] * w_[blk.offset + i];
        const double norm = std::sqrt(sq);
        if (norm == 0.0) continue;
        const double scale = lambda_g_ * reg_.beta_g[g] / norm;
        for (int i = 0; i < blk.len; ++i) grad_[blk.offset + i] += scale * w_[blk.offset + i];
      }
    }
    for (int i = 0; i < total; ++i)
      if (!reg_.c[i]) grad_[i] = 0.0;
    optimizer_step(grad_);
    model_->set_weights(w_);
  }

  // epoch objective: half mean square plus the current penalties
  double objective = sq_sum / (2.0 * static_cast<double>(n_train));
  for (int i = 0; i < total; ++i)
    if (reg_.c[i]) objective += lambda_ * reg_.beta[i] * std::fabs(w_[i]);
  for (std::size_t g = 0; g < layout.blocks.size(); ++g) {
    if (!reg_.cg[g]) continue;
    const NetLayout::Block& blk = layout.blocks[g];
    double sq = 0.0;
    for (int i = 0; i < blk.len; ++i) sq += w_[blk.offset + i] * w_[blk.offset + i];
    objective += lambda_g_ * reg_.beta_g[g] * std::sqrt(sq);
  }
  if (!std::isfinite(objective)) throw TrainingDiverged("non-finite training objective");

  ++epoch_counter_;
  const long decay_epochs = epoch_counter_ - cfg_.nonlinear_warmup_epochs;
  if (cfg_.decay_every > 0 && decay_epochs > 0 && decay_epochs % cfg_.decay_every == 0) {
    lambda_ *= cfg_.decay_factor;
    lambda_g_ *= cfg_.decay_factor;
    lr_ *= cfg_.lr_decay;
  }
  return objective;
}

double TrainJob::mse(bool on_validation) const {
  const std::vector<int>& idx = on_validation ? val_idx_ : train_idx_;
  if (idx.empty()) return 0.0;
  double sq = 0.0;
  auto* self = const_cast<TrainJob*>(this);  // forward_trace reuses scratch buffers
  for (int row : idx) {
    const double y = self->model_->forward_trace(data_->x_row(row));
    const double r = y - data_->y_row(row)[cfg_.target_dim];
    sq += r * r;
  }
  return sq / static_cast<double>(idx.size());
}

double TrainJob::estimate_sigma2() const {
  if (cfg_.sigma2_mode == Sigma2Mode::Fixed) return cfg_.sigma2_fixed;
  return std::max(cfg_.sigma2_floor, mse(false));
}

CycleRecord TrainJob::run_cycle(int cycle_index) {
  const auto t0 = std::chrono::steady_clock::now();
  if (cycle_index < 1) throw std::invalid_argument("run_cycle: cycles are 1-based");
  for (int e = 0; e < cfg_.n_epoch; ++e) train_epoch();

  const NetLayout& layout = model_->layout();
  const double sigma2 = estimate_sigma2();
  std::vector<double> h(layout.total, 0.0);
  for (int row : train_idx_) {
    model_->forward_trace(data_->x_row(row));
    std::fill(dydw_.begin(), dydw_.end(), 0.0);
    model_->backprop_into(1.0, dydw_);
    for (int i = 0; i < layout.total; ++i) h[i] += dydw_[i] * dydw_[i] / sigma2;
  }

  RegConfig reg_cfg;
  reg_cfg.kappa_alpha = cfg_.kappa_alpha;
  reg_cfg.kappa_alpha_g = cfg_.kappa_alpha_g;
  if (cfg_.kappa_warmup_cycles > 0 && cycle_index > cfg_.kappa_warmup_cycles) {
    if (cfg_.kappa_alpha_final > 0.0) reg_cfg.kappa_alpha = cfg_.kappa_alpha_final;
    if (cfg_.kappa_alpha_g_final > 0.0) reg_cfg.kappa_alpha_g = cfg_.kappa_alpha_g_final;
  }
  bayes_update(reg_, layout, w_, h, reg_cfg);
  if (parked_active_) {
    // parked slots are curriculum state, not pruning candidates
    for (int slot : parked_slots_) {
      reg_.nu[slot] = 1.0;
      reg_.beta[slot] = 1.0;
      reg_.zeta[slot] = 1.0;
      reg_.alpha[slot] = 0.0;
    }
  }
  update_masks(reg_, layout, reg_cfg);
  model_->protect_masks(reg_);
  model_->apply_masks(reg_);
  if (parked_active_) {
    for (int slot : parked_slots_)
      if (reg_.c[slot]) model_->park_slot(slot);
  }
  model_->get_weights(w_);

  CycleRecord rec;
  rec.cycle = cycle_index;
  rec.train_mse = mse(false);
  rec.val_mse = mse(true);
  rec.active_connections = model_->active_connections();
  rec.term_count = model_->structural_terms();
  rec.expression = model_->expression_string(cfg_.coeff_floor, 4);
  rec.reg = reg_;
  rec.elapsed_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return rec;
}

int select_model(const std::vector<Candidate>& candidates) {
  if (candidates.empty()) throw std::invalid_argument("select_model: no candidates");
  double best_mse = std::numeric_limits<double>::infinity();
  for (const Candidate& c : candidates) best_mse = std::min(best_mse, c.val_mse);
  const double cutoff = 1.1 * best_mse;
  int winner = -1;
  for (std::size_t i = 0; i < candidates.size(); ++i) {
    const Candidate& c = candidates[i];
    if (c.val_mse > cutoff) continue;
    if (winner < 0) {
      winner = static_cast<int>(i);
      continue;
    }
    const Candidate& w = candidates[winner];
    if (c.term_count != w.term_count) {
      if (c.term_count < w.term_count) winner = static_cast<int>(i);
    } else if (c.val_mse != w.val_mse) {
      if (c.val_mse < w.val_mse) winner = static_cast<int>(i);
    } else if (c.seed < w.seed) {
      winner = static_cast<int>(i);
    }
  }
  return winner;
}

double estimate_sigma2(std::span<const double> residuals, Sigma2Mode mode, double fixed_value,
                       double floor) {
  if (mode == Sigma2Mode::Fixed) return fixed_value;
  if (residuals.empty()) throw std::invalid_argument("estimate_sigma2: no residuals");
  double sq = 0.0;
  for (double r : residuals) sq += r * r;
  return std::max(floor, sq / static_cast<double>(residuals.size()));
}

void split_dataset(std::size_t rows, double train_fraction, std::uint64_t seed,
                   std::vector<int>& train_idx, std::vector<int>& val_idx) {
  if (rows == 0) throw std::invalid_argument("split_dataset: empty dataset");
  if (train_fraction <= 0.0 || train_fraction >= 1.0)
    throw std::invalid_argument("split_dataset: train fraction must be in (0, 1)");
  std::vector<int> order(rows);
  for (std::size_t i = 0; i < rows; ++i) order[i] = static_cast<int>(i);
  Rng rng(mix_seed(seed, 0x5917ULL));
  for (std::size_t i = rows; i > 1; --i) {
    const std::size_t j = rng.below(i);
    std::swap(order[i - 1], order[j]);
  }
  std::size_t n_train = static_cast<std::size_t>(train_fraction * static_cast<double>(rows));
  n_train = std::clamp<std::size_t>(n_train, 1, rows - 1);
  train_idx.assign(order.begin(), order.begin() + n_train);
  val_idx.assign(order.begin() + n_train, order.end());
}

std::uint64_t run_seed_for(std::uint64_t seed, int grid_index, int restart) {
  return mix_seed(seed, static_cast<std::uint64_t>(grid_index) + 1,
                  static_cast<std::uint64_t>(restart) + 1);
}

void run_jobs(int n_jobs, int workers, const std::function<void(int)>& fn) {
  workers = std::max(1, std::min(workers, n_jobs));
  if (workers == 1) {
    for (int i = 0; i < n_jobs; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        const int i = next.fetch_add(1);
        if (i >= n_jobs) break;
        fn(i);
      }
    });
  }
  for (std::thread& t : pool) t.join();
}

DiscoveryReport discover(const Dataset& data, const TrainConfig& cfg) {
  if (data.rows() == 0) throw std::invalid_argument("discover: empty dataset");
  std::vector<double> grid = cfg.lambda_grid.empty() ? std::vector<double>{cfg.lambda}
                                                     : cfg.lambda_grid;
  std::vector<int> train_idx, val_idx;
  split_dataset(data.rows(), cfg.train_fraction, cfg.seed, train_idx, val_idx);

  const int n_runs = static_cast<int>(grid.size()) * cfg.restarts;
  DiscoveryReport report;
  report.mode = cfg.n_cycle == 1 ? "sparse_group_lasso_baseline" : "bayes";
  report.target_dim = cfg.target_dim;
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

    RunResult& result = report.runs[run_i];
    result.grid_index = grid_i;
    result.restart = restart;
    result.lambda = local.lambda;
    result.lambda_g = local.lambda_g;
    result.run_seed = run_seed;

    std::vector<double> x_scales(data.n_in, 1.0);
    double y_scale = 1.0;
    if (cfg.standardize) {
      const auto rms = column_rms(data, train_idx);
      x_scales.assign(rms.begin(), rms.begin() + data.n_in);
      y_scale = rms[data.n_in + cfg.target_dim];
    }
    auto model = make_net_model(make_net(data.n_in, local.hidden, local.unary_set),
                                std::move(x_scales), y_scale);
    TrainJob job(std::move(model), data, train_idx, val_idx, local, run_seed);
    job.init_weights();
    try {
      for (int c = 1; c <= local.n_cycle; ++c) result.cycles.push_back(job.run_cycle(c));
      result.status = "ok";
    } catch (const TrainingDiverged&) {
      result.status = "diverged";
    }
    const auto& net_model = dynamic_cast<const MathONetModel&>(job.model());
    result.final_net = net_model.raw_net();
    result.final_reg = net_model.raw_reg(job.reg());
    if (result.status == "ok") {
      result.final_val_mse = job.mse(true);
      const ExprPtr expr = simplify(job.model().extract(), cfg.coeff_floor);
      result.final_term_count = term_count(*expr);
      result.final_expression = to_string(*expr, 4);
      if (!std::isfinite(result.final_val_mse)) result.status = "diverged";
    }
  });

  std::vector<Candidate> candidates;
  std::vector<int> run_of_candidate;
  for (std::size_t i = 0; i < report.runs.size(); ++i) {
    const RunResult& run = report.runs[i];
    if (run.status != "ok") continue;
    candidates.push_back(
        {run.final_term_count, run.final_val_mse, run.run_seed, static_cast<int>(i)});
    run_of_candidate.push_back(static_cast<int>(i));
  }
  if (!candidates.empty()) report.winner = candidates[select_model(candidates)].index;
  return report;
}

}  // namespace mathonet
