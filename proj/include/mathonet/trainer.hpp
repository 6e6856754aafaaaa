#pragma once

#include <functional>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mathonet/bayes.hpp"
#include "mathonet/dataset.hpp"
#include "mathonet/net.hpp"
#include "mathonet/rng.hpp"
#include "mathonet/symbolic.hpp"

namespace mathonet {

enum class Sigma2Mode { Residual, Fixed };
enum class OptimizerKind { Adam, Sgd };

struct TrainConfig {
  // architecture
  std::vector<int> hidden{3};
  std::vector<UnaryKind> unary_set{UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos,
                                   UnaryKind::Log, UnaryKind::Exp};

  // regularization sweep; lambda_g < 0 means "same as lambda"
  double lambda = 1e-4;
  double lambda_g = -1.0;
  std::vector<double> lambda_grid;  // empty -> {lambda}
  int decay_every = 200;
  double decay_factor = 0.1;

  // schedule
  int n_cycle = 12;
  int n_epoch = 200;

  // pruning thresholds; after kappa_warmup_cycles the *_final values take
  // over when set (> 0), so early cycles only remove clearly dead weights
  // while later cycles can cut residual oscillator noise
  double kappa_alpha = 1e3;
  double kappa_alpha_g = 1e3;
  double kappa_alpha_final = -1.0;
  double kappa_alpha_g_final = -1.0;
  int kappa_warmup_cycles = 0;

  // optimizer
  OptimizerKind optimizer = OptimizerKind::Adam;
  double learning_rate = 0.02;
  double lr_decay = 0.6;  // applied together with the lambda decay
  int batch_size = 32;

  // sweep
  int restarts = 10;
  std::uint64_t seed = 0;
  double train_fraction = 0.9;
  int jobs = 0;  // 0 -> hardware concurrency

  // noise variance for the Bayesian updates
  Sigma2Mode sigma2_mode = Sigma2Mode::Residual;
  double sigma2_fixed = 1.0;
  double sigma2_floor = 1e-8;

  double init_scale = 0.5;  // weights ~ uniform(-s, s); biases start at 0
  // non-identity operator slots start this much smaller, so nonlinear
  // branches only grow when the data pulls them in
  double nonlinear_init_damp = 0.1;
  // Backbone-first curriculum: non-identity operator slots stay parked
  // (structurally silent, not pruned) for this many epochs while the
  // polynomial backbone settles, then rejoin on probation. At small weights
  // sin(wh) ~ wh is an exact identity clone and gets recruited into
  // dead-end mixtures when everything trains at once.
  int nonlinear_warmup_epochs = 0;
  // Probation: after release the nonlinear slots get this many cycles to
  // earn their keep; unless validation MSE improves below release_gain *
  // (its value at release), the run rolls back to the released snapshot and
  // prunes them.
  int release_trial_cycles = 2;
  double release_gain = 0.5;
  double coeff_floor = 1e-4;
  int target_dim = 0;  // which target column to fit

  // Train in per-column RMS-normalized coordinates (scale only, no shift);
  // the returned nets and expressions are always in raw units, mapped back
  // exactly through the first-layer and output weights.
  bool standardize = true;
};

struct TrainingDiverged : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Uniform training surface over a plain net or the PDE hybrid model.
class TrainableModel {
 public:
  virtual ~TrainableModel() = default;
  virtual int n_inputs() const = 0;
  virtual const NetLayout& layout() const = 0;
  virtual double forward_trace(std::span<const double> x) = 0;  // keeps the trace
  virtual void backprop_into(double scale, std::span<double> grad) = 0;
  virtual void get_weights(std::vector<double>& flat) const = 0;
  virtual void set_weights(std::span<const double> flat) = 0;
  virtual void init_weights(Rng& rng, double scale, double nonlinear_damp) = 0;
  // Flat indices of non-identity operator slots (the parkable ones).
  virtual std::vector<int> nonlinear_slots() const { return {}; }
  virtual UnaryKind slot_kind(int flat) const { return UnaryKind::Identity; }
  // Identity-slot weight of the neuron owning this operator slot, or 0 when
  // there is none alive; used to cancel release constants through the bias.
  virtual double identity_weight_of(int flat) const { return 0.0; }
  virtual int bias_slot_of(int flat) const { return -1; }
  // Parked slots are masked in the forward pass but remain live discovery
  // state: counts and reg bookkeeping treat them as active.
  virtual void park_slot(int flat) {}
  virtual void unpark_slot(int flat, double weight) {}
  // |h| feeding the operator that owns this slot, from the last trace.
  virtual double trace_preactivation(int flat) const { return 0.0; }
  // Clamp mask decisions the model does not allow (e.g. per-tap stencil
  // pruning); called right after update_masks.
  virtual void protect_masks(RegState& reg) const {}
  // Write decisions into the model, zero pruned weights, extend to
  // structurally dead regions; reg stays consistent.
  virtual void apply_masks(RegState& reg) = 0;
  virtual long active_connections() const = 0;
  virtual long structural_terms() const = 0;
  virtual ExprPtr extract() const = 0;
  virtual std::string expression_string(double coeff_floor, int decimals) const = 0;
};

std::unique_ptr<TrainableModel> make_net_model(MathONet net);
// Trains in x / x_scale, y / y_scale coordinates while reporting raw-unit
// predictions, expressions, and final weights.
std::unique_ptr<TrainableModel> make_net_model(MathONet net, std::vector<double> x_scales,
                                               double y_scale);

// Exact change of units: rewrites a net trained on x / x_scales with target
// y / y_scale into raw coordinates. Layer-one polys pick up 1 / (s_i s_j),
// deeper polys 1 / s_j on their input slots, output polys y_scale / s_j.
void unscale_net(MathONet& net, std::span<const double> x_scales, double y_scale);
// Per-weight posterior transform matching unscale_net (variances scale with
// the square of each weight's unit change). Group scalars are recomputed
// from the transformed weights.
void unscale_reg(RegState& reg, const MathONet& scaled_net,
                 std::span<const double> x_scales, double y_scale);

// Per-column root-mean-square over the given rows, floored away from zero.
std::vector<double> column_rms(const Dataset& data, std::span<const int> rows);

struct CycleRecord {
  int cycle = 0;
  double train_mse = 0.0;
  double val_mse = 0.0;
  long active_connections = 0;
  long term_count = 0;  // structural expansion terms (mask-monotone)
  std::string expression;
  double elapsed_s = 0.0;
  RegState reg;  // snapshot after the cycle's hyper-parameter update
};

// One restart of Algorithm-style training: N_epoch epochs per cycle, then the
// hyper-parameter refresh and mask update. Cycle 1 starts from unit beta/nu
// with every connection live, i.e. plain sparse group Lasso.
class TrainJob {
 public:
  TrainJob(std::unique_ptr<TrainableModel> model, const Dataset& data,
           std::vector<int> train_idx, std::vector<int> val_idx, const TrainConfig& cfg,
           std::uint64_t run_seed);

  void init_weights();
  // One pass over the training data; returns the epoch's mean objective.
  // Throws TrainingDiverged on a non-finite objective.
  double train_epoch();
  CycleRecord run_cycle(int cycle_index);  // 1-based

  double mse(bool on_validation) const;
  double estimate_sigma2() const;

  const TrainableModel& model() const { return *model_; }
  TrainableModel& model() { return *model_; }
  const RegState& reg() const { return reg_; }
  RegState& reg() { return reg_; }
  double current_lambda() const { return lambda_; }
  double current_lr() const { return lr_; }

 private:
  void optimizer_step(std::span<const double> grad);
  void release_parked();
  void resolve_trial();
  bool in_warmup() const { return epoch_counter_ < cfg_.nonlinear_warmup_epochs; }

  std::unique_ptr<TrainableModel> model_;
  const Dataset* data_;
  std::vector<int> train_idx_, val_idx_;
  TrainConfig cfg_;
  RegState reg_;
  Rng rng_;
  std::vector<double> w_, grad_, m_, v_, dydw_;
  std::vector<int> parked_slots_;        // slots silenced during warmup
  std::vector<double> parked_weights_;   // their damped init values
  bool parked_active_ = false;
  bool trial_pending_ = false;
  long trial_deadline_ = 0;
  double trial_val0_ = 0.0;
  std::vector<double> snap_w_, snap_m_, snap_v_;
  RegState snap_reg_;
  long adam_t_ = 0;
  long epoch_counter_ = 0;
  double lambda_ = 0.0, lambda_g_ = 0.0, lr_ = 0.0;
};

struct RunResult {
  int grid_index = 0;
  int restart = 0;
  double lambda = 0.0;
  double lambda_g = 0.0;
  std::uint64_t run_seed = 0;
  std::string status;  // "ok" or "diverged"
  std::vector<CycleRecord> cycles;
  MathONet final_net;
  RegState final_reg;
  double final_val_mse = 0.0;
  long final_term_count = 0;  // simplified symbolic terms
  std::string final_expression;
};

struct DiscoveryReport {
  std::string mode;  // "bayes" or "sparse_group_lasso_baseline"
  int target_dim = 0;
  std::uint64_t seed = 0;
  int winner = -1;  // index into runs; -1 when every run diverged
  std::vector<RunResult> runs;
};

struct Candidate {
  long term_count = 0;
  double val_mse = 0.0;
  std::uint64_t seed = 0;
  int index = 0;
};

// Occam selection: among candidates within 10% of the best validation MSE,
// the fewest terms win; ties fall back to lower MSE, then lower seed.
// Throws std::invalid_argument on an empty list.
int select_model(const std::vector<Candidate>& candidates);

double estimate_sigma2(std::span<const double> residuals, Sigma2Mode mode, double fixed_value,
                       double floor);

// Deterministic 90/10 split shared by every run of a sweep.
void split_dataset(std::size_t rows, double train_fraction, std::uint64_t seed,
                   std::vector<int>& train_idx, std::vector<int>& val_idx);

// Full sweep: every lambda grid point times `restarts` seeds, trained for
// n_cycle cycles, merged deterministically, winner picked by select_model.
DiscoveryReport discover(const Dataset& data, const TrainConfig& cfg);

// Derived seed for one run of a sweep; exposed so oracles can replay a run.
std::uint64_t run_seed_for(std::uint64_t seed, int grid_index, int restart);

void run_jobs(int n_jobs, int workers, const std::function<void(int)>& fn);

}  // namespace mathonet
