#pragma once

#include <optional>
#include <string>

#include "mathonet/dataset.hpp"
#include "mathonet/net.hpp"
#include "mathonet/pde.hpp"
#include "mathonet/trainer.hpp"
#include "mathonet/validation.hpp"

namespace mathonet {

// Shortest decimal representation that round-trips the exact double.
std::string format_double(double v);

struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Model schema:
// {n_inputs, unary_set: [...], layers: [{neurons: [{polys: [{w, mask,
//  group_mask}], bias, oper: {w, mask, group_mask}}]}], output_polys: [...]}
// An optional "posterior" object carries the regularization state; hybrid
// models add kernel / outer_coeff / dx on top.
std::string model_to_json(const MathONet& net, const RegState* posterior = nullptr);
MathONet model_from_json(const std::string& text, RegState* posterior = nullptr);

std::string hybrid_to_json(const StencilModel& model, const RegState* posterior = nullptr);
StencilModel hybrid_from_json(const std::string& text, RegState* posterior = nullptr);

bool json_is_hybrid(const std::string& text);

void write_text_file(const std::string& path, const std::string& text);
std::string read_text_file(const std::string& path);

// CSV with header x1,...,xn,y1,...,ym plus a ".meta.json" sidecar with the
// provenance fields. Values survive a save/load/save round trip byte for
// byte.
void save_dataset(const Dataset& data, const std::string& csv_path);
Dataset load_dataset(const std::string& csv_path, int n_out_hint = -1);

std::string report_to_json(const DiscoveryReport& report, bool include_reg_history = true);
std::string hybrid_report_to_json(const HybridDiscoveryReport& report,
                                  bool include_reg_history = true);

// Winner's per-cycle history: cycle, term_count, active_connections,
// train_mse, val_mse.
void save_history_csv(const DiscoveryReport& report, const std::string& path);

void save_trajectory_csv(const Trajectory& traj, const std::string& path);
void save_band_csv(const UncertaintyBand& band, const std::string& path);

TrainConfig config_from_json(const std::string& text);
std::string config_to_json(const TrainConfig& cfg);

}  // namespace mathonet
