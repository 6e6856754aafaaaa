#include "mathonet/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace mathonet {

using json = nlohmann::ordered_json;

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

json block_to_json(const std::vector<double>& w, const std::vector<std::uint8_t>& mask,
                   std::uint8_t group_mask) {
  json b;
  b["w"] = w;
  b["mask"] = std::vector<int>(mask.begin(), mask.end());
  b["group_mask"] = static_cast<int>(group_mask);
  return b;
}

void block_from_json(const json& b, std::vector<double>& w, std::vector<std::uint8_t>& mask,
                     std::uint8_t& group_mask) {
  w = b.at("w").get<std::vector<double>>();
  const auto m = b.at("mask").get<std::vector<int>>();
  mask.assign(m.begin(), m.end());
  group_mask = static_cast<std::uint8_t>(b.at("group_mask").get<int>());
  if (!group_mask)
    for (auto& bit : mask) bit = 0;  // group removal dominates
}

json reg_to_json(const RegState& reg) {
  json r;
  r["nu"] = reg.nu;
  r["alpha"] = reg.alpha;
  r["beta"] = reg.beta;
  r["zeta"] = reg.zeta;
  r["c"] = std::vector<int>(reg.c.begin(), reg.c.end());
  r["nu_g"] = reg.nu_g;
  r["alpha_g"] = reg.alpha_g;
  r["beta_g"] = reg.beta_g;
  r["cg"] = std::vector<int>(reg.cg.begin(), reg.cg.end());
  return r;
}

RegState reg_from_json(const json& r) {
  RegState reg;
  reg.nu = r.at("nu").get<std::vector<double>>();
  reg.alpha = r.at("alpha").get<std::vector<double>>();
  reg.beta = r.at("beta").get<std::vector<double>>();
  reg.zeta = r.at("zeta").get<std::vector<double>>();
  const auto c = r.at("c").get<std::vector<int>>();
  reg.c.assign(c.begin(), c.end());
  reg.nu_g = r.at("nu_g").get<std::vector<double>>();
  reg.alpha_g = r.at("alpha_g").get<std::vector<double>>();
  reg.beta_g = r.at("beta_g").get<std::vector<double>>();
  const auto cg = r.at("cg").get<std::vector<int>>();
  reg.cg.assign(cg.begin(), cg.end());
  return reg;
}

json net_to_json_obj(const MathONet& net, const RegState* posterior) {
  json j;
  j["n_inputs"] = net.n_inputs;
  json unaries = json::array();
  for (UnaryKind op : net.unary_set) unaries.push_back(std::string(unary_name(op)));
  j["unary_set"] = unaries;
  json layers = json::array();
  for (const Layer& layer : net.layers) {
    json neurons = json::array();
    for (const Neuron& neuron : layer.neurons) {
      json n;
      json polys = json::array();
      for (const PolyNet& p : neuron.polys) polys.push_back(block_to_json(p.w, p.mask, p.group_mask));
      n["polys"] = polys;
      n["bias"] = neuron.bias;
      n["oper"] = block_to_json(neuron.oper.w, neuron.oper.mask, neuron.oper.group_mask);
      neurons.push_back(std::move(n));
    }
    layers.push_back(json{{"neurons", std::move(neurons)}});
  }
  j["layers"] = std::move(layers);
  json outs = json::array();
  for (const PolyNet& q : net.output_polys) outs.push_back(block_to_json(q.w, q.mask, q.group_mask));
  j["output_polys"] = std::move(outs);
  if (posterior) j["posterior"] = reg_to_json(*posterior);
  return j;
}

MathONet net_from_json_obj(const json& j, RegState* posterior) {
  MathONet net;
  net.n_inputs = j.at("n_inputs").get<int>();
  for (const auto& name : j.at("unary_set")) {
    auto op = unary_from_name(name.get<std::string>());
    if (!op) throw DataError("unknown unary op in model: " + name.get<std::string>());
    net.unary_set.push_back(*op);
  }
  for (const auto& lj : j.at("layers")) {
    Layer layer;
    for (const auto& nj : lj.at("neurons")) {
      Neuron neuron;
      for (const auto& pj : nj.at("polys")) {
        PolyNet p;
        block_from_json(pj, p.w, p.mask, p.group_mask);
        neuron.polys.push_back(std::move(p));
      }
      neuron.bias = nj.at("bias").get<double>();
      block_from_json(nj.at("oper"), neuron.oper.w, neuron.oper.mask, neuron.oper.group_mask);
      layer.neurons.push_back(std::move(neuron));
    }
    net.layers.push_back(std::move(layer));
  }
  for (const auto& qj : j.at("output_polys")) {
    PolyNet q;
    block_from_json(qj, q.w, q.mask, q.group_mask);
    net.output_polys.push_back(std::move(q));
  }
  validate(net);
  if (posterior && j.contains("posterior")) *posterior = reg_from_json(j.at("posterior"));
  return net;
}

}  // namespace

std::string model_to_json(const MathONet& net, const RegState* posterior) {
  return net_to_json_obj(net, posterior).dump(2) + "\n";
}

MathONet model_from_json(const std::string& text, RegState* posterior) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON parse error: ") + e.what());
  }
  try {
    return net_from_json_obj(j, posterior);
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON schema error: ") + e.what());
  }
}

std::string hybrid_to_json(const StencilModel& model, const RegState* posterior) {
  json j = net_to_json_obj(model.reaction, posterior);
  j["kernel"] = std::vector<double>{model.kernel[0], model.kernel[1], model.kernel[2]};
  j["kernel_group_mask"] = static_cast<int>(model.kernel_group_mask);
  j["outer_coeff"] = model.outer_coeff;
  j["dx"] = model.dx;
  return j.dump(2) + "\n";
}

StencilModel hybrid_from_json(const std::string& text, RegState* posterior) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON parse error: ") + e.what());
  }
  try {
    StencilModel model;
    model.reaction = net_from_json_obj(j, posterior);
    const auto kernel = j.at("kernel").get<std::vector<double>>();
    if (kernel.size() != 3) throw DataError("hybrid model: kernel must have 3 taps");
    model.kernel = {kernel[0], kernel[1], kernel[2]};
    model.kernel_group_mask =
        static_cast<std::uint8_t>(j.value("kernel_group_mask", 1));
    model.outer_coeff = j.at("outer_coeff").get<double>();
    model.dx = j.at("dx").get<double>();
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("model JSON schema error: ") + e.what());
  }
}

bool json_is_hybrid(const std::string& text) {
  try {
    return json::parse(text).contains("kernel");
  } catch (const json::exception&) {
    return false;
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << text;
  if (!out) throw DataError("write failed: " + path);
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void save_dataset(const Dataset& data, const std::string& csv_path) {
  std::string out;
  for (int i = 0; i < data.n_in; ++i) {
    if (i) out += ',';
    out += "x" + std::to_string(i + 1);
  }
  for (int i = 0; i < data.n_out; ++i) {
    out += ",y" + std::to_string(i + 1);
  }
  out += '\n';
  const std::size_t rows = data.rows();
  for (std::size_t r = 0; r < rows; ++r) {
    const auto x = data.x_row(r);
    const auto y = data.y_row(r);
    for (int i = 0; i < data.n_in; ++i) {
      if (i) out += ',';
      out += format_double(x[i]);
    }
    for (int i = 0; i < data.n_out; ++i) {
      out += ',';
      out += format_double(y[i]);
    }
    out += '\n';
  }
  write_text_file(csv_path, out);

  json meta;
  meta["system"] = data.system;
  if (!data.meta_json.empty()) meta["params"] = json::parse(data.meta_json);
  meta["dt"] = data.dt;
  meta["seed"] = data.seed;
  meta["noise_sigma"] = data.noise_sigma;
  meta["n_in"] = data.n_in;
  meta["n_out"] = data.n_out;
  write_text_file(csv_path + ".meta.json", meta.dump(2) + "\n");
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  for (char ch : line) {
    if (ch == ',') {
      fields.push_back(field);
      field.clear();
    } else if (ch != '\r') {
      field += ch;
    }
  }
  fields.push_back(field);
  return fields;
}

}  // namespace

Dataset load_dataset(const std::string& csv_path, int n_out_hint) {
  const std::string text = read_text_file(csv_path);
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty dataset file: " + csv_path);
  const auto header = split_csv_line(line);

  int n_in = 0, n_out = 0;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string expect_x = "x" + std::to_string(i + 1);
    const std::string expect_y = "y" + std::to_string(i - n_in + 1);
    if (n_out == 0 && header[i] == expect_x) {
      ++n_in;
    } else if (header[i] == expect_y) {
      ++n_out;
    } else {
      throw DataError("bad dataset header column '" + header[i] + "' (position " +
                      std::to_string(i + 1) + ") in " + csv_path);
    }
  }
  if (n_in == 0 || n_out == 0) throw DataError("dataset header needs x and y columns: " + csv_path);
  if (n_out_hint > 0 && n_out != n_out_hint)
    throw DataError("dataset has " + std::to_string(n_out) + " target columns, expected " +
                    std::to_string(n_out_hint));

  Dataset data;
  data.n_in = n_in;
  data.n_out = n_out;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != header.size())
      throw DataError("row " + std::to_string(line_no) + " has " +
                      std::to_string(fields.size()) + " fields, expected " +
                      std::to_string(header.size()));
    for (std::size_t i = 0; i < fields.size(); ++i) {
      double v = 0.0;
      const char* begin = fields[i].data();
      const char* end = begin + fields[i].size();
      auto res = std::from_chars(begin, end, v);
      if (res.ec != std::errc() || res.ptr != end)
        throw DataError("row " + std::to_string(line_no) + ", column '" + header[i] +
                        "': cannot parse '" + fields[i] + "'");
      if (i < static_cast<std::size_t>(n_in))
        data.X.push_back(v);
      else
        data.Y.push_back(v);
    }
  }
  if (data.rows() == 0) throw DataError("dataset has no rows: " + csv_path);

  std::ifstream meta_in(csv_path + ".meta.json");
  if (meta_in) {
    std::ostringstream ss;
    ss << meta_in.rdbuf();
    try {
      const json meta = json::parse(ss.str());
      data.system = meta.value("system", "");
      data.dt = meta.value("dt", 0.0);
      data.seed = meta.value("seed", 0ULL);
      data.noise_sigma = meta.value("noise_sigma", 0.0);
      if (meta.contains("params")) data.meta_json = meta.at("params").dump();
    } catch (const json::exception& e) {
      throw DataError(std::string("dataset metadata parse error: ") + e.what());
    }
  }
  return data;
}

namespace {

// elapsed_s stays out of the serialized record: the report is bit-identical
// across reruns of the same (config, seed, data) and wall time is not.
json cycle_to_json(const CycleRecord& rec, bool include_reg) {
  json c;
  c["cycle"] = rec.cycle;
  c["train_mse"] = rec.train_mse;
  c["val_mse"] = rec.val_mse;
  c["active_connections"] = rec.active_connections;
  c["term_count"] = rec.term_count;
  c["expression"] = rec.expression;
  if (include_reg) c["reg"] = reg_to_json(rec.reg);
  return c;
}

template <typename Run>
json run_to_json(const Run& run, bool include_reg) {
  json r;
  r["lambda"] = run.lambda;
  r["lambda_g"] = run.lambda_g;
  r["seed"] = run.run_seed;
  r["restart"] = run.restart;
  r["status"] = run.status;
  if (run.status == "ok") {
    r["val_mse"] = run.final_val_mse;
    r["term_count"] = run.final_term_count;
    r["expression"] = run.final_expression;
  }
  json cycles = json::array();
  for (const CycleRecord& rec : run.cycles) cycles.push_back(cycle_to_json(rec, include_reg));
  r["cycles"] = std::move(cycles);
  return r;
}

template <typename Report>
json winner_to_json(const Report& report) {
  json w;
  if (report.winner < 0) return w;
  const auto& run = report.runs[report.winner];
  w["expression"] = run.final_expression;
  w["term_count"] = run.final_term_count;
  w["val_mse"] = run.final_val_mse;
  w["lambda"] = run.lambda;
  w["seed"] = run.run_seed;
  return w;
}

}  // namespace

std::string report_to_json(const DiscoveryReport& report, bool include_reg_history) {
  json j;
  j["mode"] = report.mode;
  j["target_dim"] = report.target_dim;
  j["seed"] = report.seed;
  json w = winner_to_json(report);
  if (report.winner >= 0) {
    const RunResult& run = report.runs[report.winner];
    json coeffs = json::array();
    const ExprPtr expr = simplify(extract_expression(run.final_net), 1e-4);
    for (const TermView& tv : term_views(expr)) {
      json c;
      c["term"] = to_string(*tv.unit, 4);
      c["coefficient"] = tv.coeff;
      coeffs.push_back(std::move(c));
    }
    w["coefficients"] = std::move(coeffs);
  }
  j["winner"] = std::move(w);
  json runs = json::array();
  for (const RunResult& run : report.runs) runs.push_back(run_to_json(run, include_reg_history));
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

std::string hybrid_report_to_json(const HybridDiscoveryReport& report,
                                  bool include_reg_history) {
  json j;
  j["mode"] = "pde_hybrid";
  j["seed"] = report.seed;
  json w = winner_to_json(report);
  if (report.winner >= 0) {
    const HybridRunResult& run = report.runs[report.winner];
    const HybridIdentification id = identify_hybrid(run.final_model, 1e-4);
    w["kernel"] = std::vector<double>{run.final_model.kernel[0], run.final_model.kernel[1],
                                      run.final_model.kernel[2]};
    w["outer_coeff"] = run.final_model.outer_coeff;
    w["d_equiv"] = id.rescale.d_equiv;
    w["normalized_kernel"] = std::vector<double>{id.rescale.normalized[0],
                                                 id.rescale.normalized[1],
                                                 id.rescale.normalized[2]};
    w["kernel_sum"] = id.rescale.kernel_sum;
    w["r_linear"] = id.r_linear;
    w["r_quadratic"] = id.r_quadratic;
  }
  j["winner"] = std::move(w);
  json runs = json::array();
  for (const HybridRunResult& run : report.runs)
    runs.push_back(run_to_json(run, include_reg_history));
  j["runs"] = std::move(runs);
  return j.dump(2) + "\n";
}

void save_history_csv(const DiscoveryReport& report, const std::string& path) {
  std::string out = "cycle,term_count,active_connections,train_mse,val_mse\n";
  if (report.winner >= 0) {
    for (const CycleRecord& rec : report.runs[report.winner].cycles) {
      out += std::to_string(rec.cycle) + ',' + std::to_string(rec.term_count) + ',' +
             std::to_string(rec.active_connections) + ',' + format_double(rec.train_mse) +
             ',' + format_double(rec.val_mse) + '\n';
    }
  }
  write_text_file(path, out);
}

void save_trajectory_csv(const Trajectory& traj, const std::string& path) {
  std::string out = "t";
  for (int d = 0; d < traj.dim; ++d) out += ",x" + std::to_string(d + 1);
  out += '\n';
  for (std::size_t r = 0; r < traj.rows(); ++r) {
    out += format_double(static_cast<double>(r) * traj.dt);
    const auto row = traj.row(r);
    for (int d = 0; d < traj.dim; ++d) {
      out += ',';
      out += format_double(row[d]);
    }
    out += '\n';
  }
  write_text_file(path, out);
}

void save_band_csv(const UncertaintyBand& band, const std::string& path) {
  std::string out = "index,mean,variance\n";
  for (std::size_t i = 0; i < band.mean.size(); ++i) {
    out += std::to_string(i) + ',' + format_double(band.mean[i]) + ',' +
           format_double(band.variance[i]) + '\n';
  }
  write_text_file(path, out);
}

namespace {

OptimizerKind optimizer_from_name(const std::string& name) {
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "sgd") return OptimizerKind::Sgd;
  throw ConfigError("unknown optimizer: " + name);
}

}  // namespace

TrainConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config parse error: ") + e.what());
  }
  TrainConfig cfg;
  try {
    if (j.contains("hidden")) cfg.hidden = j.at("hidden").get<std::vector<int>>();
    if (j.contains("unary_set")) {
      cfg.unary_set.clear();
      for (const auto& name : j.at("unary_set")) {
        auto op = unary_from_name(name.get<std::string>());
        if (!op) throw ConfigError("unknown unary op: " + name.get<std::string>());
        cfg.unary_set.push_back(*op);
      }
    }
    cfg.lambda = j.value("lambda", cfg.lambda);
    cfg.lambda_g = j.value("lambda_g", cfg.lambda_g);
    if (j.contains("lambda_grid"))
      cfg.lambda_grid = j.at("lambda_grid").get<std::vector<double>>();
    cfg.decay_every = j.value("decay_every", cfg.decay_every);
    cfg.decay_factor = j.value("decay_factor", cfg.decay_factor);
    cfg.n_cycle = j.value("n_cycle", cfg.n_cycle);
    cfg.n_epoch = j.value("n_epoch", cfg.n_epoch);
    cfg.kappa_alpha = j.value("kappa_alpha", cfg.kappa_alpha);
    cfg.kappa_alpha_g = j.value("kappa_alpha_g", cfg.kappa_alpha_g);
    if (j.contains("optimizer"))
      cfg.optimizer = optimizer_from_name(j.at("optimizer").get<std::string>());
    cfg.learning_rate = j.value("learning_rate", cfg.learning_rate);
    cfg.lr_decay = j.value("lr_decay", cfg.lr_decay);
    cfg.batch_size = j.value("batch_size", cfg.batch_size);
    cfg.restarts = j.value("restarts", cfg.restarts);
    cfg.seed = j.value("seed", cfg.seed);
    cfg.train_fraction = j.value("train_fraction", cfg.train_fraction);
    cfg.jobs = j.value("jobs", cfg.jobs);
    if (j.contains("sigma2_mode")) {
      const std::string mode = j.at("sigma2_mode").get<std::string>();
      if (mode == "residual")
        cfg.sigma2_mode = Sigma2Mode::Residual;
      else if (mode == "fixed")
        cfg.sigma2_mode = Sigma2Mode::Fixed;
      else
        throw ConfigError("unknown sigma2_mode: " + mode);
    }
    cfg.sigma2_fixed = j.value("sigma2_fixed", cfg.sigma2_fixed);
    cfg.init_scale = j.value("init_scale", cfg.init_scale);
    cfg.coeff_floor = j.value("coeff_floor", cfg.coeff_floor);
    cfg.target_dim = j.value("target_dim", cfg.target_dim);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config schema error: ") + e.what());
  }
  if (cfg.n_cycle < 1 || cfg.n_epoch < 1 || cfg.restarts < 1)
    throw ConfigError("config: counts must be >= 1");
  if (cfg.train_fraction <= 0.0 || cfg.train_fraction >= 1.0)
    throw ConfigError("config: train_fraction must be in (0, 1)");
  return cfg;
}

std::string config_to_json(const TrainConfig& cfg) {
  json j;
  j["hidden"] = cfg.hidden;
  json unaries = json::array();
  for (UnaryKind op : cfg.unary_set) unaries.push_back(std::string(unary_name(op)));
  j["unary_set"] = unaries;
  j["lambda"] = cfg.lambda;
  j["lambda_g"] = cfg.lambda_g;
  j["lambda_grid"] = cfg.lambda_grid;
  j["decay_every"] = cfg.decay_every;
  j["decay_factor"] = cfg.decay_factor;
  j["n_cycle"] = cfg.n_cycle;
  j["n_epoch"] = cfg.n_epoch;
  j["kappa_alpha"] = cfg.kappa_alpha;
  j["kappa_alpha_g"] = cfg.kappa_alpha_g;
  j["optimizer"] = cfg.optimizer == OptimizerKind::Adam ? "adam" : "sgd";
  j["learning_rate"] = cfg.learning_rate;
  j["lr_decay"] = cfg.lr_decay;
  j["batch_size"] = cfg.batch_size;
  j["restarts"] = cfg.restarts;
  j["seed"] = cfg.seed;
  j["train_fraction"] = cfg.train_fraction;
  j["jobs"] = cfg.jobs;
  j["sigma2_mode"] = cfg.sigma2_mode == Sigma2Mode::Residual ? "residual" : "fixed";
  j["sigma2_fixed"] = cfg.sigma2_fixed;
  j["init_scale"] = cfg.init_scale;
  j["coeff_floor"] = cfg.coeff_floor;
  j["target_dim"] = cfg.target_dim;
  return j.dump(2) + "\n";
}

}  // namespace mathonet
