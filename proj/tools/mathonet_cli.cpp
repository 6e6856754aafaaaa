#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "mathonet/benchmarks.hpp"
#include "mathonet/io.hpp"
#include "mathonet/pde.hpp"
#include "mathonet/trainer.hpp"
#include "mathonet/validation.hpp"

namespace fs = std::filesystem;
using namespace mathonet;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitDiverged = 4;

int cmd_gen(const std::string& system, double noise, std::uint64_t seed,
            const std::string& out) {
  SystemSpec spec = SystemSpec::by_name(system);
  Dataset data = generate_dataset(spec, noise, seed);
  save_dataset(data, out);
  std::cout << "wrote " << data.rows() << " rows (" << data.n_in << " inputs, " << data.n_out
            << " targets) to " << out << "\n";
  return kExitOk;
}

struct DiscoverArgs {
  std::string data_path;
  std::string config_path;
  std::string out_dir;
  bool hybrid = false;
  // flag overrides; negative / empty means "not set"
  int target = -1;
  std::vector<double> lambda_grid;
  int cycles = -1, epochs = -1, restarts = -1, batch = -1, jobs = -1;
  double lr = -1.0, kappa = -1.0, kappa_g = -1.0, coeff_floor = -1.0, init_scale = -1.0;
  long long seed = -1;
  std::vector<int> hidden;
  std::vector<std::string> unary;
  std::string sigma2_mode;
  double sigma2_fixed = -1.0;
};

int cmd_discover(const DiscoverArgs& args) {
  TrainConfig cfg;
  if (!args.config_path.empty()) cfg = config_from_json(read_text_file(args.config_path));
  // flags win over the config file
  if (args.target >= 0) cfg.target_dim = args.target;
  if (!args.lambda_grid.empty()) cfg.lambda_grid = args.lambda_grid;
  if (args.cycles > 0) cfg.n_cycle = args.cycles;
  if (args.epochs > 0) cfg.n_epoch = args.epochs;
  if (args.restarts > 0) cfg.restarts = args.restarts;
  if (args.batch > 0) cfg.batch_size = args.batch;
  if (args.jobs > 0) cfg.jobs = args.jobs;
  if (args.lr > 0.0) cfg.learning_rate = args.lr;
  if (args.kappa > 0.0) cfg.kappa_alpha = args.kappa;
  if (args.kappa_g > 0.0) cfg.kappa_alpha_g = args.kappa_g;
  if (args.coeff_floor >= 0.0) cfg.coeff_floor = args.coeff_floor;
  if (args.init_scale > 0.0) cfg.init_scale = args.init_scale;
  if (args.seed >= 0) cfg.seed = static_cast<std::uint64_t>(args.seed);
  if (!args.hidden.empty()) cfg.hidden = args.hidden;
  if (!args.unary.empty()) {
    cfg.unary_set.clear();
    for (const std::string& name : args.unary) {
      auto op = unary_from_name(name);
      if (!op) throw ConfigError("unknown unary op: " + name);
      cfg.unary_set.push_back(*op);
    }
  }
  if (!args.sigma2_mode.empty()) {
    if (args.sigma2_mode == "residual")
      cfg.sigma2_mode = Sigma2Mode::Residual;
    else if (args.sigma2_mode == "fixed")
      cfg.sigma2_mode = Sigma2Mode::Fixed;
    else
      throw ConfigError("unknown sigma2 mode: " + args.sigma2_mode);
  }
  if (args.sigma2_fixed > 0.0) cfg.sigma2_fixed = args.sigma2_fixed;

  Dataset data = load_dataset(args.data_path);
  fs::create_directories(args.out_dir);

  if (args.hybrid) {
    double dx = 0.0;
    if (!data.meta_json.empty()) {
      const auto params = nlohmann::json::parse(data.meta_json);
      dx = params.value("dx", 0.0);
    }
    if (dx <= 0.0) throw DataError("hybrid discovery needs grid metadata with dx");
    HybridDiscoveryReport report = discover_hybrid(data, cfg, dx);
    write_text_file((fs::path(args.out_dir) / "report.json").string(),
                    hybrid_report_to_json(report));
    if (report.winner < 0) {
      std::cerr << "all runs diverged\n";
      return kExitDiverged;
    }
    const HybridRunResult& run = report.runs[report.winner];
    write_text_file((fs::path(args.out_dir) / "model.json").string(),
                    hybrid_to_json(run.final_model, &run.final_reg));
    std::cout << "winner: " << run.final_expression << "\n";
    return kExitOk;
  }

  DiscoveryReport report = discover(data, cfg);
  write_text_file((fs::path(args.out_dir) / "report.json").string(), report_to_json(report));
  save_history_csv(report, (fs::path(args.out_dir) / "history.csv").string());
  if (report.winner < 0) {
    std::cerr << "all runs diverged\n";
    return kExitDiverged;
  }
  const RunResult& run = report.runs[report.winner];
  write_text_file((fs::path(args.out_dir) / "model.json").string(),
                  model_to_json(run.final_net, &run.final_reg));
  std::cout << "winner (" << report.mode << "): " << run.final_expression
            << "  [val mse " << run.final_val_mse << ", " << run.final_term_count
            << " terms]\n";
  return kExitOk;
}

int cmd_simulate(const std::vector<std::string>& model_paths, std::vector<double> x0,
                 double dt, int steps, std::uint64_t /*seed*/, const std::string& out) {
  std::vector<MathONet> nets;
  for (const std::string& path : model_paths)
    nets.push_back(model_from_json(read_text_file(path)));
  if (nets.size() != x0.size())
    throw DataError("need one model per state dimension (" + std::to_string(x0.size()) +
                    " given, " + std::to_string(nets.size()) + " models)");
  Trajectory traj = simulate_discovered(nets, x0, dt, steps);
  save_trajectory_csv(traj, out);
  std::cout << "wrote " << traj.rows() << " states to " << out
            << (traj.diverged ? " (diverged, truncated)" : "") << "\n";
  return kExitOk;
}

int cmd_uncertainty(const std::string& model_path, const std::string& data_path, int samples,
                    std::uint64_t seed, const std::string& out) {
  RegState reg;
  MathONet net = model_from_json(read_text_file(model_path), &reg);
  if (reg.zeta.empty())
    throw DataError("model file has no posterior block; run discover first: " + model_path);
  Dataset data = load_dataset(data_path);
  if (data.n_in != net.n_inputs) throw DataError("dataset inputs do not match the model");
  UncertaintyBand band = mc_uncertainty(net, reg, data.X, data.n_in, samples, seed);
  save_band_csv(band, out);
  std::cout << "wrote " << band.mean.size() << " band points to " << out << "\n";
  return kExitOk;
}

int cmd_report(const std::string& report_path) {
  const auto j = nlohmann::json::parse(read_text_file(report_path));
  std::cout << "mode: " << j.value("mode", "?") << "\n";
  if (j.contains("winner") && !j["winner"].empty()) {
    const auto& w = j["winner"];
    std::cout << "winner: " << w.value("expression", "") << "\n";
    if (w.contains("val_mse")) std::cout << "val mse: " << w["val_mse"].dump() << "\n";
    if (w.contains("term_count")) std::cout << "terms: " << w["term_count"].dump() << "\n";
  }
  std::printf("%-8s %-10s %-12s %-14s %-14s\n", "run", "lambda", "status", "val_mse", "terms");
  int i = 0;
  for (const auto& run : j.at("runs")) {
    std::printf("%-8d %-10g %-12s %-14s %-14s\n", i++, run.value("lambda", 0.0),
                run.value("status", "?").c_str(),
                run.contains("val_mse") ? run["val_mse"].dump().c_str() : "-",
                run.contains("term_count") ? run["term_count"].dump().c_str() : "-");
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Equation discovery by sparse Bayesian pruning of operation super-graphs"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "Generate a benchmark dataset");
  std::string gen_system = "lorenz";
  double gen_noise = 0.0;
  std::uint64_t gen_seed = 0;
  std::string gen_out = "dataset.csv";
  gen->add_option("--system", gen_system, "lorenz | lotka_volterra | fisher_kpp");
  gen->add_option("--noise", gen_noise, "stddev of Gaussian noise added to targets");
  gen->add_option("--seed", gen_seed, "noise seed");
  gen->add_option("--out", gen_out, "output CSV path");

  // discover
  auto* dis = app.add_subcommand("discover", "Sweep-train and prune on a dataset");
  DiscoverArgs d;
  dis->add_option("--data", d.data_path, "dataset CSV")->required();
  dis->add_option("--config", d.config_path, "training config JSON");
  dis->add_option("--out", d.out_dir, "output directory")->required();
  dis->add_flag("--hybrid", d.hybrid, "train the stencil + reaction hybrid (window data)");
  dis->add_option("--target", d.target, "target column index");
  dis->add_option("--lambda-grid", d.lambda_grid, "lambda sweep values");
  dis->add_option("--cycles", d.cycles, "training cycles");
  dis->add_option("--epochs", d.epochs, "epochs per cycle");
  dis->add_option("--restarts", d.restarts, "restarts per lambda");
  dis->add_option("--batch", d.batch, "minibatch size");
  dis->add_option("--jobs", d.jobs, "parallel jobs (default: logical cores)");
  dis->add_option("--lr", d.lr, "learning rate");
  dis->add_option("--kappa", d.kappa, "connection pruning threshold");
  dis->add_option("--kappa-group", d.kappa_g, "group pruning threshold");
  dis->add_option("--coeff-floor", d.coeff_floor, "display coefficient floor");
  dis->add_option("--init-scale", d.init_scale, "weight init range");
  dis->add_option("--seed", d.seed, "master seed");
  dis->add_option("--hidden", d.hidden, "hidden layer widths");
  dis->add_option("--unary", d.unary, "unary op names");
  dis->add_option("--sigma2-mode", d.sigma2_mode, "residual | fixed");
  dis->add_option("--sigma2-fixed", d.sigma2_fixed, "fixed sigma^2 value");

  // simulate
  auto* sim = app.add_subcommand("simulate", "Integrate discovered models");
  std::vector<std::string> sim_models;
  std::vector<double> sim_x0;
  double sim_dt = 0.01;
  int sim_steps = 1000;
  std::uint64_t sim_seed = 0;
  std::string sim_out = "trajectory.csv";
  sim->add_option("--model", sim_models, "model JSON, one per state dimension")->required();
  sim->add_option("--x0", sim_x0, "initial state")->required();
  sim->add_option("--dt", sim_dt, "integration step");
  sim->add_option("--steps", sim_steps, "number of steps");
  sim->add_option("--seed", sim_seed, "unused; kept for CLI determinism contract");
  sim->add_option("--out", sim_out, "trajectory CSV");

  // uncertainty
  auto* unc = app.add_subcommand("uncertainty", "Monte-Carlo predictive band");
  std::string unc_model, unc_data, unc_out = "band.csv";
  int unc_T = 1000;
  std::uint64_t unc_seed = 0;
  unc->add_option("--model", unc_model, "model JSON with posterior")->required();
  unc->add_option("--data", unc_data, "dataset CSV with test inputs")->required();
  unc->add_option("--samples", unc_T, "number of posterior draws");
  unc->add_option("--seed", unc_seed, "sampling seed");
  unc->add_option("--out", unc_out, "band CSV");

  // report
  auto* rep = app.add_subcommand("report", "Render tables from a report JSON");
  std::string rep_path;
  rep->add_option("--report", rep_path, "report JSON")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_gen(gen_system, gen_noise, gen_seed, gen_out);
    if (dis->parsed()) return cmd_discover(d);
    if (sim->parsed())
      return cmd_simulate(sim_models, sim_x0, sim_dt, sim_steps, sim_seed, sim_out);
    if (unc->parsed()) return cmd_uncertainty(unc_model, unc_data, unc_T, unc_seed, unc_out);
    if (rep->parsed()) return cmd_report(rep_path);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return kExitOk;
}
