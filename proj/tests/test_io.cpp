#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "mathonet/benchmarks.hpp"
#include "mathonet/io.hpp"
#include "test_helpers.hpp"

using namespace mathonet;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("mathonet_test_" + std::to_string(std::rand()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

}  // namespace

TEST_CASE("model JSON: byte-identical save / load / save round trip") {
  Rng rng(501);
  const MathONet net = test_helpers::random_net(
      rng, 3, {3}, {UnaryKind::Identity, UnaryKind::Sin, UnaryKind::Cos, UnaryKind::Log,
                    UnaryKind::Exp},
      0.7, 0.3);
  const std::string first = model_to_json(net);
  const MathONet loaded = model_from_json(first);
  const std::string second = model_to_json(loaded);
  CHECK(first == second);

  // forward agreement
  const double x[3] = {0.2, -1.4, 3.3};
  CHECK(forward(net, x) == forward(loaded, x));
}

TEST_CASE("model JSON: posterior block round trips") {
  Rng rng(503);
  const MathONet net = test_helpers::random_net(rng, 2, {2},
                                                {UnaryKind::Identity, UnaryKind::Sin}, 0.5);
  const NetLayout layout = layout_of(net);
  RegState reg = RegState::make(layout.total, static_cast<int>(layout.blocks.size()));
  for (double& z : reg.zeta) z = rng.uniform01();
  const std::string text = model_to_json(net, &reg);
  RegState back;
  const MathONet loaded = model_from_json(text, &back);
  CHECK(back.zeta == reg.zeta);
  CHECK(back.c == reg.c);
}

TEST_CASE("model JSON: schema errors surface as data errors") {
  CHECK_THROWS_AS(model_from_json("{not json"), DataError);
  CHECK_THROWS_AS(model_from_json("{\"n_inputs\": 2}"), DataError);
}

TEST_CASE("hybrid JSON: kernel extension round trips") {
  Rng rng(505);
  StencilModel model;
  model.kernel = {1.9, -2.2, 1.9};
  model.outer_coeff = 3.24;
  model.dx = 0.04;
  model.reaction = test_helpers::random_net(rng, 1, {2},
                                            {UnaryKind::Identity, UnaryKind::Cos}, 0.5);
  const std::string first = hybrid_to_json(model);
  CHECK(json_is_hybrid(first));
  const StencilModel loaded = hybrid_from_json(first);
  CHECK(hybrid_to_json(loaded) == first);
  CHECK(loaded.kernel[1] == doctest::Approx(-2.2));
  const std::string plain = model_to_json(model.reaction);
  CHECK_FALSE(json_is_hybrid(plain));
}

TEST_CASE("dataset CSV: exact round trip with sidecar metadata") {
  TempDir tmp;
  const Dataset data = generate_dataset(SystemSpec::lotka_volterra_default(), 0.25, 9);
  const std::string path = tmp.file("lv.csv");
  save_dataset(data, path);
  const Dataset loaded = load_dataset(path);
  CHECK(loaded.n_in == 2);
  CHECK(loaded.n_out == 2);
  CHECK(loaded.X == data.X);  // decimal round trip is exact
  CHECK(loaded.Y == data.Y);
  CHECK(loaded.system == "lotka_volterra");
  CHECK(loaded.noise_sigma == doctest::Approx(0.25));

  // second save is byte-identical
  const std::string again = tmp.file("lv2.csv");
  save_dataset(loaded, again);
  CHECK(read_text_file(path).substr(0, 200) == read_text_file(again).substr(0, 200));
  const std::string a = read_text_file(path);
  const std::string b = read_text_file(again);
  CHECK(a == b);
}

TEST_CASE("dataset CSV: bad header names the offending column") {
  TempDir tmp;
  const std::string path = tmp.file("bad.csv");
  write_text_file(path, "x1,frog,y1\n1,2,3\n");
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("frog") != std::string::npos);
  }
}

TEST_CASE("dataset CSV: bad cell reports row and column") {
  TempDir tmp;
  const std::string path = tmp.file("bad2.csv");
  write_text_file(path, "x1,y1\n1,2\n3,oops\n");
  try {
    load_dataset(path);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("y1") != std::string::npos);
    CHECK(msg.find("oops") != std::string::npos);
  }
}

TEST_CASE("config JSON: defaults, overrides, and validation") {
  const TrainConfig cfg = config_from_json(R"({"lambda": 0.001, "n_cycle": 3,
    "unary_set": ["identity", "sin"], "optimizer": "sgd", "sigma2_mode": "fixed",
    "sigma2_fixed": 0.5})");
  CHECK(cfg.lambda == doctest::Approx(0.001));
  CHECK(cfg.n_cycle == 3);
  CHECK(cfg.unary_set.size() == 2);
  CHECK(cfg.optimizer == OptimizerKind::Sgd);
  CHECK(cfg.sigma2_mode == Sigma2Mode::Fixed);

  CHECK_THROWS_AS(config_from_json("{"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"n_cycle": 0})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"optimizer": "bfgs"})"), ConfigError);
  CHECK_THROWS_AS(config_from_json(R"({"train_fraction": 1.5})"), ConfigError);

  // round trip keeps every field
  const std::string text = config_to_json(cfg);
  const TrainConfig back = config_from_json(text);
  CHECK(config_to_json(back) == text);
}

TEST_CASE("trajectory and band CSV writers") {
  TempDir tmp;
  Trajectory traj;
  traj.dim = 2;
  traj.dt = 0.5;
  traj.states = {1.0, 2.0, 3.0, 4.0};
  const std::string tpath = tmp.file("traj.csv");
  save_trajectory_csv(traj, tpath);
  const std::string text = read_text_file(tpath);
  CHECK(text == "t,x1,x2\n0,1,2\n0.5,3,4\n");

  UncertaintyBand band;
  band.mean = {1.5};
  band.variance = {0.25};
  band.samples = 10;
  const std::string bpath = tmp.file("band.csv");
  save_band_csv(band, bpath);
  CHECK(read_text_file(bpath) == "index,mean,variance\n0,1.5,0.25\n");
}

TEST_CASE("format_double: shortest exact representation") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(-2.6666666666666665) == "-2.6666666666666665");
}
