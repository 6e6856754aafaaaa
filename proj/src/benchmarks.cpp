#include "mathonet/benchmarks.hpp"

#include <cmath>
#include <stdexcept>

#include "mathonet/rng.hpp"

namespace mathonet {

SystemSpec SystemSpec::lorenz_default() {
  SystemSpec s;
  s.kind = Kind::Lorenz;
  s.initial = {-8.0, 7.0, 27.0};
  s.dt = 0.01;
  s.steps = 1000;  // t in [0, 10)
  s.sample_stride = 1;
  return s;
}

SystemSpec SystemSpec::lotka_volterra_default() {
  SystemSpec s;
  s.kind = Kind::LotkaVolterra;
  s.initial = {0.442, 4.628};
  s.dt = 0.01;
  s.steps = 300;  // t in [0, 15)
  s.sample_stride = 5;
  return s;
}

SystemSpec SystemSpec::fisher_default() {
  SystemSpec s;
  s.kind = Kind::FisherKpp;
  s.dt = 1e-4;  // explicit diffusion stability needs dt < dx^2 / (2 d)
  s.grid_points = 26;
  s.time_samples = 11;
  s.t_end = 1.0;
  s.initial.resize(s.grid_points);
  const double dx = s.fisher_dx();
  for (int i = 0; i < s.grid_points; ++i) {
    const double x = s.x_min + i * dx;
    s.initial[i] = std::exp(-100.0 * (x - 0.5) * (x - 0.5));
  }
  return s;
}

SystemSpec SystemSpec::by_name(const std::string& name) {
  if (name == "lorenz") return lorenz_default();
  if (name == "lotka_volterra") return lotka_volterra_default();
  if (name == "fisher_kpp") return fisher_default();
  throw std::invalid_argument("unknown system: " + name);
}

std::string SystemSpec::name() const {
  switch (kind) {
    case Kind::Lorenz:
      return "lorenz";
    case Kind::LotkaVolterra:
      return "lotka_volterra";
    case Kind::FisherKpp:
      return "fisher_kpp";
  }
  return "?";
}

void lorenz_rhs(const LorenzParams& p, std::span<const double> s, std::span<double> out) {
  if (s.size() != 3 || out.size() != 3) throw std::invalid_argument("lorenz_rhs: need 3 dims");
  out[0] = p.sigma * (s[1] - s[0]);
  out[1] = s[0] * (p.rho - s[2]) - s[1];
  out[2] = s[0] * s[1] - p.beta * s[2];
}

void lv_rhs(const LotkaVolterraParams& p, std::span<const double> s, std::span<double> out) {
  if (s.size() != 2 || out.size() != 2) throw std::invalid_argument("lv_rhs: need 2 dims");
  out[0] = p.alpha * s[0] - p.beta * s[0] * s[1];
  out[1] = p.delta * s[0] * s[1] - p.gamma * s[1];
}

void fisher_rhs(const FisherParams& p, std::span<const double> grid, double dx,
                std::span<double> out) {
  const std::size_t n = grid.size();
  if (n < 3) throw std::invalid_argument("fisher_rhs: grid too short");
  if (out.size() != n) throw std::invalid_argument("fisher_rhs: output size mismatch");
  const double inv_dx2 = 1.0 / (dx * dx);
  for (std::size_t i = 0; i < n; ++i) {
    const double left = (i == 0) ? grid[1] : grid[i - 1];        // zero-flux reflection
    const double right = (i + 1 == n) ? grid[n - 2] : grid[i + 1];
    const double diff = p.d * (left - 2.0 * grid[i] + right) * inv_dx2;
    out[i] = diff + p.r * grid[i] * (1.0 - grid[i]);
  }
}

std::vector<double> rk4_step(const RhsFn& rhs, std::span<const double> state, double dt) {
  if (dt <= 0.0) throw std::invalid_argument("rk4_step: dt must be positive");
  const std::size_t n = state.size();
  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n), out(n);
  rhs(state, k1);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k1[i];
  rhs(tmp, k2);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + 0.5 * dt * k2[i];
  rhs(tmp, k3);
  for (std::size_t i = 0; i < n; ++i) tmp[i] = state[i] + dt * k3[i];
  rhs(tmp, k4);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = state[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!std::isfinite(out[i])) throw std::runtime_error("rk4_step: non-finite state");
  }
  return out;
}

namespace {

Dataset generate_ode(const SystemSpec& spec, double noise_sigma, std::uint64_t seed) {
  const bool lorenz = spec.kind == SystemSpec::Kind::Lorenz;
  const int dim = lorenz ? 3 : 2;
  RhsFn rhs = lorenz ? RhsFn([&spec](std::span<const double> s, std::span<double> o) {
    lorenz_rhs(spec.lorenz, s, o);
  })
                     : RhsFn([&spec](std::span<const double> s, std::span<double> o) {
                         lv_rhs(spec.lv, s, o);
                       });
  Dataset data;
  data.n_in = dim;
  data.n_out = dim;
  data.system = spec.name();
  data.dt = spec.dt * spec.sample_stride;
  data.seed = seed;
  data.noise_sigma = noise_sigma;

  std::vector<double> state = spec.initial;
  std::vector<double> deriv(dim);
  for (int s = 0; s < spec.steps; ++s) {
    data.X.insert(data.X.end(), state.begin(), state.end());
    rhs(state, deriv);
    data.Y.insert(data.Y.end(), deriv.begin(), deriv.end());
    for (int sub = 0; sub < spec.sample_stride; ++sub) state = rk4_step(rhs, state, spec.dt);
  }
  return data;
}

Dataset generate_fisher(const SystemSpec& spec, double noise_sigma, std::uint64_t seed) {
  const int n = spec.grid_points;
  const double dx = spec.fisher_dx();
  RhsFn rhs = [&spec, dx](std::span<const double> g, std::span<double> o) {
    fisher_rhs(spec.fisher, g, dx, o);
  };
  Dataset data;
  data.n_in = 3;  // three-point window around each interior grid point
  data.n_out = 1;
  data.system = spec.name();
  data.dt = spec.t_end / (spec.time_samples - 1);
  data.seed = seed;
  data.noise_sigma = noise_sigma;

  std::vector<double> field = spec.initial;
  std::vector<double> deriv(n);
  const int steps_per_sample = std::max(1, static_cast<int>(std::llround(data.dt / spec.dt)));
  for (int ts = 0; ts < spec.time_samples; ++ts) {
    fisher_rhs(spec.fisher, field, dx, deriv);
    for (int i = 1; i + 1 < n; ++i) {
      data.X.push_back(field[i - 1]);
      data.X.push_back(field[i]);
      data.X.push_back(field[i + 1]);
      data.Y.push_back(deriv[i]);
    }
    if (ts + 1 == spec.time_samples) break;
    for (int s = 0; s < steps_per_sample; ++s) field = rk4_step(rhs, field, spec.dt);
  }
  return data;
}

}  // namespace

namespace {

std::string params_json(const SystemSpec& spec) {
  char buf[512];
  switch (spec.kind) {
    case SystemSpec::Kind::Lorenz:
      std::snprintf(buf, sizeof(buf),
                    R"({"sigma":%.17g,"rho":%.17g,"beta":%.17g,"x0":[%.17g,%.17g,%.17g]})",
                    spec.lorenz.sigma, spec.lorenz.rho, spec.lorenz.beta, spec.initial[0],
                    spec.initial[1], spec.initial[2]);
      break;
    case SystemSpec::Kind::LotkaVolterra:
      std::snprintf(buf, sizeof(buf),
                    R"({"alpha":%.17g,"beta":%.17g,"delta":%.17g,"gamma":%.17g,"x0":[%.17g,%.17g]})",
                    spec.lv.alpha, spec.lv.beta, spec.lv.delta, spec.lv.gamma, spec.initial[0],
                    spec.initial[1]);
      break;
    case SystemSpec::Kind::FisherKpp:
      std::snprintf(buf, sizeof(buf),
                    R"({"d":%.17g,"r":%.17g,"grid_points":%d,"dx":%.17g,"time_samples":%d,)"
                    R"("t_end":%.17g,"initial":"gauss_bump"})",
                    spec.fisher.d, spec.fisher.r, spec.grid_points, spec.fisher_dx(),
                    spec.time_samples, spec.t_end);
      break;
  }
  return buf;
}

}  // namespace

Dataset generate_dataset(const SystemSpec& spec, double noise_sigma, std::uint64_t seed) {
  if (noise_sigma < 0.0) throw std::invalid_argument("generate_dataset: negative noise");
  Dataset data = spec.kind == SystemSpec::Kind::FisherKpp
                     ? generate_fisher(spec, noise_sigma, seed)
                     : generate_ode(spec, noise_sigma, seed);
  data.meta_json = params_json(spec);
  if (noise_sigma > 0.0) {
    Rng rng(mix_seed(seed, 0xda7aULL));
    for (double& y : data.Y) y += rng.normal(0.0, noise_sigma);
  }
  return data;
}

double lv_first_integral(const LotkaVolterraParams& p, double x, double y) {
  return p.delta * x - p.gamma * std::log(x) + p.beta * y - p.alpha * std::log(y);
}

}  // namespace mathonet
