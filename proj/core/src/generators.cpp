#include "fern/generators.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "fern/csv.hpp"
#include "fern/rng.hpp"

namespace fern::gen {

namespace {

[[noreturn]] void fail(const std::string& what) {
  throw std::runtime_error("generators: " + what);
}

struct SystemTraits {
  std::vector<std::string> params;
  Method method;
  std::size_t min_dim;
  std::size_t max_dim;
};

const SystemTraits& traits(SystemKind k) {
  static const std::map<SystemKind, SystemTraits> t = {
      {SystemKind::kLorenz63, {{"sigma", "rho", "beta"}, Method::kRk4, 3, 3}},
      {SystemKind::kRossler, {{"a", "b", "c"}, Method::kRk4, 3, 3}},
      {SystemKind::kChua,
       {{"alpha", "beta", "m0", "m1"}, Method::kRk4, 3, 3}},
      {SystemKind::kLorenz96,
       {{"forcing"}, Method::kRk4, 4, static_cast<std::size_t>(-1)}},
      {SystemKind::kOrnsteinUhlenbeck,
       {{"theta", "mu", "sigma"}, Method::kEuler, 1, 1}},
      {SystemKind::kDoubleWell, {{"a", "sigma"}, Method::kEuler, 1, 1}},
      {SystemKind::kSlds,
       {{"a1", "q1", "a2", "q2", "p11", "p22"}, Method::kDiscrete, 1, 1}},
      {SystemKind::kSeasonalAr,
       {{"period", "phi", "sigma", "a0", "amp_drift"},
        Method::kDiscrete,
        1,
        1}},
      {SystemKind::kGarch,
       {{"omega", "alpha", "beta"}, Method::kDiscrete, 1, 1}},
  };
  return t.at(k);
}

double chua_diode(double x, double m0, double m1) {
  return m1 * x + 0.5 * (m0 - m1) * (std::abs(x + 1.0) - std::abs(x - 1.0));
}

double garch_stationary_var(const SystemSpec& spec) {
  const double omega = spec.params.at("omega");
  const double alpha = spec.params.at("alpha");
  const double beta = spec.params.at("beta");
  return omega / (1.0 - alpha - beta);
}

}  // namespace

std::string to_string(SystemKind k) {
  switch (k) {
    case SystemKind::kLorenz63: return "lorenz63";
    case SystemKind::kRossler: return "rossler";
    case SystemKind::kChua: return "chua";
    case SystemKind::kLorenz96: return "lorenz96";
    case SystemKind::kOrnsteinUhlenbeck: return "ou";
    case SystemKind::kDoubleWell: return "double_well";
    case SystemKind::kSlds: return "slds";
    case SystemKind::kSeasonalAr: return "seasonal_ar";
    case SystemKind::kGarch: return "garch";
  }
  fail("bad system kind");
}

std::string to_string(Method m) {
  switch (m) {
    case Method::kRk4: return "rk4";
    case Method::kEuler: return "euler";
    case Method::kDiscrete: return "discrete";
  }
  fail("bad method");
}

std::string to_string(ShockKind k) {
  switch (k) {
    case ShockKind::kNone: return "none";
    case ShockKind::kParam: return "param";
    case ShockKind::kStateEps: return "state_eps";
    case ShockKind::kSwitch: return "switch";
  }
  fail("bad shock kind");
}

SystemKind system_from_string(const std::string& s) {
  static const std::map<std::string, SystemKind> m = {
      {"lorenz63", SystemKind::kLorenz63},
      {"rossler", SystemKind::kRossler},
      {"chua", SystemKind::kChua},
      {"lorenz96", SystemKind::kLorenz96},
      {"ou", SystemKind::kOrnsteinUhlenbeck},
      {"double_well", SystemKind::kDoubleWell},
      {"slds", SystemKind::kSlds},
      {"seasonal_ar", SystemKind::kSeasonalAr},
      {"garch", SystemKind::kGarch},
  };
  const auto it = m.find(s);
  if (it == m.end()) fail("unknown system '" + s + "'");
  return it->second;
}

Method method_from_string(const std::string& s) {
  if (s == "rk4") return Method::kRk4;
  if (s == "euler") return Method::kEuler;
  if (s == "discrete") return Method::kDiscrete;
  fail("unknown method '" + s + "'");
}

ShockKind shock_from_string(const std::string& s) {
  if (s == "none") return ShockKind::kNone;
  if (s == "param") return ShockKind::kParam;
  if (s == "state_eps") return ShockKind::kStateEps;
  if (s == "switch") return ShockKind::kSwitch;
  fail("unknown shock kind '" + s + "'");
}

void SystemSpec::validate() const {
  const SystemTraits& t = traits(system);
  if (method != t.method) {
    fail(to_string(system) + " must use method " + to_string(t.method));
  }
  if (steps == 0) fail("steps must be positive");
  if (!(dt > 0.0)) fail("dt must be positive");
  if (dim() < t.min_dim || dim() > t.max_dim) {
    fail(to_string(system) + ": initial_cond has dimension " +
         std::to_string(dim()));
  }
  std::set<std::string> expected(t.params.begin(), t.params.end());
  for (const auto& [k, v] : params) {
    if (!expected.count(k)) {
      fail(to_string(system) + ": unknown param '" + k + "'");
    }
    (void)v;
  }
  for (const std::string& k : t.params) {
    if (!params.count(k)) {
      fail(to_string(system) + ": missing param '" + k + "'");
    }
  }
  if (system == SystemKind::kGarch) {
    if (!(params.at("omega") > 0.0)) fail("garch: omega must be positive");
    if (!(params.at("alpha") + params.at("beta") < 1.0)) {
      fail("garch: alpha + beta must be below 1");
    }
  }
  if (system == SystemKind::kSlds) {
    for (const char* k : {"p11", "p22"}) {
      const double p = params.at(k);
      if (!(p > 0.0 && p < 1.0)) fail("slds: stay probabilities in (0,1)");
    }
    if (params.at("q1") < 0.0 || params.at("q2") < 0.0) {
      fail("slds: noise variances must be nonnegative");
    }
  }
  if (system == SystemKind::kSeasonalAr && !(params.at("period") >= 1.0)) {
    fail("seasonal_ar: period must be at least 1");
  }
}

std::vector<double> derivative(const SystemSpec& spec,
                               const std::vector<double>& state) {
  const auto& p = spec.params;
  switch (spec.system) {
    case SystemKind::kLorenz63: {
      const double sigma = p.at("sigma"), rho = p.at("rho"),
                   beta = p.at("beta");
      const double x = state[0], y = state[1], z = state[2];
      return {sigma * (y - x), x * (rho - z) - y, x * y - beta * z};
    }
    case SystemKind::kRossler: {
      const double a = p.at("a"), b = p.at("b"), c = p.at("c");
      const double x = state[0], y = state[1], z = state[2];
      return {-y - z, x + a * y, b + z * (x - c)};
    }
    case SystemKind::kChua: {
      const double alpha = p.at("alpha"), beta = p.at("beta");
      const double m0 = p.at("m0"), m1 = p.at("m1");
      const double x = state[0], y = state[1], z = state[2];
      return {alpha * (y - x - chua_diode(x, m0, m1)), x - y + z, -beta * y};
    }
    case SystemKind::kLorenz96: {
      const double f = p.at("forcing");
      const std::size_t d = state.size();
      std::vector<double> out(d);
      for (std::size_t j = 0; j < d; ++j) {
        const double xp1 = state[(j + 1) % d];
        const double xm1 = state[(j + d - 1) % d];
        const double xm2 = state[(j + d - 2) % d];
        out[j] = (xp1 - xm2) * xm1 - state[j] + f;
      }
      return out;
    }
    default:
      fail("derivative is only defined for the ODE systems");
  }
}

std::vector<double> rk4_step(const SystemSpec& spec,
                             const std::vector<double>& state) {
  const double dt = spec.dt;
  const std::size_t d = state.size();
  const std::vector<double> k1 = derivative(spec, state);
  std::vector<double> tmp(d);
  for (std::size_t j = 0; j < d; ++j) tmp[j] = state[j] + 0.5 * dt * k1[j];
  const std::vector<double> k2 = derivative(spec, tmp);
  for (std::size_t j = 0; j < d; ++j) tmp[j] = state[j] + 0.5 * dt * k2[j];
  const std::vector<double> k3 = derivative(spec, tmp);
  for (std::size_t j = 0; j < d; ++j) tmp[j] = state[j] + dt * k3[j];
  const std::vector<double> k4 = derivative(spec, tmp);
  std::vector<double> out(d);
  for (std::size_t j = 0; j < d; ++j) {
    out[j] = state[j] +
             dt / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]);
  }
  return out;
}

double euler_maruyama_step(const SystemSpec& spec, double x, double xi) {
  const auto& p = spec.params;
  double drift = 0.0, sigma = 0.0;
  switch (spec.system) {
    case SystemKind::kOrnsteinUhlenbeck:
      drift = p.at("theta") * (p.at("mu") - x);
      sigma = p.at("sigma");
      break;
    case SystemKind::kDoubleWell:
      drift = p.at("a") * x - x * x * x;
      sigma = p.at("sigma");
      break;
    default:
      fail("euler_maruyama_step is only defined for the SDE systems");
  }
  return x + drift * spec.dt + sigma * std::sqrt(spec.dt) * xi;
}

Trajectory simulate(const SystemSpec& spec0, const ShockSpec& shock) {
  spec0.validate();

  std::int64_t shock_index = -1;
  if (shock.kind != ShockKind::kNone) {
    if (!(shock.frac > 0.0 && shock.frac < 1.0)) {
      fail("shock frac must lie in (0,1)");
    }
    shock_index = static_cast<std::int64_t>(
        std::floor(shock.frac * static_cast<double>(spec0.steps)));
    if (shock_index < 1 ||
        shock_index >= static_cast<std::int64_t>(spec0.steps)) {
      fail("shock index must fall strictly inside the trajectory");
    }
    const auto& allowed = traits(spec0.system).params;
    for (const auto& [k, v] : shock.param_updates) {
      if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
        fail("shock updates unknown param '" + k + "'");
      }
      (void)v;
    }
    if (!shock.new_initial_cond.empty() &&
        shock.new_initial_cond.size() != spec0.dim()) {
      fail("shock initial_cond has the wrong dimension");
    }
    if (shock.kind != ShockKind::kSwitch && !shock.new_initial_cond.empty()) {
      fail("only switch shocks may replace the initial condition");
    }
  }

  SystemSpec spec = spec0;
  std::vector<double> state = spec.initial_cond;
  rng::Stream noise = rng::Stream(spec.seed).split("traj");

  int regime = 0;
  double garch_var = 0.0;
  std::uint64_t ar_t = 0;
  auto reset_latent = [&] {
    regime = 0;
    ar_t = 0;
    if (spec.system == SystemKind::kGarch) {
      garch_var = garch_stationary_var(spec);
    }
  };
  reset_latent();

  const std::size_t d = spec.dim();
  num::Tensor values({spec.steps, d});

  for (std::size_t i = 0; i < spec.steps; ++i) {
    if (static_cast<std::int64_t>(i) == shock_index) {
      for (const auto& [k, v] : shock.param_updates) spec.params[k] = v;
      switch (shock.kind) {
        case ShockKind::kStateEps:
          for (double& s : state) s += shock.state_eps;
          break;
        case ShockKind::kSwitch:
          state = shock.new_initial_cond.empty() ? spec0.initial_cond
                                                 : shock.new_initial_cond;
          reset_latent();
          break;
        default:
          break;
      }
    }

    switch (spec.system) {
      case SystemKind::kLorenz63:
      case SystemKind::kRossler:
      case SystemKind::kChua:
      case SystemKind::kLorenz96:
        state = rk4_step(spec, state);
        break;
      case SystemKind::kOrnsteinUhlenbeck:
      case SystemKind::kDoubleWell:
        state[0] = euler_maruyama_step(spec, state[0], noise.normal());
        break;
      case SystemKind::kSlds: {
        const double xi = noise.normal();
        const auto& p = spec.params;
        const double a = regime == 0 ? p.at("a1") : p.at("a2");
        const double q = regime == 0 ? p.at("q1") : p.at("q2");
        state[0] = a * state[0] + std::sqrt(q) * xi;
        const double u = noise.uniform();
        const double stay = regime == 0 ? p.at("p11") : p.at("p22");
        if (u >= stay) regime ^= 1;
        break;
      }
      case SystemKind::kSeasonalAr: {
        const double xi = noise.normal();
        const auto& p = spec.params;
        const double amp =
            p.at("a0") + p.at("amp_drift") * static_cast<double>(ar_t);
        state[0] = amp * std::cos(2.0 * std::numbers::pi *
                                  static_cast<double>(ar_t) /
                                  p.at("period")) +
                   p.at("phi") * state[0] + p.at("sigma") * xi;
        ++ar_t;
        break;
      }
      case SystemKind::kGarch: {
        const double xi = noise.normal();
        const auto& p = spec.params;
        garch_var = p.at("omega") + p.at("alpha") * state[0] * state[0] +
                    p.at("beta") * garch_var;
        state[0] = std::sqrt(garch_var) * xi;
        break;
      }
    }

    for (std::size_t j = 0; j < d; ++j) {
      if (!std::isfinite(state[j])) {
        fail("state blew up at step " + std::to_string(i));
      }
      values[i * d + j] = state[j];
    }
  }

  Trajectory out;
  out.values = std::move(values);
  out.spec = spec0;
  out.shock = shock;
  out.shock_index = shock_index;
  return out;
}

namespace {

std::vector<Scenario> build_registry() {
  std::vector<Scenario> r;
  auto add = [&r](std::string id, SystemKind sys, double dt,
                  std::size_t steps, std::map<std::string, double> params,
                  std::vector<double> ic, Method m, std::uint64_t seed,
                  ShockSpec shock = {}) {
    SystemSpec spec;
    spec.system = sys;
    spec.dt = dt;
    spec.steps = steps;
    spec.params = std::move(params);
    spec.initial_cond = std::move(ic);
    spec.method = m;
    spec.seed = seed;
    r.push_back({std::move(id), std::move(spec), std::move(shock)});
  };
  auto param_shock = [](std::map<std::string, double> updates) {
    ShockSpec s;
    s.kind = ShockKind::kParam;
    s.param_updates = std::move(updates);
    return s;
  };
  auto state_shock = [](double eps) {
    ShockSpec s;
    s.kind = ShockKind::kStateEps;
    s.state_eps = eps;
    return s;
  };
  auto switch_shock = [](std::map<std::string, double> updates,
                         std::vector<double> ic) {
    ShockSpec s;
    s.kind = ShockKind::kSwitch;
    s.param_updates = std::move(updates);
    s.new_initial_cond = std::move(ic);
    return s;
  };

  const std::map<std::string, double> lorenz{{
      {"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}}};
  const std::vector<double> lorenz_ic{1.0, 0.98, 1.1};
  add("LORENZ_MAIN", SystemKind::kLorenz63, 0.01, 25000, lorenz, lorenz_ic,
      Method::kRk4, 7);
  add("LORENZ_BASE", SystemKind::kLorenz63, 0.01, 35999, lorenz, lorenz_ic,
      Method::kRk4, 7);
  add("LORENZ_PARAM", SystemKind::kLorenz63, 0.01, 35999, lorenz, lorenz_ic,
      Method::kRk4, 7,
      param_shock({{"sigma", 10.1}, {"rho", 28.1}, {"beta", 8.1 / 3.0}}));
  add("LORENZ_STATE", SystemKind::kLorenz63, 0.01, 35999, lorenz, lorenz_ic,
      Method::kRk4, 7, state_shock(0.9));
  add("LORENZ_SWITCH", SystemKind::kLorenz63, 0.01, 35999, lorenz, lorenz_ic,
      Method::kRk4, 7,
      switch_shock({{"rho", 28.1}}, {1.002, 0.982, 1.102}));

  const std::map<std::string, double> rossler{
      {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}}};
  const std::vector<double> rossler_ic{1.0, 1.0, 1.0};
  add("ROSSLER_MAIN", SystemKind::kRossler, 0.01, 25000, rossler, rossler_ic,
      Method::kRk4, 7);
  add("ROSSLER_BASE", SystemKind::kRossler, 0.01, 35999, rossler, rossler_ic,
      Method::kRk4, 7);
  add("ROSSLER_PARAM", SystemKind::kRossler, 0.01, 35999, rossler,
      rossler_ic, Method::kRk4, 7,
      param_shock({{"a", 0.25}, {"b", 0.25}, {"c", 5.75}}));

  const std::map<std::string, double> chua{{{"alpha", 15.6},
                                            {"beta", 28.0},
                                            {"m0", -8.0 / 7.0},
                                            {"m1", -5.0 / 7.0}}};
  const std::vector<double> chua_ic{0.1, 0.0, 0.0};
  add("CHUA_MAIN", SystemKind::kChua, 0.005, 35000, chua, chua_ic,
      Method::kRk4, 7);
  add("CHUA_BASE", SystemKind::kChua, 0.005, 35999, chua, chua_ic,
      Method::kRk4, 7);
  add("CHUA_PARAM", SystemKind::kChua, 0.005, 35999, chua, chua_ic,
      Method::kRk4, 7,
      param_shock({{"alpha", 15.9},
                   {"beta", 28.5},
                   {"m0", -8.1 / 7.0},
                   {"m1", -5.2 / 7.0}}));
  add("CHUA_SWITCH", SystemKind::kChua, 0.005, 35999, chua, chua_ic,
      Method::kRk4, 7, switch_shock({}, {0.11, 0.01, 0.02}));

  add("LORENZ96_BASE", SystemKind::kLorenz96, 0.007, 55000,
      {{"forcing", 8.0}}, {1.0, 1.01, 0.99, 1.02, 0.98, 1.03}, Method::kRk4,
      7);
  add("LORENZ96_SWITCH", SystemKind::kLorenz96, 0.007, 55000,
      {{"forcing", 8.0}}, {1.0, 1.01, 0.99, 1.02, 0.98, 1.03}, Method::kRk4,
      7,
      switch_shock({{"forcing", 9.0}},
                   {0.99, 1.02, 1.02, 1.03, 1.01, 1.01}));

  const std::map<std::string, double> ou{
      {{"theta", 0.2}, {"mu", 0.0}, {"sigma", 0.3}}};
  add("OU_BASE", SystemKind::kOrnsteinUhlenbeck, 0.5, 25000, ou, {0.0},
      Method::kEuler, 7);
  add("OU_PARAM", SystemKind::kOrnsteinUhlenbeck, 0.5, 25000, ou, {0.0},
      Method::kEuler, 7, param_shock({{"mu", 0.5}}));

  const std::map<std::string, double> slds{{{"a1", 0.9},
                                            {"q1", 0.05},
                                            {"a2", 0.98},
                                            {"q2", 0.35},
                                            {"p11", 0.94},
                                            {"p22", 0.95}}};
  add("SLDS_BASE", SystemKind::kSlds, 0.01, 25000, slds, {0.0},
      Method::kDiscrete, 7);
  add("SLDS_PARAM", SystemKind::kSlds, 0.01, 25000, slds, {0.0},
      Method::kDiscrete, 7,
      param_shock({{"a1", 0.83},
                   {"q1", 0.50},
                   {"a2", 0.97},
                   {"q2", 0.30},
                   {"p11", 0.96},
                   {"p22", 0.92}}));
  add("SLDS_SWITCH", SystemKind::kSlds, 0.01, 25000, slds, {0.0},
      Method::kDiscrete, 7,
      switch_shock({{"a1", 0.87},
                    {"q1", 0.07},
                    {"a2", 0.99},
                    {"q2", 0.45},
                    {"p11", 0.90},
                    {"p22", 0.95}},
                   {}));

  const std::map<std::string, double> dwell{{{"a", 1.5}, {"sigma", 0.25}}};
  add("DOUBLEWELL_BASE", SystemKind::kDoubleWell, 0.5, 25000, dwell, {1.0},
      Method::kEuler, 1955);
  add("DOUBLEWELL_PARAM", SystemKind::kDoubleWell, 0.5, 25000, dwell, {1.0},
      Method::kEuler, 1955, param_shock({{"a", 1.0}, {"sigma", 0.35}}));
  add("DOUBLEWELL_SWITCH", SystemKind::kDoubleWell, 0.5, 25000, dwell, {1.0},
      Method::kEuler, 1955, switch_shock({{"a", 1.0}, {"sigma", 0.35}}, {}));

  const std::map<std::string, double> sar{{{"period", 24.0},
                                           {"phi", 0.5},
                                           {"sigma", 0.2},
                                           {"a0", 1.0},
                                           {"amp_drift", 0.0}}};
  add("SEASONAL_AR_BASE", SystemKind::kSeasonalAr, 0.01, 25000, sar, {0.0},
      Method::kDiscrete, 7);
  add("SEASONAL_AR_PARAM", SystemKind::kSeasonalAr, 0.01, 25000, sar, {0.0},
      Method::kDiscrete, 7,
      param_shock({{"a0", 1.4}, {"sigma", 0.35}, {"phi", 0.8}}));

  const std::map<std::string, double> garch{
      {{"omega", 0.01}, {"alpha", 0.06}, {"beta", 0.90}}};
  add("GARCH_BASE", SystemKind::kGarch, 0.01, 25000, garch, {0.0},
      Method::kDiscrete, 7);
  add("GARCH_PARAM", SystemKind::kGarch, 0.01, 25000, garch, {0.0},
      Method::kDiscrete, 7,
      param_shock({{"omega", 0.03}, {"alpha", 0.15}, {"beta", 0.70}}));

  return r;
}

const std::vector<Scenario>& registry() {
  static const std::vector<Scenario> r = build_registry();
  return r;
}

}  // namespace

const std::vector<std::string>& premade_ids() {
  static const std::vector<std::string> ids = [] {
    std::vector<std::string> v;
    for (const Scenario& s : registry()) v.push_back(s.id);
    return v;
  }();
  return ids;
}

Scenario premade(const std::string& id) {
  for (const Scenario& s : registry()) {
    if (s.id == id) return s;
  }
  std::string known;
  for (const std::string& k : premade_ids()) {
    if (!known.empty()) known += ", ";
    known += k;
  }
  fail("unknown scenario '" + id + "'; known scenarios: " + known);
}

void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  const std::size_t d = traj.spec.dim();
  for (std::size_t j = 0; j < d; ++j) {
    if (j) out << ',';
    out << 'x' << j;
  }
  out << '\n';
  const std::size_t steps = traj.spec.steps;
  for (std::size_t i = 0; i < steps; ++i) {
    for (std::size_t j = 0; j < d; ++j) {
      if (j) out << ',';
      out << io::format_double(traj.values[i * d + j]);
    }
    out << '\n';
  }
}

void write_trajectory_sidecar(const Trajectory& traj,
                              const std::filesystem::path& path,
                              const std::string& scenario_id) {
  nlohmann::json j;
  j["schema"] = "fern-trajectory-v1";
  if (!scenario_id.empty()) j["scenario"] = scenario_id;
  j["system"] = to_string(traj.spec.system);
  j["method"] = to_string(traj.spec.method);
  j["dt"] = traj.spec.dt;
  j["steps"] = traj.spec.steps;
  j["seed"] = traj.spec.seed;
  j["params"] = traj.spec.params;
  j["initial_cond"] = traj.spec.initial_cond;
  nlohmann::json shock;
  shock["kind"] = to_string(traj.shock.kind);
  shock["index"] = traj.shock_index;
  if (traj.shock.kind != ShockKind::kNone) {
    shock["frac"] = traj.shock.frac;
    if (!traj.shock.param_updates.empty()) {
      shock["param_updates"] = traj.shock.param_updates;
    }
    if (traj.shock.kind == ShockKind::kStateEps) {
      shock["state_eps"] = traj.shock.state_eps;
    }
    if (!traj.shock.new_initial_cond.empty()) {
      shock["initial_cond"] = traj.shock.new_initial_cond;
    }
  }
  j["shock"] = std::move(shock);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

}  // namespace fern::gen
