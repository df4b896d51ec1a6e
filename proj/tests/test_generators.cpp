#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <stdexcept>
#include <vector>

#include <nlohmann/json.hpp>

#include "fern/csv.hpp"
#include "fern/generators.hpp"
#include "fern/rng.hpp"

namespace gen = fern::gen;
namespace io = fern::io;
using gen::Method;
using gen::ShockKind;
using gen::ShockSpec;
using gen::SystemKind;
using gen::SystemSpec;

namespace {

SystemSpec make_spec(SystemKind sys, double dt, std::size_t steps,
                     std::map<std::string, double> params,
                     std::vector<double> ic, Method m,
                     std::uint64_t seed = 7) {
  SystemSpec s;
  s.system = sys;
  s.dt = dt;
  s.steps = steps;
  s.params = std::move(params);
  s.initial_cond = std::move(ic);
  s.method = m;
  s.seed = seed;
  return s;
}

SystemSpec lorenz_spec(double dt, std::size_t steps) {
  return make_spec(SystemKind::kLorenz63, dt, steps,
                   {{"sigma", 10.0}, {"rho", 28.0}, {"beta", 8.0 / 3.0}},
                   {1.0, 0.98, 1.1}, Method::kRk4);
}

SystemSpec ou_spec(std::uint64_t seed) {
  return make_spec(SystemKind::kOrnsteinUhlenbeck, 0.5, 25000,
                   {{"theta", 0.2}, {"mu", 0.0}, {"sigma", 0.3}}, {0.0},
                   Method::kEuler, seed);
}

double population_var(const fern::num::Tensor& v) {
  double m = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) m += v[i];
  m /= static_cast<double>(v.size());
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) s += (v[i] - m) * (v[i] - m);
  return s / static_cast<double>(v.size());
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / name;
}

}  // namespace

TEST_CASE("vector fields match hand-worked values") {
  const SystemSpec lorenz = lorenz_spec(0.01, 10);
  const std::vector<double> dl = gen::derivative(lorenz, {1.0, 1.0, 1.0});
  CHECK(dl[0] == 0.0);
  CHECK(dl[1] == 26.0);
  CHECK(dl[2] == doctest::Approx(-5.0 / 3.0).epsilon(1e-15));

  const SystemSpec rossler =
      make_spec(SystemKind::kRossler, 0.01, 10,
                {{"a", 0.2}, {"b", 0.2}, {"c", 5.7}}, {1.0, 1.0, 1.0},
                Method::kRk4);
  const std::vector<double> dr = gen::derivative(rossler, {0.0, 0.0, 0.0});
  CHECK(dr[0] == 0.0);
  CHECK(dr[1] == 0.0);
  CHECK(dr[2] == 0.2);

  const SystemSpec chua = make_spec(
      SystemKind::kChua, 0.005, 10,
      {{"alpha", 15.6}, {"beta", 28.0}, {"m0", -8.0 / 7.0}, {"m1", -5.0 / 7.0}},
      {0.1, 0.0, 0.0}, Method::kRk4);
  const std::vector<double> dc0 = gen::derivative(chua, {0.0, 0.0, 0.0});
  CHECK(dc0[0] == 0.0);
  CHECK(dc0[1] == 0.0);
  CHECK(dc0[2] == 0.0);
  // At x = 1 the piecewise diode evaluates to exactly m0, so the first
  // component is alpha * (0 - 1 - m0).
  const std::vector<double> dc1 = gen::derivative(chua, {1.0, 0.0, 0.0});
  CHECK(dc1[0] == doctest::Approx(15.6 * (8.0 / 7.0 - 1.0)).epsilon(1e-14));
  CHECK(dc1[1] == 1.0);
  CHECK(dc1[2] == 0.0);

  const SystemSpec l96 =
      make_spec(SystemKind::kLorenz96, 0.007, 10, {{"forcing", 8.0}},
                {0.0, 0.0, 0.0, 0.0, 0.0, 0.0}, Method::kRk4);
  for (double v : gen::derivative(l96, {0.0, 0.0, 0.0, 0.0, 0.0, 0.0})) {
    CHECK(v == 8.0);
  }

  CHECK_THROWS_AS((void)gen::derivative(ou_spec(7), {0.0}),
                  std::runtime_error);
}

TEST_CASE("cyclic neighbor indexing in the high-dimensional field") {
  // With state e_0 the quadratic term only feeds coordinates whose cyclic
  // neighbors touch index 0.
  const std::size_t d = 6;
  SystemSpec l96 = make_spec(SystemKind::kLorenz96, 0.007, 10,
                             {{"forcing", 0.0}},
                             std::vector<double>(d, 0.0), Method::kRk4);
  std::vector<double> state(d, 0.0);
  state[0] = 1.0;
  const std::vector<double> dd = gen::derivative(l96, state);
  // j=0: -x_0 = -1; j=1: (x_2-x_5)x_0 = 0; j=2: x_0 appears twice removed;
  // only j=1 has x_{j-1}=x_0 multiplying (x_2 - x_5) = 0, j=5 has
  // x_{j+1}=x_0: (1 - x_3) x_4 = 0. So only the decay term survives.
  CHECK(dd[0] == -1.0);
  for (std::size_t j = 1; j < d; ++j) CHECK(dd[j] == 0.0);

  // Shift the impulse so the quadratic term fires: state = e_1 + e_2.
  std::vector<double> s2(d, 0.0);
  s2[1] = 1.0;
  s2[2] = 1.0;
  const std::vector<double> d2 = gen::derivative(l96, s2);
  // j=2: (x_3 - x_0) x_1 - x_2 = 0 - 1 = -1; j=3: (x_4 - x_1) x_2 - x_3 =
  // -1; j=1: (x_2 - x_5) x_0 - x_1 = -1.
  CHECK(d2[1] == -1.0);
  CHECK(d2[2] == -1.0);
  CHECK(d2[3] == -1.0);
}

TEST_CASE("runge-kutta step reproduces exponential decay") {
  // sigma=1, rho=0, beta=1 pins the y=z=0 plane, where the x equation is
  // exactly dx/dt = -x through the production stepper.
  SystemSpec dec = make_spec(SystemKind::kLorenz63, 0.1, 10,
                             {{"sigma", 1.0}, {"rho", 0.0}, {"beta", 1.0}},
                             {1.0, 0.0, 0.0}, Method::kRk4);
  const std::vector<double> one = gen::rk4_step(dec, {1.0, 0.0, 0.0});
  CHECK(one[1] == 0.0);
  CHECK(one[2] == 0.0);
  CHECK(std::abs(one[0] - std::exp(-0.1)) < 1e-7);
}

TEST_CASE("runge-kutta global error decays at fourth order") {
  SystemSpec dec = make_spec(SystemKind::kLorenz63, 0.1, 10,
                             {{"sigma", 1.0}, {"rho", 0.0}, {"beta", 1.0}},
                             {1.0, 0.0, 0.0}, Method::kRk4);
  const gen::Trajectory coarse = gen::simulate(dec);
  dec.dt = 0.05;
  dec.steps = 20;
  const gen::Trajectory fine = gen::simulate(dec);
  const double truth = std::exp(-1.0);
  const double e1 = std::abs(coarse.values[9 * 3] - truth);
  const double e2 = std::abs(fine.values[19 * 3] - truth);
  CHECK(e1 / e2 > 14.0);
  CHECK(e1 / e2 < 18.0);
}

TEST_CASE("noise-free mean reversion is a plain contraction") {
  SystemSpec ou = make_spec(SystemKind::kOrnsteinUhlenbeck, 0.5, 3,
                            {{"theta", 0.2}, {"mu", 0.0}, {"sigma", 0.0}},
                            {1.0}, Method::kEuler);
  CHECK(gen::euler_maruyama_step(ou, 1.0, 3.75) == 0.9);
  const gen::Trajectory t = gen::simulate(ou);
  CHECK(t.values[0] == 0.9);
  CHECK(t.values[1] == 0.9 * 0.9);
  CHECK(t.values[2] == 0.9 * 0.9 * 0.9);
}

TEST_CASE("stochastic mean reversion follows the recurrence bit for bit") {
  const std::uint64_t seed = 123;
  SystemSpec ou = ou_spec(seed);
  ou.steps = 100;
  const gen::Trajectory t = gen::simulate(ou);

  fern::rng::Stream noise = fern::rng::Stream(seed).split("traj");
  double x = 0.0;
  const double theta = 0.2, mu = 0.0, sigma = 0.3, dt = 0.5;
  for (std::size_t i = 0; i < 100; ++i) {
    const double xi = noise.normal();
    const double drift = theta * (mu - x);
    x = x + drift * dt + sigma * std::sqrt(dt) * xi;
    CHECK(t.values[i] == x);
  }
}

TEST_CASE("mean-reversion long-run variance sits near the diffusion value") {
  // Pinned seed: the sampling variability of a 25k-step run is comparable
  // to the tolerance, so the seed is part of the test contract.
  const gen::Trajectory t = gen::simulate(ou_spec(34));
  const double var = population_var(t.values);
  CHECK(var > 0.95 * 0.225);
  CHECK(var < 1.05 * 0.225);
}

TEST_CASE("volatility clustering long-run variance matches stationarity") {
  SystemSpec g = make_spec(SystemKind::kGarch, 0.01, 25000,
                           {{"omega", 0.01}, {"alpha", 0.06}, {"beta", 0.90}},
                           {0.0}, Method::kDiscrete, 34);
  const gen::Trajectory t = gen::simulate(g);
  const double var = population_var(t.values);
  CHECK(var > 0.90 * 0.25);
  CHECK(var < 1.10 * 0.25);
}

TEST_CASE("volatility recursion starts from the stationary variance") {
  SystemSpec g = make_spec(SystemKind::kGarch, 0.01, 8,
                           {{"omega", 0.01}, {"alpha", 0.06}, {"beta", 0.90}},
                           {0.0}, Method::kDiscrete, 77);
  const gen::Trajectory t = gen::simulate(g);

  fern::rng::Stream noise = fern::rng::Stream(77).split("traj");
  const double omega = 0.01, alpha = 0.06, beta = 0.90;
  double var = omega / (1.0 - alpha - beta);
  double x = 0.0;
  for (std::size_t i = 0; i < 8; ++i) {
    const double xi = noise.normal();
    var = omega + alpha * x * x + beta * var;
    x = std::sqrt(var) * xi;
    CHECK(t.values[i] == x);
  }
}

TEST_CASE("regime switching consumes one normal then one uniform per step") {
  SystemSpec s = make_spec(SystemKind::kSlds, 0.01, 40,
                           {{"a1", 0.0},
                            {"q1", 1.0},
                            {"a2", 0.0},
                            {"q2", 4.0},
                            {"p11", 0.5},
                            {"p22", 0.5}},
                           {5.0}, Method::kDiscrete, 99);
  const gen::Trajectory t = gen::simulate(s);

  fern::rng::Stream noise = fern::rng::Stream(99).split("traj");
  int regime = 0;
  bool saw_high_regime = false;
  for (std::size_t i = 0; i < 40; ++i) {
    const double xi = noise.normal();
    const double q = regime == 0 ? 1.0 : 4.0;
    CHECK(t.values[i] == std::sqrt(q) * xi);
    const double u = noise.uniform();
    if (u >= 0.5) regime ^= 1;
    if (regime == 1) saw_high_regime = true;
  }
  CHECK(saw_high_regime);
}

TEST_CASE("seasonal autoregression tracks its phase counter") {
  SystemSpec s = make_spec(SystemKind::kSeasonalAr, 0.01, 6,
                           {{"period", 4.0},
                            {"phi", 0.5},
                            {"sigma", 0.0},
                            {"a0", 2.0},
                            {"amp_drift", 0.25}},
                           {0.0}, Method::kDiscrete);
  const gen::Trajectory t = gen::simulate(s);
  CHECK(t.values[0] == 2.0);
  double x = 0.0;
  for (std::size_t i = 0; i < 6; ++i) {
    const double amp = 2.0 + 0.25 * static_cast<double>(i);
    x = amp * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) /
                       4.0) +
        0.5 * x;
    CHECK(t.values[i] == x);
  }
}

TEST_CASE("spec validation rejects malformed systems") {
  SystemSpec ok = lorenz_spec(0.01, 10);
  CHECK_NOTHROW(ok.validate());

  SystemSpec missing = ok;
  missing.params.erase("rho");
  CHECK_THROWS_AS(missing.validate(), std::runtime_error);

  SystemSpec extra = ok;
  extra.params["gamma"] = 1.0;
  CHECK_THROWS_AS(extra.validate(), std::runtime_error);

  SystemSpec wrong_method = ok;
  wrong_method.method = Method::kEuler;
  CHECK_THROWS_AS(wrong_method.validate(), std::runtime_error);

  SystemSpec wrong_dim = ok;
  wrong_dim.initial_cond = {1.0};
  CHECK_THROWS_AS(wrong_dim.validate(), std::runtime_error);

  SystemSpec no_steps = ok;
  no_steps.steps = 0;
  CHECK_THROWS_AS(no_steps.validate(), std::runtime_error);

  SystemSpec bad_dt = ok;
  bad_dt.dt = 0.0;
  CHECK_THROWS_AS(bad_dt.validate(), std::runtime_error);

  SystemSpec garch = make_spec(
      SystemKind::kGarch, 0.01, 10,
      {{"omega", 0.01}, {"alpha", 0.5}, {"beta", 0.5}}, {0.0},
      Method::kDiscrete);
  CHECK_THROWS_AS(garch.validate(), std::runtime_error);

  SystemSpec slds = make_spec(SystemKind::kSlds, 0.01, 10,
                              {{"a1", 0.9},
                               {"q1", 0.05},
                               {"a2", 0.98},
                               {"q2", 0.35},
                               {"p11", 1.0},
                               {"p22", 0.95}},
                              {0.0}, Method::kDiscrete);
  CHECK_THROWS_AS(slds.validate(), std::runtime_error);

  SystemSpec small96 =
      make_spec(SystemKind::kLorenz96, 0.007, 10, {{"forcing", 8.0}},
                {1.0, 1.0, 1.0}, Method::kRk4);
  CHECK_THROWS_AS(small96.validate(), std::runtime_error);
}

TEST_CASE("shock validation rejects malformed shocks") {
  SystemSpec spec = lorenz_spec(0.01, 100);

  ShockSpec bad_frac;
  bad_frac.kind = ShockKind::kParam;
  bad_frac.frac = 0.0;
  CHECK_THROWS_AS((void)gen::simulate(spec, bad_frac), std::runtime_error);
  bad_frac.frac = 1.0;
  CHECK_THROWS_AS((void)gen::simulate(spec, bad_frac), std::runtime_error);

  // floor(0.001 * 100) = 0 lands on the first row, which is not strictly
  // inside the trajectory.
  ShockSpec too_early;
  too_early.kind = ShockKind::kParam;
  too_early.frac = 0.001;
  CHECK_THROWS_AS((void)gen::simulate(spec, too_early), std::runtime_error);

  ShockSpec unknown;
  unknown.kind = ShockKind::kParam;
  unknown.param_updates = {{"gamma", 1.0}};
  CHECK_THROWS_AS((void)gen::simulate(spec, unknown), std::runtime_error);

  ShockSpec ic_on_param;
  ic_on_param.kind = ShockKind::kParam;
  ic_on_param.new_initial_cond = {1.0, 1.0, 1.0};
  CHECK_THROWS_AS((void)gen::simulate(spec, ic_on_param),
                  std::runtime_error);

  ShockSpec bad_ic;
  bad_ic.kind = ShockKind::kSwitch;
  bad_ic.new_initial_cond = {1.0};
  CHECK_THROWS_AS((void)gen::simulate(spec, bad_ic), std::runtime_error);
}

TEST_CASE("parameter shock diverges exactly at the shock row") {
  const gen::Scenario base = gen::premade("LORENZ_BASE");
  const gen::Scenario shocked = gen::premade("LORENZ_PARAM");
  const gen::Trajectory tb = gen::simulate(base.spec, base.shock);
  const gen::Trajectory ts = gen::simulate(shocked.spec, shocked.shock);

  CHECK(tb.shock_index == -1);
  CHECK(ts.shock_index == 12599);
  REQUIRE(tb.values.rows() == 35999);
  REQUIRE(ts.values.rows() == 35999);

  for (std::size_t i = 0; i < 12599 * 3; ++i) {
    REQUIRE(tb.values[i] == ts.values[i]);
  }
  bool differs = false;
  for (std::size_t j = 0; j < 3; ++j) {
    differs = differs || tb.values[12599 * 3 + j] != ts.values[12599 * 3 + j];
  }
  CHECK(differs);
}

TEST_CASE("state nudge diverges exactly at the shock row") {
  const gen::Scenario base = gen::premade("LORENZ_BASE");
  const gen::Scenario shocked = gen::premade("LORENZ_STATE");
  const gen::Trajectory tb = gen::simulate(base.spec, base.shock);
  const gen::Trajectory ts = gen::simulate(shocked.spec, shocked.shock);

  CHECK(ts.shock_index == 12599);
  for (std::size_t i = 0; i < 12599 * 3; ++i) {
    REQUIRE(tb.values[i] == ts.values[i]);
  }
  bool differs = false;
  for (std::size_t j = 0; j < 3; ++j) {
    differs = differs || tb.values[12599 * 3 + j] != ts.values[12599 * 3 + j];
  }
  CHECK(differs);

  // The shocked row is one step from the nudged previous state.
  SystemSpec spec = shocked.spec;
  std::vector<double> prev{tb.values[12598 * 3 + 0] + 0.9,
                           tb.values[12598 * 3 + 1] + 0.9,
                           tb.values[12598 * 3 + 2] + 0.9};
  const std::vector<double> next = gen::rk4_step(spec, prev);
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(ts.values[12599 * 3 + j] == next[j]);
  }
}

TEST_CASE("regime switch restarts the state but not the noise stream") {
  const gen::Scenario sc = gen::premade("DOUBLEWELL_SWITCH");
  const gen::Trajectory t = gen::simulate(sc.spec, sc.shock);
  CHECK(t.shock_index == 8750);

  // Walk the stream to the draw consumed by the shocked step.
  fern::rng::Stream noise = fern::rng::Stream(1955).split("traj");
  for (std::size_t i = 0; i < 8750; ++i) (void)noise.normal();
  const double xi = noise.normal();

  // State restarts from the original initial condition 1.0 and the drift
  // under the post-shock parameters (a=1.0) vanishes there.
  const double x = 1.0;
  const double drift = 1.0 * x - x * x * x;
  const double expected = x + drift * 0.5 + 0.35 * std::sqrt(0.5) * xi;
  CHECK(t.values[8750] == expected);
}

TEST_CASE("regime switch resets the volatility recursion") {
  SystemSpec g = make_spec(SystemKind::kGarch, 0.01, 100,
                           {{"omega", 0.01}, {"alpha", 0.06}, {"beta", 0.90}},
                           {0.0}, Method::kDiscrete, 11);
  ShockSpec sw;
  sw.kind = ShockKind::kSwitch;
  sw.frac = 0.5;
  sw.param_updates = {{"omega", 0.03}, {"alpha", 0.15}, {"beta", 0.70}};
  const gen::Trajectory t = gen::simulate(g, sw);
  CHECK(t.shock_index == 50);

  fern::rng::Stream noise = fern::rng::Stream(11).split("traj");
  for (std::size_t i = 0; i < 50; ++i) (void)noise.normal();
  const double xi = noise.normal();
  // Post-switch variance restarts at the new stationary value 0.2 with the
  // state back at 0, so the first shocked row sees variance
  // omega + beta * 0.2.
  const double omega = 0.03, alpha = 0.15, beta = 0.70;
  double var = omega / (1.0 - alpha - beta);
  const double x = 0.0;
  var = omega + alpha * x * x + beta * var;
  CHECK(t.values[50] == std::sqrt(var) * xi);
}

TEST_CASE("regime switch resets the seasonal phase") {
  SystemSpec s = make_spec(SystemKind::kSeasonalAr, 0.01, 100,
                           {{"period", 24.0},
                            {"phi", 0.5},
                            {"sigma", 0.2},
                            {"a0", 1.0},
                            {"amp_drift", 0.0}},
                           {0.0}, Method::kDiscrete, 5);
  ShockSpec sw;
  sw.kind = ShockKind::kSwitch;
  sw.frac = 0.4;
  sw.param_updates = {{"a0", 1.4}, {"sigma", 0.0}};
  const gen::Trajectory t = gen::simulate(s, sw);
  CHECK(t.shock_index == 40);
  // Phase and state both restart, and the post-shock noise scale is zero,
  // so the shocked row is exactly the new amplitude at phase zero.
  CHECK(t.values[40] == 1.4);
}

TEST_CASE("premade scenario registry") {
  const std::vector<std::string>& ids = gen::premade_ids();
  CHECK(ids.size() == 26);

  for (const std::string& id : ids) {
    const gen::Scenario sc = gen::premade(id);
    CHECK(sc.id == id);
    CHECK_NOTHROW(sc.spec.validate());
  }

  const gen::Scenario main = gen::premade("LORENZ_MAIN");
  CHECK(main.spec.system == SystemKind::kLorenz63);
  CHECK(main.spec.steps == 25000);
  CHECK(main.spec.dt == 0.01);
  CHECK(main.spec.seed == 7);
  CHECK(main.shock.kind == ShockKind::kNone);

  const gen::Scenario l96 = gen::premade("LORENZ96_SWITCH");
  CHECK(l96.spec.steps == 55000);
  CHECK(l96.spec.dim() == 6);
  CHECK(l96.shock.kind == ShockKind::kSwitch);
  CHECK(l96.shock.param_updates.at("forcing") == 9.0);

  try {
    (void)gen::premade("NOT_A_SCENARIO");
    CHECK(false);
  } catch (const std::runtime_error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("NOT_A_SCENARIO") != std::string::npos);
    CHECK(msg.find("LORENZ_MAIN") != std::string::npos);
    CHECK(msg.find("GARCH_PARAM") != std::string::npos);
  }
}

TEST_CASE("every premade scenario simulates and stays finite") {
  for (const std::string& id : gen::premade_ids()) {
    const gen::Scenario sc = gen::premade(id);
    const gen::Trajectory t = gen::simulate(sc.spec, sc.shock);
    CHECK(t.values.rows() == sc.spec.steps);
    CHECK(t.values.cols() == sc.spec.dim());
    CHECK(t.values.all_finite());
    if (sc.shock.kind != ShockKind::kNone) {
      CHECK(t.shock_index ==
            static_cast<std::int64_t>(std::floor(
                sc.shock.frac * static_cast<double>(sc.spec.steps))));
    }
  }
}

TEST_CASE("simulation is deterministic") {
  const gen::Scenario sc = gen::premade("GARCH_BASE");
  const gen::Trajectory a = gen::simulate(sc.spec, sc.shock);
  const gen::Trajectory b = gen::simulate(sc.spec, sc.shock);
  CHECK(a.values == b.values);
}

TEST_CASE("diverging integrations abort with a clear error") {
  SystemSpec bad = lorenz_spec(1000.0, 50);
  CHECK_THROWS_WITH_AS((void)gen::simulate(bad),
                       doctest::Contains("blew up"), std::runtime_error);
}

TEST_CASE("trajectory files round trip bit for bit") {
  SystemSpec ou = ou_spec(7);
  ou.steps = 200;
  ShockSpec shock;
  shock.kind = ShockKind::kParam;
  shock.frac = 0.35;
  shock.param_updates = {{"mu", 0.5}};
  const gen::Trajectory t = gen::simulate(ou, shock);

  const std::filesystem::path csv = temp_file("fern_gen_test.csv");
  const std::filesystem::path meta = temp_file("fern_gen_test.json");
  gen::write_trajectory_csv(t, csv);
  gen::write_trajectory_sidecar(t, meta, "OU_CUSTOM");

  const io::CsvTable table = io::read_csv(csv);
  REQUIRE(table.header == std::vector<std::string>{"x0"});
  REQUIRE(table.rows.size() == 200);
  for (std::size_t i = 0; i < 200; ++i) {
    CHECK(io::parse_double(table.rows[i][0]) == t.values[i]);
  }

  std::ifstream in(meta);
  nlohmann::json j = nlohmann::json::parse(in);
  CHECK(j["schema"] == "fern-trajectory-v1");
  CHECK(j["scenario"] == "OU_CUSTOM");
  CHECK(j["system"] == "ou");
  CHECK(j["method"] == "euler");
  CHECK(j["steps"] == 200);
  CHECK(j["seed"] == 7);
  CHECK(j["dt"] == 0.5);
  CHECK(j["params"]["theta"] == 0.2);
  CHECK(j["shock"]["kind"] == "param");
  CHECK(j["shock"]["index"] == 70);
  CHECK(j["shock"]["param_updates"]["mu"] == 0.5);

  // Rewriting the same trajectory produces identical bytes.
  const std::filesystem::path csv2 = temp_file("fern_gen_test2.csv");
  gen::write_trajectory_csv(gen::simulate(ou, shock), csv2);
  std::ifstream f1(csv, std::ios::binary), f2(csv2, std::ios::binary);
  std::string s1((std::istreambuf_iterator<char>(f1)),
                 std::istreambuf_iterator<char>());
  std::string s2((std::istreambuf_iterator<char>(f2)),
                 std::istreambuf_iterator<char>());
  CHECK(s1 == s2);
  CHECK(!s1.empty());

  std::filesystem::remove(csv);
  std::filesystem::remove(csv2);
  std::filesystem::remove(meta);
}

TEST_CASE("name round trips for the enumerations") {
  for (const char* name :
       {"lorenz63", "rossler", "chua", "lorenz96", "ou", "double_well",
        "slds", "seasonal_ar", "garch"}) {
    CHECK(gen::to_string(gen::system_from_string(name)) == name);
  }
  for (const char* name : {"rk4", "euler", "discrete"}) {
    CHECK(gen::to_string(gen::method_from_string(name)) == name);
  }
  for (const char* name : {"none", "param", "state_eps", "switch"}) {
    CHECK(gen::to_string(gen::shock_from_string(name)) == name);
  }
  CHECK_THROWS_AS((void)gen::system_from_string("brownian"),
                  std::runtime_error);
  CHECK_THROWS_AS((void)gen::method_from_string("heun"), std::runtime_error);
  CHECK_THROWS_AS((void)gen::shock_from_string("pulse"), std::runtime_error);
}
