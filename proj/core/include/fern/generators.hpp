#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "fern/tensor.hpp"

namespace fern::gen {

enum class SystemKind {
  kLorenz63,
  kRossler,
  kChua,
  kLorenz96,
  kOrnsteinUhlenbeck,
  kDoubleWell,
  kSlds,
  kSeasonalAr,
  kGarch,
};

enum class Method { kRk4, kEuler, kDiscrete };

enum class ShockKind { kNone, kParam, kStateEps, kSwitch };

std::string to_string(SystemKind k);
std::string to_string(Method m);
std::string to_string(ShockKind k);
SystemKind system_from_string(const std::string& s);
Method method_from_string(const std::string& s);
ShockKind shock_from_string(const std::string& s);

struct SystemSpec {
  SystemKind system = SystemKind::kLorenz63;
  double dt = 0.01;
  std::size_t steps = 0;
  std::map<std::string, double> params;
  std::vector<double> initial_cond;
  Method method = Method::kRk4;
  std::uint64_t seed = 7;

  std::size_t dim() const { return initial_cond.size(); }
  // Throws on unknown/missing params, dimension mismatch, or a method that
  // does not fit the system.
  void validate() const;
};

// A shock rewrites the generating process at floor(frac * steps), strictly
// inside the trajectory, while the noise stream keeps running uninterrupted:
//   param     merge param_updates into the params, keep the state
//   state_eps add state_eps to every state coordinate before the next step
//   switch    merge param_updates, restart from new_initial_cond (or the
//             original initial condition when empty) and reset any latent
//             state; the output stays contiguous
// Rows before the shock index are bit-identical to the unshocked run; the
// row at the shock index is the first one computed under the new regime.
struct ShockSpec {
  ShockKind kind = ShockKind::kNone;
  double frac = 0.35;
  std::map<std::string, double> param_updates;
  std::vector<double> new_initial_cond;
  double state_eps = 0.0;
};

struct Trajectory {
  num::Tensor values;  // [steps, dim]
  SystemSpec spec;
  ShockSpec shock;
  std::int64_t shock_index = -1;  // -1 when no shock
};

// Right-hand side of the governing ODE (rk4 systems only).
std::vector<double> derivative(const SystemSpec& spec,
                               const std::vector<double>& state);

// One classical fourth-order Runge-Kutta update of the spec's ODE.
std::vector<double> rk4_step(const SystemSpec& spec,
                             const std::vector<double>& state);

// One Euler-Maruyama update x + drift*dt + sigma*sqrt(dt)*xi for the scalar
// SDE systems; xi is a standard normal supplied by the caller.
double euler_maruyama_step(const SystemSpec& spec, double x, double xi);

// Integrates the spec from its initial condition, recording the state after
// each of the `steps` updates (the initial condition itself is not a row).
// Stochastic draw order per step: the state noise normal first, then, for
// the regime-switching system, one uniform for the transition. Draws come
// from Stream(seed).split("traj"). A non-finite state aborts with an error.
Trajectory simulate(const SystemSpec& spec, const ShockSpec& shock = {});

struct Scenario {
  std::string id;
  SystemSpec spec;
  ShockSpec shock;
};

const std::vector<std::string>& premade_ids();
// Throws on unknown ids; the message lists every known id.
Scenario premade(const std::string& id);

// One column per state dimension (x0, x1, ...), %.17g values, LF line ends;
// byte-identical across reruns of the same spec.
void write_trajectory_csv(const Trajectory& traj,
                          const std::filesystem::path& path);
// JSON sidecar with everything needed to regenerate: spec, shock, seed,
// shock index, and optionally the premade scenario id.
void write_trajectory_sidecar(const Trajectory& traj,
                              const std::filesystem::path& path,
                              const std::string& scenario_id = "");

}  // namespace fern::gen
