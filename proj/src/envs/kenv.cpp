#include "rehabsnn/envs/kenv.hpp"

#include "rehabsnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rehabsnn::envs {

void KenvParams::validate() const {
  if (!(m > 0.0) || !(l > 0.0) || !(g > 0.0)) throw ConfigError("kenv: m, l and g must be positive");
  if (!(theta_max > 0.0)) throw ConfigError("kenv: theta_max must be positive");
  if (max_steps < 1) throw ConfigError("kenv: max_steps must be at least 1");
  if (!(d_min > 0.0) || !(d_max > d_min)) throw ConfigError("kenv: need 0 < d_min < d_max");
  if (!(ramp_up >= 0.0 && ramp_down >= 0.0 && ramp_up + ramp_down <= 1.0)) {
    throw ConfigError("kenv: ramp fractions must be non-negative and sum to at most 1");
  }
}

KenvEnv::KenvEnv(KenvParams params) : params_(params), profile_(params.profile) { params_.validate(); }

double KenvEnv::target_speed(double p) const {
  const double peak = params_.target_speed_peak * params_.theta_dot_ref();
  if (params_.ramp_up > 0.0 && p < params_.ramp_up) return peak * p / params_.ramp_up;
  if (params_.ramp_down > 0.0 && p > 1.0 - params_.ramp_down) return peak * std::max(0.0, 1.0 - p) / params_.ramp_down;
  return peak;
}

std::vector<double> KenvEnv::reset(std::uint64_t seed) {
  profile_ = params_.profile;
  if (profile_.random_phase) {
    std::mt19937_64 rng(seed);
    profile_.phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  }
  state_ = KenvState{};
  state_.prev_delay = params_.d_max;
  state_.delay = params_.d_max;
  state_.prev_theta_dot = params_.step_angle() * 1000.0 / params_.d_max;
  state_.theta_dot = state_.prev_theta_dot;
  state_.tau_p = patient_torque(profile_, 0);
  state_.components.assign(5, 0.0);
  started_ = true;
  return observation();
}

StepResult KenvEnv::step(const std::vector<double>& action) {
  if (!started_) throw DataError("kenv: step() before reset()");
  if (state_.finished) throw DataError("kenv: step() on a finished episode; call reset()");
  if (action.size() != 1) throw DataError("kenv: expected a 1-D delay action");
  if (!std::isfinite(action[0])) throw DataError("kenv: non-finite action");
  const KenvParams& P = params_;
  const double d = std::clamp(action[0], P.d_min, P.d_max);
  const int t = state_.current_step;

  state_.prev_delay = state_.delay;
  state_.prev_theta_dot = state_.theta_dot;
  state_.current_step = t + 1;
  const double progress = static_cast<double>(state_.current_step) / P.max_steps;
  state_.theta = progress * P.theta_max;
  const double dt = d / 1000.0;
  state_.theta_dot = P.step_angle() / dt;
  state_.delay = d;

  state_.tau_g = P.m * P.g * P.l * std::sin(state_.theta);
  state_.tau_i = (1.0 / 3.0) * P.m * P.l * P.l * (state_.theta_dot - state_.prev_theta_dot) / dt;
  state_.tau_p = patient_torque(profile_, t);
  state_.tau_m = std::max(0.0, (state_.tau_g + state_.tau_i) - state_.tau_p);

  const double ts = P.tau_scale();
  const double speed_err = (state_.theta_dot - target_speed(progress)) / P.theta_dot_ref();
  const double e_sp = speed_err * speed_err;
  const double e_pb = std::max(0.0, -state_.tau_p) / ts;
  const double e_sf = std::max(0.0, state_.tau_m - P.force_limit_factor * ts) / ts;
  const double e_acc = std::abs(d - state_.prev_delay) / (P.d_max - P.d_min);
  const double e_pi = std::max(0.0, state_.tau_p) / ts;
  state_.components = {e_sp, e_pb, e_sf, e_acc, e_pi};
  state_.reward = -P.w_sp * e_sp - P.w_pb * e_pb - P.w_sf * e_sf - P.w_acc * e_acc + P.w_pi * e_pi;

  StepResult r;
  r.reward = state_.reward;
  r.components = state_.components;
  r.terminated = false;
  r.truncated = state_.current_step >= P.max_steps;
  state_.finished = r.truncated;
  r.observation = observation();
  return r;
}

std::vector<double> KenvEnv::observation() const {
  const KenvParams& P = params_;
  const double ts = P.tau_scale();
  return {state_.tau_m / ts, state_.tau_p / ts, state_.theta / P.theta_max, state_.theta_dot / P.theta_dot_ref(),
          (state_.delay - P.d_min) / (P.d_max - P.d_min)};
}

std::vector<std::string> KenvEnv::trajectory_columns() const {
  std::vector<std::string> c{"step", "theta", "theta_dot", "delay_ms", "tau_p", "tau_m", "strain", "reward"};
  for (const std::string& n : component_names()) c.push_back(n);
  return c;
}

std::vector<double> KenvEnv::trajectory_row() const {
  std::vector<double> r{static_cast<double>(state_.current_step), state_.theta, state_.theta_dot, state_.delay,
                        state_.tau_p, state_.tau_m, 0.0, state_.reward};
  r.insert(r.end(), state_.components.begin(), state_.components.end());
  return r;
}

}  // namespace rehabsnn::envs
