#include "rehabsnn/envs/denv.hpp"

#include "rehabsnn/error.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace rehabsnn::envs {

std::string to_string(DenvReward mode) { return mode == DenvReward::kStandard ? "standard" : "hold"; }

DenvReward parse_denv_reward(const std::string& s) {
  if (s == "standard") return DenvReward::kStandard;
  if (s == "hold") return DenvReward::kHold;
  throw ConfigError("unknown denv reward mode '" + s + "' (expected standard|hold)");
}

void DenvParams::validate() const {
  if (!(m > 0.0) || !(l > 0.0) || !(g >= 0.0)) throw ConfigError("denv: m and l must be positive, g non-negative");
  if (!(b >= 0.0)) throw ConfigError("denv: damping must be non-negative");
  if (!(tau_max > 0.0)) throw ConfigError("denv: tau_max must be positive");
  if (!(dt > 0.0)) throw ConfigError("denv: dt must be positive");
  if (!(theta_target > 0.0)) throw ConfigError("denv: theta_target must be positive");
  if (max_steps < 1) throw ConfigError("denv: max_steps must be at least 1");
  if (!(hand_mass_fraction >= 0.0)) throw ConfigError("denv: hand_mass_fraction must be non-negative");
  if (!(reset_theta_low >= 0.0 && reset_theta_high >= reset_theta_low && reset_theta_high <= theta_target)) {
    throw ConfigError("denv: reset angle range must lie inside [0, theta_target]");
  }
  if (!(hold_angle > 0.0 && hold_angle < theta_target)) throw ConfigError("denv: hold_angle must lie in (0, theta_target)");
}

double advance_pendulum(const DenvParams& p, PendulumState& s, double external_torque) {
  const double sin_t = std::sin(s.theta);
  const double tau_g = -0.5 * p.m * p.g * p.l * sin_t;
  const double tau_pg = -0.5 * p.hand_mass_fraction * p.m * p.g * p.l * sin_t;
  const double tau_f = -p.b * s.theta_dot;
  const double tau_net = external_torque + tau_g + tau_pg + tau_f;
  const double theta_dd = 3.0 * tau_net / (2.0 * p.m * p.l * p.l);
  s.theta_dot += p.dt * theta_dd;
  s.theta += p.dt * s.theta_dot;
  return tau_net;
}

double pendulum_energy(const DenvParams& p, const PendulumState& s) {
  return 0.5 * p.inertia() * s.theta_dot * s.theta_dot + 0.5 * p.m * p.g * p.l * (1.0 - std::cos(s.theta));
}

DenvEnv::DenvEnv(DenvParams params) : params_(params), profile_(params.profile) { params_.validate(); }

std::vector<double> DenvEnv::reset(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  profile_ = params_.profile;
  const double theta0 = std::uniform_real_distribution<double>(params_.reset_theta_low, params_.reset_theta_high)(rng);
  if (profile_.random_phase) {
    profile_.phase = std::uniform_real_distribution<double>(0.0, 2.0 * std::numbers::pi)(rng);
  }
  state_ = DenvState{};
  state_.system = {theta0, 0.0};
  state_.hand = state_.system;
  state_.tau_p = patient_torque(profile_, 0);
  state_.components.assign(6, 0.0);
  started_ = true;
  return observation();
}

void DenvEnv::set_state(const PendulumState& system, const PendulumState& hand) {
  if (!started_) throw DataError("denv: set_state() before reset()");
  state_.system = system;
  state_.hand = hand;
}

StepResult DenvEnv::step(const std::vector<double>& action) {
  if (!started_) throw DataError("denv: step() before reset()");
  if (state_.finished) throw DataError("denv: step() on a finished episode; call reset()");
  if (action.size() != 1) throw DataError("denv: expected a 1-D torque action");
  if (!std::isfinite(action[0])) throw DataError("denv: non-finite action");
  const DenvParams& P = params_;
  const int t = state_.current_step;
  state_.prev_tau_s = state_.tau_s;
  state_.tau_s = std::clamp(action[0], 0.0, P.tau_max);
  state_.tau_p = patient_torque(profile_, t);

  state_.tau_net = advance_pendulum(P, state_.system, state_.tau_s + state_.tau_p);
  advance_pendulum(P, state_.hand, state_.tau_p);
  state_.current_step = t + 1;
  state_.strain = state_.system.theta - state_.hand.theta;

  const double theta = state_.system.theta;
  const double theta_dot = state_.system.theta_dot;
  StepResult r;
  r.terminated = !(theta >= 0.0 && theta <= P.theta_target);
  r.truncated = !r.terminated && state_.current_step >= P.max_steps;
  const double e_term = r.terminated ? std::abs(theta_dot) : 0.0;

  if (P.reward_mode == DenvReward::kStandard) {
    const double e_theta = std::abs(theta - P.theta_target);
    const double e_v = theta_dot * theta_dot;
    const double e_tau = state_.tau_s * state_.tau_s;
    const double e_h = std::abs(state_.strain);
    const double e_dtau = std::abs(state_.tau_s - state_.prev_tau_s);
    state_.components = {e_theta, e_v, e_tau, e_h, e_dtau, e_term};
    state_.reward = -(P.w_theta * e_theta + P.w_v * e_v + P.w_tau * e_tau + P.w_h * e_h + P.w_dtau * e_dtau) - e_term;
  } else {
    const double e_theta = std::abs(theta - P.hold_angle) / P.hold_angle;
    state_.components = {e_theta, 0.0, 0.0, 0.0, 0.0, e_term};
    state_.reward = r.terminated ? -e_term : 1.0 - e_theta;
  }

  r.reward = state_.reward;
  r.components = state_.components;
  state_.finished = r.done();
  r.observation = observation();
  return r;
}

std::vector<double> DenvEnv::observation() const {
  const double th = state_.system.theta;
  return {std::sin(th), std::cos(th), th, state_.tau_p, state_.tau_s};
}

std::vector<std::string> DenvEnv::trajectory_columns() const {
  std::vector<std::string> c{"step", "theta", "theta_dot", "tau_s", "tau_p", "tau_net", "strain", "reward"};
  for (const std::string& n : component_names()) c.push_back(n);
  return c;
}

std::vector<double> DenvEnv::trajectory_row() const {
  std::vector<double> r{static_cast<double>(state_.current_step), state_.system.theta, state_.system.theta_dot,
                        state_.tau_s, state_.tau_p, state_.tau_net, state_.strain, state_.reward};
  r.insert(r.end(), state_.components.begin(), state_.components.end());
  return r;
}

}  // namespace rehabsnn::envs
