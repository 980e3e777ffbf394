#pragma once

#include "rehabsnn/envs/env.hpp"

#include <numbers>

namespace rehabsnn::envs {

enum class DenvReward { kStandard, kHold };

std::string to_string(DenvReward mode);
DenvReward parse_denv_reward(const std::string& s);

struct DenvParams {
  double m = 2.0;    // kg
  double l = 0.35;   // m
  double g = 9.81;   // m/s^2
  double b = 0.08;   // N*m*s
  double tau_max = 12.0;  // N*m
  double dt = 0.02;       // s
  double theta_target = std::numbers::pi / 2.0;
  int max_steps = 500;
  double w_theta = 1.0;
  double w_v = 0.1;
  double w_tau = 0.01;
  double w_h = 2.0;
  double w_dtau = 0.5;
  double hand_mass_fraction = 0.5;  // share of m used for the patient-side gravity torque
  double reset_theta_low = 0.02;
  double reset_theta_high = 0.1;
  TorqueProfile profile{ProfileKind::kConstant, 1.0, 0.0, 0.0, false};
  // kHold: per-step reward 1 - |theta - hold_angle| / hold_angle while inside the safe range.
  DenvReward reward_mode = DenvReward::kStandard;
  double hold_angle = std::numbers::pi / 4.0;

  void validate() const;
  double inertia() const { return 2.0 * m * l * l / 3.0; }
};

struct PendulumState {
  double theta = 0.0;
  double theta_dot = 0.0;
};

// Semi-implicit Euler step of the rod pendulum under an external torque
// (everything except gravity and friction):
//   theta_dd = 3 tau_net / (2 m l^2); theta_dot += dt * theta_dd; theta += dt * theta_dot
// Gravity uses tau_g = -0.5 m g l sin(theta) and, with hand_mass_fraction > 0, the
// patient-side tau_pg; friction is -b theta_dot. Returns tau_net.
double advance_pendulum(const DenvParams& p, PendulumState& s, double external_torque);

// Total mechanical energy of the rod about its pivot (no patient-side mass).
double pendulum_energy(const DenvParams& p, const PendulumState& s);

struct DenvState {
  PendulumState system;
  PendulumState hand;
  int current_step = 0;
  double tau_s = 0.0;
  double prev_tau_s = 0.0;
  double tau_p = 0.0;
  double tau_net = 0.0;
  double strain = 0.0;
  double reward = 0.0;
  std::vector<double> components;
  bool finished = false;
};

// Torque-driven pendulum arm with a parallel hand-only trajectory for strain.
class DenvEnv final : public Env {
 public:
  explicit DenvEnv(DenvParams params = {});

  std::string id() const override { return "denv"; }
  int observation_dim() const override { return 5; }
  std::vector<double> action_low() const override { return {0.0}; }
  std::vector<double> action_high() const override { return {params_.tau_max}; }
  int max_episode_steps() const override { return params_.max_steps; }

  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;

  std::vector<std::string> component_names() const override {
    return {"E_theta", "E_v", "E_tau", "E_h", "E_dtau", "E_term"};
  }
  std::vector<std::string> trajectory_columns() const override;
  std::vector<double> trajectory_row() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<DenvEnv>(*this); }

  const DenvParams& params() const { return params_; }
  const DenvState& state() const { return state_; }
  // Test hook: places the system (and hand) at a given state mid-episode.
  void set_state(const PendulumState& system, const PendulumState& hand);

 private:
  std::vector<double> observation() const;

  DenvParams params_;
  TorqueProfile profile_;
  DenvState state_;
  bool started_ = false;
};

}  // namespace rehabsnn::envs
