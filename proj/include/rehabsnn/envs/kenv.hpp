#pragma once

#include "rehabsnn/envs/env.hpp"

#include <numbers>

namespace rehabsnn::envs {

struct KenvParams {
  double m = 2.0;    // kg
  double l = 0.35;   // m
  double g = 9.81;   // m/s^2
  double theta_max = std::numbers::pi / 2.0;
  int max_steps = 750;
  double d_min = 2.0;   // ms
  double d_max = 50.0;  // ms
  double w_sp = 2.0;
  double w_pb = 1.0;
  double w_sf = 1.0;
  double w_acc = 0.5;
  double w_pi = 1.0;
  // Trapezoidal target speed, as a fraction of theta_dot_ref.
  double target_speed_peak = 0.6;
  double ramp_up = 0.15;
  double ramp_down = 0.25;
  double force_limit_factor = 1.2;  // over-forcing starts at factor * m g l
  TorqueProfile profile{ProfileKind::kConstant, 6.0, 0.0, 0.0, false};

  void validate() const;
  double tau_scale() const { return m * g * l; }
  double step_angle() const { return theta_max / max_steps; }
  // Fastest achievable angular velocity, rad/s.
  double theta_dot_ref() const { return theta_max * 1000.0 / (max_steps * d_min); }
};

struct KenvState {
  int current_step = 0;
  double theta = 0.0;
  double theta_dot = 0.0;
  double prev_delay = 0.0;  // ms
  double prev_theta_dot = 0.0;
  // Last-step quantities kept for observation and trajectory export.
  double delay = 0.0;
  double tau_g = 0.0;
  double tau_i = 0.0;
  double tau_p = 0.0;
  double tau_m = 0.0;
  double reward = 0.0;
  std::vector<double> components;
  bool finished = false;
};

// Stepper-motor arm: the action is the inter-step delay in milliseconds.
class KenvEnv final : public Env {
 public:
  explicit KenvEnv(KenvParams params = {});

  std::string id() const override { return "kenv"; }
  int observation_dim() const override { return 5; }
  std::vector<double> action_low() const override { return {params_.d_min}; }
  std::vector<double> action_high() const override { return {params_.d_max}; }
  int max_episode_steps() const override { return params_.max_steps; }

  std::vector<double> reset(std::uint64_t seed) override;
  StepResult step(const std::vector<double>& action) override;

  std::vector<std::string> component_names() const override { return {"E_sp", "E_pb", "E_sf", "E_acc", "E_pi"}; }
  std::vector<std::string> trajectory_columns() const override;
  std::vector<double> trajectory_row() const override;
  std::unique_ptr<Env> clone() const override { return std::make_unique<KenvEnv>(*this); }

  const KenvParams& params() const { return params_; }
  const KenvState& state() const { return state_; }
  // Target angular velocity (rad/s) at progress p in [0, 1].
  double target_speed(double progress) const;

 private:
  std::vector<double> observation() const;

  KenvParams params_;
  TorqueProfile profile_;
  KenvState state_;
  bool started_ = false;
};

}  // namespace rehabsnn::envs
