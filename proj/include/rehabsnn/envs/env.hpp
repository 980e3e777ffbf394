#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace rehabsnn::envs {

struct StepResult {
  std::vector<double> observation;
  double reward = 0.0;
  std::vector<double> components;  // aligned with Env::component_names()
  bool terminated = false;
  bool truncated = false;

  bool done() const { return terminated || truncated; }
};

// Gym-shaped episodic environment with a box action space.
// Out-of-range actions are clipped; non-finite actions and stepping a finished
// episode throw DataError.
class Env {
 public:
  virtual ~Env() = default;

  virtual std::string id() const = 0;
  virtual int observation_dim() const = 0;
  virtual std::vector<double> action_low() const = 0;
  virtual std::vector<double> action_high() const = 0;
  int action_dim() const { return static_cast<int>(action_low().size()); }
  virtual int max_episode_steps() const = 0;

  virtual std::vector<double> reset(std::uint64_t seed) = 0;
  virtual StepResult step(const std::vector<double>& action) = 0;

  virtual std::vector<std::string> component_names() const = 0;
  // One trajectory row describing the most recent step.
  virtual std::vector<std::string> trajectory_columns() const = 0;
  virtual std::vector<double> trajectory_row() const = 0;

  virtual std::unique_ptr<Env> clone() const = 0;
};

enum class ProfileKind { kConstant, kSinusoidal };

struct TorqueProfile {
  ProfileKind kind = ProfileKind::kConstant;
  double amplitude = 0.0;  // N*m
  double frequency = 0.0;  // rad per RL step
  double phase = 0.0;      // rad
  bool random_phase = false;  // resample phase from the reset seed
};

std::string to_string(ProfileKind kind);
ProfileKind parse_profile_kind(const std::string& s);

// constant -> amplitude; sinusoidal -> amplitude * sin(frequency * step + phase)
double patient_torque(const TorqueProfile& profile, std::int64_t step);

// Hardware mapping: tau_p = r * F_net - tau_pg with tau_pg = -0.5 m g l sin(theta).
double reconstruct_patient_torque(double f_net, double theta, double r, double m, double l, double g);

// Trajectory rows for CSV export, one per RL step.
struct Trajectory {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
};

}  // namespace rehabsnn::envs
