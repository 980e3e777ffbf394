#include "rehabsnn/envs/env.hpp"

#include "rehabsnn/error.hpp"

#include <cmath>

namespace rehabsnn::envs {

std::string to_string(ProfileKind kind) { return kind == ProfileKind::kConstant ? "constant" : "sinusoidal"; }

ProfileKind parse_profile_kind(const std::string& s) {
  if (s == "constant") return ProfileKind::kConstant;
  if (s == "sinusoidal") return ProfileKind::kSinusoidal;
  throw ConfigError("unknown torque profile '" + s + "' (expected constant|sinusoidal)");
}

double patient_torque(const TorqueProfile& profile, std::int64_t step) {
  if (profile.kind == ProfileKind::kConstant) return profile.amplitude;
  return profile.amplitude * std::sin(profile.frequency * static_cast<double>(step) + profile.phase);
}

double reconstruct_patient_torque(double f_net, double theta, double r, double m, double l, double g) {
  if (!(r > 0.0)) throw DataError("moment arm r must be positive");
  const double tau_pg = -0.5 * m * g * l * std::sin(theta);
  return r * f_net - tau_pg;
}

}  // namespace rehabsnn::envs
