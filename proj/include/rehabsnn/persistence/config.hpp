#pragma once

#include "rehabsnn/envs/denv.hpp"
#include "rehabsnn/envs/kenv.hpp"
#include "rehabsnn/sac/agent.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace rehabsnn::persistence {

struct SpttqConfig {
  double delta = 0.95;
  double stable_eps = 1e-4;
  int episodes = 50;        // evaluation episodes per cutoff
  int floor_episodes = 50;  // random-policy baseline episodes
  int trace_episodes = 5;
};

struct RunConfig {
  std::uint64_t seed = 1;
  std::string env = "kenv";
  std::string variant = "hsac";
  sac::SacConfig sac;
  sac::SnnConfig snn;
  envs::KenvParams kenv;
  envs::DenvParams denv;
  SpttqConfig spttq;

  // Text the config was loaded from, plus any overrides, kept for the run log.
  std::string source_text;

  void validate() const;
  // Every key with its resolved value, in registry order.
  std::string canonical() const;
  // 64-bit FNV-1a of canonical(), hex encoded.
  std::string hash() const;
};

// Format: '#' starts a comment, "[section]" opens a section, "key = value" sets
// section.key. Lists are comma separated. Absent keys keep their defaults. Errors
// carry "<path>:<line>" and the full key path.
RunConfig parse_config(const std::string& text, const std::string& origin = "<config>");
RunConfig load_config(const std::string& path);

// Applies "section.key=value" overrides in order, then revalidates.
void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides);

// Sets one key from its text form; throws ConfigError for unknown keys or bad values.
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);
std::vector<std::string> config_keys();

}  // namespace rehabsnn::persistence
