#pragma once

#include "rehabsnn/envs/env.hpp"
#include "rehabsnn/sac/agent.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace rehabsnn::sac {

struct TrainLogRow {
  std::int64_t global_step = 0;
  double episodic_return = 0.0;
  int episode_length = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha = 0.0;
};

struct EvalPoint {
  std::int64_t global_step = 0;
  std::vector<double> returns;
  double mean_return = 0.0;
  bool best = false;
};

struct TrainHooks {
  std::function<void(const TrainLogRow&)> on_episode;
  // Called after every periodic evaluation and once at the end of training.
  std::function<void(const EvalPoint&, SacAgent&)> on_eval;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  std::vector<EvalPoint> evals;
  EvalPoint final_eval;
};

// Seeds shared by every deterministic evaluation of a run, so evaluations are paired.
std::uint64_t eval_episode_seed(std::uint64_t run_seed, int episode);

// Mean-action returns over `episodes` seeded episodes; spiking actors use the
// training-style forward (reset, T ticks) for every RL step.
std::vector<double> evaluate_deterministic(Actor& actor, envs::Env& env, int episodes, std::uint64_t run_seed);

// Uniform random actions until learning_starts, then one critic update per env step,
// actor + temperature every policy_frequency steps and Polyak targets every
// target_frequency steps, in that order.
TrainResult train(SacAgent& agent, envs::Env& env, std::uint64_t seed, const TrainHooks& hooks = {});

}  // namespace rehabsnn::sac
