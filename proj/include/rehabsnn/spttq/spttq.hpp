#pragma once

#include "rehabsnn/envs/env.hpp"
#include "rehabsnn/sac/agent.hpp"
#include "rehabsnn/snn/layer.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace rehabsnn::spttq {

struct EpisodeOptions {
  bool record_trace = false;
  double stable_eps = 1e-4;
};

// One RL step of a recorded episode: the normalised action decoded at every tick.
struct StepTrace {
  std::vector<std::vector<double>> decoded;  // [tick][action dim], tanh of the mean head
  std::optional<int> stable_point;           // 1-based tick
};

struct EpisodeRecord {
  double total_return = 0.0;
  int rl_steps = 0;
  std::int64_t time_steps = 0;  // ticks executed over the whole episode
  double total_spikes = 0.0;    // hidden-layer spikes over the whole episode
  bool terminated = false;
  // Per-tick spike sums over RL steps and the number of RL steps that ran each tick.
  std::vector<double> profile_sum;
  std::vector<double> profile_count;
  std::vector<StepTrace> trace;  // filled when recording
};

// Deterministic episode with a spiking actor. Membranes are reset at episode start and
// the first RL step runs the full T ticks; later steps run `cutoff` ticks. kLeaky resets
// the membranes before every RL step, kSLeaky carries them forward (clamped at zero)
// and resets only at episode end. The actor's network is not modified.
EpisodeRecord run_inference_episode(const sac::Actor& actor, envs::Env& env, int cutoff, snn::NeuronKind mode,
                                    std::uint64_t seed, const EpisodeOptions& options = {});

// Same bookkeeping for an artificial actor (one evaluation per RL step, no spikes).
EpisodeRecord run_artificial_episode(const sac::Actor& actor, envs::Env& env, std::uint64_t seed);

// Uniform random actions over the env's box; the floor policy for thresholds.
EpisodeRecord run_random_episode(envs::Env& env, std::uint64_t seed);

std::uint64_t episode_seed(std::uint64_t seed, int episode);

struct EvalReport {
  std::string mode;  // leaky, sleaky, artificial or random
  int cutoff = 0;
  std::vector<EpisodeRecord> episodes;
  double return_mean = 0.0;
  double return_var = 0.0;
  double rl_steps_mean = 0.0;
  double rl_steps_var = 0.0;
  double time_steps_mean = 0.0;
  double spikes_mean = 0.0;           // per episode
  double spikes_per_step_mean = 0.0;  // per RL step, averaged over episodes
  std::vector<double> profile_sum;
  std::vector<double> profile_count;
  std::optional<double> power_decrement;    // percent
  std::optional<double> latency_decrement;  // percent

  std::vector<double> profile() const;
};

// Recomputes every aggregate from the per-episode rows (population variance).
void aggregate(EvalReport& report);

// 100 (1 - value / baseline).
double decrement_percent(double value, double baseline);
// decrement_percent cut (not rounded) to two decimals, as decrement tables are reported.
double reported_decrement(double value, double baseline);
// Fills the decrement fields (reported form) from spikes per RL step and executed
// ticks per episode.
void apply_baseline(EvalReport& report, const EvalReport& baseline);

struct EvalOptions {
  int episodes = 50;
  std::uint64_t seed = 1;
  int jobs = 1;
  EpisodeOptions episode;
};

// Episodes run in parallel on cloned actors and envs; rows are kept in episode order.
EvalReport evaluate_policy(const sac::Actor& actor, const envs::Env& env, int cutoff, snn::NeuronKind mode,
                           const EvalOptions& options);
EvalReport evaluate_random_policy(const envs::Env& env, const EvalOptions& options);

// Smallest 1-based tick t with max |y(t'+1) - y(t')| <= eps for every t' >= t. Absent
// when only the final tick qualifies, so stability must span at least two ticks.
std::optional<int> stable_point(const std::vector<std::vector<double>>& trace, double eps);
std::optional<int> stable_point(const std::vector<double>& trace, double eps);

struct StableHistogram {
  std::vector<std::int64_t> counts;  // index t-1 holds the count for tick t
  std::int64_t samples = 0;
  std::int64_t unstable = 0;
  double mean = 0.0;      // over stable samples
  double variance = 0.0;  // population moment fit

  double unstable_fraction() const { return samples ? static_cast<double>(unstable) / samples : 0.0; }
};

StableHistogram histogram_from_points(const std::vector<std::optional<int>>& points, int ticks);
// Collects stable points from the first `samples` recorded RL steps over seeded episodes.
StableHistogram stable_point_histogram(const sac::Actor& actor, const envs::Env& env, snn::NeuronKind mode,
                                       std::int64_t samples, int cutoff, const EvalOptions& options);

// Per-tick mean over RL steps of varying length, aligned by tick index.
std::vector<double> spike_profile(const std::vector<std::vector<double>>& step_counts);
// Pools reports into one profile; all reports must share cutoff and mode.
std::vector<double> spike_profile(const std::vector<EvalReport>& reports);

// Score of the converted network at a cutoff.
using CutoffScore = std::function<double(int cutoff)>;

struct SearchResult {
  int tau = 1;
  double threshold = 0.0;
  std::vector<std::pair<int, double>> scores;  // in evaluation order, T downwards
};

// Sweeps t = T .. 1 and stops at the first t with score < floor + delta (baseline - floor).
// tau is the last passing cutoff: T when T itself fails, 1 when nothing fails.
SearchResult spttq_search(int time_steps, double baseline, double floor, double delta, const CutoffScore& score);

struct SpttqResult {
  int tau = 1;
  double threshold = 0.0;
  std::unique_ptr<sac::Actor> converted;  // SLeaky copy of the input actor
  EvalReport baseline;                    // original network at T
  std::vector<EvalReport> reports;        // converted network, T downwards until the first failure
};

// Baseline at T on the original network, conversion to SLeaky, then the cutoff sweep on
// the converted network with the same episode seeds.
SpttqResult spttq_optimize(const sac::Actor& actor, const envs::Env& env, double delta, double floor,
                           const EvalOptions& options);

}  // namespace rehabsnn::spttq
