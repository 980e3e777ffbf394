#include "rehabsnn/spttq/spttq.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/snn/network.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <thread>

namespace rehabsnn::spttq {

using math::Matrix;

namespace {

Matrix row_of(const std::vector<double>& v) {
  Matrix x(1, static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!std::isfinite(v[i])) throw NumericalError("actor received a non-finite observation");
    x(0, static_cast<Eigen::Index>(i)) = v[i];
  }
  return x;
}

std::vector<double> to_vector(const Matrix& m) { return std::vector<double>(m.data(), m.data() + m.size()); }

// Runs fn(i) for i in [0, n) on up to `jobs` threads. The first exception is rethrown.
template <typename Fn>
void parallel_for(int n, int jobs, Fn fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (int j = 0; j < jobs; ++j) {
    pool.emplace_back([&] {
      for (int i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (std::thread& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

std::string mode_name(snn::NeuronKind mode) { return snn::to_string(mode); }

}  // namespace

std::uint64_t episode_seed(std::uint64_t seed, int episode) {
  return seed * 6364136223846793005ULL + 1442695040888963407ULL * static_cast<std::uint64_t>(episode + 1);
}

EpisodeRecord run_inference_episode(const sac::Actor& actor, envs::Env& env, int cutoff, snn::NeuronKind mode,
                                    std::uint64_t seed, const EpisodeOptions& options) {
  if (!actor.spiking()) throw DataError("temporal inference needs a spiking actor");
  sac::Actor local(actor);
  auto& net = static_cast<snn::SpikingNetwork&>(local.network());
  const int T = net.time_steps();
  if (cutoff < 1 || cutoff > T) {
    throw UsageError("cutoff " + std::to_string(cutoff) + " is outside [1, " + std::to_string(T) + "]");
  }
  net.set_neuron_kind(mode);
  snn::reset_membranes(net);

  EpisodeRecord rec;
  rec.profile_sum.assign(static_cast<std::size_t>(T), 0.0);
  rec.profile_count.assign(static_cast<std::size_t>(T), 0.0);
  std::vector<double> obs = env.reset(seed);
  for (;;) {
    if (mode == snn::NeuronKind::kLeaky && rec.rl_steps > 0) snn::reset_membranes(net);
    const int ticks = rec.rl_steps == 0 ? T : cutoff;
    snn::ForwardOutput out = snn::spiking_forward(net, row_of(obs), ticks, options.record_trace);
    const Matrix& mean = out.heads[0];
    if (!mean.allFinite()) throw NumericalError("actor produced a non-finite action");
    for (int t = 0; t < ticks; ++t) {
      const double c = out.trace.step_spike_counts[static_cast<std::size_t>(t)];
      rec.profile_sum[static_cast<std::size_t>(t)] += c;
      rec.profile_count[static_cast<std::size_t>(t)] += 1.0;
      rec.total_spikes += c;
    }
    rec.time_steps += out.trace.steps();
    if (options.record_trace) {
      StepTrace st;
      for (int t = 0; t < ticks; ++t) {
        st.decoded.push_back(to_vector(out.trace.decoded[static_cast<std::size_t>(t)][0].array().tanh().matrix()));
      }
      st.stable_point = stable_point(st.decoded, options.stable_eps);
      rec.trace.push_back(std::move(st));
    }
    if (mode == snn::NeuronKind::kSLeaky) snn::continue_membranes(net);

    envs::StepResult r = env.step(to_vector(local.to_env_action(mean)));
    rec.total_return += r.reward;
    ++rec.rl_steps;
    obs = std::move(r.observation);
    if (r.done()) {
      rec.terminated = r.terminated;
      break;
    }
  }
  snn::reset_membranes(net);
  return rec;
}

EpisodeRecord run_artificial_episode(const sac::Actor& actor, envs::Env& env, std::uint64_t seed) {
  sac::Actor local(actor);
  std::mt19937_64 unused(0);
  EpisodeRecord rec;
  std::vector<double> obs = env.reset(seed);
  for (;;) {
    envs::StepResult r = env.step(local.act(obs, true, unused).first);
    rec.total_return += r.reward;
    ++rec.rl_steps;
    ++rec.time_steps;
    obs = std::move(r.observation);
    if (r.done()) {
      rec.terminated = r.terminated;
      break;
    }
  }
  return rec;
}

EpisodeRecord run_random_episode(envs::Env& env, std::uint64_t seed) {
  std::mt19937_64 rng(seed ^ 0x5851f42d4c957f2dULL);
  const std::vector<double> low = env.action_low();
  const std::vector<double> high = env.action_high();
  EpisodeRecord rec;
  env.reset(seed);
  std::vector<double> action(low.size());
  for (;;) {
    for (std::size_t i = 0; i < low.size(); ++i) action[i] = std::uniform_real_distribution<double>(low[i], high[i])(rng);
    envs::StepResult r = env.step(action);
    rec.total_return += r.reward;
    ++rec.rl_steps;
    ++rec.time_steps;
    if (r.done()) {
      rec.terminated = r.terminated;
      break;
    }
  }
  return rec;
}

std::vector<double> EvalReport::profile() const {
  std::vector<double> out(profile_sum.size(), 0.0);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = profile_count[i] > 0.0 ? profile_sum[i] / profile_count[i] : 0.0;
  return out;
}

void aggregate(EvalReport& report) {
  const std::vector<EpisodeRecord>& eps = report.episodes;
  if (eps.empty()) throw DataError("cannot aggregate an empty evaluation");
  const double n = static_cast<double>(eps.size());
  auto mean_var = [&](auto get, double& mean, double& var) {
    mean = 0.0;
    for (const EpisodeRecord& e : eps) mean += get(e);
    mean /= n;
    var = 0.0;
    for (const EpisodeRecord& e : eps) var += (get(e) - mean) * (get(e) - mean);
    var /= n;
  };
  double unused = 0.0;
  mean_var([](const EpisodeRecord& e) { return e.total_return; }, report.return_mean, report.return_var);
  mean_var([](const EpisodeRecord& e) { return static_cast<double>(e.rl_steps); }, report.rl_steps_mean,
           report.rl_steps_var);
  mean_var([](const EpisodeRecord& e) { return static_cast<double>(e.time_steps); }, report.time_steps_mean, unused);
  mean_var([](const EpisodeRecord& e) { return e.total_spikes; }, report.spikes_mean, unused);
  mean_var([](const EpisodeRecord& e) { return e.rl_steps > 0 ? e.total_spikes / e.rl_steps : 0.0; },
           report.spikes_per_step_mean, unused);
  std::size_t ticks = 0;
  for (const EpisodeRecord& e : eps) ticks = std::max(ticks, e.profile_sum.size());
  report.profile_sum.assign(ticks, 0.0);
  report.profile_count.assign(ticks, 0.0);
  for (const EpisodeRecord& e : eps) {
    for (std::size_t t = 0; t < e.profile_sum.size(); ++t) {
      report.profile_sum[t] += e.profile_sum[t];
      report.profile_count[t] += e.profile_count[t];
    }
  }
}

double decrement_percent(double value, double baseline) {
  if (!(baseline > 0.0)) throw DataError("decrement needs a positive baseline");
  return 100.0 * (1.0 - value / baseline);
}

double reported_decrement(double value, double baseline) {
  // The small offset keeps values such as 57.37 from landing on 57.36 through
  // binary rounding of the product.
  const double d = decrement_percent(value, baseline);
  return std::trunc(d * 100.0 + (d >= 0.0 ? 1e-7 : -1e-7)) / 100.0;
}

void apply_baseline(EvalReport& report, const EvalReport& baseline) {
  report.power_decrement = baseline.spikes_per_step_mean > 0.0
                               ? std::optional<double>(reported_decrement(report.spikes_per_step_mean,
                                                                          baseline.spikes_per_step_mean))
                               : std::nullopt;
  report.latency_decrement = reported_decrement(report.time_steps_mean, baseline.time_steps_mean);
}

EvalReport evaluate_policy(const sac::Actor& actor, const envs::Env& env, int cutoff, snn::NeuronKind mode,
                           const EvalOptions& options) {
  if (options.episodes < 1) throw UsageError("evaluation needs at least one episode");
  EvalReport report;
  report.mode = actor.spiking() ? mode_name(mode) : "artificial";
  report.cutoff = actor.spiking() ? cutoff : 0;
  report.episodes.resize(static_cast<std::size_t>(options.episodes));
  parallel_for(options.episodes, options.jobs, [&](int e) {
    std::unique_ptr<envs::Env> local = env.clone();
    const std::uint64_t seed = episode_seed(options.seed, e);
    report.episodes[static_cast<std::size_t>(e)] =
        actor.spiking() ? run_inference_episode(actor, *local, cutoff, mode, seed, options.episode)
                        : run_artificial_episode(actor, *local, seed);
  });
  aggregate(report);
  return report;
}

EvalReport evaluate_random_policy(const envs::Env& env, const EvalOptions& options) {
  if (options.episodes < 1) throw UsageError("evaluation needs at least one episode");
  EvalReport report;
  report.mode = "random";
  report.episodes.resize(static_cast<std::size_t>(options.episodes));
  parallel_for(options.episodes, options.jobs, [&](int e) {
    std::unique_ptr<envs::Env> local = env.clone();
    report.episodes[static_cast<std::size_t>(e)] = run_random_episode(*local, episode_seed(options.seed, e));
  });
  aggregate(report);
  return report;
}

std::optional<int> stable_point(const std::vector<std::vector<double>>& trace, double eps) {
  const int n = static_cast<int>(trace.size());
  if (n == 0) throw DataError("stable point of an empty trace");
  // Walk back from the end while consecutive ticks agree.
  int t = n;
  while (t > 1) {
    const auto& a = trace[static_cast<std::size_t>(t - 2)];
    const auto& b = trace[static_cast<std::size_t>(t - 1)];
    double diff = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) diff = std::max(diff, std::abs(b[i] - a[i]));
    if (!(diff <= eps)) break;
    --t;
  }
  if (t == n) return std::nullopt;
  return t;
}

std::optional<int> stable_point(const std::vector<double>& trace, double eps) {
  std::vector<std::vector<double>> wrapped;
  wrapped.reserve(trace.size());
  for (double v : trace) wrapped.push_back({v});
  return stable_point(wrapped, eps);
}

StableHistogram histogram_from_points(const std::vector<std::optional<int>>& points, int ticks) {
  StableHistogram h;
  h.counts.assign(static_cast<std::size_t>(ticks), 0);
  double sum = 0.0;
  double sq = 0.0;
  for (const std::optional<int>& p : points) {
    ++h.samples;
    if (!p) {
      ++h.unstable;
      continue;
    }
    if (*p < 1 || *p > ticks) throw DataError("stable point outside the histogram range");
    ++h.counts[static_cast<std::size_t>(*p - 1)];
    sum += *p;
    sq += static_cast<double>(*p) * *p;
  }
  const double stable = static_cast<double>(h.samples - h.unstable);
  if (stable > 0.0) {
    h.mean = sum / stable;
    h.variance = std::max(0.0, sq / stable - h.mean * h.mean);
  }
  return h;
}

StableHistogram stable_point_histogram(const sac::Actor& actor, const envs::Env& env, snn::NeuronKind mode,
                                       std::int64_t samples, int cutoff, const EvalOptions& options) {
  if (samples < 1) throw UsageError("stable-point histogram needs at least one sample");
  if (!actor.spiking()) throw DataError("stable points need a spiking actor");
  const int T = static_cast<const snn::SpikingNetwork&>(actor.network()).time_steps();
  std::vector<std::optional<int>> points;
  EpisodeOptions eo = options.episode;
  eo.record_trace = true;
  for (int e = 0; static_cast<std::int64_t>(points.size()) < samples; ++e) {
    std::unique_ptr<envs::Env> local = env.clone();
    EpisodeRecord rec = run_inference_episode(actor, *local, cutoff, mode, episode_seed(options.seed, e), eo);
    for (const StepTrace& st : rec.trace) {
      if (static_cast<std::int64_t>(points.size()) == samples) break;
      points.push_back(st.stable_point);
    }
  }
  return histogram_from_points(points, T);
}

std::vector<double> spike_profile(const std::vector<std::vector<double>>& step_counts) {
  if (step_counts.empty()) throw DataError("spike profile of no RL steps");
  std::size_t ticks = 0;
  for (const auto& s : step_counts) ticks = std::max(ticks, s.size());
  std::vector<double> sum(ticks, 0.0);
  std::vector<double> n(ticks, 0.0);
  for (const auto& s : step_counts) {
    for (std::size_t t = 0; t < s.size(); ++t) {
      sum[t] += s[t];
      n[t] += 1.0;
    }
  }
  for (std::size_t t = 0; t < ticks; ++t) sum[t] /= n[t];
  return sum;
}

std::vector<double> spike_profile(const std::vector<EvalReport>& reports) {
  if (reports.empty()) throw DataError("spike profile of no reports");
  EvalReport pooled;
  for (const EvalReport& r : reports) {
    if (r.cutoff != reports.front().cutoff || r.mode != reports.front().mode) {
      throw DataError("spike profile mixes cutoffs or neuron modes");
    }
    pooled.episodes.insert(pooled.episodes.end(), r.episodes.begin(), r.episodes.end());
  }
  aggregate(pooled);
  return pooled.profile();
}

SearchResult spttq_search(int time_steps, double baseline, double floor, double delta, const CutoffScore& score) {
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("delta must lie in (0, 1]");
  if (time_steps < 1) throw UsageError("time steps must be at least 1");
  SearchResult out;
  out.threshold = floor + delta * (baseline - floor);
  out.tau = 1;
  for (int t = time_steps; t >= 1; --t) {
    const double s = score(t);
    out.scores.emplace_back(t, s);
    if (!(s >= out.threshold)) {
      out.tau = std::min(t + 1, time_steps);
      return out;
    }
  }
  return out;
}

SpttqResult spttq_optimize(const sac::Actor& actor, const envs::Env& env, double delta, double floor,
                           const EvalOptions& options) {
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("delta must lie in (0, 1]");
  if (!actor.spiking()) throw DataError("temporal quantisation needs a spiking actor");
  const auto& net = static_cast<const snn::SpikingNetwork&>(actor.network());
  const int T = net.time_steps();
  SpttqResult result;
  result.baseline = evaluate_policy(actor, env, T, net.neuron_kind(), options);
  result.converted = std::make_unique<sac::Actor>(actor);
  static_cast<snn::SpikingNetwork&>(result.converted->network()).set_neuron_kind(snn::NeuronKind::kSLeaky);
  const SearchResult search =
      spttq_search(T, result.baseline.return_mean, floor, delta, [&](int t) {
        EvalReport r = evaluate_policy(*result.converted, env, t, snn::NeuronKind::kSLeaky, options);
        apply_baseline(r, result.baseline);
        result.reports.push_back(std::move(r));
        return result.reports.back().return_mean;
      });
  result.tau = search.tau;
  result.threshold = search.threshold;
  return result;
}

}  // namespace rehabsnn::spttq
