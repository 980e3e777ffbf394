#include "rehabsnn/cli/commands.hpp"

#include "rehabsnn/envs/denv.hpp"
#include "rehabsnn/envs/kenv.hpp"
#include "rehabsnn/error.hpp"
#include "rehabsnn/persistence/checkpoint.hpp"
#include "rehabsnn/persistence/csv.hpp"
#include "rehabsnn/sac/train.hpp"

#include "rehabsnn/snn/network.hpp"

#include <cstdio>
#include <filesystem>
#include <limits>
#include <map>

namespace rehabsnn::cli {

namespace fs = std::filesystem;
using persistence::CsvRow;
using persistence::CsvValue;
using persistence::RunConfig;

std::unique_ptr<envs::Env> make_env(const RunConfig& cfg, const std::string& env_id) {
  if (env_id == "kenv") return std::make_unique<envs::KenvEnv>(cfg.kenv);
  if (env_id == "denv") return std::make_unique<envs::DenvEnv>(cfg.denv);
  throw UsageError("unknown environment '" + env_id + "' (expected kenv or denv)");
}

namespace {

std::string join(const std::string& dir, const std::string& name) { return (fs::path(dir) / name).string(); }

void write_run_log(const RunConfig& cfg, const std::string& outdir, const std::string& command) {
  std::string text = "# command: " + command + "\n# config as loaded\n" + cfg.source_text;
  if (!text.empty() && text.back() != '\n') text += '\n';
  text += "# resolved (hash " + cfg.hash() + ")\n" + cfg.canonical();
  persistence::write_file_atomic(join(outdir, "run.log"), text);
}

}  // namespace

TrainSummary cmd_train(const RunConfig& cfg, const std::string& outdir, std::ostream* progress) {
  cfg.validate();
  const sac::Variant variant = sac::parse_variant(cfg.variant);
  std::unique_ptr<envs::Env> env = make_env(cfg, cfg.env);
  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "train");

  sac::SacAgent agent(variant, env->observation_dim(), env->action_low(), env->action_high(), cfg.sac, cfg.snn,
                      cfg.seed);
  persistence::CheckpointMeta meta;
  meta.variant = variant;
  meta.env_id = cfg.env;
  meta.config_hash = cfg.hash();

  std::vector<CsvRow> eval_rows;
  TrainSummary summary;
  summary.best_return = -std::numeric_limits<double>::infinity();
  sac::TrainHooks hooks;
  hooks.on_eval = [&](const sac::EvalPoint& p, sac::SacAgent& a) {
    meta.step = p.global_step;
    char name[64];
    std::snprintf(name, sizeof name, "step_%08lld.ckpt", static_cast<long long>(p.global_step));
    persistence::save_checkpoint(join(outdir, name), a.actor(), meta);
    if (p.best) {
      persistence::save_checkpoint(join(outdir, "best.ckpt"), a.actor(), meta);
      summary.best_return = p.mean_return;
    }
    eval_rows.push_back({{"global_step", static_cast<std::int64_t>(p.global_step)},
                         {"mean_return", p.mean_return},
                         {"best", static_cast<std::int64_t>(p.best ? 1 : 0)}});
    if (progress != nullptr) {
      *progress << cfg.variant << " seed " << cfg.seed << " step " << p.global_step << " eval " << p.mean_return
                << std::endl;
    }
  };
  const sac::TrainResult result = sac::train(agent, *env, cfg.seed, hooks);

  std::vector<CsvRow> log_rows;
  log_rows.reserve(result.log.size());
  for (const sac::TrainLogRow& r : result.log) {
    log_rows.push_back({{"global_step", static_cast<std::int64_t>(r.global_step)},
                        {"episodic_return", r.episodic_return},
                        {"episode_length", static_cast<std::int64_t>(r.episode_length)},
                        {"critic_loss", r.critic_loss},
                        {"actor_loss", r.actor_loss},
                        {"alpha", r.alpha}});
  }
  persistence::write_metrics_csv(
      join(outdir, "train_log.csv"),
      {"global_step", "episodic_return", "episode_length", "critic_loss", "actor_loss", "alpha"}, log_rows);
  persistence::write_metrics_csv(join(outdir, "evals.csv"), {"global_step", "mean_return", "best"}, eval_rows);

  meta.step = result.final_eval.global_step;
  summary.final_return = result.final_eval.mean_return;
  summary.final_checkpoint = join(outdir, "final.ckpt");
  persistence::save_checkpoint(summary.final_checkpoint, agent.actor(), meta);
  return summary;
}

bool read_train_summary(const std::string& outdir, TrainSummary& summary) {
  const std::string final_ckpt = join(outdir, "final.ckpt");
  const std::string evals = join(outdir, "evals.csv");
  if (!fs::exists(final_ckpt) || !fs::exists(evals)) return false;
  const persistence::CsvTable t = persistence::read_csv(evals);
  if (t.rows.empty()) return false;
  const int mr = t.column("mean_return");
  const int best = t.column("best");
  summary.final_return = std::stod(t.rows.back()[mr]);
  summary.best_return = -std::numeric_limits<double>::infinity();
  for (const auto& row : t.rows) {
    if (row[best] == "1") summary.best_return = std::stod(row[mr]);
  }
  summary.final_checkpoint = final_ckpt;
  return true;
}

namespace {

struct Loaded {
  persistence::LoadedCheckpoint ckpt;
  std::unique_ptr<envs::Env> env;
  int time_steps = 1;
};

Loaded load_for_eval(const RunConfig& cfg, const EvalRequest& req) {
  Loaded l;
  std::optional<sac::Variant> expected;
  if (req.variant) expected = sac::parse_variant(*req.variant);
  l.ckpt = persistence::load_checkpoint(req.checkpoint, expected);
  const std::string env_id = req.env.empty() ? l.ckpt.meta.env_id : req.env;
  if (env_id.empty()) throw UsageError("checkpoint does not name an environment; pass --env");
  if (!l.ckpt.meta.env_id.empty() && l.ckpt.meta.env_id != env_id) {
    throw DataError("checkpoint was trained on " + l.ckpt.meta.env_id + ", not " + env_id);
  }
  l.env = make_env(cfg, env_id);
  const math::Network& net = l.ckpt.actor->network();
  if (net.input_dim() != l.env->observation_dim() || l.ckpt.actor->action_dim() != l.env->action_dim()) {
    throw DataError("checkpoint network does not match the " + env_id + " observation/action sizes");
  }
  if (l.ckpt.actor->spiking()) l.time_steps = static_cast<const snn::SpikingNetwork&>(net).time_steps();
  return l;
}

snn::NeuronKind default_neuron(const Loaded& l, const EvalRequest& req) {
  if (req.neuron) return *req.neuron;
  if (!l.ckpt.actor->spiking()) return snn::NeuronKind::kLeaky;
  return static_cast<const snn::SpikingNetwork&>(l.ckpt.actor->network()).neuron_kind();
}

int default_cutoff(const Loaded& l, const EvalRequest& req) {
  if (req.cutoff) return *req.cutoff;
  return l.ckpt.meta.cutoff > 0 ? l.ckpt.meta.cutoff : l.time_steps;
}

spttq::EvalOptions eval_options(const RunConfig& cfg, const EvalRequest& req, int default_episodes) {
  spttq::EvalOptions o;
  o.episodes = req.episodes.value_or(default_episodes);
  if (o.episodes < 1) throw UsageError("--episodes must be at least 1");
  o.seed = cfg.seed;
  o.jobs = std::max(1, req.jobs);
  o.episode.stable_eps = cfg.spttq.stable_eps;
  return o;
}

CsvValue optional_real(const std::optional<double>& v) {
  if (v) return *v;
  return std::string();
}

void write_episode_rows(const std::string& path, const spttq::EvalReport& r, std::uint64_t seed) {
  std::vector<CsvRow> rows;
  for (std::size_t e = 0; e < r.episodes.size(); ++e) {
    const spttq::EpisodeRecord& ep = r.episodes[e];
    rows.push_back({{"episode", static_cast<std::int64_t>(e)},
                    {"seed", std::to_string(spttq::episode_seed(seed, static_cast<int>(e)))},
                    {"episodic_return", ep.total_return},
                    {"rl_steps", static_cast<std::int64_t>(ep.rl_steps)},
                    {"time_steps", static_cast<std::int64_t>(ep.time_steps)},
                    {"total_spikes", ep.total_spikes},
                    {"terminated", static_cast<std::int64_t>(ep.terminated ? 1 : 0)}});
  }
  persistence::write_metrics_csv(
      path, {"episode", "seed", "episodic_return", "rl_steps", "time_steps", "total_spikes", "terminated"}, rows);
}

void require_spiking(const Loaded& l, const std::string& what) {
  if (!l.ckpt.actor->spiking()) {
    throw DataError(what + " needs a spiking actor; the checkpoint holds an artificial " +
                    sac::to_string(l.ckpt.meta.variant) + " actor");
  }
}

}  // namespace

const std::vector<std::string>& report_columns() {
  static const std::vector<std::string> cols = {"cutoff",          "neuron_mode",  "reward_mean",     "reward_var",
                                                "rl_steps_mean",   "rl_steps_var", "time_steps_mean", "total_spikes",
                                                "power_decrement", "latency_decrement"};
  return cols;
}

CsvRow report_row(const spttq::EvalReport& r) {
  return {{"cutoff", static_cast<std::int64_t>(r.cutoff)},
          {"neuron_mode", r.mode},
          {"reward_mean", r.return_mean},
          {"reward_var", r.return_var},
          {"rl_steps_mean", r.rl_steps_mean},
          {"rl_steps_var", r.rl_steps_var},
          {"time_steps_mean", r.time_steps_mean},
          {"total_spikes", r.spikes_per_step_mean},
          {"power_decrement", optional_real(r.power_decrement)},
          {"latency_decrement", optional_real(r.latency_decrement)}};
}

spttq::EvalReport read_report(const std::string& path) {
  const persistence::CsvTable t = persistence::read_csv(path);
  if (t.rows.empty()) throw DataError("report '" + path + "' has no rows");
  const auto& row = t.rows.front();
  spttq::EvalReport r;
  try {
    r.cutoff = std::stoi(row[t.column("cutoff")]);
    r.mode = row[t.column("neuron_mode")];
    r.return_mean = std::stod(row[t.column("reward_mean")]);
    r.return_var = std::stod(row[t.column("reward_var")]);
    r.rl_steps_mean = std::stod(row[t.column("rl_steps_mean")]);
    r.rl_steps_var = std::stod(row[t.column("rl_steps_var")]);
    r.time_steps_mean = std::stod(row[t.column("time_steps_mean")]);
    r.spikes_per_step_mean = std::stod(row[t.column("total_spikes")]);
  } catch (const Error&) {
    throw;
  } catch (const std::exception&) {
    throw DataError("report '" + path + "' has a malformed row");
  }
  return r;
}

spttq::EvalReport cmd_eval(const RunConfig& cfg, const EvalRequest& req, const std::string& outdir) {
  Loaded l = load_for_eval(cfg, req);
  const int cutoff = default_cutoff(l, req);
  const spttq::EvalOptions opts = eval_options(cfg, req, cfg.spttq.episodes);
  spttq::EvalReport r = spttq::evaluate_policy(*l.ckpt.actor, *l.env, cutoff, default_neuron(l, req), opts);
  if (!req.baseline.empty()) spttq::apply_baseline(r, read_report(req.baseline));
  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "eval");
  persistence::write_metrics_csv(join(outdir, "eval.csv"), report_columns(), {report_row(r)});
  write_episode_rows(join(outdir, "eval_episodes.csv"), r, opts.seed);
  return r;
}

int cmd_spttq(const RunConfig& cfg, const EvalRequest& req, const std::string& outdir) {
  Loaded l = load_for_eval(cfg, req);
  require_spiking(l, "temporal quantisation");
  const double delta = req.delta.value_or(cfg.spttq.delta);
  if (!(delta > 0.0 && delta <= 1.0)) throw UsageError("--delta must lie in (0, 1]");
  const spttq::EvalOptions opts = eval_options(cfg, req, cfg.spttq.episodes);
  double floor = 0.0;
  if (!req.floor.empty()) {
    floor = read_report(req.floor).return_mean;
  } else {
    spttq::EvalOptions fo = opts;
    fo.episodes = cfg.spttq.floor_episodes;
    floor = spttq::evaluate_random_policy(*l.env, fo).return_mean;
  }
  spttq::SpttqResult res = spttq::spttq_optimize(*l.ckpt.actor, *l.env, delta, floor, opts);

  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "spttq");
  std::vector<CsvRow> rows;
  spttq::EvalReport base = res.baseline;
  spttq::apply_baseline(base, res.baseline);
  rows.push_back(report_row(base));
  for (const spttq::EvalReport& r : res.reports) rows.push_back(report_row(r));
  persistence::write_metrics_csv(join(outdir, "spttq_sweep.csv"), report_columns(), rows);
  persistence::write_metrics_csv(join(outdir, "spttq.csv"),
                                 {"tau", "time_steps", "delta", "threshold", "baseline_return", "floor_return"},
                                 {{{"tau", static_cast<std::int64_t>(res.tau)},
                                   {"time_steps", static_cast<std::int64_t>(l.time_steps)},
                                   {"delta", delta},
                                   {"threshold", res.threshold},
                                   {"baseline_return", res.baseline.return_mean},
                                   {"floor_return", floor}}});
  persistence::CheckpointMeta meta = l.ckpt.meta;
  meta.cutoff = res.tau;
  persistence::save_checkpoint(join(outdir, "sleaky_tau" + std::to_string(res.tau) + ".ckpt"), *res.converted, meta);
  return res.tau;
}

void cmd_sweep(const RunConfig& cfg, const EvalRequest& req, const std::string& outdir) {
  Loaded l = load_for_eval(cfg, req);
  require_spiking(l, "a cutoff sweep");
  const spttq::EvalOptions opts = eval_options(cfg, req, cfg.spttq.episodes);
  std::vector<snn::NeuronKind> modes = {snn::NeuronKind::kLeaky, snn::NeuronKind::kSLeaky};
  if (req.neuron) modes = {*req.neuron};
  const spttq::EvalReport baseline =
      spttq::evaluate_policy(*l.ckpt.actor, *l.env, l.time_steps, snn::NeuronKind::kLeaky, opts);
  std::vector<CsvRow> rows;
  for (snn::NeuronKind mode : modes) {
    for (int t = l.time_steps; t >= 1; --t) {
      spttq::EvalReport r = (mode == snn::NeuronKind::kLeaky && t == l.time_steps)
                                ? baseline
                                : spttq::evaluate_policy(*l.ckpt.actor, *l.env, t, mode, opts);
      spttq::apply_baseline(r, baseline);
      rows.push_back(report_row(r));
    }
  }
  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "sweep");
  persistence::write_metrics_csv(join(outdir, "sweep.csv"), report_columns(), rows);
}

void cmd_trace(const RunConfig& cfg, const EvalRequest& req, const std::string& outdir) {
  Loaded l = load_for_eval(cfg, req);
  require_spiking(l, "a trace");
  const int cutoff = req.cutoff.value_or(l.time_steps);
  spttq::EvalOptions opts = eval_options(cfg, req, cfg.spttq.trace_episodes);
  opts.episode.record_trace = true;
  const snn::NeuronKind traced = req.neuron.value_or(snn::NeuronKind::kLeaky);

  std::vector<CsvRow> trace_rows;
  std::map<snn::NeuronKind, spttq::StableHistogram> hist;
  for (snn::NeuronKind mode : {snn::NeuronKind::kLeaky, snn::NeuronKind::kSLeaky}) {
    const spttq::EvalReport r = spttq::evaluate_policy(*l.ckpt.actor, *l.env, cutoff, mode, opts);
    std::vector<std::optional<int>> points;
    for (std::size_t e = 0; e < r.episodes.size(); ++e) {
      const spttq::EpisodeRecord& ep = r.episodes[e];
      for (std::size_t s = 0; s < ep.trace.size(); ++s) {
        const spttq::StepTrace& st = ep.trace[s];
        points.push_back(st.stable_point);
        if (mode != traced) continue;
        for (std::size_t t = 0; t < st.decoded.size(); ++t) {
          const bool stable = st.stable_point && static_cast<int>(t) + 1 >= *st.stable_point;
          trace_rows.push_back({{"episode", static_cast<std::int64_t>(e)},
                                {"rl_step", static_cast<std::int64_t>(s)},
                                {"time_step", static_cast<std::int64_t>(t + 1)},
                                {"decoded", st.decoded[t][0]},
                                {"stable", static_cast<std::int64_t>(stable ? 1 : 0)}});
        }
      }
    }
    hist[mode] = spttq::histogram_from_points(points, l.time_steps);
  }

  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "trace");
  persistence::write_metrics_csv(join(outdir, "trace.csv"), {"episode", "rl_step", "time_step", "decoded", "stable"},
                                 trace_rows);
  std::vector<CsvRow> hist_rows;
  for (int t = 0; t < l.time_steps; ++t) {
    hist_rows.push_back({{"time_step", static_cast<std::int64_t>(t + 1)},
                         {"count_leaky", hist[snn::NeuronKind::kLeaky].counts[static_cast<std::size_t>(t)]},
                         {"count_sleaky", hist[snn::NeuronKind::kSLeaky].counts[static_cast<std::size_t>(t)]}});
  }
  persistence::write_metrics_csv(join(outdir, "histogram.csv"), {"time_step", "count_leaky", "count_sleaky"},
                                 hist_rows);
  std::vector<CsvRow> summary;
  for (const auto& [mode, h] : hist) {
    summary.push_back({{"neuron_mode", snn::to_string(mode)},
                       {"samples", h.samples},
                       {"unstable", h.unstable},
                       {"mean", h.mean},
                       {"variance", h.variance}});
  }
  persistence::write_metrics_csv(join(outdir, "stable_summary.csv"),
                                 {"neuron_mode", "samples", "unstable", "mean", "variance"}, summary);
}

spttq::EvalReport cmd_floor(const RunConfig& cfg, const EvalRequest& req, const std::string& outdir) {
  const std::string env_id = req.env.empty() ? cfg.env : req.env;
  std::unique_ptr<envs::Env> env = make_env(cfg, env_id);
  const spttq::EvalOptions opts = eval_options(cfg, req, cfg.spttq.floor_episodes);
  spttq::EvalReport r = spttq::evaluate_random_policy(*env, opts);
  fs::create_directories(outdir);
  write_run_log(cfg, outdir, "floor");
  persistence::write_metrics_csv(join(outdir, "floor.csv"), report_columns(), {report_row(r)});
  write_episode_rows(join(outdir, "floor_episodes.csv"), r, opts.seed);
  return r;
}

}  // namespace rehabsnn::cli
