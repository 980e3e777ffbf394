#include "rehabsnn/cli/commands.hpp"
#include "rehabsnn/error.hpp"
#include "rehabsnn/persistence/config.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

using namespace rehabsnn;

namespace {

struct Options {
  std::string config;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string outdir;
  std::string variant;
  std::string env;
  std::string checkpoint;
  std::optional<int> cutoff;
  std::string neuron;
  std::optional<int> episodes;
  std::string baseline;
  std::string floor;
  std::optional<double> delta;
  int jobs = 1;
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "Config file, sectioned key = value (default: built-in defaults)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--set", o.overrides, "Override a config key, SECTION.KEY=VALUE (repeatable)");
  cmd->add_option("--seed", o.seed, "Seed (default: run.seed, 1)");
  cmd->add_option("--outdir", o.outdir, "Directory that receives every output file")->required();
}

void add_env(CLI::App* cmd, Options& o, const std::string& fallback) {
  cmd->add_option("--env", o.env, "kenv or denv (default: " + fallback + ")")->check(CLI::IsMember({"kenv", "denv"}));
}

void add_variant(CLI::App* cmd, Options& o, const std::string& fallback) {
  cmd->add_option("--variant", o.variant, "asac, hsac or ssac (default: " + fallback + ")")
      ->check(CLI::IsMember({"asac", "hsac", "ssac"}));
}

void add_checkpoint(CLI::App* cmd, Options& o) {
  cmd->add_option("--checkpoint", o.checkpoint, "Actor checkpoint written by train or spttq")
      ->required()
      ->check(CLI::ExistingFile);
}

void add_jobs(CLI::App* cmd, Options& o) {
  cmd->add_option("--jobs", o.jobs, "Parallel evaluation workers")->capture_default_str()->check(CLI::PositiveNumber);
}

void add_episodes(CLI::App* cmd, Options& o, const std::string& fallback) {
  cmd->add_option("--episodes", o.episodes, "Evaluation episodes (default: " + fallback + ")")
      ->check(CLI::PositiveNumber);
}

void add_neuron(CLI::App* cmd, Options& o, const std::string& fallback) {
  cmd->add_option("--neuron", o.neuron, "leaky or sleaky (default: " + fallback + ")")
      ->check(CLI::IsMember({"leaky", "sleaky"}));
}

void add_cutoff(CLI::App* cmd, Options& o, const std::string& fallback) {
  cmd->add_option("--cutoff", o.cutoff, "Time steps per RL step after the first (default: " + fallback + ")")
      ->check(CLI::PositiveNumber);
}

persistence::RunConfig resolve(const Options& o) {
  persistence::RunConfig cfg = o.config.empty() ? persistence::parse_config("") : persistence::load_config(o.config);
  persistence::apply_overrides(cfg, o.overrides);
  if (o.seed) cfg.seed = *o.seed;
  if (!o.variant.empty()) cfg.variant = o.variant;
  if (!o.env.empty()) cfg.env = o.env;
  return cfg;
}

cli::EvalRequest request(const Options& o) {
  cli::EvalRequest r;
  r.checkpoint = o.checkpoint;
  r.env = o.env;
  if (!o.variant.empty()) r.variant = o.variant;
  r.cutoff = o.cutoff;
  if (!o.neuron.empty()) r.neuron = snn::parse_neuron_kind(o.neuron);
  r.episodes = o.episodes;
  r.delta = o.delta;
  r.baseline = o.baseline;
  r.floor = o.floor;
  r.jobs = o.jobs;
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spiking soft actor-critic training and temporal quantisation for shoulder-rehabilitation control"};
  app.require_subcommand(1, 1);
  app.get_formatter()->column_width(40);

  Options o;
  o.jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

  CLI::App* train = app.add_subcommand("train", "Train an agent; writes logs, evaluations and checkpoints");
  add_common(train, o);
  add_variant(train, o, "run.variant, hsac");
  add_env(train, o, "run.env, kenv");

  CLI::App* eval = app.add_subcommand("eval", "Evaluate a checkpoint at a cutoff and neuron mode");
  add_common(eval, o);
  add_checkpoint(eval, o);
  add_env(eval, o, "the checkpoint's env");
  add_variant(eval, o, "any; when given the checkpoint must match");
  add_cutoff(eval, o, "the checkpoint's cutoff, else T");
  add_neuron(eval, o, "the checkpoint's neuron kind");
  add_episodes(eval, o, "spttq.episodes, 50");
  eval->add_option("--baseline", o.baseline, "eval.csv of a reference run; adds decrement columns")
      ->check(CLI::ExistingFile);
  add_jobs(eval, o);

  CLI::App* opt = app.add_subcommand("spttq", "Choose a reduced cutoff and emit an SLeaky checkpoint");
  add_common(opt, o);
  add_checkpoint(opt, o);
  add_env(opt, o, "the checkpoint's env");
  add_variant(opt, o, "any spiking variant");
  opt->add_option("--delta", o.delta, "Kept fraction of the return above the floor (default: spttq.delta, 0.95)");
  opt->add_option("--floor", o.floor, "floor.csv from the floor command (default: measured with spttq.floor_episodes)")
      ->check(CLI::ExistingFile);
  add_episodes(opt, o, "spttq.episodes, 50");
  add_jobs(opt, o);

  CLI::App* sweep = app.add_subcommand("sweep", "Evaluate every cutoff T..1 against Leaky at T");
  add_common(sweep, o);
  add_checkpoint(sweep, o);
  add_env(sweep, o, "the checkpoint's env");
  add_variant(sweep, o, "any spiking variant");
  add_neuron(sweep, o, "both");
  add_episodes(sweep, o, "spttq.episodes, 50");
  add_jobs(sweep, o);

  CLI::App* trace = app.add_subcommand("trace", "Export per-tick decoded actions and stable-point histograms");
  add_common(trace, o);
  add_checkpoint(trace, o);
  add_env(trace, o, "the checkpoint's env");
  add_variant(trace, o, "any spiking variant");
  add_cutoff(trace, o, "T");
  add_neuron(trace, o, "leaky; the histogram always covers both");
  add_episodes(trace, o, "spttq.trace_episodes, 5");
  add_jobs(trace, o);

  CLI::App* floor = app.add_subcommand("floor", "Evaluate the uniform random policy as a reward floor");
  add_common(floor, o);
  add_env(floor, o, "run.env, kenv");
  add_episodes(floor, o, "spttq.floor_episodes, 50");
  add_jobs(floor, o);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ErrorKind::kUsage);
  }

  try {
    const persistence::RunConfig cfg = resolve(o);
    const cli::EvalRequest req = request(o);
    if (train->parsed()) {
      const cli::TrainSummary s = cli::cmd_train(cfg, o.outdir, &std::cerr);
      std::cout << "final_return " << s.final_return << "\ncheckpoint " << s.final_checkpoint << '\n';
    } else if (eval->parsed()) {
      const spttq::EvalReport r = cli::cmd_eval(cfg, req, o.outdir);
      std::cout << "reward_mean " << r.return_mean << '\n';
    } else if (opt->parsed()) {
      std::cout << "tau " << cli::cmd_spttq(cfg, req, o.outdir) << '\n';
    } else if (sweep->parsed()) {
      cli::cmd_sweep(cfg, req, o.outdir);
    } else if (trace->parsed()) {
      cli::cmd_trace(cfg, req, o.outdir);
    } else if (floor->parsed()) {
      const spttq::EvalReport r = cli::cmd_floor(cfg, req, o.outdir);
      std::cout << "reward_mean " << r.return_mean << '\n';
    }
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::kData);
  }
  return 0;
}
