#pragma once

#include "rehabsnn/envs/env.hpp"
#include "rehabsnn/persistence/config.hpp"
#include "rehabsnn/persistence/csv.hpp"
#include "rehabsnn/spttq/spttq.hpp"

#include <optional>

#include <memory>
#include <ostream>
#include <string>

namespace rehabsnn::cli {

std::unique_ptr<envs::Env> make_env(const persistence::RunConfig& cfg, const std::string& env_id);

struct TrainSummary {
  double final_return = 0.0;
  double best_return = 0.0;
  std::string final_checkpoint;
};

// Trains cfg.variant on cfg.env with cfg.seed. Writes under `outdir`:
//   run.log           config text as loaded plus the resolved values
//   train_log.csv     one row per finished episode
//   evals.csv         one row per deterministic evaluation (the last row is final)
//   step_<N>.ckpt     actor after each evaluation; best.ckpt; final.ckpt (written last)
TrainSummary cmd_train(const persistence::RunConfig& cfg, const std::string& outdir, std::ostream* progress = nullptr);

// Reads the final evaluation return back from a finished training directory.
// Returns false when the directory does not hold a completed run.
bool read_train_summary(const std::string& outdir, TrainSummary& summary);

// Options shared by the checkpoint-driven commands. Unset optionals fall back to the
// checkpoint (cutoff, neuron mode) or to the config (episodes, delta).
struct EvalRequest {
  std::string checkpoint;
  std::string env;  // empty: the checkpoint's env
  std::optional<std::string> variant;
  std::optional<int> cutoff;
  std::optional<snn::NeuronKind> neuron;
  std::optional<int> episodes;
  std::optional<double> delta;
  std::string baseline;  // eval.csv of a reference run
  std::string floor;     // floor.csv from cmd_floor
  int jobs = 1;
};

// Column schema shared by eval, sweep and spttq reports.
const std::vector<std::string>& report_columns();
persistence::CsvRow report_row(const spttq::EvalReport& r);
// Reads the first summary row of a report CSV back (aggregates only).
spttq::EvalReport read_report(const std::string& path);

//   eval.csv           one summary row
//   eval_episodes.csv  one row per episode
spttq::EvalReport cmd_eval(const persistence::RunConfig& cfg, const EvalRequest& req, const std::string& outdir);

//   spttq_sweep.csv    baseline row, then the converted network from T downwards
//   spttq.csv          chosen cutoff, threshold, baseline and floor returns
//   sleaky_tau<N>.ckpt converted actor tagged with the chosen cutoff
int cmd_spttq(const persistence::RunConfig& cfg, const EvalRequest& req, const std::string& outdir);

//   sweep.csv          every cutoff T..1 for each requested neuron mode, against Leaky at T
void cmd_sweep(const persistence::RunConfig& cfg, const EvalRequest& req, const std::string& outdir);

//   trace.csv          decoded action per tick for every RL step of every episode
//   histogram.csv      stable-point counts per tick for Leaky and SLeaky
//   stable_summary.csv samples, unstable count and moment fit per mode
void cmd_trace(const persistence::RunConfig& cfg, const EvalRequest& req, const std::string& outdir);

//   floor.csv          random-policy summary row
//   floor_episodes.csv one row per episode
spttq::EvalReport cmd_floor(const persistence::RunConfig& cfg, const EvalRequest& req, const std::string& outdir);

}  // namespace rehabsnn::cli
