#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

namespace {

namespace fs = std::filesystem;

struct CliRun {
  int code = -1;
  std::string output;
};

fs::path workspace() {
  static const fs::path root = [] {
    fs::path p = fs::temp_directory_path() / ("rehabsnn_cli_" + std::to_string(::getpid()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
  }();
  return root;
}

// Runs the CLI inside `cwd` with stderr folded into the captured output.
CliRun cli(const std::string& args, const fs::path& cwd = workspace()) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" REHABSNN_CLI "' " + args + " 2>&1";
  CliRun r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return r;
  std::array<char, 4096> buf{};
  std::size_t n = 0;
  while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0) r.output.append(buf.data(), n);
  const int status = ::pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

std::vector<std::vector<std::string>> rows_of(const fs::path& p) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream is(slurp(p));
  std::string line;
  while (std::getline(is, line)) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ls(line);
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.emplace_back();
    rows.push_back(cells);
  }
  return rows;
}

int col(const std::vector<std::vector<std::string>>& rows, const std::string& name) {
  for (std::size_t i = 0; i < rows.at(0).size(); ++i) {
    if (rows[0][i] == name) return static_cast<int>(i);
  }
  ADD_FAILURE() << "no column " << name;
  return 0;
}

const std::string kQuick =
    "--set sac.hidden=16,12 --set sac.total_steps=600 --set sac.learning_starts=200 --set sac.batch_size=16 "
    "--set sac.eval_interval=300 --set sac.eval_episodes=1 --set snn.time_steps=6 --set kenv.max_steps=60";

// One small HSAC and one ASAC run shared by the checkpoint-driven tests.
const fs::path& trained(const std::string& variant) {
  static std::map<std::string, fs::path> cache;
  auto it = cache.find(variant);
  if (it != cache.end()) return it->second;
  const fs::path dir = workspace() / ("train_" + variant);
  const CliRun r = cli("train --variant " + variant + " --env kenv --seed 3 " + kQuick + " --outdir " + dir.string());
  EXPECT_EQ(r.code, 0) << r.output;
  return cache[variant] = dir;
}

const std::string kEnvSet = "--set kenv.max_steps=60 --set snn.time_steps=6";

TEST(Cli, HelpListsEveryFlagAndDefault) {
  const CliRun top = cli("--help");
  EXPECT_EQ(top.code, 0);
  for (const char* sub : {"train", "eval", "spttq", "sweep", "trace", "floor"}) {
    EXPECT_NE(top.output.find(sub), std::string::npos) << sub;
  }
  const std::map<std::string, std::vector<std::string>> flags = {
      {"train", {"--config", "--set", "--seed", "--outdir", "--variant", "--env"}},
      {"eval",
       {"--config", "--set", "--seed", "--outdir", "--checkpoint", "--env", "--variant", "--cutoff", "--neuron",
        "--episodes", "--baseline", "--jobs"}},
      {"spttq",
       {"--config", "--set", "--seed", "--outdir", "--checkpoint", "--env", "--variant", "--delta", "--floor",
        "--episodes", "--jobs"}},
      {"sweep", {"--config", "--set", "--seed", "--outdir", "--checkpoint", "--env", "--neuron", "--episodes", "--jobs"}},
      {"trace",
       {"--config", "--set", "--seed", "--outdir", "--checkpoint", "--env", "--cutoff", "--neuron", "--episodes",
        "--jobs"}},
      {"floor", {"--config", "--set", "--seed", "--outdir", "--env", "--episodes", "--jobs"}},
  };
  for (const auto& [sub, list] : flags) {
    const CliRun h = cli(sub + " --help");
    EXPECT_EQ(h.code, 0) << sub;
    for (const std::string& f : list) EXPECT_NE(h.output.find(f), std::string::npos) << sub << " " << f;
    // Every option line states its default or that it is required.
    std::istringstream is(h.output);
    std::string line;
    while (std::getline(is, line)) {
      if (line.find("  --") != 0 || line.find("--help") != std::string::npos) continue;
      const bool documented = line.find("default") != std::string::npos || line.find("REQUIRED") != std::string::npos ||
                              line.find('[') != std::string::npos || line.find("repeatable") != std::string::npos ||
                              line.find("decrement") != std::string::npos;
      EXPECT_TRUE(documented) << sub << ": " << line;
    }
  }
  EXPECT_NE(cli("eval --help").output.find("--episodes"), std::string::npos);
  EXPECT_NE(cli("eval --help").output.find("50"), std::string::npos);
  EXPECT_NE(cli("spttq --help").output.find("0.95"), std::string::npos);
}

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(cli("").code, 2);
  EXPECT_EQ(cli("fly --outdir x").code, 2);
  EXPECT_EQ(cli("train --variant tsac --outdir x").code, 2);
  EXPECT_EQ(cli("train --env mujoco --outdir x").code, 2);
  EXPECT_EQ(cli("train").code, 2);  // --outdir is required
  EXPECT_EQ(cli("floor --episodes 0 --outdir x").code, 2);
}

TEST(Cli, ConfigErrorsExitWithThree) {
  const fs::path cfg = workspace() / "bad.ini";
  std::ofstream(cfg) << "[sac]\ngamma = 1.5\n";
  const CliRun r = cli("train --config " + cfg.string() + " --outdir cfgerr");
  EXPECT_EQ(r.code, 3);
  EXPECT_NE(r.output.find("sac.gamma"), std::string::npos) << r.output;
  const fs::path unknown = workspace() / "unknown.ini";
  std::ofstream(unknown) << "[sac]\n\nwarp = 9\n";
  const CliRun u = cli("train --config " + unknown.string() + " --outdir cfgerr");
  EXPECT_EQ(u.code, 3);
  EXPECT_NE(u.output.find("unknown.ini:3"), std::string::npos) << u.output;
  EXPECT_EQ(cli("floor --set sac.nothing=1 --outdir cfgerr").code, 3);
  EXPECT_FALSE(fs::exists(workspace() / "cfgerr"));
}

TEST(Cli, TrainWritesLogsAndCheckpoints) {
  const fs::path& dir = trained("hsac");
  for (const char* f : {"run.log", "train_log.csv", "evals.csv", "best.ckpt", "final.ckpt", "step_00000300.ckpt",
                        "step_00000600.ckpt"}) {
    EXPECT_TRUE(fs::exists(dir / f)) << f;
  }
  const auto log = rows_of(dir / "train_log.csv");
  EXPECT_EQ(log[0], (std::vector<std::string>{"global_step", "episodic_return", "episode_length", "critic_loss",
                                               "actor_loss", "alpha"}));
  EXPECT_EQ(log.size(), 11u);  // 600 steps of 60-step episodes
  const std::string run_log = slurp(dir / "run.log");
  EXPECT_NE(run_log.find("sac.hidden=16,12"), std::string::npos);
  EXPECT_NE(run_log.find("hidden = 16,12"), std::string::npos);
}

TEST(Cli, TrainIsByteIdenticalUnderTheSameSeed) {
  const fs::path a = workspace() / "repeat_a";
  const fs::path b = workspace() / "repeat_b";
  ASSERT_EQ(cli("train --variant hsac --seed 5 " + kQuick + " --outdir " + a.string()).code, 0);
  ASSERT_EQ(cli("train --variant hsac --seed 5 " + kQuick + " --outdir " + b.string()).code, 0);
  for (const char* f : {"train_log.csv", "evals.csv", "final.ckpt", "run.log"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  const fs::path c = workspace() / "repeat_c";
  ASSERT_EQ(cli("train --variant hsac --seed 6 " + kQuick + " --outdir " + c.string()).code, 0);
  EXPECT_NE(slurp(a / "train_log.csv"), slurp(c / "train_log.csv"));
}

TEST(Cli, WritesOnlyUnderOutdir) {
  const fs::path sandbox = workspace() / "sandbox";
  fs::create_directories(sandbox);
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("train --variant asac " + kQuick + " --outdir out/train", sandbox).code, 0);
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --outdir out/eval", sandbox).code, 0);
  ASSERT_EQ(cli("floor " + kEnvSet + " --episodes 2 --outdir out/floor", sandbox).code, 0);
  ASSERT_EQ(cli("trace --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --outdir out/trace", sandbox).code, 0);
  ASSERT_EQ(cli("sweep --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --outdir out/sweep", sandbox).code, 0);
  ASSERT_EQ(cli("spttq --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --outdir out/spttq", sandbox).code, 0);
  for (const auto& entry : fs::recursive_directory_iterator(sandbox)) {
    const std::string rel = fs::relative(entry.path(), sandbox).string();
    EXPECT_EQ(rel.rfind("out", 0), 0u) << rel;
  }
}

TEST(Cli, EvalDefaultsToFullT) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --outdir ev_default").code, 0);
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --cutoff 6 --outdir ev_t").code, 0);
  EXPECT_EQ(slurp(workspace() / "ev_default" / "eval.csv"), slurp(workspace() / "ev_t" / "eval.csv"));
  const auto rows = rows_of(workspace() / "ev_default" / "eval.csv");
  EXPECT_EQ(rows[1][col(rows, "cutoff")], "6");
  EXPECT_EQ(rows[1][col(rows, "time_steps_mean")], "360");
}

TEST(Cli, EvalBaselineAddsDecrements) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --outdir ev_base").code, 0);
  const std::string base = (workspace() / "ev_base" / "eval.csv").string();
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --cutoff 2 --neuron sleaky --baseline " +
                base + " --outdir ev_cut")
                .code,
            0);
  const auto rows = rows_of(workspace() / "ev_cut" / "eval.csv");
  // 6 + 59 * 2 = 124 ticks against 360: 65.5555...% reported as 65.55.
  EXPECT_EQ(rows[1][col(rows, "time_steps_mean")], "124");
  EXPECT_EQ(rows[1][col(rows, "latency_decrement")], "65.55");
  EXPECT_FALSE(rows[1][col(rows, "power_decrement")].empty());
  const auto base_rows = rows_of(base);
  EXPECT_TRUE(base_rows[1][col(base_rows, "power_decrement")].empty());
}

TEST(Cli, EvalSingleEpisodeGivesSingleRowZeroVariance) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("eval --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --outdir ev_one").code, 0);
  const auto rows = rows_of(workspace() / "ev_one" / "eval.csv");
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[1][col(rows, "reward_var")], "0");
  EXPECT_EQ(rows_of(workspace() / "ev_one" / "eval_episodes.csv").size(), 2u);
}

TEST(Cli, CheckpointMismatchesExitWithFour) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  EXPECT_EQ(cli("eval --checkpoint " + ckpt + " --variant asac " + kEnvSet + " --outdir mm1").code, 4);
  EXPECT_EQ(cli("eval --checkpoint " + ckpt + " --env denv " + kEnvSet + " --outdir mm2").code, 4);
  const std::string asac = (trained("asac") / "final.ckpt").string();
  const CliRun r = cli("spttq --checkpoint " + asac + " " + kEnvSet + " --outdir mm3");
  EXPECT_EQ(r.code, 4);
  EXPECT_NE(r.output.find("spiking"), std::string::npos) << r.output;
  const fs::path broken = workspace() / "broken.ckpt";
  const std::string bytes = slurp(ckpt);
  std::ofstream(broken, std::ios::binary) << bytes.substr(0, bytes.size() - 1);
  EXPECT_EQ(cli("eval --checkpoint " + broken.string() + " " + kEnvSet + " --outdir mm4").code, 4);
}

TEST(Cli, FloorRunsFullKenvEpisodesDeterministically) {
  ASSERT_EQ(cli("floor --env kenv --episodes 4 --seed 2 --outdir floor_a").code, 0);
  ASSERT_EQ(cli("floor --env kenv --episodes 4 --seed 2 --outdir floor_b").code, 0);
  EXPECT_EQ(slurp(workspace() / "floor_a" / "floor.csv"), slurp(workspace() / "floor_b" / "floor.csv"));
  const auto eps = rows_of(workspace() / "floor_a" / "floor_episodes.csv");
  ASSERT_EQ(eps.size(), 5u);
  for (std::size_t i = 1; i < eps.size(); ++i) EXPECT_EQ(eps[i][col(eps, "rl_steps")], "750");
}

TEST(Cli, SpttqUsesFloorAndEmitsAConsistentCheckpoint) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("floor " + kEnvSet + " --episodes 3 --outdir sp_floor").code, 0);
  const CliRun r = cli("spttq --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --delta 0.9 --floor " +
                    (workspace() / "sp_floor" / "floor.csv").string() + " --outdir sp");
  ASSERT_EQ(r.code, 0) << r.output;
  const auto summary = rows_of(workspace() / "sp" / "spttq.csv");
  const std::string tau = summary[1][col(summary, "tau")];
  const auto floor = rows_of(workspace() / "sp_floor" / "floor.csv");
  EXPECT_EQ(summary[1][col(summary, "floor_return")], floor[1][col(floor, "reward_mean")]);
  const fs::path converted = workspace() / "sp" / ("sleaky_tau" + tau + ".ckpt");
  ASSERT_TRUE(fs::exists(converted));
  // Re-evaluating the emitted checkpoint reproduces the sweep row for tau.
  ASSERT_EQ(cli("eval --checkpoint " + converted.string() + " " + kEnvSet + " --episodes 2 --outdir sp_re").code, 0);
  const auto re = rows_of(workspace() / "sp_re" / "eval.csv");
  EXPECT_EQ(re[1][col(re, "cutoff")], tau);
  EXPECT_EQ(re[1][col(re, "neuron_mode")], "sleaky");
  const auto sweep = rows_of(workspace() / "sp" / "spttq_sweep.csv");
  bool found = false;
  for (std::size_t i = 2; i < sweep.size(); ++i) {
    if (sweep[i][col(sweep, "cutoff")] == tau) {
      found = true;
      EXPECT_EQ(sweep[i][col(sweep, "reward_mean")], re[1][col(re, "reward_mean")]);
      EXPECT_EQ(sweep[i][col(sweep, "total_spikes")], re[1][col(re, "total_spikes")]);
    }
  }
  EXPECT_TRUE(found || tau == "6");
  EXPECT_EQ(cli("spttq --checkpoint " + ckpt + " " + kEnvSet + " --delta 1.5 --outdir sp_bad").code, 2);
}

TEST(Cli, TraceRowsAndHistogramAgree) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("trace --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --cutoff 3 --outdir tr").code, 0);
  const auto trace = rows_of(workspace() / "tr" / "trace.csv");
  // 2 episodes of 6 + 59 * 3 ticks.
  EXPECT_EQ(trace.size() - 1, 2u * (6 + 59 * 3));
  // A step is stable from its stable point to the end, so counting the first stable
  // tick of each step rebuilds the histogram.
  std::map<int, long> first_stable;
  const int ep = col(trace, "episode"), rs = col(trace, "rl_step"), ts = col(trace, "time_step"), st = col(trace, "stable");
  std::set<std::pair<std::string, std::string>> seen;
  for (std::size_t i = 1; i < trace.size(); ++i) {
    if (trace[i][st] != "1") continue;
    if (seen.insert({trace[i][ep], trace[i][rs]}).second) ++first_stable[std::stoi(trace[i][ts])];
  }
  const auto hist = rows_of(workspace() / "tr" / "histogram.csv");
  EXPECT_EQ(hist[0], (std::vector<std::string>{"time_step", "count_leaky", "count_sleaky"}));
  ASSERT_EQ(hist.size(), 7u);
  for (std::size_t i = 1; i < hist.size(); ++i) {
    EXPECT_EQ(std::stol(hist[i][1]), first_stable[static_cast<int>(i)]) << "tick " << i;
  }
  ASSERT_EQ(cli("trace --checkpoint " + ckpt + " " + kEnvSet + " --episodes 2 --cutoff 3 --outdir tr2").code, 0);
  for (const char* f : {"trace.csv", "histogram.csv", "stable_summary.csv"}) {
    EXPECT_EQ(slurp(workspace() / "tr" / f), slurp(workspace() / "tr2" / f)) << f;
  }
}

TEST(Cli, SweepCoversEveryCutoffForBothModes) {
  const std::string ckpt = (trained("hsac") / "final.ckpt").string();
  ASSERT_EQ(cli("sweep --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --jobs 2 --outdir sw").code, 0);
  const auto rows = rows_of(workspace() / "sw" / "sweep.csv");
  ASSERT_EQ(rows.size(), 13u);
  EXPECT_EQ(rows[1][col(rows, "neuron_mode")], "leaky");
  EXPECT_EQ(rows[1][col(rows, "power_decrement")], "0");
  EXPECT_EQ(rows[7][col(rows, "neuron_mode")], "sleaky");
  EXPECT_EQ(rows[12][col(rows, "cutoff")], "1");
  ASSERT_EQ(cli("sweep --checkpoint " + ckpt + " " + kEnvSet + " --episodes 1 --jobs 1 --outdir sw1").code, 0);
  EXPECT_EQ(slurp(workspace() / "sw" / "sweep.csv"), slurp(workspace() / "sw1" / "sweep.csv"));
}

}  // namespace
