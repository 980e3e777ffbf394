#pragma once

#include "rehabsnn/envs/env.hpp"
#include "rehabsnn/mathcore/network.hpp"
#include "rehabsnn/mathcore/optim.hpp"
#include "rehabsnn/sac/replay.hpp"
#include "rehabsnn/snn/layer.hpp"

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rehabsnn::sac {

enum class Variant { kAsac, kHsac, kSsac };

std::string to_string(Variant v);
Variant parse_variant(const std::string& s);
inline bool actor_is_spiking(Variant v) { return v != Variant::kAsac; }
inline bool critic_is_spiking(Variant v) { return v == Variant::kSsac; }

struct SnnConfig {
  int time_steps = 16;
  double slope = 10.0;
  double beta_init = 1.0;
  double threshold_init = 2.0;
  snn::ResetMode reset = snn::ResetMode::kZero;

  snn::SpikingOptions options() const;
  void validate() const;
};

struct SacConfig {
  std::size_t buffer_size = 50000;
  double gamma = 0.99;
  double tau = 0.005;
  int batch_size = 256;
  std::int64_t learning_starts = 5000;
  double policy_lr = 3e-4;
  double q_lr = 1e-4;
  double alpha_lr = 1e-4;
  int policy_frequency = 2;
  int target_frequency = 3;
  double alpha_init = 0.2;
  bool autotune = true;
  std::int64_t total_steps = 500000;
  std::vector<int> hidden = {512, 512, 384};
  double log_std_min = -5.0;
  double log_std_max = 2.0;
  std::int64_t eval_interval = 5000;
  int eval_episodes = 5;

  void validate() const;
};

// Squashed-Gaussian policy over a box action space. Both heads (mean, raw log-std)
// come from the same network: a ReLU MLP or a spiking net with two OWS decoders.
class Actor {
 public:
  Actor(bool spiking, int obs_dim, const std::vector<double>& low, const std::vector<double>& high,
        const std::vector<int>& hidden, const SnnConfig& snn, double log_std_min, double log_std_max,
        std::mt19937_64& rng);
  Actor(const Actor& other);

  struct Heads {
    math::Var mean;
    math::Var log_std;  // already squashed into [log_std_min, log_std_max]
  };
  // Training-style pass: spiking actors run time_steps() ticks from a reset state.
  Heads heads(math::Tape& tape, math::Var obs);

  struct Sample {
    math::Var action;      // env units, [B, A]
    math::Var squashed;    // tanh(u), i.e. the action normalised to [-1, 1]
    math::Var log_prob;    // [B, 1]
  };
  // Reparameterised sample u = mean + std * noise. Zero noise gives the deterministic action.
  Sample sample(math::Tape& tape, math::Var obs, const Matrix& noise);

  // Single observation on plain values. Returns (action, log_prob).
  std::pair<std::vector<double>, double> act(const std::vector<double>& obs, bool deterministic,
                                             std::mt19937_64& rng);

  // Squashes a head value into the log-std range (used by inference code that
  // decodes heads itself).
  Matrix squash_log_std(const Matrix& raw) const;
  Matrix to_env_action(const Matrix& mean) const;  // tanh(mean) * scale + bias
  Matrix normalize(const Matrix& env_action) const;  // (a - bias) / scale

  math::Network& network() { return *net_; }
  const math::Network& network() const { return *net_; }
  bool spiking() const { return net_->is_spiking(); }
  int action_dim() const { return static_cast<int>(scale_.cols()); }
  const Matrix& action_scale() const { return scale_; }
  const Matrix& action_bias() const { return bias_; }
  double log_std_min() const { return log_std_min_; }
  double log_std_max() const { return log_std_max_; }

  // Rebuilds an actor around an existing network (checkpoint loading).
  Actor(std::unique_ptr<math::Network> net, Matrix scale, Matrix bias, double log_std_min, double log_std_max);

 private:
  std::unique_ptr<math::Network> net_;
  Matrix scale_;
  Matrix bias_;
  double log_std_min_;
  double log_std_max_;
};

// Twin Q-networks with Polyak-averaged targets. Inputs are [obs, normalised action].
class CriticPair {
 public:
  CriticPair(bool spiking, int obs_dim, int act_dim, const std::vector<int>& hidden, const SnnConfig& snn,
             std::mt19937_64& rng);

  math::Var q(math::Tape& tape, int which, math::Var obs, math::Var action_norm);
  math::Var target_q(math::Tape& tape, int which, math::Var obs, math::Var action_norm);
  std::vector<math::Parameter*> online_parameters();
  std::vector<math::Parameter*> target_parameters();
  void update_targets(double tau);

  math::Network& online(int which) { return which == 0 ? *q1_ : *q2_; }
  math::Network& target(int which) { return which == 0 ? *t1_ : *t2_; }

 private:
  std::unique_ptr<math::Network> q1_, q2_, t1_, t2_;
};

struct EntropyTuner {
  math::Parameter log_alpha;
  double target_entropy = 0.0;

  double alpha() const;
};

struct UpdateStats {
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double alpha_loss = 0.0;
};

// Owns the networks and optimizers of one SAC run. Not copyable or movable: the
// optimizers hold pointers into the networks.
class SacAgent {
 public:
  SacAgent(Variant variant, int obs_dim, const std::vector<double>& low, const std::vector<double>& high,
           const SacConfig& config, const SnnConfig& snn, std::uint64_t seed);
  SacAgent(const SacAgent&) = delete;
  SacAgent& operator=(const SacAgent&) = delete;

  // y = r + gamma (1 - done) (min target Q(s', a') - alpha log pi(a'|s')); both critics
  // regress y by MSE; one Adam step. Returns qf1_loss + qf2_loss.
  double critic_update(const Batch& batch);
  // Minimises mean(alpha log pi - min Q) with reparameterised actions; one Adam step.
  // The detached log-probs are written to `log_probs` for the temperature update.
  double actor_update(const Batch& batch, Matrix* log_probs = nullptr);
  // Minimises mean(-log_alpha (log pi + target_entropy)); one Adam step. No-op when
  // autotuning is disabled (returns 0).
  double alpha_update(const Matrix& log_probs);
  void update_targets();

  Variant variant() const { return variant_; }
  Actor& actor() { return actor_; }
  CriticPair& critics() { return critics_; }
  EntropyTuner& tuner() { return tuner_; }
  const SacConfig& config() const { return config_; }
  const SnnConfig& snn_config() const { return snn_; }
  double alpha() const { return tuner_.alpha(); }
  std::mt19937_64& rng() { return rng_; }

 private:
  Matrix gaussian(Eigen::Index rows, Eigen::Index cols);

  Variant variant_;
  SacConfig config_;
  SnnConfig snn_;
  std::mt19937_64 rng_;
  Actor actor_;
  CriticPair critics_;
  EntropyTuner tuner_;
  math::Adam actor_opt_;
  math::Adam q_opt_;
  math::Adam alpha_opt_;
};

// Plain-value reference: log N(u; mean, std) summed over dims
// minus sum log(scale (1 - tanh(u)^2) + 1e-6).
double squashed_log_prob(const std::vector<double>& u, const std::vector<double>& mean,
                         const std::vector<double>& log_std, const std::vector<double>& scale);

}  // namespace rehabsnn::sac
