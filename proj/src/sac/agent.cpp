#include "rehabsnn/sac/agent.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/ops.hpp"
#include "rehabsnn/snn/network.hpp"

#include <cmath>
#include <numbers>

namespace rehabsnn::sac {

using math::Tape;
using math::Var;

namespace {

constexpr double kSquashEps = 1e-6;
const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

std::unique_ptr<math::Network> make_network(bool spiking, int in, const std::vector<int>& hidden,
                                            std::vector<int> heads, const SnnConfig& snn, std::mt19937_64& rng) {
  if (spiking) {
    return std::make_unique<snn::SpikingNetwork>(in, hidden, std::move(heads), snn.time_steps, snn.options(), rng);
  }
  return std::make_unique<math::MlpNetwork>(in, hidden, std::move(heads), rng);
}

void check_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw NumericalError(std::string(what) + " produced a non-finite value");
}

}  // namespace

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kAsac: return "asac";
    case Variant::kHsac: return "hsac";
    case Variant::kSsac: return "ssac";
  }
  return "?";
}

Variant parse_variant(const std::string& s) {
  if (s == "asac") return Variant::kAsac;
  if (s == "hsac") return Variant::kHsac;
  if (s == "ssac") return Variant::kSsac;
  throw UsageError("unknown variant '" + s + "' (expected asac|hsac|ssac)");
}

snn::SpikingOptions SnnConfig::options() const {
  snn::SpikingOptions o;
  o.slope = slope;
  o.beta_init = beta_init;
  o.threshold_init = threshold_init;
  o.reset = reset;
  o.neuron = snn::NeuronKind::kLeaky;
  return o;
}

void SnnConfig::validate() const {
  if (time_steps < 1) throw ConfigError("snn.time_steps must be at least 1");
  if (!(slope > 0.0)) throw ConfigError("snn.slope must be positive");
  if (!(beta_init >= 0.0 && beta_init <= 1.0)) throw ConfigError("snn.beta_init must lie in [0, 1]");
  if (!std::isfinite(threshold_init)) throw ConfigError("snn.threshold_init must be finite");
}

void SacConfig::validate() const {
  if (buffer_size == 0) throw ConfigError("sac.buffer_size must be positive");
  if (!(gamma > 0.0 && gamma < 1.0)) throw ConfigError("sac.gamma must lie in (0, 1)");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("sac.tau must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("sac.batch_size must be positive");
  if (learning_starts < 0) throw ConfigError("sac.learning_starts must be non-negative");
  if (!(policy_lr > 0.0) || !(q_lr > 0.0) || !(alpha_lr > 0.0)) throw ConfigError("sac learning rates must be positive");
  if (policy_frequency < 1 || target_frequency < 1) throw ConfigError("sac update frequencies must be at least 1");
  if (!(alpha_init > 0.0)) throw ConfigError("sac.alpha_init must be positive");
  if (total_steps < 1) throw ConfigError("sac.total_steps must be positive");
  if (hidden.empty()) throw ConfigError("sac.hidden needs at least one layer");
  for (int h : hidden) {
    if (h < 1) throw ConfigError("sac.hidden widths must be positive");
  }
  if (!(log_std_min < log_std_max)) throw ConfigError("sac.log_std_min must be below sac.log_std_max");
  if (eval_interval < 0) throw ConfigError("sac.eval_interval must be non-negative");
  if (eval_episodes < 1) throw ConfigError("sac.eval_episodes must be positive");
}

Actor::Actor(bool spiking, int obs_dim, const std::vector<double>& low, const std::vector<double>& high,
             const std::vector<int>& hidden, const SnnConfig& snn, double log_std_min, double log_std_max,
             std::mt19937_64& rng)
    : log_std_min_(log_std_min), log_std_max_(log_std_max) {
  if (low.empty() || low.size() != high.size()) throw ShapeError("actor: action bounds must be non-empty and matched");
  const int a = static_cast<int>(low.size());
  scale_.resize(1, a);
  bias_.resize(1, a);
  for (int i = 0; i < a; ++i) {
    if (!(high[i] > low[i])) throw ShapeError("actor: action high must exceed low");
    scale_(0, i) = 0.5 * (high[i] - low[i]);
    bias_(0, i) = 0.5 * (high[i] + low[i]);
  }
  net_ = make_network(spiking, obs_dim, hidden, {a, a}, snn, rng);
}

Actor::Actor(std::unique_ptr<math::Network> net, Matrix scale, Matrix bias, double log_std_min, double log_std_max)
    : net_(std::move(net)), scale_(std::move(scale)), bias_(std::move(bias)), log_std_min_(log_std_min),
      log_std_max_(log_std_max) {
  if (net_ == nullptr || net_->head_dims().size() != 2) throw ShapeError("actor network needs mean and log-std heads");
  if (scale_.cols() != net_->head_dims()[0] || bias_.cols() != scale_.cols()) {
    throw ShapeError("actor action scale/bias do not match the network heads");
  }
}

Actor::Actor(const Actor& other)
    : net_(other.net_->clone()),
      scale_(other.scale_),
      bias_(other.bias_),
      log_std_min_(other.log_std_min_),
      log_std_max_(other.log_std_max_) {}

Actor::Heads Actor::heads(Tape& tape, Var obs) {
  std::vector<Var> out = net_->forward(tape, obs);
  check_finite(out[0].value(), "actor mean head");
  check_finite(out[1].value(), "actor log-std head");
  const double half_span = 0.5 * (log_std_max_ - log_std_min_);
  Var log_std = math::add_scalar(math::scale(math::add_scalar(math::tanh(out[1]), 1.0), half_span), log_std_min_);
  return {out[0], log_std};
}

Matrix Actor::squash_log_std(const Matrix& raw) const {
  return ((raw.array().tanh() + 1.0) * 0.5 * (log_std_max_ - log_std_min_) + log_std_min_).matrix();
}

Matrix Actor::to_env_action(const Matrix& mean) const {
  Matrix a = mean.array().tanh().matrix();
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    a.row(r) = (a.row(r).array() * scale_.row(0).array() + bias_.row(0).array()).matrix();
  }
  return a;
}

Matrix Actor::normalize(const Matrix& env_action) const {
  Matrix a = env_action;
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    a.row(r) = ((a.row(r).array() - bias_.row(0).array()) / scale_.row(0).array()).matrix();
  }
  return a;
}

Actor::Sample Actor::sample(Tape& tape, Var obs, const Matrix& noise) {
  Heads h = heads(tape, obs);
  if (noise.rows() != h.mean.rows() || noise.cols() != h.mean.cols()) {
    throw ShapeError("actor noise " + math::shape_string(noise) + " does not match the action batch");
  }
  Var eps = tape.constant(noise);
  Var u = math::add(h.mean, math::mul(math::exp(h.log_std), eps));
  Var y = math::tanh(u);
  Var scale = tape.constant(scale_);
  Var action = math::add(math::mul(y, scale), tape.constant(bias_));
  // log N(u; mean, std) = -0.5 eps^2 - log std - 0.5 log(2 pi)
  Matrix base = (-0.5 * noise.array().square() - kHalfLog2Pi).matrix();
  Var gauss = math::sub(tape.constant(std::move(base)), h.log_std);
  Var jac = math::log(math::add_scalar(math::mul(math::add_scalar(math::neg(math::square(y)), 1.0), scale), kSquashEps));
  Var log_prob = math::sum_cols(math::sub(gauss, jac));
  return {action, y, log_prob};
}

std::pair<std::vector<double>, double> Actor::act(const std::vector<double>& obs, bool deterministic,
                                                  std::mt19937_64& rng) {
  Matrix x(1, static_cast<Eigen::Index>(obs.size()));
  for (std::size_t i = 0; i < obs.size(); ++i) {
    if (!std::isfinite(obs[i])) throw NumericalError("actor received a non-finite observation");
    x(0, static_cast<Eigen::Index>(i)) = obs[i];
  }
  Matrix noise = Matrix::Zero(1, action_dim());
  if (!deterministic) {
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index i = 0; i < noise.size(); ++i) noise.data()[i] = n(rng);
  }
  Tape tape(Tape::Mode::kNoGrad);
  Sample s = sample(tape, tape.constant(x), noise);
  const Matrix& a = s.action.value();
  return {std::vector<double>(a.data(), a.data() + a.size()), s.log_prob.scalar()};
}

double squashed_log_prob(const std::vector<double>& u, const std::vector<double>& mean,
                         const std::vector<double>& log_std, const std::vector<double>& scale) {
  double lp = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double std = std::exp(log_std[i]);
    const double z = (u[i] - mean[i]) / std;
    const double t = std::tanh(u[i]);
    lp += -0.5 * z * z - log_std[i] - kHalfLog2Pi;
    lp -= std::log(scale[i] * (1.0 - t * t) + kSquashEps);
  }
  return lp;
}

CriticPair::CriticPair(bool spiking, int obs_dim, int act_dim, const std::vector<int>& hidden, const SnnConfig& snn,
                       std::mt19937_64& rng) {
  q1_ = make_network(spiking, obs_dim + act_dim, hidden, {1}, snn, rng);
  q2_ = make_network(spiking, obs_dim + act_dim, hidden, {1}, snn, rng);
  t1_ = q1_->clone();
  t2_ = q2_->clone();
}

Var CriticPair::q(Tape& tape, int which, Var obs, Var action_norm) {
  return online(which).forward(tape, math::concat_cols(obs, action_norm))[0];
}

Var CriticPair::target_q(Tape& tape, int which, Var obs, Var action_norm) {
  return target(which).forward(tape, math::concat_cols(obs, action_norm))[0];
}

std::vector<math::Parameter*> CriticPair::online_parameters() {
  std::vector<math::Parameter*> p = q1_->parameters();
  for (math::Parameter* x : q2_->parameters()) p.push_back(x);
  return p;
}

std::vector<math::Parameter*> CriticPair::target_parameters() {
  std::vector<math::Parameter*> p = t1_->parameters();
  for (math::Parameter* x : t2_->parameters()) p.push_back(x);
  return p;
}

void CriticPair::update_targets(double tau) {
  math::polyak_average(target_parameters(), online_parameters(), tau);
  t1_->project_parameters();
  t2_->project_parameters();
}

double EntropyTuner::alpha() const { return std::exp(log_alpha.value(0, 0)); }

SacAgent::SacAgent(Variant variant, int obs_dim, const std::vector<double>& low, const std::vector<double>& high,
                   const SacConfig& config, const SnnConfig& snn, std::uint64_t seed)
    : variant_(variant),
      config_((config.validate(), config)),
      snn_((snn.validate(), snn)),
      rng_(seed),
      actor_(actor_is_spiking(variant), obs_dim, low, high, config.hidden, snn, config.log_std_min,
             config.log_std_max, rng_),
      critics_(critic_is_spiking(variant), obs_dim, static_cast<int>(low.size()), config.hidden, snn, rng_),
      tuner_{math::Parameter("log_alpha", Matrix::Constant(1, 1, std::log(config.alpha_init))),
             -static_cast<double>(low.size())},
      actor_opt_(actor_.network().parameters(), {.lr = config.policy_lr}),
      q_opt_(critics_.online_parameters(), {.lr = config.q_lr}),
      alpha_opt_({&tuner_.log_alpha}, {.lr = config.alpha_lr}) {}

Matrix SacAgent::gaussian(Eigen::Index rows, Eigen::Index cols) {
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng_);
  return m;
}

double SacAgent::critic_update(const Batch& batch) {
  const Eigen::Index b = batch.obs.rows();
  if (b < 1) throw ShapeError("critic update needs a non-empty batch");
  Matrix y;
  {
    Tape t(Tape::Mode::kNoGrad);
    Var next = t.constant(batch.next_obs);
    Actor::Sample s = actor_.sample(t, next, gaussian(b, actor_.action_dim()));
    const Matrix q1 = critics_.target_q(t, 0, next, s.squashed).value();
    const Matrix q2 = critics_.target_q(t, 1, next, s.squashed).value();
    const Matrix soft = (q1.cwiseMin(q2).array() - alpha() * s.log_prob.value().array()).matrix();
    y = (batch.rewards.array() + config_.gamma * (1.0 - batch.dones.array()) * soft.array()).matrix();
  }
  for (math::Parameter* p : q_opt_.params()) p->zero_grad();
  Tape t;
  Var obs = t.constant(batch.obs);
  Var act = t.constant(actor_.normalize(batch.actions));
  Var target = t.constant(y);
  Var l1 = math::mean(math::square(math::sub(critics_.q(t, 0, obs, act), target)));
  Var l2 = math::mean(math::square(math::sub(critics_.q(t, 1, obs, act), target)));
  Var loss = math::add(l1, l2);
  if (!std::isfinite(loss.scalar())) throw NumericalError("critic loss is not finite");
  t.backward(loss);
  q_opt_.step();
  critics_.online(0).project_parameters();
  critics_.online(1).project_parameters();
  return loss.scalar();
}

double SacAgent::actor_update(const Batch& batch, Matrix* log_probs) {
  const Eigen::Index b = batch.obs.rows();
  for (math::Parameter* p : actor_opt_.params()) p->zero_grad();
  Tape t;
  Var obs = t.constant(batch.obs);
  Actor::Sample s = actor_.sample(t, obs, gaussian(b, actor_.action_dim()));
  t.set_param_grad_enabled(false);
  Var q1 = critics_.q(t, 0, obs, s.squashed);
  Var q2 = critics_.q(t, 1, obs, s.squashed);
  t.set_param_grad_enabled(true);
  Var loss = math::mean(math::sub(math::scale(s.log_prob, alpha()), math::minimum(q1, q2)));
  if (!std::isfinite(loss.scalar())) throw NumericalError("actor loss is not finite");
  t.backward(loss);
  actor_opt_.step();
  actor_.network().project_parameters();
  if (log_probs != nullptr) *log_probs = s.log_prob.value();
  return loss.scalar();
}

double SacAgent::alpha_update(const Matrix& log_probs) {
  if (!config_.autotune) return 0.0;
  alpha_opt_.zero_grad();
  Tape t;
  Var la = t.param(tuner_.log_alpha);
  Var shifted = t.constant((log_probs.array() + tuner_.target_entropy).matrix());
  Var loss = math::mean(math::neg(math::mul(shifted, la)));
  t.backward(loss);
  alpha_opt_.step();
  return loss.scalar();
}

void SacAgent::update_targets() { critics_.update_targets(config_.tau); }

}  // namespace rehabsnn::sac
