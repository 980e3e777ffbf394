#include "rehabsnn/sac/train.hpp"

#include "rehabsnn/error.hpp"

#include <limits>
#include <numeric>

namespace rehabsnn::sac {

std::uint64_t eval_episode_seed(std::uint64_t run_seed, int episode) {
  return run_seed * 1000003ULL + 7919ULL * static_cast<std::uint64_t>(episode) + 17ULL;
}

std::vector<double> evaluate_deterministic(Actor& actor, envs::Env& env, int episodes, std::uint64_t run_seed) {
  std::vector<double> returns;
  std::mt19937_64 unused(0);
  for (int e = 0; e < episodes; ++e) {
    std::vector<double> obs = env.reset(eval_episode_seed(run_seed, e));
    double total = 0.0;
    envs::StepResult r;
    do {
      r = env.step(actor.act(obs, true, unused).first);
      total += r.reward;
      obs = r.observation;
    } while (!r.done());
    returns.push_back(total);
  }
  return returns;
}

namespace {

EvalPoint make_eval(SacAgent& agent, envs::Env& env, std::uint64_t seed, std::int64_t step) {
  EvalPoint p;
  p.global_step = step;
  p.returns = evaluate_deterministic(agent.actor(), *env.clone(), agent.config().eval_episodes, seed);
  p.mean_return = std::accumulate(p.returns.begin(), p.returns.end(), 0.0) / static_cast<double>(p.returns.size());
  return p;
}

}  // namespace

TrainResult train(SacAgent& agent, envs::Env& env, std::uint64_t seed, const TrainHooks& hooks) {
  const SacConfig& cfg = agent.config();
  const Actor& actor = agent.actor();
  if (env.action_dim() != actor.action_dim()) {
    throw ConfigError("environment '" + env.id() + "' has " + std::to_string(env.action_dim()) +
                      " action dims, agent expects " + std::to_string(actor.action_dim()));
  }
  if (env.observation_dim() != actor.network().input_dim()) {
    throw ConfigError("environment '" + env.id() + "' has " + std::to_string(env.observation_dim()) +
                      " observation dims, agent expects " + std::to_string(actor.network().input_dim()));
  }
  const std::vector<double> low = env.action_low();
  const std::vector<double> high = env.action_high();

  std::mt19937_64 explore_rng(seed ^ 0x9e3779b97f4a7c15ULL);
  std::mt19937_64 sample_rng(seed ^ 0xc2b2ae3d27d4eb4fULL);
  ReplayBuffer buffer(cfg.buffer_size, env.observation_dim(), env.action_dim());
  TrainResult result;
  double best = -std::numeric_limits<double>::infinity();

  std::uint64_t episode = 0;
  std::vector<double> obs = env.reset(seed * 7777ULL + episode);
  double ep_return = 0.0;
  int ep_len = 0;
  UpdateStats last;
  Matrix log_probs;

  for (std::int64_t step = 0; step < cfg.total_steps; ++step) {
    std::vector<double> action(low.size());
    if (step < cfg.learning_starts) {
      for (std::size_t i = 0; i < low.size(); ++i) {
        action[i] = std::uniform_real_distribution<double>(low[i], high[i])(explore_rng);
      }
    } else {
      action = agent.actor().act(obs, false, explore_rng).first;
    }
    envs::StepResult r = env.step(action);
    buffer.add({obs, action, r.reward, r.observation, r.terminated});
    ep_return += r.reward;
    ++ep_len;
    obs = r.observation;
    if (r.done()) {
      TrainLogRow row{step, ep_return, ep_len, last.critic_loss, last.actor_loss, agent.alpha()};
      result.log.push_back(row);
      if (hooks.on_episode) hooks.on_episode(row);
      ++episode;
      obs = env.reset(seed * 7777ULL + episode);
      ep_return = 0.0;
      ep_len = 0;
    }

    if (step > cfg.learning_starts) {
      const Batch batch = buffer.sample(static_cast<std::size_t>(cfg.batch_size), sample_rng);
      last.critic_loss = agent.critic_update(batch);
      if (step % cfg.policy_frequency == 0) {
        last.actor_loss = agent.actor_update(batch, &log_probs);
        last.alpha_loss = agent.alpha_update(log_probs);
      }
      if (step % cfg.target_frequency == 0) agent.update_targets();
    }

    const bool last_step = step + 1 == cfg.total_steps;
    if ((cfg.eval_interval > 0 && (step + 1) % cfg.eval_interval == 0) || last_step) {
      EvalPoint p = make_eval(agent, env, seed, step + 1);
      if (p.mean_return > best) {
        best = p.mean_return;
        p.best = true;
      }
      result.evals.push_back(p);
      if (hooks.on_eval) hooks.on_eval(p, agent);
      if (last_step) result.final_eval = p;
    }
  }
  return result;
}

}  // namespace rehabsnn::sac
