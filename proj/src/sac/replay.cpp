#include "rehabsnn/sac/replay.hpp"

#include "rehabsnn/error.hpp"

#include <cmath>

namespace rehabsnn::sac {

ReplayBuffer::ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim)
    : capacity_(capacity), obs_dim_(obs_dim), act_dim_(act_dim) {
  if (capacity == 0 || obs_dim <= 0 || act_dim <= 0) throw ShapeError("replay buffer sizes must be positive");
  const auto cap = static_cast<Eigen::Index>(capacity);
  obs_.resize(cap, obs_dim);
  actions_.resize(cap, act_dim);
  rewards_.resize(cap, 1);
  next_obs_.resize(cap, obs_dim);
  dones_.resize(cap, 1);
}

void ReplayBuffer::add(const Transition& t) {
  if (static_cast<int>(t.obs.size()) != obs_dim_ || static_cast<int>(t.next_obs.size()) != obs_dim_ ||
      static_cast<int>(t.action.size()) != act_dim_) {
    throw ShapeError("transition shapes do not match the replay buffer");
  }
  if (!std::isfinite(t.reward)) throw NumericalError("non-finite reward in transition");
  const auto i = static_cast<Eigen::Index>(cursor_);
  for (int k = 0; k < obs_dim_; ++k) {
    obs_(i, k) = t.obs[k];
    next_obs_(i, k) = t.next_obs[k];
  }
  for (int k = 0; k < act_dim_; ++k) actions_(i, k) = t.action[k];
  rewards_(i, 0) = t.reward;
  dones_(i, 0) = t.done ? 1.0 : 0.0;
  cursor_ = (cursor_ + 1) % capacity_;
  if (size_ < capacity_) ++size_;
}

Batch ReplayBuffer::sample(std::size_t batch_size, std::mt19937_64& rng) const {
  if (size_ == 0) throw DataError("cannot sample from an empty replay buffer");
  if (batch_size == 0) throw ShapeError("batch size must be positive");
  std::uniform_int_distribution<std::size_t> pick(0, size_ - 1);
  const auto b = static_cast<Eigen::Index>(batch_size);
  Batch out;
  out.obs.resize(b, obs_dim_);
  out.actions.resize(b, act_dim_);
  out.rewards.resize(b, 1);
  out.next_obs.resize(b, obs_dim_);
  out.dones.resize(b, 1);
  out.indices.resize(batch_size);
  for (Eigen::Index r = 0; r < b; ++r) {
    const std::size_t idx = pick(rng);
    const auto i = static_cast<Eigen::Index>(idx);
    out.indices[static_cast<std::size_t>(r)] = idx;
    out.obs.row(r) = obs_.row(i);
    out.actions.row(r) = actions_.row(i);
    out.rewards(r, 0) = rewards_(i, 0);
    out.next_obs.row(r) = next_obs_.row(i);
    out.dones(r, 0) = dones_(i, 0);
  }
  return out;
}

Transition ReplayBuffer::at(std::size_t index) const {
  if (index >= size_) throw DataError("replay index out of range");
  const auto i = static_cast<Eigen::Index>(index);
  Transition t;
  t.obs.assign(obs_.row(i).data(), obs_.row(i).data() + obs_dim_);
  t.action.assign(actions_.row(i).data(), actions_.row(i).data() + act_dim_);
  t.reward = rewards_(i, 0);
  t.next_obs.assign(next_obs_.row(i).data(), next_obs_.row(i).data() + obs_dim_);
  t.done = dones_(i, 0) != 0.0;
  return t;
}

}  // namespace rehabsnn::sac
