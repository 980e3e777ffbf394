#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <cstddef>
#include <random>
#include <vector>

namespace rehabsnn::sac {

using math::Matrix;

struct Transition {
  std::vector<double> obs;
  std::vector<double> action;
  double reward = 0.0;
  std::vector<double> next_obs;
  bool done = false;
};

struct Batch {
  Matrix obs;       // [B, obs_dim]
  Matrix actions;   // [B, act_dim]
  Matrix rewards;   // [B, 1]
  Matrix next_obs;  // [B, obs_dim]
  Matrix dones;     // [B, 1]
  std::vector<std::size_t> indices;
};

// Fixed-capacity ring of transitions; the oldest entry is overwritten first.
class ReplayBuffer {
 public:
  ReplayBuffer(std::size_t capacity, int obs_dim, int act_dim);

  void add(const Transition& t);
  // Uniform sample with replacement over the filled slots.
  Batch sample(std::size_t batch_size, std::mt19937_64& rng) const;

  std::size_t size() const { return size_; }
  std::size_t capacity() const { return capacity_; }
  std::size_t cursor() const { return cursor_; }
  Transition at(std::size_t index) const;

 private:
  std::size_t capacity_;
  int obs_dim_;
  int act_dim_;
  std::size_t cursor_ = 0;
  std::size_t size_ = 0;
  Matrix obs_;
  Matrix actions_;
  Matrix rewards_;
  Matrix next_obs_;
  Matrix dones_;
};

}  // namespace rehabsnn::sac
