#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <memory>
#include <random>
#include <string>
#include <vector>

namespace rehabsnn::math {

// Common surface of the artificial and spiking function approximators used by SAC.
// forward() records one evaluation on the tape and returns one output per head.
class Network {
 public:
  virtual ~Network() = default;

  virtual std::vector<Var> forward(Tape& tape, Var input) = 0;
  virtual std::vector<Parameter*> parameters() = 0;
  virtual std::unique_ptr<Network> clone() const = 0;
  virtual bool is_spiking() const = 0;
  // Re-imposes parameter constraints after an optimizer step.
  virtual void project_parameters() {}

  int input_dim() const { return input_dim_; }
  const std::vector<int>& hidden_dims() const { return hidden_dims_; }
  const std::vector<int>& head_dims() const { return head_dims_; }

  // Convenience: evaluates without recording gradients.
  std::vector<Matrix> evaluate(const Matrix& input);

 protected:
  Network(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims);

  int input_dim_;
  std::vector<int> hidden_dims_;
  std::vector<int> head_dims_;
};

// Fully connected weight [out, in] and bias [1, out] with the usual U(-1/sqrt(in), 1/sqrt(in)) init.
struct Dense {
  Dense() = default;
  Dense(int in, int out, std::mt19937_64& rng, const std::string& name);

  Parameter weight;
  Parameter bias;

  Var apply(Tape& tape, Var x);
  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }
};

// ReLU multilayer perceptron with independent linear heads on the last hidden layer.
class MlpNetwork final : public Network {
 public:
  MlpNetwork(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims, std::mt19937_64& rng);

  std::vector<Var> forward(Tape& tape, Var input) override;
  std::vector<Parameter*> parameters() override;
  std::unique_ptr<Network> clone() const override;
  bool is_spiking() const override { return false; }

  std::vector<Dense>& hidden_layers() { return hidden_; }
  std::vector<Dense>& heads() { return heads_; }

 private:
  std::vector<Dense> hidden_;
  std::vector<Dense> heads_;
};

}  // namespace rehabsnn::math
