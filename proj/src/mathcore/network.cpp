#include "rehabsnn/mathcore/network.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/ops.hpp"

#include <cmath>

namespace rehabsnn::math {

Network::Network(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims)
    : input_dim_(input_dim), hidden_dims_(std::move(hidden_dims)), head_dims_(std::move(head_dims)) {
  if (input_dim_ <= 0) throw ShapeError("network input dimension must be positive");
  if (hidden_dims_.empty()) throw ShapeError("network needs at least one hidden layer");
  for (int h : hidden_dims_) {
    if (h <= 0) throw ShapeError("hidden widths must be positive");
  }
  if (head_dims_.empty()) throw ShapeError("network needs at least one head");
  for (int h : head_dims_) {
    if (h <= 0) throw ShapeError("head widths must be positive");
  }
}

std::vector<Matrix> Network::evaluate(const Matrix& input) {
  Tape tape(Tape::Mode::kNoGrad);
  std::vector<Var> heads = forward(tape, tape.constant(input));
  std::vector<Matrix> out;
  out.reserve(heads.size());
  for (Var h : heads) out.push_back(h.value());
  return out;
}

Dense::Dense(int in, int out, std::mt19937_64& rng, const std::string& name) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(out, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Matrix b(1, out);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight = Parameter(name + ".weight", std::move(w));
  bias = Parameter(name + ".bias", std::move(b));
}

Var Dense::apply(Tape& tape, Var x) { return linear(x, tape.param(weight), tape.param(bias)); }

MlpNetwork::MlpNetwork(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims,
                       std::mt19937_64& rng)
    : Network(input_dim, std::move(hidden_dims), std::move(head_dims)) {
  int in = input_dim_;
  for (std::size_t i = 0; i < hidden_dims_.size(); ++i) {
    hidden_.emplace_back(in, hidden_dims_[i], rng, "hidden" + std::to_string(i));
    in = hidden_dims_[i];
  }
  for (std::size_t i = 0; i < head_dims_.size(); ++i) {
    heads_.emplace_back(in, head_dims_[i], rng, "head" + std::to_string(i));
  }
}

std::vector<Var> MlpNetwork::forward(Tape& tape, Var input) {
  if (input.cols() != input_dim_) {
    throw ShapeError("MLP input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(input_dim_));
  }
  Var h = input;
  for (Dense& layer : hidden_) h = relu(layer.apply(tape, h));
  std::vector<Var> out;
  out.reserve(heads_.size());
  for (Dense& head : heads_) out.push_back(head.apply(tape, h));
  return out;
}

std::vector<Parameter*> MlpNetwork::parameters() {
  std::vector<Parameter*> out;
  for (Dense& l : hidden_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  for (Dense& l : heads_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

std::unique_ptr<Network> MlpNetwork::clone() const { return std::make_unique<MlpNetwork>(*this); }

}  // namespace rehabsnn::math
