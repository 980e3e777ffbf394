#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

namespace rehabsnn::math {

// Rows index the batch (or time-major batch), columns index features.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_string(const Matrix& m);
bool all_finite(const Matrix& m);

// A trainable tensor together with its accumulated gradient.
struct Parameter {
  Parameter() = default;
  Parameter(std::string name, Matrix value);

  std::string name;
  Matrix value;
  Matrix grad;

  void zero_grad();
};

class Tape;

// Handle to a node recorded on a Tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  double scalar() const;

  Tape& tape() const { return *tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

// Define-by-run reverse-mode tape. Nodes are appended in evaluation order, so
// reverse insertion order is a valid reverse topological order.
class Tape {
 public:
  // Receives the adjoint of the node's output and pushes adjoints to parents.
  using Backward = std::function<void(const Matrix& grad)>;

  enum class Mode { kGrad, kNoGrad };

  explicit Tape(Mode mode = Mode::kGrad) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  // Parameter leaf. The parameter must outlive the tape.
  Var param(Parameter& p);

  // Records a computed node. `needs_grad` should be true iff any parent needs a gradient;
  // the closure is dropped otherwise.
  Var record(Matrix value, bool needs_grad, Backward backward);

  bool needs_grad(Var v) const;
  template <typename... Vars>
  bool any_needs_grad(Vars... vars) const {
    return (needs_grad(vars) || ...);
  }

  // Adds `g` to the adjoint of `v` (no-op for nodes that do not need a gradient).
  void accumulate(Var v, const Matrix& g);

  // Seeds d loss / d loss = 1 and replays every recorded adjoint once, newest first.
  // Parameter leaves add their adjoint into Parameter::grad.
  void backward(Var loss);

  // While disabled, param() records parameters as constants (frozen networks).
  void set_param_grad_enabled(bool enabled) { param_grad_enabled_ = enabled; }
  bool param_grad_enabled() const { return param_grad_enabled_; }

  Mode mode() const { return mode_; }
  std::size_t size() const { return nodes_.size(); }
  const Matrix& value(int id) const;
  // Adjoint of a node after backward(); empty matrix if none reached it.
  const Matrix& grad(Var v) const;

 private:
  struct Node {
    Matrix value;
    const Matrix* external = nullptr;
    Matrix grad;
    Parameter* param = nullptr;
    bool needs_grad = false;
    Backward backward;
  };

  Var push(Node node);

  Mode mode_;
  bool param_grad_enabled_ = true;
  bool backward_done_ = false;
  std::vector<Node> nodes_;
};

}  // namespace rehabsnn::math
