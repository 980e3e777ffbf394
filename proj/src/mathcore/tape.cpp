#include "rehabsnn/mathcore/tape.hpp"

#include "rehabsnn/error.hpp"

#include <sstream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

namespace rehabsnn::math {

namespace {

#ifdef __GLIBC__
// Multi-megabyte per-pass buffers would otherwise be mmap'd and unmapped on every
// forward, paying page faults each time.
const bool kMallocTuned = [] {
  mallopt(M_MMAP_THRESHOLD, 256 << 20);
  mallopt(M_TRIM_THRESHOLD, 512 << 20);
  return true;
}();
#endif

}  // namespace

std::string shape_string(const Matrix& m) {
  std::ostringstream os;
  os << '[' << m.rows() << 'x' << m.cols() << ']';
  return os.str();
}

bool all_finite(const Matrix& m) { return m.allFinite(); }

Parameter::Parameter(std::string n, Matrix v)
    : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

void Parameter::zero_grad() {
  if (grad.rows() != value.rows() || grad.cols() != value.cols()) {
    grad = Matrix::Zero(value.rows(), value.cols());
  } else {
    grad.setZero();
  }
}

const Matrix& Var::value() const { return tape_->value(id_); }

double Var::scalar() const {
  const Matrix& v = value();
  if (v.rows() != 1 || v.cols() != 1) {
    throw ShapeError("scalar() on non-scalar node " + shape_string(v));
  }
  return v(0, 0);
}

Var Tape::push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

Var Tape::constant(Matrix value) {
  Node n;
  n.value = std::move(value);
  return push(std::move(n));
}

Var Tape::param(Parameter& p) {
  Node n;
  n.external = &p.value;
  if (mode_ == Mode::kGrad && param_grad_enabled_) {
    n.param = &p;
    n.needs_grad = true;
  }
  return push(std::move(n));
}

Var Tape::record(Matrix value, bool needs_grad, Backward backward) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad && mode_ == Mode::kGrad;
  if (n.needs_grad) n.backward = std::move(backward);
  return push(std::move(n));
}

bool Tape::needs_grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id())).needs_grad; }

const Matrix& Tape::value(int id) const {
  const Node& n = nodes_[static_cast<std::size_t>(id)];
  return n.external != nullptr ? *n.external : n.value;
}

const Matrix& Tape::grad(Var v) const { return nodes_.at(static_cast<std::size_t>(v.id())).grad; }

void Tape::accumulate(Var v, const Matrix& g) {
  Node& n = nodes_[static_cast<std::size_t>(v.id())];
  if (!n.needs_grad) return;
  const Matrix& val = n.external != nullptr ? *n.external : n.value;
  if (g.rows() != val.rows() || g.cols() != val.cols()) {
    throw ShapeError("adjoint shape " + shape_string(g) + " does not match node " + shape_string(val));
  }
  if (n.grad.size() == 0) {
    n.grad = g;
  } else {
    n.grad += g;
  }
}

void Tape::backward(Var loss) {
  if (loss.tape_ != this) throw ShapeError("loss was not recorded on this tape");
  if (mode_ != Mode::kGrad) throw ShapeError("backward() on a no-grad tape");
  if (backward_done_) throw ShapeError("backward() already replayed on this tape");
  const Matrix& lv = value(loss.id());
  if (lv.rows() != 1 || lv.cols() != 1) {
    throw ShapeError("loss must be a scalar, got " + shape_string(lv));
  }
  backward_done_ = true;
  if (!nodes_[static_cast<std::size_t>(loss.id())].needs_grad) return;
  accumulate(loss, Matrix::Ones(1, 1));
  for (int i = loss.id(); i >= 0; --i) {
    Node& n = nodes_[static_cast<std::size_t>(i)];
    if (!n.needs_grad || n.grad.size() == 0) continue;
    if (n.param != nullptr) {
      if (n.param->grad.rows() != n.grad.rows() || n.param->grad.cols() != n.grad.cols()) {
        n.param->zero_grad();
      }
      n.param->grad += n.grad;
    } else if (n.backward) {
      // The closure may append to other nodes' grads but never reallocates nodes_.
      n.backward(n.grad);
    }
  }
}

}  // namespace rehabsnn::math
