#include "rehabsnn/mathcore/optim.hpp"

#include "rehabsnn/error.hpp"

#include <cmath>

namespace rehabsnn::math {

Adam::Adam(std::vector<Parameter*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ShapeError("Adam: learning rate must be positive");
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (Parameter* p : params_) {
    first_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    second_moment_.push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void Adam::zero_grad() {
  for (Parameter* p : params_) p->zero_grad();
}

void Adam::step() {
  for (Parameter* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) p->zero_grad();
    if (!p->grad.allFinite()) {
      throw NumericalError("Adam: non-finite gradient in parameter '" + p->name + "'");
    }
  }
  ++step_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double correction1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double correction2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.lr;
  const double eps = options_.eps;
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Parameter& p = *params_[i];
    Matrix& m = first_moment_[i];
    Matrix& v = second_moment_[i];
    m = b1 * m + (1.0 - b1) * p.grad;
    v = b2 * v + (1.0 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.array() / correction1) / ((v.array() / correction2).sqrt() + eps);
  }
}

void polyak_average(const std::vector<Parameter*>& target, const std::vector<Parameter*>& online, double tau) {
  if (!(tau > 0.0 && tau <= 1.0)) throw ShapeError("polyak_average: tau must lie in (0, 1]");
  if (target.size() != online.size()) throw ShapeError("polyak_average: parameter count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    Matrix& t = target[i]->value;
    const Matrix& o = online[i]->value;
    if (t.rows() != o.rows() || t.cols() != o.cols()) {
      throw ShapeError("polyak_average: shape mismatch " + shape_string(t) + " vs " + shape_string(o));
    }
    if (tau == 1.0) {
      t = o;
    } else {
      t = (1.0 - tau) * t + tau * o;
    }
  }
}

void copy_values(const std::vector<Parameter*>& target, const std::vector<Parameter*>& source) {
  if (target.size() != source.size()) throw ShapeError("copy_values: parameter count mismatch");
  for (std::size_t i = 0; i < target.size(); ++i) {
    if (target[i]->value.rows() != source[i]->value.rows() || target[i]->value.cols() != source[i]->value.cols()) {
      throw ShapeError("copy_values: shape mismatch for '" + target[i]->name + "'");
    }
    target[i]->value = source[i]->value;
  }
}

}  // namespace rehabsnn::math
