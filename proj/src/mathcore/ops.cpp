#include "rehabsnn/mathcore/ops.hpp"

#include "rehabsnn/error.hpp"

#include <cmath>

namespace rehabsnn::math {
namespace {

enum class Broadcast { kSame, kScalar, kRow };

Broadcast broadcast_kind(const Matrix& a, const Matrix& b, const char* op) {
  if (a.rows() == b.rows() && a.cols() == b.cols()) return Broadcast::kSame;
  if (b.rows() == 1 && b.cols() == 1) return Broadcast::kScalar;
  if (b.rows() == 1 && b.cols() == a.cols()) return Broadcast::kRow;
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                   shape_string(b));
}

Matrix expand(const Matrix& b, Broadcast kind, Eigen::Index rows, Eigen::Index cols) {
  switch (kind) {
    case Broadcast::kSame:
      return b;
    case Broadcast::kScalar:
      return Matrix::Constant(rows, cols, b(0, 0));
    case Broadcast::kRow:
      return b.replicate(rows, 1);
  }
  return b;
}

// Reduces an adjoint of the broadcast shape back to b's shape.
Matrix reduce(const Matrix& g, Broadcast kind) {
  switch (kind) {
    case Broadcast::kSame:
      return g;
    case Broadcast::kScalar:
      return Matrix::Constant(1, 1, g.sum());
    case Broadcast::kRow:
      return g.colwise().sum();
  }
  return g;
}

template <typename F, typename D>
Var unary(Var a, F forward, D derivative) {
  Tape& t = a.tape();
  Matrix out = a.value().unaryExpr(forward);
  return t.record(std::move(out), t.needs_grad(a), [a, derivative](const Matrix& g) {
    const Matrix& x = a.value();
    Matrix d = x.binaryExpr(g, [&](double xv, double gv) { return gv * derivative(xv); });
    a.tape().accumulate(a, d);
  });
}

void check_same_tape(Var a, Var b, const char* op) {
  if (&a.tape() != &b.tape()) throw ShapeError(std::string(op) + ": operands on different tapes");
}

}  // namespace

Var linear(Var x, Var weight, Var bias) {
  check_same_tape(x, weight, "linear");
  check_same_tape(x, bias, "linear");
  const Matrix& xv = x.value();
  const Matrix& wv = weight.value();
  const Matrix& bv = bias.value();
  if (xv.cols() != wv.cols() || bv.rows() != 1 || bv.cols() != wv.rows()) {
    throw ShapeError("linear: input " + shape_string(xv) + ", weight " + shape_string(wv) +
                     ", bias " + shape_string(bv));
  }
  Matrix out(xv.rows(), wv.rows());
  out.noalias() = xv * wv.transpose();
  out.rowwise() += bv.row(0);
  Tape& t = x.tape();
  return t.record(std::move(out), t.any_needs_grad(x, weight, bias), [x, weight, bias](const Matrix& g) {
    Tape& tp = x.tape();
    if (tp.needs_grad(x)) {
      Matrix dx(g.rows(), weight.value().cols());
      dx.noalias() = g * weight.value();
      tp.accumulate(x, dx);
    }
    if (tp.needs_grad(weight)) {
      Matrix dw(g.cols(), x.value().cols());
      dw.noalias() = g.transpose() * x.value();
      tp.accumulate(weight, dw);
    }
    if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
  });
}

Var add(Var a, Var b) {
  check_same_tape(a, b, "add");
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "add");
  Matrix out = a.value() + expand(b.value(), kind, a.rows(), a.cols());
  Tape& t = a.tape();
  return t.record(std::move(out), t.any_needs_grad(a, b), [a, b, kind](const Matrix& g) {
    a.tape().accumulate(a, g);
    if (a.tape().needs_grad(b)) a.tape().accumulate(b, reduce(g, kind));
  });
}

Var sub(Var a, Var b) {
  check_same_tape(a, b, "sub");
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "sub");
  Matrix out = a.value() - expand(b.value(), kind, a.rows(), a.cols());
  Tape& t = a.tape();
  return t.record(std::move(out), t.any_needs_grad(a, b), [a, b, kind](const Matrix& g) {
    a.tape().accumulate(a, g);
    if (a.tape().needs_grad(b)) a.tape().accumulate(b, reduce(-g, kind));
  });
}

Var mul(Var a, Var b) {
  check_same_tape(a, b, "mul");
  const Broadcast kind = broadcast_kind(a.value(), b.value(), "mul");
  Matrix out = a.value().cwiseProduct(expand(b.value(), kind, a.rows(), a.cols()));
  Tape& t = a.tape();
  return t.record(std::move(out), t.any_needs_grad(a, b), [a, b, kind](const Matrix& g) {
    Tape& tp = a.tape();
    if (tp.needs_grad(a)) tp.accumulate(a, g.cwiseProduct(expand(b.value(), kind, g.rows(), g.cols())));
    if (tp.needs_grad(b)) tp.accumulate(b, reduce(g.cwiseProduct(a.value()), kind));
  });
}

Var scale(Var a, double s) {
  Tape& t = a.tape();
  return t.record(a.value() * s, t.needs_grad(a), [a, s](const Matrix& g) { a.tape().accumulate(a, g * s); });
}

Var add_scalar(Var a, double s) {
  Tape& t = a.tape();
  Matrix out = a.value().array() + s;
  return t.record(std::move(out), t.needs_grad(a), [a](const Matrix& g) { a.tape().accumulate(a, g); });
}

Var neg(Var a) { return scale(a, -1.0); }

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0.0 ? x : 0.0; }, [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); },
               [](double x) {
                 const double th = std::tanh(x);
                 return 1.0 - th * th;
               });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double x) { return std::exp(x); });
}

Var log(Var a) {
  if ((a.value().array() <= 0.0).any()) throw ShapeError("log: non-positive argument");
  return unary(a, [](double x) { return std::log(x); }, [](double x) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x) { return 2.0 * x; });
}

Var minimum(Var a, Var b) {
  check_same_tape(a, b, "minimum");
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("minimum: shapes " + shape_string(a.value()) + " and " + shape_string(b.value()));
  }
  Matrix out = a.value().cwiseMin(b.value());
  Tape& t = a.tape();
  return t.record(std::move(out), t.any_needs_grad(a, b), [a, b](const Matrix& g) {
    const auto pick_a = (a.value().array() <= b.value().array());
    Tape& tp = a.tape();
    if (tp.needs_grad(a)) tp.accumulate(a, pick_a.select(g.array(), 0.0).matrix());
    if (tp.needs_grad(b)) tp.accumulate(b, pick_a.select(0.0, g.array()).matrix());
  });
}

Var sum(Var a) {
  Tape& t = a.tape();
  return t.record(Matrix::Constant(1, 1, a.value().sum()), t.needs_grad(a), [a](const Matrix& g) {
    a.tape().accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Var mean(Var a) {
  const double n = static_cast<double>(a.value().size());
  if (n == 0) throw ShapeError("mean of empty matrix");
  return scale(sum(a), 1.0 / n);
}

Var sum_cols(Var a) {
  Tape& t = a.tape();
  Matrix out = a.value().rowwise().sum();
  return t.record(std::move(out), t.needs_grad(a), [a](const Matrix& g) {
    a.tape().accumulate(a, g.replicate(1, a.cols()));
  });
}

Var concat_cols(Var a, Var b) {
  check_same_tape(a, b, "concat_cols");
  if (a.rows() != b.rows()) {
    throw ShapeError("concat_cols: row mismatch " + shape_string(a.value()) + " vs " + shape_string(b.value()));
  }
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a.value(), b.value();
  Tape& t = a.tape();
  return t.record(std::move(out), t.any_needs_grad(a, b), [a, b](const Matrix& g) {
    Tape& tp = a.tape();
    if (tp.needs_grad(a)) tp.accumulate(a, g.leftCols(a.cols()));
    if (tp.needs_grad(b)) tp.accumulate(b, g.rightCols(b.cols()));
  });
}

Var slice_cols(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols out of range on " + shape_string(a.value()));
  }
  Tape& t = a.tape();
  Matrix out = a.value().middleCols(start, count);
  return t.record(std::move(out), t.needs_grad(a), [a, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    a.tape().accumulate(a, full);
  });
}

Var slice_rows(Var a, Eigen::Index start, Eigen::Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw ShapeError("slice_rows out of range on " + shape_string(a.value()));
  }
  Tape& t = a.tape();
  Matrix out = a.value().middleRows(start, count);
  return t.record(std::move(out), t.needs_grad(a), [a, start, count](const Matrix& g) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleRows(start, count) = g;
    a.tape().accumulate(a, full);
  });
}

namespace {

void check_threshold(Var h, Var threshold, double slope, const char* op) {
  check_same_tape(h, threshold, op);
  if (threshold.rows() != 1 || threshold.cols() != h.cols()) {
    throw ShapeError(std::string(op) + ": threshold " + shape_string(threshold.value()) +
                     " does not match membrane " + shape_string(h.value()));
  }
  if (!(slope > 0.0)) throw ShapeError(std::string(op) + ": slope must be positive");
}

// Shared adjoint of surrogate_spike and fast_sigmoid.
void threshold_adjoint(Var h, Var threshold, double slope, const Matrix& g) {
  Matrix u = h.value();
  u.rowwise() -= threshold.value().row(0);
  Matrix d = u.binaryExpr(g, [slope](double uv, double gv) { return gv * fast_sigmoid_grad(uv, slope); });
  Tape& tp = h.tape();
  if (tp.needs_grad(threshold)) tp.accumulate(threshold, -d.colwise().sum());
  tp.accumulate(h, d);
}

}  // namespace

Var surrogate_spike(Var h, Var threshold, double slope) {
  check_threshold(h, threshold, slope, "surrogate_spike");
  Matrix out(h.rows(), h.cols());
  const Matrix& hv = h.value();
  const Matrix& tv = threshold.value();
  for (Eigen::Index r = 0; r < hv.rows(); ++r) {
    for (Eigen::Index c = 0; c < hv.cols(); ++c) out(r, c) = hv(r, c) >= tv(0, c) ? 1.0 : 0.0;
  }
  Tape& t = h.tape();
  return t.record(std::move(out), t.any_needs_grad(h, threshold),
                  [h, threshold, slope](const Matrix& g) { threshold_adjoint(h, threshold, slope, g); });
}

Var fast_sigmoid(Var h, Var threshold, double slope) {
  check_threshold(h, threshold, slope, "fast_sigmoid");
  Matrix u = h.value();
  u.rowwise() -= threshold.value().row(0);
  Matrix out = u.unaryExpr([slope](double x) { return x / (1.0 + slope * std::abs(x)); });
  Tape& t = h.tape();
  return t.record(std::move(out), t.any_needs_grad(h, threshold),
                  [h, threshold, slope](const Matrix& g) { threshold_adjoint(h, threshold, slope, g); });
}

}  // namespace rehabsnn::math
