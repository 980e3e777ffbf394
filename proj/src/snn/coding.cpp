#include "rehabsnn/snn/coding.hpp"

#include "rehabsnn/error.hpp"

namespace rehabsnn::snn {

namespace {

void check_row(const Matrix& x, const char* what) {
  if (x.rows() != 1) throw ShapeError(std::string(what) + " expects a single row, got " + math::shape_string(x));
}

}  // namespace

Matrix direct_encode(const Matrix& x, int steps) {
  if (steps < 1) throw ShapeError("direct_encode needs at least one time step");
  check_row(x, "direct_encode");
  return x.replicate(steps, 1);
}

Matrix rate_encode(const Matrix& x, int steps, std::mt19937_64& rng) {
  if (steps < 1) throw ShapeError("rate_encode needs at least one time step");
  check_row(x, "rate_encode");
  for (Eigen::Index i = 0; i < x.cols(); ++i) {
    const double p = x(0, i);
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ShapeError("rate_encode input " + std::to_string(i) + " = " + std::to_string(p) + " is outside [0, 1]");
    }
  }
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix out(steps, x.cols());
  for (int t = 0; t < steps; ++t) {
    for (Eigen::Index i = 0; i < x.cols(); ++i) out(t, i) = u(rng) < x(0, i) ? 1.0 : 0.0;
  }
  return out;
}

Matrix rate_decode(const Matrix& spikes) {
  if (spikes.rows() == 0) throw ShapeError("rate_decode needs a non-empty spike train");
  return spikes.colwise().mean();
}

}  // namespace rehabsnn::snn
