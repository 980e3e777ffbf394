#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <cmath>

namespace rehabsnn::math {

// x: [B, in], weight: [out, in], bias: [1, out]  ->  x * weight^T + bias
Var linear(Var x, Var weight, Var bias);

// Elementwise binary ops. `b` may match `a`, be [1, 1] or be a [1, cols] row (broadcast).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);

Var scale(Var a, double s);
Var add_scalar(Var a, double s);
Var neg(Var a);

Var relu(Var a);
Var tanh(Var a);
Var exp(Var a);
Var log(Var a);
Var square(Var a);

// Elementwise minimum; ties route the adjoint to `a`.
Var minimum(Var a, Var b);

Var sum(Var a);   // -> [1, 1]
Var mean(Var a);  // -> [1, 1]
Var sum_cols(Var a);  // [B, n] -> [B, 1]

Var concat_cols(Var a, Var b);
Var slice_cols(Var a, Eigen::Index start, Eigen::Index count);
Var slice_rows(Var a, Eigen::Index start, Eigen::Index count);

// Heaviside spike with fast-sigmoid surrogate adjoint centred at the threshold:
// forward 1[h >= v_th]; d/dh = 1 / (1 + k|h - v_th|)^2, d/dv_th = -d/dh.
// threshold: [1, cols].
Var surrogate_spike(Var h, Var threshold, double slope);

// Smooth stand-in for surrogate_spike: u / (1 + k|u|) with u = h - v_th. Its exact
// derivative equals the surrogate adjoint above, so it serves as a finite-difference proxy.
Var fast_sigmoid(Var h, Var threshold, double slope);

// Plain-value helpers shared by tape ops and non-recording paths.
inline double fast_sigmoid_grad(double u, double slope) {
  const double d = 1.0 + slope * std::abs(u);
  return 1.0 / (d * d);
}

}  // namespace rehabsnn::math
