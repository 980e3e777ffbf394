#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <random>

namespace rehabsnn::snn {

using math::Matrix;

// x: [1, n]. Returns [steps, n] with x on every row.
Matrix direct_encode(const Matrix& x, int steps);

// Bernoulli(x_i) spikes per tick. x: [1, n] with entries in [0, 1].
Matrix rate_encode(const Matrix& x, int steps, std::mt19937_64& rng);

// Mean spike count per neuron over a [steps, n] spike train.
Matrix rate_decode(const Matrix& spikes);

}  // namespace rehabsnn::snn
