#pragma once

#include "rehabsnn/mathcore/tape.hpp"

#include <random>
#include <string>

namespace rehabsnn::snn {

using math::Matrix;

enum class NeuronKind { kLeaky, kSLeaky };
enum class ResetMode { kZero, kSubtract };
// kFastSigmoidProxy replaces the Heaviside forward with u / (1 + k|u|); test use only.
enum class SpikeFunction { kHeaviside, kFastSigmoidProxy };

std::string to_string(NeuronKind kind);
std::string to_string(ResetMode mode);
NeuronKind parse_neuron_kind(const std::string& s);
ResetMode parse_reset_mode(const std::string& s);

struct SpikingOptions {
  double slope = 10.0;
  double beta_init = 1.0;
  double threshold_init = 2.0;
  ResetMode reset = ResetMode::kZero;
  NeuronKind neuron = NeuronKind::kLeaky;
};

// Fully connected LIF layer: synaptic weight/bias, per-neuron decay and threshold,
// and the membrane / last-spike state carried between ticks.
class SpikingLayer {
 public:
  SpikingLayer() = default;
  SpikingLayer(int in, int out, const SpikingOptions& options, std::mt19937_64& rng, const std::string& name);

  math::Parameter weight;     // [out, in]
  math::Parameter bias;       // [1, out]
  math::Parameter beta;       // [1, out]
  math::Parameter threshold;  // [1, out]

  NeuronKind kind = NeuronKind::kLeaky;
  ResetMode reset = ResetMode::kZero;
  double slope = 10.0;

  // [batch, out]; empty means all-zero state.
  Matrix membrane;
  Matrix prev_spikes;

  int in_dim() const { return static_cast<int>(weight.value.cols()); }
  int out_dim() const { return static_cast<int>(weight.value.rows()); }

  void reset_state();
  // Keeps the decay inside [0, 1].
  void clamp_decay();
};

// Result of running the LIF recurrence for `steps` ticks, time-major: rows
// [t * batch, (t + 1) * batch) hold tick t.
struct LifScan {
  Matrix membrane;  // H[t]; empty unless requested
  Matrix spikes;    // S[t]
  Matrix final_membrane;
  Matrix final_spikes;
};

// Zero reset:      H[t] = (beta * H[t-1] + I[t]) * (1 - S[t-1])
// Subtract reset:  H[t] = beta * H[t-1] + I[t] - S[t-1] * v_th
// S[t] = 1[H[t] >= v_th]
// With `shared_drive` the [batch, n] currents drive every tick (direct encoding);
// otherwise currents hold steps * batch time-major rows.
LifScan lif_scan(const Matrix& currents, int steps, bool shared_drive, const Matrix& beta, const Matrix& threshold,
                 const Matrix& h0, const Matrix& s0, ResetMode reset, double slope,
                 SpikeFunction fn = SpikeFunction::kHeaviside, bool keep_membrane = true);

// Tape op around lif_scan; BPTT through the recurrence with the fast-sigmoid surrogate.
// The initial state (h0, s0) is treated as a constant. Final state is returned through
// the optional out-parameters.
math::Var lif_sequence(math::Var currents, int steps, bool shared_drive, math::Var beta, math::Var threshold, const Matrix& h0,
                       const Matrix& s0, ResetMode reset, double slope,
                       SpikeFunction fn = SpikeFunction::kHeaviside, Matrix* final_membrane = nullptr,
                       Matrix* final_spikes = nullptr);

// linear() specialised for binary spike inputs: the forward pass and the weight
// gradient only touch rows of W for active inputs. Falls back to the dense op when the
// input is not strictly 0/1.
math::Var spike_linear(math::Var spikes, math::Var weight, math::Var bias);

// Plain-value counterpart of spike_linear with identical arithmetic.
Matrix spike_affine(const Matrix& x, const Matrix& w, const Matrix& b);

// Single tick on plain values: integrates `x` ([batch, in]) into the layer state and
// returns the spike vector.
Matrix lif_step(SpikingLayer& layer, const Matrix& x);

// Sequent-Leaky carry-forward: keeps the state as a constant and clears negative membrane.
void sleaky_continue(SpikingLayer& layer);

}  // namespace rehabsnn::snn
