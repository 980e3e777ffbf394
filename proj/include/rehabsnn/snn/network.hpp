#pragma once

#include "rehabsnn/mathcore/network.hpp"
#include "rehabsnn/snn/layer.hpp"

#include <random>
#include <vector>

namespace rehabsnn::snn {

// Output Weighted Spike readout: y = W * X[T] + b over the population of the last
// spiking layer. Each row of W is one decoded output.
struct OwsDecoder {
  OwsDecoder() = default;
  OwsDecoder(int population, int outputs, std::mt19937_64& rng, const std::string& name);

  math::Parameter weight;  // [outputs, population]
  math::Parameter bias;    // [1, outputs]

  int population() const { return static_cast<int>(weight.value.cols()); }
};

// Affine readout of final-step spikes ([batch, population]) on the tape.
math::Var ows_decode(math::Tape& tape, OwsDecoder& decoder, math::Var final_spikes);
// Plain-value readout of one spike vector for a single-output decoder.
double ows_decode(const OwsDecoder& decoder, const Matrix& final_spikes);

// Per-tick record of one forward pass.
struct SpikeTrace {
  std::vector<double> step_spike_counts;             // [tick], summed over layers and batch
  std::vector<std::vector<Matrix>> decoded;          // [tick][head], filled when recording
  std::vector<std::vector<Matrix>> layer_spikes;     // [tick][layer], filled when recording

  int steps() const { return static_cast<int>(step_spike_counts.size()); }
  double total_spikes() const;
};

struct RunResult {
  std::vector<math::Var> heads;  // decoded at the last executed tick
  SpikeTrace trace;
  std::vector<Matrix> final_membrane;
  std::vector<Matrix> final_spikes;
};

// Direct-encoded LIF multilayer network with OWS heads on the last spiking layer.
class SpikingNetwork final : public math::Network {
 public:
  SpikingNetwork(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims, int time_steps,
                 const SpikingOptions& options, std::mt19937_64& rng);

  // Training-time pass: all layers start from a reset state and run time_steps() ticks.
  std::vector<math::Var> forward(math::Tape& tape, math::Var input) override;
  std::vector<math::Parameter*> parameters() override;
  std::unique_ptr<math::Network> clone() const override;
  bool is_spiking() const override { return true; }
  void project_parameters() override;

  // Runs `steps` ticks. With `from_state` the layers' stored membranes seed the pass
  // (as constants); otherwise the pass starts from zero. Layer state is not modified.
  RunResult run(math::Tape& tape, math::Var input, int steps, bool from_state, bool record,
                SpikeFunction fn = SpikeFunction::kHeaviside);

  int time_steps() const { return time_steps_; }
  const SpikingOptions& options() const { return options_; }
  std::vector<SpikingLayer>& layers() { return layers_; }
  const std::vector<SpikingLayer>& layers() const { return layers_; }
  std::vector<OwsDecoder>& decoders() { return decoders_; }

  void set_neuron_kind(NeuronKind kind);
  NeuronKind neuron_kind() const;

 private:
  int time_steps_;
  SpikingOptions options_;
  std::vector<SpikingLayer> layers_;
  std::vector<OwsDecoder> decoders_;
};

// Zeroes membrane and last-spike state in every layer.
void reset_membranes(SpikingNetwork& net);

// SLeaky carry-forward on every layer.
void continue_membranes(SpikingNetwork& net);

struct ForwardOutput {
  std::vector<Matrix> heads;
  SpikeTrace trace;
};

// Inference pass: direct-encodes `x` for `steps` ticks from the current layer state and
// leaves the final state in the layers. Reset policy belongs to the caller.
ForwardOutput spiking_forward(SpikingNetwork& net, const Matrix& x, int steps, bool record);

}  // namespace rehabsnn::snn
