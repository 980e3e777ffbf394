#include "rehabsnn/snn/network.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/ops.hpp"

#include <cmath>

namespace rehabsnn::snn {

OwsDecoder::OwsDecoder(int population, int outputs, std::mt19937_64& rng, const std::string& name) {
  if (population <= 0 || outputs <= 0) throw ShapeError("OWS decoder sizes must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(population));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(outputs, population);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Matrix b(1, outputs);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight = math::Parameter(name + ".weight", std::move(w));
  bias = math::Parameter(name + ".bias", std::move(b));
}

math::Var ows_decode(math::Tape& tape, OwsDecoder& decoder, math::Var final_spikes) {
  if (final_spikes.cols() != decoder.population()) {
    throw ShapeError("OWS decoder expects a population of " + std::to_string(decoder.population()) + ", got " +
                     std::to_string(final_spikes.cols()));
  }
  return spike_linear(final_spikes, tape.param(decoder.weight), tape.param(decoder.bias));
}

double ows_decode(const OwsDecoder& decoder, const Matrix& final_spikes) {
  if (decoder.weight.value.rows() != 1) throw ShapeError("scalar OWS readout needs a single-output decoder");
  if (final_spikes.size() != decoder.population()) {
    throw ShapeError("OWS decoder expects a population of " + std::to_string(decoder.population()) + ", got " +
                     std::to_string(final_spikes.size()));
  }
  double y = decoder.bias.value(0, 0);
  for (Eigen::Index i = 0; i < final_spikes.size(); ++i) y += decoder.weight.value(0, i) * final_spikes.data()[i];
  return y;
}

double SpikeTrace::total_spikes() const {
  double total = 0.0;
  for (double c : step_spike_counts) total += c;
  return total;
}

SpikingNetwork::SpikingNetwork(int input_dim, std::vector<int> hidden_dims, std::vector<int> head_dims,
                               int time_steps, const SpikingOptions& options, std::mt19937_64& rng)
    : Network(input_dim, std::move(hidden_dims), std::move(head_dims)), time_steps_(time_steps), options_(options) {
  if (time_steps_ < 1) throw ShapeError("spiking network needs at least one time step");
  if (!(options_.slope > 0.0)) throw ShapeError("surrogate slope must be positive");
  int in = input_dim_;
  for (std::size_t i = 0; i < hidden_dims_.size(); ++i) {
    layers_.emplace_back(in, hidden_dims_[i], options_, rng, "lif" + std::to_string(i));
    in = hidden_dims_[i];
  }
  for (std::size_t i = 0; i < head_dims_.size(); ++i) {
    decoders_.emplace_back(in, head_dims_[i], rng, "ows" + std::to_string(i));
  }
}

RunResult SpikingNetwork::run(math::Tape& tape, math::Var input, int steps, bool from_state, bool record,
                              SpikeFunction fn) {
  if (steps < 1) throw ShapeError("spiking forward needs at least one tick");
  if (input.cols() != input_dim_) {
    throw ShapeError("spiking network input has " + std::to_string(input.cols()) + " columns, expected " +
                     std::to_string(input_dim_));
  }
  const Eigen::Index batch = input.rows();
  RunResult result;
  result.trace.step_spike_counts.assign(static_cast<std::size_t>(steps), 0.0);
  if (record) {
    result.trace.layer_spikes.assign(static_cast<std::size_t>(steps), {});
    result.trace.decoded.assign(static_cast<std::size_t>(steps), {});
  }
  static const Matrix kEmpty;
  math::Var spikes = input;
  for (std::size_t li = 0; li < layers_.size(); ++li) {
    SpikingLayer& layer = layers_[li];
    math::Var w = tape.param(layer.weight);
    math::Var b = tape.param(layer.bias);
    math::Var current = li == 0 ? math::linear(spikes, w, b) : spike_linear(spikes, w, b);
    Matrix final_h;
    Matrix final_s;
    // Direct encoding: the first layer sees the same drive at every tick.
    spikes = lif_sequence(current, steps, li == 0, tape.param(layer.beta), tape.param(layer.threshold),
                          from_state ? layer.membrane : kEmpty, from_state ? layer.prev_spikes : kEmpty, layer.reset,
                          layer.slope, fn, &final_h, &final_s);
    result.final_membrane.push_back(std::move(final_h));
    result.final_spikes.push_back(std::move(final_s));
    const Matrix& sv = spikes.value();
    for (int t = 0; t < steps; ++t) {
      auto block = sv.middleRows(static_cast<Eigen::Index>(t) * batch, batch);
      result.trace.step_spike_counts[static_cast<std::size_t>(t)] += block.sum();
      if (record) result.trace.layer_spikes[static_cast<std::size_t>(t)].push_back(block);
    }
  }
  math::Var last = steps == 1 ? spikes : math::slice_rows(spikes, static_cast<Eigen::Index>(steps - 1) * batch, batch);
  for (OwsDecoder& dec : decoders_) {
    result.heads.push_back(ows_decode(tape, dec, last));
    if (record) {
      const Matrix& sv = spikes.value();
      for (int t = 0; t < steps; ++t) {
        const Matrix block = sv.middleRows(static_cast<Eigen::Index>(t) * batch, batch);
        result.trace.decoded[static_cast<std::size_t>(t)].push_back(
            spike_affine(block, dec.weight.value, dec.bias.value));
      }
    }
  }
  return result;
}

std::vector<math::Var> SpikingNetwork::forward(math::Tape& tape, math::Var input) {
  return run(tape, input, time_steps_, /*from_state=*/false, /*record=*/false).heads;
}

std::vector<math::Parameter*> SpikingNetwork::parameters() {
  std::vector<math::Parameter*> out;
  for (SpikingLayer& l : layers_) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
    out.push_back(&l.beta);
    out.push_back(&l.threshold);
  }
  for (OwsDecoder& d : decoders_) {
    out.push_back(&d.weight);
    out.push_back(&d.bias);
  }
  return out;
}

std::unique_ptr<math::Network> SpikingNetwork::clone() const { return std::make_unique<SpikingNetwork>(*this); }

void SpikingNetwork::project_parameters() {
  for (SpikingLayer& l : layers_) l.clamp_decay();
}

void SpikingNetwork::set_neuron_kind(NeuronKind kind) {
  options_.neuron = kind;
  for (SpikingLayer& l : layers_) l.kind = kind;
}

NeuronKind SpikingNetwork::neuron_kind() const { return options_.neuron; }

void reset_membranes(SpikingNetwork& net) {
  for (SpikingLayer& l : net.layers()) l.reset_state();
}

void continue_membranes(SpikingNetwork& net) {
  for (SpikingLayer& l : net.layers()) sleaky_continue(l);
}

ForwardOutput spiking_forward(SpikingNetwork& net, const Matrix& x, int steps, bool record) {
  math::Tape tape(math::Tape::Mode::kNoGrad);
  RunResult r = net.run(tape, tape.constant(x), steps, /*from_state=*/true, record);
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    net.layers()[i].membrane = std::move(r.final_membrane[i]);
    net.layers()[i].prev_spikes = std::move(r.final_spikes[i]);
  }
  ForwardOutput out;
  for (math::Var h : r.heads) out.heads.push_back(h.value());
  out.trace = std::move(r.trace);
  return out;
}

}  // namespace rehabsnn::snn
