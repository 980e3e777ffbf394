#include "rehabsnn/snn/layer.hpp"

#include "rehabsnn/error.hpp"
#include "rehabsnn/mathcore/ops.hpp"

#include <cmath>
#include <algorithm>
#include <memory>
#include <type_traits>
#include <vector>

namespace rehabsnn::snn {

using math::shape_string;

std::string to_string(NeuronKind kind) { return kind == NeuronKind::kLeaky ? "leaky" : "sleaky"; }
std::string to_string(ResetMode mode) { return mode == ResetMode::kZero ? "zero" : "subtract"; }

NeuronKind parse_neuron_kind(const std::string& s) {
  if (s == "leaky") return NeuronKind::kLeaky;
  if (s == "sleaky") return NeuronKind::kSLeaky;
  throw ConfigError("unknown neuron kind '" + s + "' (expected leaky|sleaky)");
}

ResetMode parse_reset_mode(const std::string& s) {
  if (s == "zero") return ResetMode::kZero;
  if (s == "subtract") return ResetMode::kSubtract;
  throw ConfigError("unknown reset mode '" + s + "' (expected zero|subtract)");
}

SpikingLayer::SpikingLayer(int in, int out, const SpikingOptions& options, std::mt19937_64& rng,
                           const std::string& name)
    : kind(options.neuron), reset(options.reset), slope(options.slope) {
  if (in <= 0 || out <= 0) throw ShapeError("spiking layer widths must be positive");
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(out, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Matrix b(1, out);
  for (Eigen::Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight = math::Parameter(name + ".weight", std::move(w));
  bias = math::Parameter(name + ".bias", std::move(b));
  beta = math::Parameter(name + ".beta", Matrix::Constant(1, out, options.beta_init));
  threshold = math::Parameter(name + ".threshold", Matrix::Constant(1, out, options.threshold_init));
}

void SpikingLayer::reset_state() {
  membrane.resize(0, 0);
  prev_spikes.resize(0, 0);
}

void SpikingLayer::clamp_decay() { beta.value = beta.value.cwiseMax(0.0).cwiseMin(1.0); }

namespace {

Matrix state_or_zero(const Matrix& s, Eigen::Index batch, Eigen::Index n, const char* what) {
  if (s.size() == 0) return Matrix::Zero(batch, n);
  if (s.rows() != batch || s.cols() != n) {
    throw ShapeError(std::string("LIF ") + what + " state " + shape_string(s) + " does not match [" +
                     std::to_string(batch) + "x" + std::to_string(n) + "]");
  }
  return s;
}

template <ResetMode R, SpikeFunction F>
void scan_kernel(const double* __restrict cur_base, bool broadcast, Eigen::Index batch, Eigen::Index n, int steps,
                 const double* __restrict beta, const double* __restrict vth, double slope, double* __restrict h,
                 double* __restrict s, double* __restrict spikes, double* __restrict membrane) {
  for (int t = 0; t < steps; ++t) {
    const Eigen::Index off = static_cast<Eigen::Index>(t) * batch * n;
    const double* __restrict cur = cur_base + (broadcast ? 0 : off);
    double* __restrict spk = spikes + off;
    for (Eigen::Index r = 0; r < batch; ++r) {
      const Eigen::Index o = r * n;
      for (Eigen::Index c = 0; c < n; ++c) {
        const double p = beta[c] * h[o + c] + cur[o + c];
        double hv;
        if constexpr (R == ResetMode::kZero) {
          hv = p * (1.0 - s[o + c]);
        } else {
          hv = p - s[o + c] * vth[c];
        }
        double sv;
        if constexpr (F == SpikeFunction::kHeaviside) {
          sv = hv >= vth[c] ? 1.0 : 0.0;
        } else {
          const double u = hv - vth[c];
          sv = u / (1.0 + slope * std::abs(u));
        }
        h[o + c] = hv;
        s[o + c] = sv;
        spk[o + c] = sv;
      }
    }
    if (membrane != nullptr) std::copy(h, h + batch * n, membrane + off);
  }
}

template <ResetMode R, bool kHasPrev>
void backward_tick(const double* __restrict cur, Eigen::Index batch, Eigen::Index n, const double* __restrict beta,
                   const double* __restrict vth, double slope, const double* __restrict mem,
                   const double* __restrict h_prev, const double* __restrict s_prev, const double* __restrict gs,
                   double* __restrict gs_prev, double* __restrict dc, double* __restrict d_beta,
                   double* __restrict d_vth, double* __restrict carry) {
  for (Eigen::Index r = 0; r < batch; ++r) {
    const Eigen::Index o = r * n;
    for (Eigen::Index c = 0; c < n; ++c) {
      const double k = 1.0 + slope * std::abs(mem[o + c] - vth[c]);
      const double surrogate = gs[o + c] / (k * k);
      const double d_mem = surrogate + carry[o + c];
      double d_pre;
      double dv = -surrogate;
      if constexpr (R == ResetMode::kZero) {
        d_pre = d_mem * (1.0 - s_prev[o + c]);
        if constexpr (kHasPrev) gs_prev[o + c] -= d_mem * (beta[c] * h_prev[o + c] + cur[o + c]);
      } else {
        d_pre = d_mem;
        dv -= d_mem * s_prev[o + c];
        if constexpr (kHasPrev) gs_prev[o + c] -= d_mem * vth[c];
      }
      d_vth[c] += dv;
      dc[o + c] += d_pre;
      d_beta[c] += d_pre * h_prev[o + c];
      carry[o + c] = d_pre * beta[c];
    }
  }
}

template <ResetMode R>
void scan_backward_kernel(const double* cur_base, bool broadcast, Eigen::Index batch, Eigen::Index n, int steps,
                          const double* beta, const double* vth, double slope, const double* h0, const double* s0,
                          const double* membrane, const double* spikes, double* g_spike, double* d_current,
                          double* d_beta, double* d_vth, double* carry) {
  for (int t = steps - 1; t >= 0; --t) {
    const Eigen::Index off = static_cast<Eigen::Index>(t) * batch * n;
    const Eigen::Index prev = off - batch * n;
    const double* cur = cur_base + (broadcast ? 0 : off);
    double* dc = d_current + (broadcast ? 0 : off);
    if (t > 0) {
      backward_tick<R, true>(cur, batch, n, beta, vth, slope, membrane + off, membrane + prev, spikes + prev,
                             g_spike + off, g_spike + prev, dc, d_beta, d_vth, carry);
    } else {
      backward_tick<R, false>(cur, batch, n, beta, vth, slope, membrane + off, h0, s0, g_spike + off, nullptr, dc,
                              d_beta, d_vth, carry);
    }
  }
}

}  // namespace

LifScan lif_scan(const Matrix& currents, int steps, bool shared_drive, const Matrix& beta, const Matrix& threshold,
                 const Matrix& h0, const Matrix& s0, ResetMode reset, double slope, SpikeFunction fn,
                 bool keep_membrane) {
  if (steps < 1) throw ShapeError("LIF scan needs at least one tick");
  const Eigen::Index n = currents.cols();
  if (beta.rows() != 1 || beta.cols() != n || threshold.rows() != 1 || threshold.cols() != n) {
    throw ShapeError("LIF parameters " + shape_string(beta) + "/" + shape_string(threshold) +
                     " do not match currents " + shape_string(currents));
  }
  const Eigen::Index rows = currents.rows();
  if (!shared_drive && rows % steps != 0) {
    throw ShapeError("LIF currents " + shape_string(currents) + " are not a whole number of ticks");
  }
  const Eigen::Index batch = shared_drive ? rows : rows / steps;
  const bool broadcast = shared_drive && steps > 1;
  LifScan out;
  out.final_membrane = state_or_zero(h0, batch, n, "membrane");
  out.final_spikes = state_or_zero(s0, batch, n, "spike");
  out.spikes.resize(batch * steps, n);
  if (keep_membrane) out.membrane.resize(batch * steps, n);
  double* mem = keep_membrane ? out.membrane.data() : nullptr;
  auto run = [&](auto r_tag, auto f_tag) {
    scan_kernel<decltype(r_tag)::value, decltype(f_tag)::value>(
        currents.data(), broadcast, batch, n, steps, beta.data(), threshold.data(), slope, out.final_membrane.data(),
        out.final_spikes.data(), out.spikes.data(), mem);
  };
  using Zero = std::integral_constant<ResetMode, ResetMode::kZero>;
  using Sub = std::integral_constant<ResetMode, ResetMode::kSubtract>;
  using Hv = std::integral_constant<SpikeFunction, SpikeFunction::kHeaviside>;
  using Px = std::integral_constant<SpikeFunction, SpikeFunction::kFastSigmoidProxy>;
  if (reset == ResetMode::kZero) {
    fn == SpikeFunction::kHeaviside ? run(Zero{}, Hv{}) : run(Zero{}, Px{});
  } else {
    fn == SpikeFunction::kHeaviside ? run(Sub{}, Hv{}) : run(Sub{}, Px{});
  }
  return out;
}

math::Var lif_sequence(math::Var currents, int steps, bool shared_drive, math::Var beta, math::Var threshold,
                       const Matrix& h0, const Matrix& s0, ResetMode reset, double slope, SpikeFunction fn,
                       Matrix* final_membrane, Matrix* final_spikes) {
  math::Tape& tape = currents.tape();
  const bool needs = tape.any_needs_grad(currents, beta, threshold);
  LifScan scan =
      lif_scan(currents.value(), steps, shared_drive, beta.value(), threshold.value(), h0, s0, reset, slope, fn, needs);
  if (final_membrane != nullptr) *final_membrane = std::move(scan.final_membrane);
  if (final_spikes != nullptr) *final_spikes = std::move(scan.final_spikes);
  if (!needs) return tape.record(std::move(scan.spikes), false, nullptr);

  const Eigen::Index n = scan.spikes.cols();
  const Eigen::Index batch = scan.spikes.rows() / steps;
  auto membrane = std::make_shared<Matrix>(std::move(scan.membrane));
  auto init_h = std::make_shared<Matrix>(state_or_zero(h0, batch, n, "membrane"));
  auto init_s = std::make_shared<Matrix>(state_or_zero(s0, batch, n, "spike"));
  // The closure reads the spikes from its own node rather than holding a second copy.
  auto self = std::make_shared<math::Var>();
  math::Var out = tape.record(
      std::move(scan.spikes), true,
      [self, membrane, init_h, init_s, currents, beta, threshold, steps, batch, n, reset, slope,
       shared_drive](const Matrix& g) {
        math::Tape& tp = currents.tape();
        const bool broadcast = shared_drive && steps > 1;
        Matrix g_spike = g;
        Matrix d_current = Matrix::Zero(currents.rows(), n);
        Matrix d_beta = Matrix::Zero(1, n);
        Matrix d_vth = Matrix::Zero(1, n);
        Matrix carry = Matrix::Zero(batch, n);
        auto kernel = reset == ResetMode::kZero ? scan_backward_kernel<ResetMode::kZero>
                                                : scan_backward_kernel<ResetMode::kSubtract>;
        kernel(currents.value().data(), broadcast, batch, n, steps, beta.value().data(), threshold.value().data(),
               slope, init_h->data(), init_s->data(), membrane->data(), self->value().data(), g_spike.data(),
               d_current.data(), d_beta.data(), d_vth.data(), carry.data());
        if (tp.needs_grad(currents)) tp.accumulate(currents, d_current);
        if (tp.needs_grad(beta)) tp.accumulate(beta, d_beta);
        if (tp.needs_grad(threshold)) tp.accumulate(threshold, d_vth);
      });
  *self = out;
  return out;
}

namespace {

// Active input indices row by row; false when the input is not strictly 0/1.
bool active_indices(const Matrix& x, std::vector<Eigen::Index>& row_start, std::vector<Eigen::Index>& active) {
  row_start.reserve(static_cast<std::size_t>(x.rows()) + 1);
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    row_start.push_back(static_cast<Eigen::Index>(active.size()));
    const double* xr = x.data() + r * x.cols();
    for (Eigen::Index k = 0; k < x.cols(); ++k) {
      if (xr[k] == 1.0) {
        active.push_back(k);
      } else if (xr[k] != 0.0) {
        return false;
      }
    }
  }
  row_start.push_back(static_cast<Eigen::Index>(active.size()));
  return true;
}

Matrix sparse_affine(const Matrix& wt, const Matrix& b, Eigen::Index rows, const std::vector<Eigen::Index>& row_start,
                     const std::vector<Eigen::Index>& active) {
  Matrix out(rows, wt.cols());
  for (Eigen::Index r = 0; r < rows; ++r) {
    auto o = out.row(r);
    o = b.row(0);
    for (Eigen::Index i = row_start[r]; i < row_start[r + 1]; ++i) o += wt.row(active[i]);
  }
  return out;
}

}  // namespace

Matrix spike_affine(const Matrix& x, const Matrix& w, const Matrix& b) {
  if (x.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows()) {
    throw ShapeError("spike_affine: input " + shape_string(x) + " does not match weight " + shape_string(w));
  }
  std::vector<Eigen::Index> row_start;
  std::vector<Eigen::Index> active;
  if (!active_indices(x, row_start, active)) {
    Matrix out(x.rows(), w.rows());
    out.noalias() = x * w.transpose();
    out.rowwise() += b.row(0);
    return out;
  }
  const Matrix wt = w.transpose();
  return sparse_affine(wt, b, x.rows(), row_start, active);
}

math::Var spike_linear(math::Var spikes, math::Var weight, math::Var bias) {
  const Matrix& x = spikes.value();
  const Matrix& w = weight.value();
  const Matrix& b = bias.value();
  if (x.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows()) return math::linear(spikes, weight, bias);
  auto row_start = std::make_shared<std::vector<Eigen::Index>>();
  auto active = std::make_shared<std::vector<Eigen::Index>>();
  if (!active_indices(x, *row_start, *active)) return math::linear(spikes, weight, bias);
  const Matrix wt = w.transpose();
  Matrix out = sparse_affine(wt, b, x.rows(), *row_start, *active);
  math::Tape& tape = spikes.tape();
  return tape.record(std::move(out), tape.any_needs_grad(spikes, weight, bias),
                     [spikes, weight, bias, row_start, active](const Matrix& g) {
                       math::Tape& tp = spikes.tape();
                       if (tp.needs_grad(spikes)) {
                         Matrix dx(g.rows(), weight.value().cols());
                         dx.noalias() = g * weight.value();
                         tp.accumulate(spikes, dx);
                       }
                       if (tp.needs_grad(weight)) {
                         Matrix dwt = Matrix::Zero(weight.value().cols(), weight.value().rows());
                         for (Eigen::Index r = 0; r < g.rows(); ++r) {
                           for (Eigen::Index i = (*row_start)[r]; i < (*row_start)[r + 1]; ++i) {
                             dwt.row((*active)[i]) += g.row(r);
                           }
                         }
                         tp.accumulate(weight, dwt.transpose());
                       }
                       if (tp.needs_grad(bias)) tp.accumulate(bias, g.colwise().sum());
                     });
}

Matrix lif_step(SpikingLayer& layer, const Matrix& x) {
  if (x.cols() != layer.in_dim()) {
    throw ShapeError("lif_step: input " + shape_string(x) + " does not match layer input width " +
                     std::to_string(layer.in_dim()));
  }
  Matrix current(x.rows(), layer.out_dim());
  current.noalias() = x * layer.weight.value.transpose();
  current.rowwise() += layer.bias.value.row(0);
  LifScan scan = lif_scan(current, 1, true, layer.beta.value, layer.threshold.value, layer.membrane, layer.prev_spikes,
                          layer.reset, layer.slope, SpikeFunction::kHeaviside, false);
  layer.membrane = std::move(scan.final_membrane);
  layer.prev_spikes = scan.final_spikes;
  return scan.spikes;
}

void sleaky_continue(SpikingLayer& layer) {
  if (layer.kind != NeuronKind::kSLeaky) throw ShapeError("continue() is only defined for SLeaky layers");
  if (layer.membrane.size() > 0) layer.membrane = layer.membrane.cwiseMax(0.0);
}

}  // namespace rehabsnn::snn
