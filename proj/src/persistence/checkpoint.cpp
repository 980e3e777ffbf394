#include "rehabsnn/persistence/checkpoint.hpp"

#include "rehabsnn/persistence/csv.hpp"
#include "rehabsnn/snn/network.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>
#include <vector>

namespace rehabsnn::persistence {

using math::Matrix;

namespace {

constexpr const char* kMagic = "REHABSNN-CHECKPOINT";

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string list_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out.empty() ? "-" : out;
}

std::string row_text(const Matrix& m) {
  std::string out;
  for (Eigen::Index i = 0; i < m.size(); ++i) out += (i ? "," : "") + real_text(m.data()[i]);
  return out;
}

void append_le(std::string& out, float f) {
  std::uint32_t bits = 0;
  std::memcpy(&bits, &f, sizeof bits);
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xffu));
}

float read_le(const unsigned char* p) {
  std::uint32_t bits = 0;
  for (int i = 0; i < 4; ++i) bits |= static_cast<std::uint32_t>(p[i]) << (8 * i);
  float f = 0.0f;
  std::memcpy(&f, &bits, sizeof f);
  return f;
}

[[noreturn]] void fail(CheckpointFault fault, const std::string& path, const std::string& what) {
  throw CheckpointError(fault, "checkpoint '" + path + "': " + what);
}

std::vector<int> parse_list(const std::string& s, const std::string& path) {
  std::vector<int> out;
  if (s == "-") return out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      fail(CheckpointFault::kShape, path, "bad integer list '" + s + "'");
    }
  }
  return out;
}

Matrix parse_row(const std::string& s, const std::string& path) {
  std::vector<double> vals;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) {
    try {
      vals.push_back(std::stod(item));
    } catch (const std::exception&) {
      fail(CheckpointFault::kShape, path, "bad real list '" + s + "'");
    }
  }
  Matrix m(1, static_cast<Eigen::Index>(vals.size()));
  for (std::size_t i = 0; i < vals.size(); ++i) m(0, static_cast<Eigen::Index>(i)) = vals[i];
  return m;
}

}  // namespace

void quantize_to_float32(math::Network& net) {
  for (math::Parameter* p : net.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) {
      p->value.data()[i] = static_cast<double>(static_cast<float>(p->value.data()[i]));
    }
  }
}

void save_checkpoint(const std::string& path, sac::Actor& actor, const CheckpointMeta& meta) {
  math::Network& net = actor.network();
  std::ostringstream h;
  h << kMagic << ' ' << kCheckpointVersion << '\n';
  h << "variant " << sac::to_string(meta.variant) << '\n';
  h << "env " << (meta.env_id.empty() ? "-" : meta.env_id) << '\n';
  h << "step " << meta.step << '\n';
  h << "config_hash " << (meta.config_hash.empty() ? "-" : meta.config_hash) << '\n';
  h << "cutoff " << meta.cutoff << '\n';
  h << "substrate " << (net.is_spiking() ? "spiking" : "artificial") << '\n';
  h << "input_dim " << net.input_dim() << '\n';
  h << "hidden " << list_text(net.hidden_dims()) << '\n';
  h << "heads " << list_text(net.head_dims()) << '\n';
  if (net.is_spiking()) {
    const auto& snet = static_cast<const snn::SpikingNetwork&>(net);
    h << "time_steps " << snet.time_steps() << '\n';
    h << "neuron " << snn::to_string(snet.neuron_kind()) << '\n';
    h << "reset " << snn::to_string(snet.options().reset) << '\n';
    h << "slope " << real_text(snet.options().slope) << '\n';
  }
  h << "log_std_min " << real_text(actor.log_std_min()) << '\n';
  h << "log_std_max " << real_text(actor.log_std_max()) << '\n';
  h << "action_scale " << row_text(actor.action_scale()) << '\n';
  h << "action_bias " << row_text(actor.action_bias()) << '\n';
  std::string payload;
  for (math::Parameter* p : net.parameters()) {
    h << "tensor " << p->name << ' ' << p->value.rows() << ' ' << p->value.cols() << '\n';
    // Row-major so the byte layout does not depend on the in-memory storage order.
    for (Eigen::Index r = 0; r < p->value.rows(); ++r) {
      for (Eigen::Index c = 0; c < p->value.cols(); ++c) append_le(payload, static_cast<float>(p->value(r, c)));
    }
  }
  h << "payload_bytes " << payload.size() << '\n';
  h << "end\n";
  write_file_atomic(path, h.str() + payload);
}

LoadedCheckpoint load_checkpoint(const std::string& path, std::optional<sac::Variant> expected) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(CheckpointFault::kIo, path, "cannot open");
  std::ostringstream buf;
  buf << in.rdbuf();
  const std::string bytes = buf.str();

  // Header lines up to "end".
  std::size_t pos = 0;
  std::vector<std::string> lines;
  bool ended = false;
  while (pos < bytes.size()) {
    const std::size_t nl = bytes.find('\n', pos);
    if (nl == std::string::npos) break;
    std::string line = bytes.substr(pos, nl - pos);
    pos = nl + 1;
    if (lines.empty()) {
      if (line.rfind(kMagic, 0) != 0) fail(CheckpointFault::kBadMagic, path, "bad magic");
    }
    if (line == "end") {
      ended = true;
      break;
    }
    lines.push_back(std::move(line));
    if (lines.size() > 100000) break;
  }
  if (lines.empty() && bytes.rfind(kMagic, 0) != 0) fail(CheckpointFault::kBadMagic, path, "bad magic");
  if (!ended) fail(CheckpointFault::kTruncated, path, "header is truncated");

  {
    std::istringstream first(lines.front());
    std::string magic;
    int version = -1;
    first >> magic >> version;
    if (magic != kMagic) fail(CheckpointFault::kBadMagic, path, "bad magic");
    if (version != kCheckpointVersion) {
      fail(CheckpointFault::kVersion, path, "unsupported format version " + std::to_string(version));
    }
  }

  std::map<std::string, std::string> fields;
  struct TensorInfo {
    std::string name;
    Eigen::Index rows, cols;
  };
  std::vector<TensorInfo> tensors;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    const auto sp = line.find(' ');
    const std::string key = line.substr(0, sp);
    const std::string value = sp == std::string::npos ? "" : line.substr(sp + 1);
    if (key == "tensor") {
      std::istringstream ts(value);
      TensorInfo t{};
      if (!(ts >> t.name >> t.rows >> t.cols) || t.rows < 0 || t.cols < 0) {
        fail(CheckpointFault::kShape, path, "malformed tensor line '" + line + "'");
      }
      tensors.push_back(t);
    } else {
      fields[key] = value;
    }
  }
  auto field = [&](const std::string& k) -> const std::string& {
    auto it = fields.find(k);
    if (it == fields.end()) fail(CheckpointFault::kTruncated, path, "header lacks '" + k + "'");
    return it->second;
  };

  LoadedCheckpoint out;
  try {
    out.meta.variant = sac::parse_variant(field("variant"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception&) {
    fail(CheckpointFault::kVariant, path, "unknown variant tag '" + field("variant") + "'");
  }
  if (expected && *expected != out.meta.variant) {
    fail(CheckpointFault::kVariant, path,
         "holds a " + sac::to_string(out.meta.variant) + " actor, expected " + sac::to_string(*expected));
  }
  out.meta.env_id = field("env") == "-" ? "" : field("env");
  out.meta.config_hash = field("config_hash") == "-" ? "" : field("config_hash");
  try {
    out.meta.step = std::stoll(field("step"));
    out.meta.cutoff = std::stoi(field("cutoff"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception&) {
    fail(CheckpointFault::kShape, path, "malformed step or cutoff");
  }

  std::size_t declared = 0;
  try {
    declared = std::stoull(field("payload_bytes"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception&) {
    fail(CheckpointFault::kPayload, path, "malformed payload_bytes");
  }
  std::size_t expected_bytes = 0;
  for (const TensorInfo& t : tensors) expected_bytes += static_cast<std::size_t>(t.rows * t.cols) * 4;
  if (expected_bytes != declared) {
    fail(CheckpointFault::kPayload, path,
         "tensor shapes need " + std::to_string(expected_bytes) + " bytes but header declares " +
             std::to_string(declared));
  }
  if (bytes.size() - pos != declared) {
    fail(CheckpointFault::kPayload, path,
         "payload holds " + std::to_string(bytes.size() - pos) + " bytes, header declares " + std::to_string(declared));
  }

  // Rebuild the network from the descriptors, then overwrite every parameter.
  const bool spiking = field("substrate") == "spiking";
  if (sac::actor_is_spiking(out.meta.variant) != spiking) {
    fail(CheckpointFault::kVariant, path, "variant tag disagrees with the network substrate");
  }
  const std::vector<int> hidden = parse_list(field("hidden"), path);
  const std::vector<int> heads = parse_list(field("heads"), path);
  int input_dim = 0;
  try {
    input_dim = std::stoi(field("input_dim"));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception&) {
    fail(CheckpointFault::kShape, path, "malformed input_dim");
  }
  std::mt19937_64 rng(0);
  std::unique_ptr<math::Network> net;
  try {
    if (spiking) {
      snn::SpikingOptions opt;
      opt.reset = snn::parse_reset_mode(field("reset"));
      opt.neuron = snn::parse_neuron_kind(field("neuron"));
      opt.slope = std::stod(field("slope"));
      net = std::make_unique<snn::SpikingNetwork>(input_dim, hidden, heads, std::stoi(field("time_steps")), opt, rng);
    } else {
      net = std::make_unique<math::MlpNetwork>(input_dim, hidden, heads, rng);
    }
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    fail(CheckpointFault::kShape, path, std::string("cannot rebuild network: ") + e.what());
  }
  std::vector<math::Parameter*> params = net->parameters();
  if (params.size() != tensors.size()) {
    fail(CheckpointFault::kShape, path,
         "network has " + std::to_string(params.size()) + " tensors, file has " + std::to_string(tensors.size()));
  }
  const auto* data = reinterpret_cast<const unsigned char*>(bytes.data() + pos);
  for (std::size_t i = 0; i < params.size(); ++i) {
    math::Parameter& p = *params[i];
    const TensorInfo& t = tensors[i];
    if (p.name != t.name || p.value.rows() != t.rows || p.value.cols() != t.cols) {
      fail(CheckpointFault::kShape, path,
           "tensor " + std::to_string(i) + " is " + t.name + " [" + std::to_string(t.rows) + "x" +
               std::to_string(t.cols) + "], network expects " + p.name + " [" + std::to_string(p.value.rows()) + "x" +
               std::to_string(p.value.cols()) + "]");
    }
    for (Eigen::Index r = 0; r < t.rows; ++r) {
      for (Eigen::Index c = 0; c < t.cols; ++c) {
        p.value(r, c) = static_cast<double>(read_le(data));
        data += 4;
      }
    }
  }
  net->project_parameters();

  const Matrix scale = parse_row(field("action_scale"), path);
  const Matrix bias = parse_row(field("action_bias"), path);
  try {
    out.actor = std::make_unique<sac::Actor>(std::move(net), scale, bias, std::stod(field("log_std_min")),
                                             std::stod(field("log_std_max")));
  } catch (const CheckpointError&) {
    throw;
  } catch (const std::exception& e) {
    fail(CheckpointFault::kShape, path, std::string("cannot rebuild actor: ") + e.what());
  }
  return out;
}

}  // namespace rehabsnn::persistence
