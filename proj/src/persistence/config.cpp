#include "rehabsnn/persistence/config.hpp"

#include "rehabsnn/error.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>

namespace rehabsnn::persistence {

namespace {

struct Entry {
  std::string key;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string real_text(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double parse_real(const std::string& s) {
  const std::string t = trim(s);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("expected a real number, got '" + s + "'");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s) {
  const std::string t = trim(s);
  Int v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) throw ConfigError("expected an integer, got '" + s + "'");
  return v;
}

bool parse_bool(const std::string& s) {
  const std::string t = trim(s);
  if (t == "true" || t == "1" || t == "yes") return true;
  if (t == "false" || t == "0" || t == "no") return false;
  throw ConfigError("expected true or false, got '" + s + "'");
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::istringstream is(s);
  std::string item;
  while (std::getline(is, item, ',')) out.push_back(parse_int<int>(item));
  if (out.empty()) throw ConfigError("expected a comma separated list, got '" + s + "'");
  return out;
}

std::string int_list_text(const std::vector<int>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

template <typename T>
Entry real(std::string key, T RunConfig::*section, double T::*field) {
  return {std::move(key), [=](RunConfig& c, const std::string& v) { (c.*section).*field = parse_real(v); },
          [=](const RunConfig& c) { return real_text((c.*section).*field); }};
}

template <typename T, typename Int>
Entry integer(std::string key, T RunConfig::*section, Int T::*field) {
  return {std::move(key), [=](RunConfig& c, const std::string& v) { (c.*section).*field = parse_int<Int>(v); },
          [=](const RunConfig& c) { return std::to_string((c.*section).*field); }};
}

template <typename T>
Entry boolean(std::string key, T RunConfig::*section, bool T::*field) {
  return {std::move(key), [=](RunConfig& c, const std::string& v) { (c.*section).*field = parse_bool(v); },
          [=](const RunConfig& c) { return std::string((c.*section).*field ? "true" : "false"); }};
}

// Torque-profile keys for an env section.
template <typename T>
void profile_entries(std::vector<Entry>& out, const std::string& sec, T RunConfig::*section) {
  out.push_back({sec + ".profile",
                 [=](RunConfig& c, const std::string& v) { (c.*section).profile.kind = envs::parse_profile_kind(trim(v)); },
                 [=](const RunConfig& c) { return envs::to_string((c.*section).profile.kind); }});
  out.push_back({sec + ".profile_amplitude",
                 [=](RunConfig& c, const std::string& v) { (c.*section).profile.amplitude = parse_real(v); },
                 [=](const RunConfig& c) { return real_text((c.*section).profile.amplitude); }});
  out.push_back({sec + ".profile_frequency",
                 [=](RunConfig& c, const std::string& v) { (c.*section).profile.frequency = parse_real(v); },
                 [=](const RunConfig& c) { return real_text((c.*section).profile.frequency); }});
  out.push_back({sec + ".profile_phase",
                 [=](RunConfig& c, const std::string& v) { (c.*section).profile.phase = parse_real(v); },
                 [=](const RunConfig& c) { return real_text((c.*section).profile.phase); }});
  out.push_back({sec + ".profile_random_phase",
                 [=](RunConfig& c, const std::string& v) { (c.*section).profile.random_phase = parse_bool(v); },
                 [=](const RunConfig& c) { return std::string((c.*section).profile.random_phase ? "true" : "false"); }});
}

std::vector<Entry> build_registry() {
  using sac::SacConfig;
  using sac::SnnConfig;
  using envs::KenvParams;
  using envs::DenvParams;
  std::vector<Entry> r;
  r.push_back({"run.seed", [](RunConfig& c, const std::string& v) { c.seed = parse_int<std::uint64_t>(v); },
               [](const RunConfig& c) { return std::to_string(c.seed); }});
  r.push_back({"run.env",
               [](RunConfig& c, const std::string& v) {
                 const std::string t = trim(v);
                 if (t != "kenv" && t != "denv") throw ConfigError("expected kenv or denv, got '" + t + "'");
                 c.env = t;
               },
               [](const RunConfig& c) { return c.env; }});
  r.push_back({"run.variant",
               [](RunConfig& c, const std::string& v) {
                 const std::string t = trim(v);
                 try {
                   sac::parse_variant(t);
                 } catch (const std::exception&) {
                   throw ConfigError("expected asac, hsac or ssac, got '" + t + "'");
                 }
                 c.variant = t;
               },
               [](const RunConfig& c) { return c.variant; }});

  const auto S = &RunConfig::sac;
  r.push_back(integer("sac.buffer_size", S, &SacConfig::buffer_size));
  r.push_back(real("sac.gamma", S, &SacConfig::gamma));
  r.push_back(real("sac.tau", S, &SacConfig::tau));
  r.push_back(integer("sac.batch_size", S, &SacConfig::batch_size));
  r.push_back(integer("sac.learning_starts", S, &SacConfig::learning_starts));
  r.push_back(real("sac.policy_lr", S, &SacConfig::policy_lr));
  r.push_back(real("sac.q_lr", S, &SacConfig::q_lr));
  r.push_back(real("sac.alpha_lr", S, &SacConfig::alpha_lr));
  r.push_back(integer("sac.policy_frequency", S, &SacConfig::policy_frequency));
  r.push_back(integer("sac.target_frequency", S, &SacConfig::target_frequency));
  r.push_back(real("sac.alpha_init", S, &SacConfig::alpha_init));
  r.push_back(boolean("sac.autotune", S, &SacConfig::autotune));
  r.push_back(integer("sac.total_steps", S, &SacConfig::total_steps));
  r.push_back({"sac.hidden", [](RunConfig& c, const std::string& v) { c.sac.hidden = parse_int_list(v); },
               [](const RunConfig& c) { return int_list_text(c.sac.hidden); }});
  r.push_back(real("sac.log_std_min", S, &SacConfig::log_std_min));
  r.push_back(real("sac.log_std_max", S, &SacConfig::log_std_max));
  r.push_back(integer("sac.eval_interval", S, &SacConfig::eval_interval));
  r.push_back(integer("sac.eval_episodes", S, &SacConfig::eval_episodes));

  const auto N = &RunConfig::snn;
  r.push_back(integer("snn.time_steps", N, &SnnConfig::time_steps));
  r.push_back(real("snn.slope", N, &SnnConfig::slope));
  r.push_back(real("snn.beta_init", N, &SnnConfig::beta_init));
  r.push_back(real("snn.threshold_init", N, &SnnConfig::threshold_init));
  r.push_back({"snn.reset", [](RunConfig& c, const std::string& v) { c.snn.reset = snn::parse_reset_mode(trim(v)); },
               [](const RunConfig& c) { return snn::to_string(c.snn.reset); }});

  const auto K = &RunConfig::kenv;
  r.push_back(real("kenv.m", K, &KenvParams::m));
  r.push_back(real("kenv.l", K, &KenvParams::l));
  r.push_back(real("kenv.g", K, &KenvParams::g));
  r.push_back(real("kenv.theta_max", K, &KenvParams::theta_max));
  r.push_back(integer("kenv.max_steps", K, &KenvParams::max_steps));
  r.push_back(real("kenv.d_min", K, &KenvParams::d_min));
  r.push_back(real("kenv.d_max", K, &KenvParams::d_max));
  r.push_back(real("kenv.w_sp", K, &KenvParams::w_sp));
  r.push_back(real("kenv.w_pb", K, &KenvParams::w_pb));
  r.push_back(real("kenv.w_sf", K, &KenvParams::w_sf));
  r.push_back(real("kenv.w_acc", K, &KenvParams::w_acc));
  r.push_back(real("kenv.w_pi", K, &KenvParams::w_pi));
  r.push_back(real("kenv.target_speed_peak", K, &KenvParams::target_speed_peak));
  r.push_back(real("kenv.ramp_up", K, &KenvParams::ramp_up));
  r.push_back(real("kenv.ramp_down", K, &KenvParams::ramp_down));
  r.push_back(real("kenv.force_limit_factor", K, &KenvParams::force_limit_factor));
  profile_entries(r, "kenv", K);

  const auto D = &RunConfig::denv;
  r.push_back(real("denv.m", D, &DenvParams::m));
  r.push_back(real("denv.l", D, &DenvParams::l));
  r.push_back(real("denv.g", D, &DenvParams::g));
  r.push_back(real("denv.b", D, &DenvParams::b));
  r.push_back(real("denv.tau_max", D, &DenvParams::tau_max));
  r.push_back(real("denv.dt", D, &DenvParams::dt));
  r.push_back(real("denv.theta_target", D, &DenvParams::theta_target));
  r.push_back(integer("denv.max_steps", D, &DenvParams::max_steps));
  r.push_back(real("denv.w_theta", D, &DenvParams::w_theta));
  r.push_back(real("denv.w_v", D, &DenvParams::w_v));
  r.push_back(real("denv.w_tau", D, &DenvParams::w_tau));
  r.push_back(real("denv.w_h", D, &DenvParams::w_h));
  r.push_back(real("denv.w_dtau", D, &DenvParams::w_dtau));
  r.push_back(real("denv.hand_mass_fraction", D, &DenvParams::hand_mass_fraction));
  r.push_back(real("denv.reset_theta_low", D, &DenvParams::reset_theta_low));
  r.push_back(real("denv.reset_theta_high", D, &DenvParams::reset_theta_high));
  profile_entries(r, "denv", D);
  r.push_back({"denv.reward",
               [](RunConfig& c, const std::string& v) { c.denv.reward_mode = envs::parse_denv_reward(trim(v)); },
               [](const RunConfig& c) { return envs::to_string(c.denv.reward_mode); }});
  r.push_back(real("denv.hold_angle", D, &DenvParams::hold_angle));

  const auto Q = &RunConfig::spttq;
  r.push_back(real("spttq.delta", Q, &SpttqConfig::delta));
  r.push_back(real("spttq.stable_eps", Q, &SpttqConfig::stable_eps));
  r.push_back(integer("spttq.episodes", Q, &SpttqConfig::episodes));
  r.push_back(integer("spttq.floor_episodes", Q, &SpttqConfig::floor_episodes));
  r.push_back(integer("spttq.trace_episodes", Q, &SpttqConfig::trace_episodes));
  return r;
}

const std::vector<Entry>& registry() {
  static const std::vector<Entry> r = build_registry();
  return r;
}

const Entry* find_entry(const std::string& key) {
  for (const Entry& e : registry()) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

std::set<std::string> known_sections() {
  std::set<std::string> out;
  for (const Entry& e : registry()) out.insert(e.key.substr(0, e.key.find('.')));
  return out;
}

}  // namespace

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
  const Entry* e = find_entry(key);
  if (e == nullptr) throw ConfigError("unknown key '" + key + "'");
  try {
    e->set(cfg, value);
  } catch (const std::exception& ex) {
    throw ConfigError("key '" + key + "': " + ex.what());
  }
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) {
  const Entry* e = find_entry(key);
  if (e == nullptr) throw ConfigError("unknown key '" + key + "'");
  return e->get(cfg);
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const Entry& e : registry()) out.push_back(e.key);
  return out;
}

void RunConfig::validate() const {
  sac.validate();
  snn.validate();
  kenv.validate();
  denv.validate();
  if (!(spttq.delta > 0.0 && spttq.delta <= 1.0)) throw ConfigError("spttq.delta must lie in (0, 1]");
  if (!(spttq.stable_eps >= 0.0)) throw ConfigError("spttq.stable_eps must be non-negative");
  if (spttq.episodes < 1) throw ConfigError("spttq.episodes must be positive");
  if (spttq.floor_episodes < 1) throw ConfigError("spttq.floor_episodes must be positive");
  if (spttq.trace_episodes < 1) throw ConfigError("spttq.trace_episodes must be positive");
}

std::string RunConfig::canonical() const {
  std::ostringstream os;
  std::string section;
  for (const Entry& e : registry()) {
    const std::string sec = e.key.substr(0, e.key.find('.'));
    if (sec != section) {
      os << (section.empty() ? "" : "\n") << '[' << sec << "]\n";
      section = sec;
    }
    os << e.key.substr(sec.size() + 1) << " = " << e.get(*this) << '\n';
  }
  return os.str();
}

std::string RunConfig::hash() const {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : canonical()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

RunConfig parse_config(const std::string& text, const std::string& origin) {
  RunConfig cfg;
  const std::set<std::string> sections = known_sections();
  std::set<std::string> seen;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  int line_no = 0;
  auto where = [&] { return origin + ":" + std::to_string(line_no) + ": "; };
  while (std::getline(is, raw)) {
    ++line_no;
    std::string line = raw;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError(where() + "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (sections.count(section) == 0) throw ConfigError(where() + "unknown section '" + section + "'");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where() + "expected 'key = value', got '" + line + "'");
    const std::string name = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section.empty()) throw ConfigError(where() + "key '" + name + "' appears before any section");
    const std::string key = section + "." + name;
    if (!seen.insert(key).second) throw ConfigError(where() + "duplicate key '" + key + "'");
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError& e) {
      throw ConfigError(where() + e.what());
    }
  }
  cfg.validate();
  cfg.source_text = text;
  return cfg;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read config '" + path + "'");
  std::ostringstream os;
  os << in.rdbuf();
  return parse_config(os.str(), path);
}

void apply_overrides(RunConfig& cfg, const std::vector<std::string>& overrides) {
  for (const std::string& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError("override '" + o + "' is not KEY=VALUE");
    set_config_value(cfg, trim(o.substr(0, eq)), o.substr(eq + 1));
    cfg.source_text += "# --set " + o + "\n";
  }
  cfg.validate();
}

}  // namespace rehabsnn::persistence
