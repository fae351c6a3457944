#include "lyapds/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "lyapds/errors.hpp"

namespace lyapds {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not a number");
  }
  return out;
}

long long parse_integer(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end) {
    throw ConfigError("config key '" + key + "': '" + v + "' is not an integer");
  }
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': '" + v + "' is not a boolean");
}

std::vector<int> parse_widths(const std::string& key, const std::string& v) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    out.push_back(static_cast<int>(parse_integer(key, trim(item))));
  }
  if (out.empty()) throw ConfigError("config key '" + key + "' needs at least one width");
  return out;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

ModelConstants TrainConfig::model_constants() const {
  ModelConstants c = ModelConstants::for_kind(kind);
  if (delta) c.delta = *delta;
  if (sigma_contraction) c.sigma_contraction = *sigma_contraction;
  if (xi) c.xi = *xi;
  if (eps_grad) c.eps_grad = *eps_grad;
  if (eps_s) c.eps_s = *eps_s;
  if (fd_step) c.fd_step = *fd_step;
  return c;
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) throw ConfigError("lr_decay must lie in (0, 1]");
  if (batch_size < 1) throw ConfigError("batch_size must be at least 1");
  if (max_iterations < 0) throw ConfigError("max_iterations must be non-negative");
  if (weight_decay < 0.0) throw ConfigError("weight_decay must be non-negative");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ConfigError("adam betas must lie in [0, 1)");
  }
  if (!(adam_eps > 0.0)) throw ConfigError("adam_eps must be positive");
  for (int w : hidden) {
    if (w <= 0) throw ConfigError("hidden widths must be positive");
  }
  model_constants().validate();
}

void TrainConfig::set(const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  if (key == "kind") {
    kind = parse_model_kind(v);
  } else if (key == "learning_rate") {
    learning_rate = parse_real(key, v);
  } else if (key == "lr_decay") {
    lr_decay = parse_real(key, v);
  } else if (key == "decay_schedule") {
    if (v == "epoch") {
      decay_schedule = DecaySchedule::kPerEpoch;
    } else if (v == "iteration") {
      decay_schedule = DecaySchedule::kPerIteration;
    } else {
      throw ConfigError("decay_schedule must be 'epoch' or 'iteration'");
    }
  } else if (key == "max_iterations") {
    max_iterations = static_cast<int>(parse_integer(key, v));
  } else if (key == "batch_size") {
    batch_size = static_cast<int>(parse_integer(key, v));
  } else if (key == "weight_decay") {
    weight_decay = parse_real(key, v);
  } else if (key == "adam_beta1") {
    adam_beta1 = parse_real(key, v);
  } else if (key == "adam_beta2") {
    adam_beta2 = parse_real(key, v);
  } else if (key == "adam_eps") {
    adam_eps = parse_real(key, v);
  } else if (key == "seed") {
    const long long s = parse_integer(key, v);
    if (s < 0) throw ConfigError("seed must be non-negative");
    seed = static_cast<std::uint64_t>(s);
  } else if (key == "train_on_gated") {
    train_on_gated = parse_bool(key, v);
  } else if (key == "hidden") {
    hidden = parse_widths(key, v);
  } else if (key == "delta") {
    delta = parse_real(key, v);
  } else if (key == "sigma_contraction") {
    sigma_contraction = parse_real(key, v);
  } else if (key == "xi") {
    xi = parse_real(key, v);
  } else if (key == "eps_grad") {
    eps_grad = parse_real(key, v);
  } else if (key == "eps_s") {
    eps_s = parse_real(key, v);
  } else if (key == "fd_step") {
    fd_step = parse_real(key, v);
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

std::map<std::string, std::string> TrainConfig::entries() const {
  const ModelConstants c = model_constants();
  std::string widths;
  for (std::size_t i = 0; i < hidden.size(); ++i) {
    if (i) widths += ",";
    widths += std::to_string(hidden[i]);
  }
  return {
      {"kind", to_string(kind)},
      {"learning_rate", format_double(learning_rate)},
      {"lr_decay", format_double(lr_decay)},
      {"decay_schedule", decay_schedule == DecaySchedule::kPerEpoch ? "epoch" : "iteration"},
      {"max_iterations", std::to_string(max_iterations)},
      {"batch_size", std::to_string(batch_size)},
      {"weight_decay", format_double(weight_decay)},
      {"adam_beta1", format_double(adam_beta1)},
      {"adam_beta2", format_double(adam_beta2)},
      {"adam_eps", format_double(adam_eps)},
      {"seed", std::to_string(seed)},
      {"train_on_gated", train_on_gated ? "true" : "false"},
      {"hidden", widths},
      {"delta", format_double(c.delta)},
      {"sigma_contraction", format_double(c.sigma_contraction)},
      {"xi", format_double(c.xi)},
      {"eps_grad", format_double(c.eps_grad)},
      {"eps_s", format_double(c.eps_s)},
      {"fd_step", format_double(c.fd_step)},
  };
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    base.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str(), std::move(base));
}

}  // namespace lyapds
