#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "lyapds/network.hpp"

namespace lyapds {

enum class DecaySchedule { kPerEpoch, kPerIteration };

/// Training protocol. Defaults follow the published setup: AdamW, lr 1e-5
/// decayed by 0.99, 2000 iterations, batches of 64.
struct TrainConfig {
  ModelKind kind = ModelKind::kPointToPoint;
  double learning_rate = 1e-5;
  double lr_decay = 0.99;
  DecaySchedule decay_schedule = DecaySchedule::kPerEpoch;
  int max_iterations = 2000;
  int batch_size = 64;
  double weight_decay = 1e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
  bool train_on_gated = true;
  std::vector<int> hidden{64, 64};

  // Overrides of the kind-dependent ModelConstants defaults.
  std::optional<double> delta;
  std::optional<double> sigma_contraction;
  std::optional<double> xi;
  std::optional<double> eps_grad;
  std::optional<double> eps_s;
  std::optional<double> fd_step;

  ModelConstants model_constants() const;
  void validate() const;

  /// Applies one `key=value` assignment; throws ConfigError on unknown keys or
  /// unparsable values.
  void set(const std::string& key, const std::string& value);

  /// Every effective setting as key/value text, in a stable order.
  std::map<std::string, std::string> entries() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Parses `key=value` lines; blank lines and `#` comments are ignored.
TrainConfig parse_config_text(const std::string& text, TrainConfig base = {});
TrainConfig load_config_file(const std::filesystem::path& path, TrainConfig base = {});

/// Environment variable naming a default config file for the CLI.
inline constexpr const char* kConfigEnvVar = "LYAPDS_CONFIG";

std::string format_double(double v);

}  // namespace lyapds
