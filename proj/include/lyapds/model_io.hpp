#pragma once

#include <filesystem>
#include <string>

#include "lyapds/model.hpp"

namespace lyapds {

inline constexpr int kModelFormatVersion = 1;

/// JSON model file: kind, dim, the four network specs with their parameter
/// segments, constants, normalization, the effective training config and the
/// RNG algorithm + seed. Doubles are written in shortest round-trip form, so
/// load(save(m)) evaluates bit-identically.
std::string model_to_json(const StableDsModel& model);
StableDsModel model_from_json(const std::string& text);

void save_model(const std::filesystem::path& path, const StableDsModel& model);
StableDsModel load_model(const std::filesystem::path& path);

}  // namespace lyapds
