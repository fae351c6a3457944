#pragma once

#include <Eigen/Dense>

#include "lyapds/affine_map.hpp"
#include "lyapds/config.hpp"
#include "lyapds/network.hpp"

namespace lyapds {

/// A learned stable system: networks, constants and the normalization of the
/// data it was trained on. Field evaluation works in normalized coordinates.
struct StableDsModel {
  ModelKind kind = ModelKind::kPointToPoint;
  int dim = 2;
  NetworkSet nets;
  ModelConstants constants;
  AffineMap normalization;
  TrainConfig config;

  /// Fresh, untrained model with networks initialized from config.seed.
  static StableDsModel create(int dim, const TrainConfig& config, AffineMap normalization);

  void validate() const;
};

/// Velocity of the production field at a normalized state: the stabilized
/// point-to-point field, or the gated limit-cycle field.
Eigen::VectorXd velocity(const StableDsModel& model, const Eigen::VectorXd& x);

/// Lyapunov value at a normalized state (either kind).
double lyapunov(const StableDsModel& model, const Eigen::VectorXd& x);

}  // namespace lyapds
