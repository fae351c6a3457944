#include "lyapds/model.hpp"

#include "lyapds/cycle_field.hpp"
#include "lyapds/errors.hpp"
#include "lyapds/p2p_field.hpp"

namespace lyapds {

StableDsModel StableDsModel::create(int dim, const TrainConfig& config, AffineMap normalization) {
  config.validate();
  if (dim < 1) throw ConfigError("state dimension must be positive");
  if (config.kind == ModelKind::kCycle && dim != 2) {
    throw ConfigError("limit-cycle models need planar data, got dimension " + std::to_string(dim));
  }
  if (normalization.dim() != dim) {
    throw ConfigError("normalization dimension does not match the model");
  }
  StableDsModel m;
  m.kind = config.kind;
  m.dim = dim;
  m.nets = NetworkSet::create(dim, config.hidden, config.seed);
  m.constants = config.model_constants();
  m.normalization = std::move(normalization);
  m.config = config;
  return m;
}

void StableDsModel::validate() const {
  constants.validate();
  if (kind == ModelKind::kCycle && dim != 2) throw ConfigError("limit-cycle models must be planar");
  if (normalization.dim() != dim) throw ConfigError("normalization dimension does not match the model");
  if ((normalization.scale.array() <= 0.0).any()) throw ConfigError("normalization scales must be positive");
  for (const Mlp* net : {&nets.g, &nets.f, &nets.alpha, &nets.beta}) {
    net->spec.validate();
    net->params.validate();
    if (net->spec.input_dim != dim) throw ConfigError("network input dimension does not match the model");
  }
  if (nets.f.spec.output_dim != dim) throw ConfigError("f must output a " + std::to_string(dim) + "-vector");
  for (const Mlp* net : {&nets.g, &nets.alpha, &nets.beta}) {
    if (net->spec.output_dim != 1) throw ConfigError("g, alpha and beta must be scalar networks");
    if (net->spec.head == OutputHead::kLinear) {
      throw ConfigError("g, alpha and beta need a softplus or sigmoid output head");
    }
  }
}

Eigen::VectorXd velocity(const StableDsModel& model, const Eigen::VectorXd& x) {
  return model.kind == ModelKind::kPointToPoint ? p2p::stable_velocity(model, x)
                                                : cycle::gated_velocity(model, x);
}

double lyapunov(const StableDsModel& model, const Eigen::VectorXd& x) {
  return model.kind == ModelKind::kPointToPoint ? p2p::lyapunov_value(model, x)
                                                : cycle::cycle_lyapunov(model, x);
}

}  // namespace lyapds
