#pragma once

#include <Eigen/Dense>

#include <vector>

#include "lyapds/data.hpp"
#include "lyapds/integrate.hpp"
#include "lyapds/model.hpp"

namespace lyapds {

/// Normalized states must stay inside [-kDivergenceBox, kDivergenceBox]^d.
inline constexpr double kDivergenceBox = 10.0;

/// Reproduction request in original units.
struct RolloutSpec {
  Eigen::VectorXd start;
  double dt = 0.01;
  int steps = 100;
  Integrator integrator = Integrator::kEuler;
  std::vector<Perturbation> perturbations;  // displacements in original units

  void validate() const;
};

/// Integrates the model field from `start`; the result has steps + 1 samples
/// in original units. Throws DivergenceError if the state leaves the box.
Trajectory rollout(const StableDsModel& model, const RolloutSpec& spec);

/// Same, entirely in normalized coordinates.
Trajectory rollout_normalized(const StableDsModel& model, const Eigen::VectorXd& start, double dt, int steps,
                              Integrator integrator = Integrator::kEuler,
                              const std::vector<Perturbation>& perturbations = {});

/// The model field as a plain function of a normalized state.
VectorField model_field(const StableDsModel& model);

}  // namespace lyapds
