#include "lyapds/rollout.hpp"

#include "lyapds/errors.hpp"

namespace lyapds {

void RolloutSpec::validate() const {
  if (!(dt > 0.0)) throw ContractError("rollout dt must be positive");
  if (steps < 1) throw ContractError("rollout needs at least one step");
  if (start.size() == 0 || !start.allFinite()) throw ContractError("rollout start must be a finite vector");
  for (const auto& p : perturbations) {
    if (p.displacement.size() != start.size()) throw ContractError("perturbation dimension mismatch");
    if (p.step < 0 || p.step > steps) throw ContractError("perturbation step outside the rollout");
  }
}

VectorField model_field(const StableDsModel& model) {
  return [&model](const Eigen::VectorXd& x) { return velocity(model, x); };
}

Trajectory rollout_normalized(const StableDsModel& model, const Eigen::VectorXd& start, double dt, int steps,
                              Integrator integrator, const std::vector<Perturbation>& perturbations) {
  if (start.size() != model.dim) throw ContractError("rollout start has the wrong dimension");
  const IntegrationResult r =
      integrate(model_field(model), start, dt, steps, integrator, perturbations, kDivergenceBox);
  Trajectory out;
  out.dt = dt;
  out.points = r.states;
  out.velocities = r.velocities;
  return out;
}

Trajectory rollout(const StableDsModel& model, const RolloutSpec& spec) {
  spec.validate();
  if (spec.start.size() != model.dim) throw ContractError("rollout start has the wrong dimension");
  const AffineMap& map = model.normalization;
  std::vector<Perturbation> scaled;
  scaled.reserve(spec.perturbations.size());
  for (const auto& p : spec.perturbations) {
    scaled.push_back({p.step, map.velocity_to_normalized(p.displacement)});
  }
  const Trajectory normalized =
      rollout_normalized(model, map.to_normalized(spec.start), spec.dt, spec.steps, spec.integrator, scaled);
  return denormalize(normalized, map);
}

}  // namespace lyapds
