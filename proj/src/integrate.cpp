#include "lyapds/integrate.hpp"

#include "lyapds/errors.hpp"

namespace lyapds {

std::string to_string(Integrator integrator) {
  return integrator == Integrator::kEuler ? "euler" : "rk4";
}

Integrator parse_integrator(const std::string& name) {
  if (name == "euler") return Integrator::kEuler;
  if (name == "rk4") return Integrator::kRk4;
  throw ConfigError("unknown integrator '" + name + "' (expected euler or rk4)");
}

Eigen::VectorXd euler_step(const VectorField& field, const Eigen::VectorXd& x, double dt) {
  return x + dt * field(x);
}

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, double dt) {
  return rk4_step(field, x, field(x), dt);
}

Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, const Eigen::VectorXd& k1,
                         double dt) {
  const Eigen::VectorXd k2 = field(x + 0.5 * dt * k1);
  const Eigen::VectorXd k3 = field(x + 0.5 * dt * k2);
  const Eigen::VectorXd k4 = field(x + dt * k3);
  return x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

Eigen::VectorXd step(Integrator integrator, const VectorField& field, const Eigen::VectorXd& x, double dt) {
  return integrator == Integrator::kEuler ? euler_step(field, x, dt) : rk4_step(field, x, dt);
}

IntegrationResult integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, int steps,
                            Integrator integrator, const std::vector<Perturbation>& perturbations,
                            double box) {
  if (!(dt > 0.0)) throw ContractError("integration step must be positive");
  if (steps < 1) throw ContractError("integration needs at least one step");

  auto check_box = [&](const Eigen::VectorXd& x, int k) {
    if (box > 0.0 && (!x.allFinite() || x.cwiseAbs().maxCoeff() > box)) {
      throw DivergenceError("state left the [-" + std::to_string(box) + ", " + std::to_string(box) +
                            "] box at step " + std::to_string(k));
    }
  };

  IntegrationResult out;
  out.states.reserve(static_cast<std::size_t>(steps) + 1);
  out.velocities.reserve(static_cast<std::size_t>(steps) + 1);

  Eigen::VectorXd x = x0;
  for (int k = 0; k <= steps; ++k) {
    for (const auto& p : perturbations) {
      if (p.step == k) x += p.displacement;
    }
    check_box(x, k);
    out.states.push_back(x);
    out.velocities.push_back(field(x));
    if (k < steps) {
      x = integrator == Integrator::kEuler ? Eigen::VectorXd(x + dt * out.velocities.back())
                                           : rk4_step(field, x, out.velocities.back(), dt);
    }
  }
  return out;
}

}  // namespace lyapds
