#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace lyapds {

using VectorField = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

enum class Integrator { kEuler, kRk4 };

std::string to_string(Integrator integrator);
Integrator parse_integrator(const std::string& name);

Eigen::VectorXd euler_step(const VectorField& field, const Eigen::VectorXd& x, double dt);
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, double dt);
/// RK4 with the first stage k1 = field(x) already known.
Eigen::VectorXd rk4_step(const VectorField& field, const Eigen::VectorXd& x, const Eigen::VectorXd& k1,
                         double dt);
Eigen::VectorXd step(Integrator integrator, const VectorField& field, const Eigen::VectorXd& x, double dt);

/// Displacement added to the state at a given step index.
struct Perturbation {
  int step = 0;
  Eigen::VectorXd displacement;
};

struct IntegrationResult {
  std::vector<Eigen::VectorXd> states;      // steps + 1 states
  std::vector<Eigen::VectorXd> velocities;  // field at each state
};

/// Fixed-step integration. At step k any listed displacement is added to x_k
/// before the field is evaluated. If `box` is positive and a state leaves
/// [-box, box]^d, throws DivergenceError.
IntegrationResult integrate(const VectorField& field, const Eigen::VectorXd& x0, double dt, int steps,
                            Integrator integrator, const std::vector<Perturbation>& perturbations = {},
                            double box = 0.0);

}  // namespace lyapds
