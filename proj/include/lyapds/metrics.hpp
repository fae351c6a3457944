#pragma once

#include <Eigen/Dense>

#include <functional>
#include <string>
#include <vector>

#include "lyapds/data.hpp"
#include "lyapds/integrate.hpp"
#include "lyapds/model.hpp"

namespace lyapds {

/// Area of the triangle (a, b, c) in any dimension, via the norm of the
/// exterior product of its edge vectors.
double triangle_area(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c);

/// Swept error area between a demonstration and a time-aligned reproduction:
/// each tetragon (x_t, xr_t, xr_{t+1}, x_{t+1}) is split along x_t - xr_{t+1}
/// into two unsigned triangles. Units are those of the inputs squared.
double sea(const Trajectory& demo, const Trajectory& repro);

/// RMS of |field(x_k) - xdot_k| over the demonstration's own samples.
double v_rmse(const VectorField& field, const Trajectory& demo);

/// Model velocity error in original units: the demo is normalized, the model
/// is evaluated and its output mapped back.
double v_rmse(const StableDsModel& model, const Trajectory& demo_original);

struct ConvergenceStats {
  double fraction = 0.0;
  std::vector<double> distances;  // to goal / cycle at the horizon; inf on divergence
};

using DistanceFn = std::function<double(const Eigen::VectorXd&)>;

/// Integrates from each start for ceil(horizon / dt) steps and counts final
/// states with distance(x) < threshold.
ConvergenceStats convergence_stats(const VectorField& field, const std::vector<Eigen::VectorXd>& starts,
                                   double dt, double horizon, const DistanceFn& distance, double threshold,
                                   Integrator integrator = Integrator::kEuler);

/// Point-to-point: |x(T)| < 0.05. Cycle: |g(x(T)) - delta| < 0.05 delta.
/// Starts are normalized states.
ConvergenceStats convergence_stats(const StableDsModel& model, const std::vector<Eigen::VectorXd>& starts,
                                   double dt, double horizon, Integrator integrator = Integrator::kEuler);

inline constexpr double kGoalRadius = 0.05;
inline constexpr double kCycleRelativeBand = 0.05;

/// Distance used by convergence_stats for this model kind.
DistanceFn goal_distance(const StableDsModel& model);

struct TrajectoryMetrics {
  double sea = 0.0;
  double v_rmse = 0.0;
  double final_distance = 0.0;
  bool converged = false;
};

struct MetricsReport {
  double sea = 0.0;          // mean over trajectories, original units^2
  double v_rmse = 0.0;       // mean over trajectories, original units / s
  double convergence_rate = 0.0;
  std::vector<TrajectoryMetrics> per_trajectory;

  std::string to_json() const;
};

/// Reproduces every demonstration from its own start with its own dt and
/// sample count (Euler), and checks convergence over `horizon_factor` times
/// the demonstration duration.
MetricsReport evaluate(const StableDsModel& model, const DemonstrationSet& data, double horizon_factor = 3.0);

}  // namespace lyapds
