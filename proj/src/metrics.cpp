#include "lyapds/metrics.hpp"

#include <cmath>
#include <limits>

#include "json.hpp"

#include "lyapds/errors.hpp"
#include "lyapds/network.hpp"
#include "lyapds/rollout.hpp"

namespace lyapds {

double triangle_area(const Eigen::VectorXd& a, const Eigen::VectorXd& b, const Eigen::VectorXd& c) {
  const Eigen::VectorXd u = b - a;
  const Eigen::VectorXd v = c - a;
  double wedge = 0.0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    for (Eigen::Index j = i + 1; j < u.size(); ++j) {
      const double m = u[i] * v[j] - u[j] * v[i];
      wedge += m * m;
    }
  }
  return 0.5 * std::sqrt(wedge);
}

double sea(const Trajectory& demo, const Trajectory& repro) {
  if (demo.size() != repro.size()) {
    throw ContractError("SEA needs equal sample counts, got " + std::to_string(demo.size()) + " and " +
                        std::to_string(repro.size()));
  }
  double area = 0.0;
  for (std::size_t t = 0; t + 1 < demo.size(); ++t) {
    const auto& x0 = demo.points[t];
    const auto& x1 = demo.points[t + 1];
    const auto& r0 = repro.points[t];
    const auto& r1 = repro.points[t + 1];
    area += triangle_area(x0, r0, r1) + triangle_area(x0, r1, x1);
  }
  return area;
}

double v_rmse(const VectorField& field, const Trajectory& demo) {
  if (demo.size() == 0) throw ContractError("v_rmse needs a non-empty trajectory");
  double sum = 0.0;
  for (std::size_t k = 0; k < demo.size(); ++k) {
    sum += (field(demo.points[k]) - demo.velocities[k]).squaredNorm();
  }
  return std::sqrt(sum / static_cast<double>(demo.size()));
}

double v_rmse(const StableDsModel& model, const Trajectory& demo_original) {
  const AffineMap& map = model.normalization;
  return v_rmse(
      [&](const Eigen::VectorXd& x) {
        return map.velocity_from_normalized(velocity(model, map.to_normalized(x)));
      },
      demo_original);
}

ConvergenceStats convergence_stats(const VectorField& field, const std::vector<Eigen::VectorXd>& starts,
                                   double dt, double horizon, const DistanceFn& distance, double threshold,
                                   Integrator integrator) {
  if (!(dt > 0.0) || !(horizon > 0.0)) throw ContractError("convergence check needs positive dt and horizon");
  const int steps = static_cast<int>(std::ceil(horizon / dt - 1e-9));
  ConvergenceStats out;
  int hits = 0;
  for (const auto& x0 : starts) {
    double dist = std::numeric_limits<double>::infinity();
    try {
      Eigen::VectorXd x = x0;
      for (int k = 0; k < steps; ++k) {
        x = step(integrator, field, x, dt);
        if (!x.allFinite() || x.cwiseAbs().maxCoeff() > kDivergenceBox) {
          throw DivergenceError("left the box");
        }
      }
      dist = distance(x);
    } catch (const DivergenceError&) {
    }
    if (dist < threshold) ++hits;
    out.distances.push_back(dist);
  }
  out.fraction = starts.empty() ? 0.0 : static_cast<double>(hits) / static_cast<double>(starts.size());
  return out;
}

DistanceFn goal_distance(const StableDsModel& model) {
  if (model.kind == ModelKind::kPointToPoint) {
    return [](const Eigen::VectorXd& x) { return x.norm(); };
  }
  return [&model](const Eigen::VectorXd& x) {
    return std::abs(mlp_eval(model.nets.g.spec, model.nets.g.params, x)[0] - model.constants.delta);
  };
}

ConvergenceStats convergence_stats(const StableDsModel& model, const std::vector<Eigen::VectorXd>& starts,
                                   double dt, double horizon, Integrator integrator) {
  const double threshold =
      model.kind == ModelKind::kPointToPoint ? kGoalRadius : kCycleRelativeBand * model.constants.delta;
  return convergence_stats(model_field(model), starts, dt, horizon, goal_distance(model), threshold,
                           integrator);
}

std::string MetricsReport::to_json() const {
  nlohmann::ordered_json j;
  j["sea"] = sea;
  j["v_rmse"] = v_rmse;
  j["convergence_rate"] = convergence_rate;
  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  for (const auto& t : per_trajectory) {
    nlohmann::ordered_json r;
    r["sea"] = t.sea;
    r["v_rmse"] = t.v_rmse;
    r["final_distance"] = std::isfinite(t.final_distance) ? nlohmann::ordered_json(t.final_distance)
                                                          : nlohmann::ordered_json(nullptr);
    r["converged"] = t.converged;
    rows.push_back(r);
  }
  j["per_trajectory"] = rows;
  return j.dump(2);
}

MetricsReport evaluate(const StableDsModel& model, const DemonstrationSet& data, double horizon_factor) {
  MetricsReport report;
  int converged = 0;
  for (std::size_t i = 0; i < data.trajectories.size(); ++i) {
    const Trajectory& norm = data.trajectories[i];
    const Trajectory demo = data.denormalized(i);

    RolloutSpec spec;
    spec.start = demo.points.front();
    spec.dt = demo.dt;
    spec.steps = static_cast<int>(demo.size()) - 1;
    const Trajectory repro = rollout(model, spec);

    TrajectoryMetrics m;
    m.sea = sea(demo, repro);
    m.v_rmse = v_rmse(model, demo);
    const ConvergenceStats conv =
        convergence_stats(model, {norm.points.front()}, norm.dt, horizon_factor * norm.duration());
    m.final_distance = conv.distances.front();
    m.converged = conv.fraction == 1.0;
    converged += m.converged ? 1 : 0;

    report.sea += m.sea;
    report.v_rmse += m.v_rmse;
    report.per_trajectory.push_back(m);
  }
  const auto n = static_cast<double>(data.trajectories.size());
  if (n > 0) {
    report.sea /= n;
    report.v_rmse /= n;
    report.convergence_rate = converged / n;
  }
  return report;
}

}  // namespace lyapds
