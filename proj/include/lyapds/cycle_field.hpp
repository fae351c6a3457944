#pragma once

// Planar limit-cycle field. The cycle is the level set g(x) = delta of the
// learned g, with Lyapunov function V(x) = 1/2 (g(x) - delta)^2. The raw
// proposal f is split along b = grad g into a circulating part f3 (tangent to
// the level sets) and a restoring part f4. A transverse-contraction test T(x)
// removes f4 and most of f3 wherever the contraction inequality fails.

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "lyapds/autodiff.hpp"
#include "lyapds/integrate.hpp"
#include "lyapds/model.hpp"

namespace lyapds::cycle {

ad::Value cycle_lyapunov(const StableDsModel& m, ad::Value x);
double cycle_lyapunov(const StableDsModel& m, const Eigen::VectorXd& x);

struct FieldTerms {
  ad::Value velocity;  // f3 + f4, or raw f when degenerate
  ad::Value g;
  ad::Value b;         // grad g as a column
  ad::Value f;
  ad::Value f3;
  ad::Value f4;
  ad::Value s;
  ad::Value alpha;
  ad::Value beta;
  bool degenerate = false;
};

/// f3 = R3 f, f4 = -(alpha s^2 + beta)(g - delta) b / |b|^2 with s = b.f. When
/// |b|^2 < eps_grad the raw f is returned (f3 = f, f4 = 0).
FieldTerms ungated_terms(const StableDsModel& m, ad::Value x);
Eigen::VectorXd field_ungated(const StableDsModel& m, const Eigen::VectorXd& x);

/// Largest eigenvalue of [[a, b], [b, c]].
double lambda_max_2x2(const Eigen::Matrix2d& sym);

struct GateReport {
  double t_value = 0.0;
  double lambda_max = 0.0;
  bool gated = false;
};

struct GatedTerms {
  GateReport report;
  ad::Value velocity;
  ad::Value t_value;
  FieldTerms ungated;
};

/// u - (xi f3 + f4) relu(T) / T for T > 0; u unchanged for T <= 0.
ad::Value apply_gate(ad::Value ungated, ad::Value f3, ad::Value f4, ad::Value t_value, double xi);

/// T = b.u + (lambda_max(J + J^T) - sigma) g on the ungated field u, with J by
/// central differences (a constant for parameter gradients). The output is
/// u - (xi f3 + f4) relu(T) / T, so (1 - xi) f3 when T > 0 and u otherwise.
GatedTerms transverse_gate(const StableDsModel& m, ad::Value x);
GateReport gate_report(const StableDsModel& m, const Eigen::VectorXd& x);
Eigen::VectorXd gated_velocity(const StableDsModel& m, const Eigen::VectorXd& x);

/// T evaluated on an arbitrary field (used to re-test the gated output).
double contraction_test(const StableDsModel& m, const VectorField& field, const Eigen::VectorXd& x);

/// A line through `point` with normal `normal`. Crossings count when the signed
/// distance n.(x - point) goes from negative to non-negative. If `ray` is set,
/// only crossings with (c - point).ray >= 0 count.
struct Section {
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
  Eigen::Vector2d normal = Eigen::Vector2d::UnitY();
  std::optional<Eigen::Vector2d> ray;
};

struct PoincareResult {
  std::vector<Eigen::Vector2d> crossings;
  std::vector<double> times;
  std::optional<double> period;  // mean time between successive crossings
};

PoincareResult poincare_return(const VectorField& field, const Section& section, const Eigen::Vector2d& x0,
                               double dt, int max_steps, Integrator integrator = Integrator::kEuler);

/// Poincare map of the gated model field.
PoincareResult poincare_return(const StableDsModel& m, const Section& section, const Eigen::Vector2d& x0,
                               double dt, int max_steps, Integrator integrator = Integrator::kEuler);

}  // namespace lyapds::cycle
