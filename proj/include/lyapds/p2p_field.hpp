#pragma once

// Point-to-point field with a learned Lyapunov function
//   V(x) = (g(x) + delta) * x^T x,
// target at the origin of normalized coordinates. The raw proposal f(x) is
// split into a part tangent to the level sets of V (kept as is) and a part
// along grad V that is replaced so that dV/dt = -(alpha s^2 + beta), s = a.f.

#include <Eigen/Dense>

#include "lyapds/autodiff.hpp"
#include "lyapds/model.hpp"

namespace lyapds::p2p {

struct LyapunovParts {
  ad::Value g;       // g(x), 1x1
  ad::Value value;   // V(x), 1x1
  ad::Value grad;    // a^T = dV/dx as a column, d x 1
};

LyapunovParts lyapunov_parts(const StableDsModel& m, ad::Value x);

ad::Value lyapunov_value(const StableDsModel& m, ad::Value x);
double lyapunov_value(const StableDsModel& m, const Eigen::VectorXd& x);

/// dV/dx = grad g * |x|^2 + 2 (g + delta) x, built so it stays trainable.
ad::Value lyapunov_grad(const StableDsModel& m, ad::Value x);
Eigen::VectorXd lyapunov_grad(const StableDsModel& m, const Eigen::VectorXd& x);

struct Projections {
  Eigen::MatrixXd r1;  // I - a^T a / (a a^T)
  Eigen::MatrixXd r2;  // a^T a / (a a^T)
  bool degenerate = false;
};

/// R1/R2 for the row vector `a`; identity/zero when |a|^2 < eps_grad.
Projections projections(const Eigen::VectorXd& a, double eps_grad);

/// All intermediate terms of one field evaluation. In the degenerate branch
/// only `velocity`, `a` and `g` are set.
struct VelocityTerms {
  ad::Value velocity;
  ad::Value a;
  ad::Value g;
  ad::Value f;
  ad::Value f1;
  ad::Value f2;
  ad::Value s;
  ad::Value alpha;
  ad::Value beta;
  bool degenerate = false;
};

VelocityTerms stable_velocity_terms(const StableDsModel& m, ad::Value x);

/// f1 + f2 with f1 = R1 f and f2 = -(alpha s^2 + beta) a^T / |a|^2. Falls back
/// to 0 near the origin and -0.1 x elsewhere when grad V vanishes.
ad::Value stable_velocity(const StableDsModel& m, ad::Value x);
Eigen::VectorXd stable_velocity(const StableDsModel& m, const Eigen::VectorXd& x);

/// Unprojected variant -alpha s f - beta f / s_reg, s_reg = sign(s) max(|s|, eps_s).
ad::Value stable_velocity_direct(const StableDsModel& m, ad::Value x);
Eigen::VectorXd stable_velocity_direct(const StableDsModel& m, const Eigen::VectorXd& x);

}  // namespace lyapds::p2p
