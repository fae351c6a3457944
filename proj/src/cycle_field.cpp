#include "lyapds/cycle_field.hpp"

#include <cmath>

#include "lyapds/errors.hpp"

namespace lyapds::cycle {

using ad::Value;

namespace {

void require_planar(const StableDsModel& m) {
  if (m.dim != 2) {
    throw ConfigError("limit-cycle models are planar, got dimension " + std::to_string(m.dim));
  }
}

}  // namespace

Value cycle_lyapunov(const StableDsModel& m, Value x) {
  ad::Tape& tape = *x.tape();
  const Value gap = ad::sub(mlp_forward(m.nets.g, x), tape.constant(m.constants.delta));
  return ad::scale(0.5, ad::square(gap));
}

double cycle_lyapunov(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return cycle_lyapunov(m, tape.constant(x)).scalar();
}

FieldTerms ungated_terms(const StableDsModel& m, Value x) {
  require_planar(m);
  ad::Tape& tape = *x.tape();
  FieldTerms t;
  t.g = mlp_forward(m.nets.g, x);
  t.b = ad::input_gradient(t.g, x);
  t.f = mlp_forward(m.nets.f, x);

  const Value bb = ad::dot(t.b, t.b);
  if (bb.scalar() < m.constants.eps_grad) {
    t.degenerate = true;
    t.f3 = t.f;
    t.f4 = tape.constant(Eigen::VectorXd(Eigen::VectorXd::Zero(2)));
    t.velocity = t.f;
    return t;
  }

  const AlphaBeta ab = alpha_beta_eval(m.nets.alpha, m.nets.beta, x, ModelKind::kCycle);
  t.alpha = ab.alpha;
  t.beta = ab.beta;
  t.s = ad::dot(t.b, t.f);
  t.f3 = ad::sub(t.f, ad::scale(ad::div(t.s, bb), t.b));

  const Value gap = ad::sub(t.g, tape.constant(m.constants.delta));
  const Value rate = ad::add(ad::mul(t.alpha, ad::square(t.s)), t.beta);
  t.f4 = ad::neg(ad::scale(ad::div(ad::mul(rate, gap), bb), t.b));
  t.velocity = ad::add(t.f3, t.f4);
  return t;
}

Eigen::VectorXd field_ungated(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return ungated_terms(m, tape.constant(x)).velocity.vector();
}

double lambda_max_2x2(const Eigen::Matrix2d& sym) {
  const double a = sym(0, 0);
  const double b = 0.5 * (sym(0, 1) + sym(1, 0));
  const double c = sym(1, 1);
  const double half_diff = 0.5 * (a - c);
  return 0.5 * (a + c) + std::hypot(half_diff, b);
}

namespace {

double lambda_of(const StableDsModel& m, const VectorField& field, const Eigen::VectorXd& x) {
  const Eigen::MatrixXd jac = ad::jacobian_fd(field, x, m.constants.fd_step);
  const Eigen::Matrix2d sym = jac + jac.transpose();
  return lambda_max_2x2(sym);
}

}  // namespace

Value apply_gate(Value ungated, Value f3, Value f4, Value t_value, double xi) {
  // relu(T)/T is taken as 0 for T <= 0, including T = 0.
  if (!(t_value.scalar() > 0.0)) return ungated;
  const Value factor = ad::div(ad::relu(t_value), t_value);
  return ad::sub(ungated, ad::scale(factor, ad::add(ad::scale(xi, f3), f4)));
}

GatedTerms transverse_gate(const StableDsModel& m, Value x) {
  require_planar(m);
  ad::Tape& tape = *x.tape();
  GatedTerms out;
  out.ungated = ungated_terms(m, x);
  const FieldTerms& u = out.ungated;

  const double lambda = lambda_of(m, [&m](const Eigen::VectorXd& p) { return field_ungated(m, p); },
                                  x.vector());
  out.t_value = ad::add(ad::dot(u.b, u.velocity),
                        ad::scale(tape.constant(lambda - m.constants.sigma_contraction), u.g));
  const double t = out.t_value.scalar();
  out.report = GateReport{t, lambda, t > 0.0};

  out.velocity = apply_gate(u.velocity, u.f3, u.f4, out.t_value, m.constants.xi);
  return out;
}

GateReport gate_report(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return transverse_gate(m, tape.constant(x)).report;
}

Eigen::VectorXd gated_velocity(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return transverse_gate(m, tape.constant(x)).velocity.vector();
}

double contraction_test(const StableDsModel& m, const VectorField& field, const Eigen::VectorXd& x) {
  require_planar(m);
  ad::Tape tape;
  const Value xv = tape.constant(x);
  const Value g = mlp_forward(m.nets.g, xv);
  const Eigen::VectorXd b = ad::input_gradient(g, xv).vector();
  const double lambda = lambda_of(m, field, x);
  return b.dot(field(x)) + (lambda - m.constants.sigma_contraction) * g.scalar();
}

PoincareResult poincare_return(const VectorField& field, const Section& section, const Eigen::Vector2d& x0,
                               double dt, int max_steps, Integrator integrator) {
  if (section.normal.squaredNorm() == 0.0) {
    throw ContractError("Poincare section normal must be nonzero");
  }
  if (!(dt > 0.0)) throw ContractError("integration step must be positive");

  auto signed_distance = [&](const Eigen::Vector2d& x) { return section.normal.dot(x - section.point); };

  PoincareResult out;
  Eigen::Vector2d x = x0;
  double prev = signed_distance(x);
  for (int k = 0; k < max_steps; ++k) {
    const Eigen::Vector2d next = step(integrator, field, x, dt);
    if (!next.allFinite()) break;
    const double cur = signed_distance(next);
    if (prev < 0.0 && cur >= 0.0) {
      const double frac = prev / (prev - cur);
      const Eigen::Vector2d crossing = x + frac * (next - x);
      if (!section.ray || (crossing - section.point).dot(*section.ray) >= 0.0) {
        out.crossings.push_back(crossing);
        out.times.push_back((static_cast<double>(k) + frac) * dt);
      }
    }
    x = next;
    prev = cur;
  }
  if (out.times.size() >= 2) {
    out.period = (out.times.back() - out.times.front()) / static_cast<double>(out.times.size() - 1);
  }
  return out;
}

PoincareResult poincare_return(const StableDsModel& m, const Section& section, const Eigen::Vector2d& x0,
                               double dt, int max_steps, Integrator integrator) {
  return poincare_return([&m](const Eigen::VectorXd& x) { return gated_velocity(m, x); }, section, x0, dt,
                         max_steps, integrator);
}

}  // namespace lyapds::cycle
