#include "lyapds/p2p_field.hpp"

#include <cmath>

#include "lyapds/errors.hpp"

namespace lyapds::p2p {

using ad::Value;

namespace {

constexpr double kTargetRadius = 1e-3;
constexpr double kFallbackGain = 0.1;

}  // namespace

LyapunovParts lyapunov_parts(const StableDsModel& m, Value x) {
  ad::Tape& tape = *x.tape();
  LyapunovParts parts;
  parts.g = mlp_forward(m.nets.g, x);
  const Value grad_g = ad::input_gradient(parts.g, x);
  const Value sq_norm = ad::dot(x, x);
  const Value shifted = ad::add(parts.g, tape.constant(m.constants.delta));
  parts.value = ad::mul(shifted, sq_norm);
  parts.grad = ad::add(ad::scale(sq_norm, grad_g), ad::scale(ad::scale(2.0, shifted), x));
  return parts;
}

Value lyapunov_value(const StableDsModel& m, Value x) {
  ad::Tape& tape = *x.tape();
  const Value g = mlp_forward(m.nets.g, x);
  return ad::mul(ad::add(g, tape.constant(m.constants.delta)), ad::dot(x, x));
}

double lyapunov_value(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return lyapunov_value(m, tape.constant(x)).scalar();
}

Value lyapunov_grad(const StableDsModel& m, Value x) { return lyapunov_parts(m, x).grad; }

Eigen::VectorXd lyapunov_grad(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return lyapunov_grad(m, tape.constant(x)).vector();
}

Projections projections(const Eigen::VectorXd& a, double eps_grad) {
  const Eigen::Index d = a.size();
  const double sq = a.squaredNorm();
  Projections p;
  if (sq < eps_grad) {
    p.r1 = Eigen::MatrixXd::Identity(d, d);
    p.r2 = Eigen::MatrixXd::Zero(d, d);
    p.degenerate = true;
    return p;
  }
  p.r2 = a * a.transpose() / sq;
  p.r1 = Eigen::MatrixXd::Identity(d, d) - p.r2;
  return p;
}

VelocityTerms stable_velocity_terms(const StableDsModel& m, Value x) {
  ad::Tape& tape = *x.tape();
  const LyapunovParts lyap = lyapunov_parts(m, x);
  VelocityTerms t;
  t.a = lyap.grad;
  t.g = lyap.g;

  const Value aa = ad::dot(t.a, t.a);
  if (aa.scalar() < m.constants.eps_grad) {
    t.degenerate = true;
    if (x.vector().norm() < kTargetRadius) {
      t.velocity = tape.constant(Eigen::VectorXd(Eigen::VectorXd::Zero(x.shape().rows)));
    } else {
      t.velocity = ad::scale(-kFallbackGain, x);
    }
    return t;
  }

  t.f = mlp_forward(m.nets.f, x);
  const AlphaBeta ab = alpha_beta_eval(m.nets.alpha, m.nets.beta, x, ModelKind::kPointToPoint);
  t.alpha = ab.alpha;
  t.beta = ab.beta;
  t.s = ad::dot(t.a, t.f);

  // R1 f = f - a (a.f) / |a|^2
  t.f1 = ad::sub(t.f, ad::scale(ad::div(t.s, aa), t.a));
  // R2 f carries a factor s, which cancels the 1/s of the second term.
  const Value rate = ad::add(ad::mul(t.alpha, ad::square(t.s)), t.beta);
  t.f2 = ad::neg(ad::scale(ad::div(rate, aa), t.a));
  t.velocity = ad::add(t.f1, t.f2);
  return t;
}

Value stable_velocity(const StableDsModel& m, Value x) { return stable_velocity_terms(m, x).velocity; }

Eigen::VectorXd stable_velocity(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return stable_velocity(m, tape.constant(x)).vector();
}

Value stable_velocity_direct(const StableDsModel& m, Value x) {
  ad::Tape& tape = *x.tape();
  const Value a = lyapunov_grad(m, x);
  const Value f = mlp_forward(m.nets.f, x);
  const AlphaBeta ab = alpha_beta_eval(m.nets.alpha, m.nets.beta, x, ModelKind::kPointToPoint);
  const Value s = ad::dot(a, f);

  const double sv = s.scalar();
  const double eps = m.constants.eps_s;
  const Value s_reg = std::abs(sv) >= eps ? s : tape.constant(sv < 0.0 ? -eps : eps);

  const Value first = ad::scale(ad::neg(ad::mul(ab.alpha, s)), f);
  const Value second = ad::scale(ad::div(ab.beta, s_reg), f);
  return ad::sub(first, second);
}

Eigen::VectorXd stable_velocity_direct(const StableDsModel& m, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return stable_velocity_direct(m, tape.constant(x)).vector();
}

}  // namespace lyapds::p2p
