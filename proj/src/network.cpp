#include "lyapds/network.hpp"

#include <cmath>
#include <random>

#include "lyapds/errors.hpp"
#include "lyapds/random.hpp"

namespace lyapds {

using ad::Value;

std::string to_string(OutputHead head) {
  switch (head) {
    case OutputHead::kLinear: return "linear";
    case OutputHead::kSoftplus: return "softplus";
    case OutputHead::kSigmoid: return "sigmoid";
  }
  return "?";
}

OutputHead parse_output_head(const std::string& name) {
  if (name == "linear") return OutputHead::kLinear;
  if (name == "softplus") return OutputHead::kSoftplus;
  if (name == "sigmoid") return OutputHead::kSigmoid;
  throw ConfigError("unknown output head '" + name + "'");
}

std::string to_string(ModelKind kind) {
  return kind == ModelKind::kPointToPoint ? "p2p" : "cycle";
}

ModelKind parse_model_kind(const std::string& name) {
  if (name == "p2p") return ModelKind::kPointToPoint;
  if (name == "cycle") return ModelKind::kCycle;
  throw ConfigError("unknown model kind '" + name + "' (expected p2p or cycle)");
}

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) {
    throw ConfigError("network dimensions must be positive");
  }
  for (int w : hidden) {
    if (w <= 0) throw ConfigError("hidden widths must be positive");
  }
}

ad::ParamVector MlpSpec::make_layout() const {
  validate();
  ad::ParamVector p;
  int fan_in = input_dim;
  for (std::size_t k = 0; k <= hidden.size(); ++k) {
    const int fan_out = k < hidden.size() ? hidden[k] : output_dim;
    p.add_segment("W" + std::to_string(k), fan_out, fan_in);
    p.add_segment("b" + std::to_string(k), fan_out, 1);
    fan_in = fan_out;
  }
  return p;
}

ad::ParamVector init_params(const MlpSpec& spec, std::uint64_t seed) {
  ad::ParamVector p = spec.make_layout();
  Rng rng(seed);
  for (const auto& seg : p.layout()) {
    if (seg.name.front() != 'W') continue;
    const double bound = std::sqrt(6.0 / static_cast<double>(seg.rows + seg.cols));
    for (std::size_t i = 0; i < seg.size(); ++i) {
      p[seg.offset + i] = rng.uniform(-bound, bound);
    }
  }
  return p;
}

namespace {

void check_layout(const MlpSpec& spec, const ad::ParamVector& params) {
  const std::size_t layers = spec.hidden.size() + 1;
  if (params.layout().size() != 2 * layers) {
    throw ConfigError("parameter layout has " + std::to_string(params.layout().size()) +
                      " segments, network needs " + std::to_string(2 * layers));
  }
  int fan_in = spec.input_dim;
  for (std::size_t k = 0; k < layers; ++k) {
    const int fan_out = k < spec.hidden.size() ? spec.hidden[k] : spec.output_dim;
    const auto& w = params.segment(2 * k);
    const auto& b = params.segment(2 * k + 1);
    if (w.rows != fan_out || w.cols != fan_in || b.rows != fan_out || b.cols != 1) {
      throw ConfigError("parameter layout does not match layer " + std::to_string(k));
    }
    fan_in = fan_out;
  }
}

}  // namespace

Value mlp_forward(const MlpSpec& spec, const ad::ParamVector& params, Value x) {
  check_layout(spec, params);
  if (x.shape().rows != spec.input_dim || x.shape().cols != 1) {
    throw ConfigError("network input must be a " + std::to_string(spec.input_dim) + "-vector, got " +
                      ad::to_string(x.shape()));
  }
  ad::Tape& tape = *x.tape();
  Value h = x;
  const std::size_t layers = spec.hidden.size() + 1;
  for (std::size_t k = 0; k < layers; ++k) {
    const Value w = tape.parameter(params, 2 * k);
    const Value b = tape.parameter(params, 2 * k + 1);
    h = ad::add(ad::matvec(w, h), b);
    if (k + 1 < layers) h = ad::tanh(h);
  }
  switch (spec.head) {
    case OutputHead::kLinear: return h;
    case OutputHead::kSoftplus: return ad::softplus(h);
    case OutputHead::kSigmoid: return ad::sigmoid(h);
  }
  return h;
}

Eigen::VectorXd mlp_eval(const MlpSpec& spec, const ad::ParamVector& params, const Eigen::VectorXd& x) {
  ad::Tape tape;
  return mlp_forward(spec, params, tape.constant(x)).vector();
}

ModelConstants ModelConstants::for_kind(ModelKind kind) {
  ModelConstants c;
  if (kind == ModelKind::kCycle) c.delta = 1.0;
  return c;
}

void ModelConstants::validate() const {
  if (!(delta > 0.0)) throw ConfigError("delta must be positive");
  if (!(sigma_contraction > 0.0)) throw ConfigError("contraction margin must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw ConfigError("xi must lie in (0, 1)");
  if (!(eps_grad > 0.0 && eps_s > 0.0 && fd_step > 0.0)) {
    throw ConfigError("eps_grad, eps_s and fd_step must be positive");
  }
}

NetworkSet NetworkSet::create(int dim, const std::vector<int>& hidden, std::uint64_t seed) {
  auto scalar_spec = [&](OutputHead head) { return MlpSpec{dim, hidden, 1, head}; };
  NetworkSet nets;
  nets.g.spec = scalar_spec(OutputHead::kSoftplus);
  nets.f.spec = MlpSpec{dim, hidden, dim, OutputHead::kLinear};
  nets.alpha.spec = scalar_spec(OutputHead::kSoftplus);
  nets.beta.spec = scalar_spec(OutputHead::kSoftplus);

  SeedSequence seeds(seed);
  nets.g.params = init_params(nets.g.spec, seeds.next());
  nets.f.params = init_params(nets.f.spec, seeds.next());
  nets.alpha.params = init_params(nets.alpha.spec, seeds.next());
  nets.beta.params = init_params(nets.beta.spec, seeds.next());
  return nets;
}

AlphaBeta alpha_beta_eval(const Mlp& alpha_net, const Mlp& beta_net, Value x, ModelKind kind) {
  ad::Tape& tape = *x.tape();
  const Value floor = tape.constant(1e-6);
  AlphaBeta out;
  out.alpha = ad::add(mlp_forward(alpha_net, x), floor);
  const Value raw_beta = mlp_forward(beta_net, x);
  if (kind == ModelKind::kPointToPoint) {
    out.beta = ad::mul(raw_beta, ad::dot(x, x));
  } else {
    out.beta = ad::add(raw_beta, floor);
  }
  return out;
}

}  // namespace lyapds
