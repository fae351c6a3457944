#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lyapds/autodiff.hpp"

namespace lyapds {

enum class OutputHead { kLinear, kSoftplus, kSigmoid };

std::string to_string(OutputHead head);
OutputHead parse_output_head(const std::string& name);

/// Dense network description. Hidden layers always use tanh.
struct MlpSpec {
  int input_dim = 2;
  std::vector<int> hidden{64, 64};
  int output_dim = 1;
  OutputHead head = OutputHead::kSoftplus;

  /// Parameter layout W0,b0,...,W_L,b_L; W_k is (out x in) row-major.
  ad::ParamVector make_layout() const;
  void validate() const;

  friend bool operator==(const MlpSpec&, const MlpSpec&) = default;
};

/// A network is its spec plus owned parameters.
struct Mlp {
  MlpSpec spec;
  ad::ParamVector params;
};

/// Glorot-uniform weights, zero biases, from a seeded mt19937_64.
ad::ParamVector init_params(const MlpSpec& spec, std::uint64_t seed);

/// Dense forward pass on the tape of `x`.
ad::Value mlp_forward(const MlpSpec& spec, const ad::ParamVector& params, ad::Value x);
inline ad::Value mlp_forward(const Mlp& net, ad::Value x) { return mlp_forward(net.spec, net.params, x); }

/// Tape-free forward pass, for checks and plotting.
Eigen::VectorXd mlp_eval(const MlpSpec& spec, const ad::ParamVector& params, const Eigen::VectorXd& x);

enum class ModelKind { kPointToPoint, kCycle };

std::string to_string(ModelKind kind);
ModelKind parse_model_kind(const std::string& name);

/// Scalar constants of the stabilized fields. Defaults are for point-to-point;
/// use for_kind() for the cycle level.
struct ModelConstants {
  double delta = 0.01;
  double sigma_contraction = 0.1;
  double xi = 0.99;
  double eps_grad = 1e-6;
  double eps_s = 1e-8;
  double fd_step = 1e-4;

  static ModelConstants for_kind(ModelKind kind);
  void validate() const;

  friend bool operator==(const ModelConstants&, const ModelConstants&) = default;
};

/// The four networks: g (Lyapunov shape), f (raw velocity), alpha, beta.
struct NetworkSet {
  Mlp g;
  Mlp f;
  Mlp alpha;
  Mlp beta;

  /// Default architecture d x hidden x 1 (softplus head) for g, alpha, beta and
  /// d x hidden x d (linear head) for f. Seeds are derived from `seed`.
  static NetworkSet create(int dim, const std::vector<int>& hidden, std::uint64_t seed);

  std::vector<ad::ParamVector*> params() { return {&g.params, &f.params, &alpha.params, &beta.params}; }
  std::vector<const ad::ParamVector*> params() const {
    return {&g.params, &f.params, &alpha.params, &beta.params};
  }
};

struct AlphaBeta {
  ad::Value alpha;
  ad::Value beta;
};

/// alpha = softplus-head(x) + 1e-6. beta = softplus-head(x) * |x|^2 for
/// point-to-point (vanishes at the target), softplus-head(x) + 1e-6 for cycles.
AlphaBeta alpha_beta_eval(const Mlp& alpha_net, const Mlp& beta_net, ad::Value x, ModelKind kind);

}  // namespace lyapds
