#pragma once

#include <Eigen/Dense>

#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "lyapds/autodiff.hpp"
#include "lyapds/config.hpp"
#include "lyapds/data.hpp"
#include "lyapds/model.hpp"

namespace lyapds {

using Sample = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// Model output used for training: the stabilized field (point-to-point) or
/// the gated / ungated cycle field.
ad::Value predicted_velocity(const StableDsModel& model, ad::Value x, bool gated = true);

/// Mean of |xdot_hat(x) - xdot|^2 over the batch, on one tape.
ad::Value velocity_loss(ad::Tape& tape, const StableDsModel& model, std::span<const Sample> batch,
                        bool gated = true);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<std::vector<double>> grads;  // g, f, alpha, beta
};

/// Batch loss and parameter gradients, one tape per sample, summed in index
/// order. A non-finite forward value raises NumericError naming the sample.
LossAndGradient loss_and_gradient(const StableDsModel& model, std::span<const Sample> batch, bool gated = true);

/// Forward-only mean loss over a sample set.
double dataset_loss(const StableDsModel& model, std::span<const Sample> samples, bool gated = true);

struct AdamWState {
  std::vector<double> m;
  std::vector<double> v;
  long step = 0;
};

/// One decoupled-weight-decay Adam update:
///   theta -= lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * theta).
void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamWState& state, double lr,
                const TrainConfig& config);

struct TrainRecord {
  std::vector<double> losses;          // batch loss per iteration
  std::vector<double> learning_rates;  // lr used per iteration
  std::vector<double> epoch_losses;    // full-data loss at each checkpoint
  std::vector<double> structural_residuals;  // p2p identity check every 100 iterations
  double best_loss = 0.0;
  int best_checkpoint = 0;
  int epochs = 0;
  double wall_seconds = 0.0;
  bool diverged = false;
  std::string message;

  std::string to_csv() const;
};

struct TrainResult {
  StableDsModel model;
  TrainRecord record;
};

/// Called after each iteration with (iteration, batch loss, lr).
using TrainCallback = std::function<void(int, double, double)>;

/// Trains all four networks jointly. Mini-batches are drawn without
/// replacement and reshuffled each epoch; the returned model carries the
/// parameters with the lowest full-data loss seen at epoch boundaries.
TrainResult train(const DemonstrationSet& dataset, const TrainConfig& config, const TrainCallback& callback = {});

/// Largest |a.xdot + (alpha s^2 + beta)| / (1 + |alpha s^2 + beta|) over the
/// non-degenerate points; 0 if none.
double structural_residual(const StableDsModel& model, std::span<const Eigen::VectorXd> points);

}  // namespace lyapds
