#include "lyapds/trainer.hpp"

#include <chrono>
#include <cmath>
#include <numeric>

#include "lyapds/cycle_field.hpp"
#include "lyapds/errors.hpp"
#include "lyapds/p2p_field.hpp"
#include "lyapds/random.hpp"

namespace lyapds {

namespace {

constexpr double kDivergenceLoss = 1e6;
constexpr int kStructuralCheckEvery = 100;

}  // namespace

ad::Value predicted_velocity(const StableDsModel& model, ad::Value x, bool gated) {
  if (model.kind == ModelKind::kPointToPoint) return p2p::stable_velocity(model, x);
  return gated ? cycle::transverse_gate(model, x).velocity : cycle::ungated_terms(model, x).velocity;
}

ad::Value velocity_loss(ad::Tape& tape, const StableDsModel& model, std::span<const Sample> batch, bool gated) {
  if (batch.empty()) throw ContractError("velocity_loss needs a non-empty batch");
  ad::Value total;
  for (const auto& [x, v] : batch) {
    const ad::Value pred = predicted_velocity(model, tape.constant(x), gated);
    const ad::Value err = ad::sub(pred, tape.constant(v));
    const ad::Value sq = ad::dot(err, err);
    total = total.valid() ? ad::add(total, sq) : sq;
  }
  return ad::scale(1.0 / static_cast<double>(batch.size()), total);
}

LossAndGradient loss_and_gradient(const StableDsModel& model, std::span<const Sample> batch, bool gated) {
  if (batch.empty()) throw ContractError("loss_and_gradient needs a non-empty batch");
  const auto params = model.nets.params();
  LossAndGradient out;
  out.grads.resize(params.size());
  for (std::size_t p = 0; p < params.size(); ++p) out.grads[p].assign(params[p]->size(), 0.0);

  const double w = 1.0 / static_cast<double>(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    ad::Tape tape;
    ad::Value loss;
    try {
      const ad::Value pred = predicted_velocity(model, tape.constant(batch[i].first), gated);
      const ad::Value err = ad::sub(pred, tape.constant(batch[i].second));
      loss = ad::scale(w, ad::dot(err, err));
    } catch (const NumericError& e) {
      throw NumericError("batch sample " + std::to_string(i) + ": " + e.what());
    }
    out.loss += loss.scalar();
    const ad::Gradients g = tape.backward(loss);
    for (std::size_t p = 0; p < params.size(); ++p) {
      const auto gp = g.of(*params[p]);
      auto& acc = out.grads[p];
      for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += gp[k];
    }
  }
  return out;
}

double dataset_loss(const StableDsModel& model, std::span<const Sample> samples, bool gated) {
  if (samples.empty()) throw ContractError("dataset_loss needs samples");
  double total = 0.0;
  for (const auto& [x, v] : samples) {
    ad::Tape tape;
    const Eigen::VectorXd pred = predicted_velocity(model, tape.constant(x), gated).vector();
    total += (pred - v).squaredNorm();
  }
  return total / static_cast<double>(samples.size());
}

void adamw_step(std::vector<double>& params, const std::vector<double>& grads, AdamWState& state, double lr,
                const TrainConfig& config) {
  if (params.size() != grads.size()) throw ContractError("AdamW parameter/gradient size mismatch");
  if (state.m.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size()) throw ContractError("AdamW state size mismatch");

  ++state.step;
  const double b1 = config.adam_beta1;
  const double b2 = config.adam_beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    state.m[i] = b1 * state.m[i] + (1.0 - b1) * grads[i];
    state.v[i] = b2 * state.v[i] + (1.0 - b2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / c1;
    const double v_hat = state.v[i] / c2;
    params[i] -= lr * (m_hat / (std::sqrt(v_hat) + config.adam_eps) + config.weight_decay * params[i]);
  }
}

double structural_residual(const StableDsModel& model, std::span<const Eigen::VectorXd> points) {
  double worst = 0.0;
  for (const auto& x : points) {
    ad::Tape tape;
    const p2p::VelocityTerms t = p2p::stable_velocity_terms(model, tape.constant(x));
    if (t.degenerate) continue;
    const double rate = t.alpha.scalar() * t.s.scalar() * t.s.scalar() + t.beta.scalar();
    const double vdot = t.a.vector().dot(t.velocity.vector());
    worst = std::max(worst, std::abs(vdot + rate) / (1.0 + std::abs(rate)));
  }
  return worst;
}

std::string TrainRecord::to_csv() const {
  std::string out = "iteration,loss,learning_rate\n";
  for (std::size_t i = 0; i < losses.size(); ++i) {
    out += std::to_string(i) + "," + format_double(losses[i]) + "," + format_double(learning_rates[i]) + "\n";
  }
  return out;
}

TrainResult train(const DemonstrationSet& dataset, const TrainConfig& config, const TrainCallback& callback) {
  config.validate();
  if (dataset.kind != config.kind) {
    throw ConfigError("dataset kind '" + to_string(dataset.kind) + "' does not match config kind '" +
                      to_string(config.kind) + "'");
  }
  const auto samples = dataset.samples();
  if (samples.empty()) throw DataError("dataset has no samples");

  const auto started = std::chrono::steady_clock::now();
  TrainResult result{StableDsModel::create(dataset.dim(), config, dataset.normalization), {}};
  StableDsModel& model = result.model;
  TrainRecord& record = result.record;
  const bool gated = config.train_on_gated;

  // The shuffling stream is independent of the network initialization seeds.
  SeedSequence seeds(config.seed ^ 0x5eed5eed5eedULL);
  Rng rng(seeds.next());

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);

  auto params = model.nets.params();
  std::vector<AdamWState> states(params.size());
  NetworkSet best = model.nets;

  auto checkpoint = [&] {
    const double loss = dataset_loss(model, samples, gated);
    record.epoch_losses.push_back(loss);
    if (record.epoch_losses.size() == 1 || loss < record.best_loss) {
      record.best_loss = loss;
      record.best_checkpoint = static_cast<int>(record.epoch_losses.size()) - 1;
      best = model.nets;
    }
  };
  checkpoint();

  const std::size_t batch_size = std::min<std::size_t>(static_cast<std::size_t>(config.batch_size), samples.size());
  double lr = config.learning_rate;
  std::size_t pos = 0;
  std::vector<Sample> batch;
  batch.reserve(batch_size);

  for (int it = 0; it < config.max_iterations; ++it) {
    if (pos >= samples.size()) {
      ++record.epochs;
      checkpoint();
      if (config.decay_schedule == DecaySchedule::kPerEpoch) lr *= config.lr_decay;
      rng.shuffle(order);
      pos = 0;
    }
    batch.clear();
    const std::size_t end = std::min(pos + batch_size, samples.size());
    for (std::size_t k = pos; k < end; ++k) batch.push_back(samples[order[k]]);
    pos = end;

    LossAndGradient lg;
    try {
      lg = loss_and_gradient(model, batch, gated);
    } catch (const NumericError& e) {
      record.diverged = true;
      record.message = "iteration " + std::to_string(it) + ": " + e.what();
      break;
    }
    if (!std::isfinite(lg.loss) || lg.loss > kDivergenceLoss) {
      record.diverged = true;
      record.message = "iteration " + std::to_string(it) + ": loss " + format_double(lg.loss);
      break;
    }
    record.losses.push_back(lg.loss);
    record.learning_rates.push_back(lr);

    for (std::size_t p = 0; p < params.size(); ++p) {
      adamw_step(params[p]->values(), lg.grads[p], states[p], lr, config);
    }
    if (config.decay_schedule == DecaySchedule::kPerIteration) lr *= config.lr_decay;

    if (model.kind == ModelKind::kPointToPoint && it % kStructuralCheckEvery == 0) {
      std::vector<Eigen::VectorXd> pts;
      for (const auto& s : batch) pts.push_back(s.first);
      record.structural_residuals.push_back(structural_residual(model, pts));
    }
    if (callback) callback(it, lg.loss, lr);
  }
  if (!record.diverged) checkpoint();

  model.nets = best;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return result;
}

}  // namespace lyapds
