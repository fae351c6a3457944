#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "lyapds/config.hpp"
#include "lyapds/cycle_field.hpp"
#include "lyapds/errors.hpp"
#include "lyapds/random.hpp"
#include "lyapds/trainer.hpp"
#include "test_support.hpp"

using namespace lyapds;
using Eigen::VectorXd;
using testing::random_model;

namespace {

// Three exponential decays x(t) = x0 exp(-t), so xdot = -x.
DemonstrationSet linear_dataset() {
  std::vector<Trajectory> trajs;
  const std::vector<Eigen::Vector2d> starts = {{-8.0, 3.0}, {-6.0, -5.0}, {5.0, 7.0}};
  for (const auto& x0 : starts) {
    Trajectory t;
    t.dt = 0.1;
    for (int k = 0; k < 80; ++k) {
      const VectorXd x = x0 * std::exp(-0.1 * k);
      t.points.push_back(x);
      t.velocities.push_back(-x);
    }
    trajs.push_back(t);
  }
  return normalize(trajs, ModelKind::kPointToPoint);
}

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.hidden = {16, 16};
  cfg.learning_rate = 5e-3;
  cfg.max_iterations = 500;
  cfg.seed = 3;
  return cfg;
}

}  // namespace

TEST_CASE("velocity loss hand cases") {
  const auto m = random_model(ModelKind::kPointToPoint, 1);
  const VectorXd x1 = Eigen::Vector2d(0.3, -0.2);
  const VectorXd x2 = Eigen::Vector2d(-0.7, 0.5);
  const VectorXd p1 = velocity(m, x1);
  const VectorXd p2 = velocity(m, x2);
  SUBCASE("perfect fit") {
    const std::vector<Sample> batch = {{x1, p1}, {x2, p2}};
    ad::Tape t;
    CHECK(velocity_loss(t, m, batch).scalar() == 0.0);
  }
  SUBCASE("unit error") {
    const std::vector<Sample> batch = {{x1, p1 - VectorXd(Eigen::Vector2d(1, 0))}};
    ad::Tape t;
    CHECK(velocity_loss(t, m, batch).scalar() == doctest::Approx(1.0).epsilon(1e-14));
  }
  SUBCASE("mean over two samples") {
    const std::vector<Sample> batch = {{x1, p1 - VectorXd(Eigen::Vector2d(1, 2))},
                                       {x2, p2 - VectorXd(Eigen::Vector2d(0, 3))}};
    ad::Tape t;
    CHECK(velocity_loss(t, m, batch).scalar() == doctest::Approx((5.0 + 9.0) / 2.0).epsilon(1e-14));
  }
  SUBCASE("empty batch") {
    ad::Tape t;
    CHECK_THROWS_AS(velocity_loss(t, m, {}), ContractError);
  }
}

TEST_CASE("per-sample accumulation equals the single-tape loss") {
  auto m = random_model(ModelKind::kPointToPoint, 2, {8, 8});
  Rng rng(1);
  std::vector<Sample> batch;
  for (int i = 0; i < 10; ++i) {
    batch.push_back({Eigen::Vector2d(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                     Eigen::Vector2d(rng.uniform(-1, 1), rng.uniform(-1, 1))});
  }
  const auto lg = loss_and_gradient(m, batch);
  ad::Tape t;
  const auto loss = velocity_loss(t, m, batch);
  const auto g = t.backward(loss);
  CHECK(lg.loss == doctest::Approx(loss.scalar()).epsilon(1e-13));
  const auto params = m.nets.params();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto full = g.of(*params[p]);
    for (std::size_t k = 0; k < full.size(); ++k) {
      CHECK(lg.grads[p][k] == doctest::Approx(full[k]).epsilon(1e-10).scale(1.0));
    }
  }
}

TEST_CASE("frozen ten-sample batch gradients match central differences") {
  Rng rng(2);
  for (ModelKind kind : {ModelKind::kPointToPoint, ModelKind::kCycle}) {
    auto m = random_model(kind, 5, {8, 8});
    std::vector<Sample> batch;
    while (batch.size() < 10) {
      const VectorXd x = Eigen::Vector2d(rng.uniform(-1, 1), rng.uniform(-1, 1));
      if (kind == ModelKind::kCycle && std::abs(cycle::gate_report(m, x).t_value) < 1e-3) continue;
      batch.push_back({x, Eigen::Vector2d(rng.uniform(-1, 1), rng.uniform(-1, 1))});
    }
    auto params = m.nets.params();
    const auto report = ad::gradcheck([&](ad::Tape& t) { return velocity_loss(t, m, batch); }, params, 1e-4);
    CAPTURE(to_string(kind));
    CHECK(report.passed);
  }
}

TEST_CASE("non-finite forward value names the sample") {
  const auto m = random_model(ModelKind::kPointToPoint, 3);
  const std::vector<Sample> batch = {{Eigen::Vector2d(0.1, 0.1), Eigen::Vector2d(0, 0)},
                                     {Eigen::Vector2d(1e200, 1e200), Eigen::Vector2d(0, 0)}};
  try {
    (void)loss_and_gradient(m, batch);
    FAIL("expected a numeric error");
  } catch (const NumericError& e) {
    CHECK(std::string(e.what()).find("sample 1") != std::string::npos);
  }
}

TEST_CASE("AdamW update rule") {
  TrainConfig cfg;
  SUBCASE("first step moves by lr against the gradient sign") {
    cfg.weight_decay = 0.0;
    std::vector<double> theta = {0.5};
    AdamWState st;
    adamw_step(theta, {1.0}, st, 1e-3, cfg);
    CHECK(theta[0] == doctest::Approx(0.5 - 1e-3 / (1.0 + 1e-8)).epsilon(1e-15));
  }
  SUBCASE("zero gradient and no decay leaves parameters") {
    cfg.weight_decay = 0.0;
    std::vector<double> theta = {0.5, -2.0};
    AdamWState st;
    for (int i = 0; i < 5; ++i) adamw_step(theta, {0.0, 0.0}, st, 1e-3, cfg);
    CHECK(theta == std::vector<double>{0.5, -2.0});
  }
  SUBCASE("pure decoupled decay") {
    cfg.weight_decay = 0.1;
    std::vector<double> theta = {1.0};
    AdamWState st;
    adamw_step(theta, {0.0}, st, 1e-3, cfg);
    CHECK(theta[0] == doctest::Approx(1.0 - 1e-4).epsilon(1e-15));
  }
  SUBCASE("size mismatch") {
    std::vector<double> theta = {1.0};
    AdamWState st;
    CHECK_THROWS_AS(adamw_step(theta, {0.0, 1.0}, st, 1e-3, cfg), ContractError);
  }
}

TEST_CASE("training reduces the loss on a linear field") {
  const auto data = linear_dataset();
  const auto cfg = small_config();
  const auto res = train(data, cfg);
  REQUIRE_FALSE(res.record.diverged);
  REQUIRE(res.record.losses.size() == 500);
  const auto samples = data.samples();
  const double initial = res.record.epoch_losses.front();
  const double final_loss = dataset_loss(res.model, samples);
  MESSAGE("initial " << initial << " final " << final_loss);
  CHECK(final_loss < 0.1 * initial);
  CHECK(final_loss == res.record.best_loss);
  for (double l : res.record.losses) CHECK(std::isfinite(l));
  // The decrease identity holds throughout training.
  REQUIRE_FALSE(res.record.structural_residuals.empty());
  for (double r : res.record.structural_residuals) CHECK(r < 1e-10);
}

TEST_CASE("training is deterministic") {
  const auto data = linear_dataset();
  auto cfg = small_config();
  cfg.max_iterations = 60;
  const auto a = train(data, cfg);
  const auto b = train(data, cfg);
  CHECK(a.record.losses == b.record.losses);
  CHECK(a.record.learning_rates == b.record.learning_rates);
  CHECK(a.record.epoch_losses == b.record.epoch_losses);
  CHECK(a.model.nets.g.params.values() == b.model.nets.g.params.values());
  CHECK(a.model.nets.f.params.values() == b.model.nets.f.params.values());
  CHECK(a.model.nets.alpha.params.values() == b.model.nets.alpha.params.values());
  CHECK(a.model.nets.beta.params.values() == b.model.nets.beta.params.values());
  cfg.seed = 4;
  const auto c = train(data, cfg);
  CHECK(a.record.losses != c.record.losses);
}

TEST_CASE("learning rate decays once per epoch") {
  const auto data = linear_dataset();  // 240 samples
  auto cfg = small_config();
  cfg.batch_size = 100;                // epochs of 3 iterations, the last one partial
  cfg.max_iterations = 10;
  cfg.lr_decay = 0.5;
  const auto res = train(data, cfg);
  const auto& lr = res.record.learning_rates;
  REQUIRE(lr.size() == 10);
  for (int i = 0; i < 10; ++i) CHECK(lr[static_cast<std::size_t>(i)] == cfg.learning_rate * std::pow(0.5, i / 3));
  CHECK(res.record.epochs == 3);

  cfg.decay_schedule = DecaySchedule::kPerIteration;
  const auto per_it = train(data, cfg);
  for (int i = 0; i < 10; ++i) {
    CHECK(per_it.record.learning_rates[static_cast<std::size_t>(i)] ==
          doctest::Approx(cfg.learning_rate * std::pow(0.5, i)).epsilon(1e-15));
  }
}

TEST_CASE("batch covering the dataset uses the full-batch gradient") {
  const auto data = linear_dataset();
  auto cfg = small_config();
  cfg.batch_size = 10000;
  cfg.max_iterations = 2;
  const auto res = train(data, cfg);
  // Every batch is the whole (shuffled) set, so its loss is the full-data loss
  // of the parameters it was evaluated at.
  const auto samples = data.samples();
  const auto fresh = StableDsModel::create(2, cfg, data.normalization);
  CHECK(res.record.losses.front() == doctest::Approx(dataset_loss(fresh, samples)).epsilon(1e-12));
}

TEST_CASE("divergence aborts with the record so far") {
  auto data = linear_dataset();
  for (auto& t : data.trajectories) {
    for (auto& v : t.velocities) v *= 1e5;
  }
  const auto res = train(data, small_config());
  CHECK(res.record.diverged);
  CHECK(res.record.losses.empty());
  CHECK(res.record.message.find("iteration 0") != std::string::npos);
}

TEST_CASE("dataset and config kinds must agree") {
  auto cfg = small_config();
  cfg.kind = ModelKind::kCycle;
  CHECK_THROWS_AS(train(linear_dataset(), cfg), ConfigError);
}

TEST_CASE("config text") {
  SUBCASE("every key parses and round-trips") {
    const auto cfg = parse_config_text(
        "# comment\n"
        "kind = cycle\n"
        "learning_rate=0.002\n\n"
        "lr_decay=0.95\n"
        "decay_schedule=iteration\n"
        "max_iterations=10\n"
        "batch_size=8\n"
        "weight_decay=0\n"
        "adam_beta1=0.8\n"
        "adam_beta2=0.99\n"
        "adam_eps=1e-7\n"
        "seed=42\n"
        "train_on_gated=false\n"
        "hidden=32,16\n"
        "delta=0.5\n"
        "sigma_contraction=0.2\n"
        "xi=0.9\n"
        "eps_grad=1e-7\n"
        "eps_s=1e-9\n"
        "fd_step=1e-5  # trailing comment\n");
    CHECK(cfg.kind == ModelKind::kCycle);
    CHECK(cfg.learning_rate == 0.002);
    CHECK(cfg.decay_schedule == DecaySchedule::kPerIteration);
    CHECK(cfg.seed == 42);
    CHECK_FALSE(cfg.train_on_gated);
    CHECK(cfg.hidden == std::vector<int>{32, 16});
    CHECK(cfg.model_constants().delta == 0.5);
    CHECK(cfg.model_constants().fd_step == 1e-5);

    std::string text;
    for (const auto& [k, v] : cfg.entries()) text += k + "=" + v + "\n";
    CHECK(parse_config_text(text).entries() == cfg.entries());
  }
  SUBCASE("defaults") {
    const TrainConfig cfg;
    CHECK(cfg.learning_rate == 1e-5);
    CHECK(cfg.lr_decay == 0.99);
    CHECK(cfg.max_iterations == 2000);
    CHECK(cfg.batch_size == 64);
    CHECK(cfg.weight_decay == 1e-4);
    CHECK(cfg.train_on_gated);
  }
  SUBCASE("errors") {
    CHECK_THROWS_AS(parse_config_text("nonsense=1\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("learning_rate\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("batch_size=abc\n"), ConfigError);
    CHECK_THROWS_AS(parse_config_text("lr_decay=1.5\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config_text("batch_size=0\n").validate(), ConfigError);
    CHECK_THROWS_AS(parse_config_text("xi=1\n").validate(), ConfigError);
    CHECK_THROWS_AS(load_config_file("/nonexistent/config.txt"), ConfigError);
  }
  SUBCASE("file") {
    const auto path = std::filesystem::temp_directory_path() / "lyapds_test_config.txt";
    std::ofstream(path) << "seed=9\nmax_iterations=7\n";
    const auto cfg = load_config_file(path);
    CHECK(cfg.seed == 9);
    CHECK(cfg.max_iterations == 7);
    std::filesystem::remove(path);
  }
}

TEST_CASE("train record CSV") {
  TrainRecord r;
  r.losses = {0.5, 0.25};
  r.learning_rates = {1e-3, 1e-3};
  CHECK(r.to_csv() == "iteration,loss,learning_rate\n0,0.5,0.001\n1,0.25,0.001\n");
}
