// Acceptance harness: one PASS/FAIL line per criterion. Tolerances and the
// training setups are fixed here; nothing is read from the environment.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "lyapds/cycle_field.hpp"
#include "lyapds/data.hpp"
#include "lyapds/errors.hpp"
#include "lyapds/integrate.hpp"
#include "lyapds/metrics.hpp"
#include "lyapds/model_io.hpp"
#include "lyapds/p2p_field.hpp"
#include "lyapds/random.hpp"
#include "lyapds/rollout.hpp"
#include "lyapds/trainer.hpp"

using namespace lyapds;
using Eigen::VectorXd;
namespace fs = std::filesystem;

namespace {

// Training setups. The published learning rate (1e-5 over 2000 iterations)
// barely moves a freshly initialized model, so the desk-scale runs use larger
// steps.
TrainConfig s_curve_config() {
  TrainConfig c;
  c.kind = ModelKind::kPointToPoint;
  c.learning_rate = 0.01;
  c.max_iterations = 3000;
  c.seed = 1;
  return c;
}

TrainConfig ellipse_config() {
  TrainConfig c;
  c.kind = ModelKind::kCycle;
  c.learning_rate = 0.003;
  c.max_iterations = 1500;
  c.seed = 0;
  // Default margin 0.1 leaves the gate active over most of the plane during training.
  c.sigma_contraction = 3.0;
  c.delta = 0.6931;
  return c;
}

constexpr int kSCurveDemos = 3;
constexpr std::uint64_t kDataSeed = 0;
constexpr int kEllipsePeriods = 3;

// Tolerances.
constexpr double kGradTol = 1e-4;
constexpr double kGateKink = 1e-3;
constexpr double kIdentityTol = 1e-10;
constexpr double kSeaRatio = 0.5;
constexpr double kVrmseRatio = 0.6;
constexpr double kCrossingTol = 1e-2;
constexpr double kGateTol = 1e-12;
constexpr double kLambdaTol = 1e-12;
constexpr double kShoelaceTol = 1e-9;
constexpr double kEulerOrder = 1.0, kEulerOrderTol = 0.2;
constexpr double kRk4Order = 4.0, kRk4OrderTol = 0.8;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail, double secs, double budget) {
  const bool in_time = secs <= budget;
  const bool ok = pass && in_time;
  if (!ok) ++failures;
  std::printf("%s criterion %d (%s): %s; %.1f s of %.0f s%s\n", ok ? "PASS" : "FAIL", id, name.c_str(),
              detail.c_str(), secs, budget, in_time ? "" : " (over budget)");
  std::fflush(stdout);
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

VectorXd rand2(Rng& rng, double r = 1.0) { return Eigen::Vector2d(rng.uniform(-r, r), rng.uniform(-r, r)); }

StableDsModel random_model(ModelKind kind, std::uint64_t seed, std::vector<int> hidden) {
  TrainConfig c;
  c.kind = kind;
  c.seed = seed;
  c.hidden = std::move(hidden);
  return StableDsModel::create(2, c, AffineMap::identity(2));
}

// Models trained on first use and shared by several criteria. Training time is
// charged to the accuracy and convergence criteria.
struct Trained {
  DemonstrationSet data;
  StableDsModel model;
  double seconds = 0.0;
};

const Trained& s_curve() {
  static const Trained t = [] {
    const auto t0 = Clock::now();
    auto data = synth_p2p(P2pShape::kSCurve, kSCurveDemos, kDataSeed);
    auto res = train(data, s_curve_config());
    if (res.record.diverged) throw DivergenceError("s_curve training diverged: " + res.record.message);
    return Trained{std::move(data), std::move(res.model), seconds_since(t0)};
  }();
  return t;
}

const Trained& ellipse() {
  static const Trained t = [] {
    const auto t0 = Clock::now();
    auto data = synth_cycle(CycleShape::kEllipse, kEllipsePeriods, kDataSeed);
    auto res = train(data, ellipse_config());
    if (res.record.diverged) throw DivergenceError("ellipse training diverged: " + res.record.message);
    return Trained{std::move(data), std::move(res.model), seconds_since(t0)};
  }();
  return t;
}

// ---------------------------------------------------------------------------

void criterion_1() {
  const auto t0 = Clock::now();
  Rng rng(101);
  double worst_p2p = 0.0, worst_cycle = 0.0;
  std::size_t checked = 0;
  for (int draw = 0; draw < 50; ++draw) {
    for (ModelKind kind : {ModelKind::kPointToPoint, ModelKind::kCycle}) {
      auto m = random_model(kind, 1000 + static_cast<std::uint64_t>(draw), {6, 6});
      std::vector<Sample> batch;
      while (batch.size() < 4) {
        const VectorXd x = rand2(rng);
        if (kind == ModelKind::kCycle && std::abs(cycle::gate_report(m, x).t_value) < kGateKink) continue;
        batch.push_back({x, rand2(rng)});
      }
      auto params = m.nets.params();
      const auto r = ad::gradcheck([&](ad::Tape& t) { return velocity_loss(t, m, batch, true); }, params, kGradTol);
      checked += r.checked;
      double& worst = kind == ModelKind::kPointToPoint ? worst_p2p : worst_cycle;
      worst = std::max(worst, r.max_rel_error);
    }
  }
  const bool pass = worst_p2p < kGradTol && worst_cycle < kGradTol;
  report(1, "autodiff gradcheck", pass,
         "max rel error p2p " + fmt("%.2e", worst_p2p) + ", gated cycle " + fmt("%.2e", worst_cycle) + " over " +
             std::to_string(checked) + " coordinates (tol " + fmt("%.0e", kGradTol) + ")",
         seconds_since(t0), 60);
}

double identity_residual(const StableDsModel& m, Rng& rng, int n, int& used) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    ad::Tape t;
    const auto terms = p2p::stable_velocity_terms(m, t.constant(rand2(rng)));
    const VectorXd a = terms.a.vector();
    if (a.squaredNorm() < m.constants.eps_grad) continue;
    ++used;
    const double rate = terms.alpha.scalar() * std::pow(terms.s.scalar(), 2) + terms.beta.scalar();
    worst = std::max(worst, std::abs(a.dot(terms.velocity.vector()) + rate) / (1.0 + std::abs(rate)));
  }
  return worst;
}

void criterion_2() {
  const auto t0 = Clock::now();
  Rng rng(202);
  int used = 0;
  double worst = 0.0;
  for (int k = 0; k < 4; ++k) {
    worst = std::max(worst, identity_residual(random_model(ModelKind::kPointToPoint, 2000 + k, {64, 64}), rng,
                                              2500, used));
  }
  const double random_secs = seconds_since(t0);
  int used_trained = 0;
  const auto& trained = s_curve().model;
  const auto t1 = Clock::now();
  worst = std::max(worst, identity_residual(trained, rng, 10000, used_trained));
  const double secs = random_secs + seconds_since(t1);
  report(2, "decrease identity", worst < kIdentityTol,
         "max residual " + fmt("%.2e", worst) + " on " + std::to_string(used) + " random-parameter and " +
             std::to_string(used_trained) + " trained-model points (tol " + fmt("%.0e", kIdentityTol) + ")",
         secs, 10);
}

void criterion_3() {
  const auto& tr = s_curve();
  const auto t0 = Clock::now();
  const auto& m = tr.model;
  const double v0 = p2p::lyapunov_value(m, VectorXd(VectorXd::Zero(2)));
  Rng rng(303);
  int below = 0;
  for (int i = 0; i < 10000; ++i) {
    const VectorXd x = rand2(rng);
    if (!(p2p::lyapunov_value(m, x) >= m.constants.delta * x.squaredNorm())) ++below;
  }
  std::vector<VectorXd> starts;
  for (int i = 0; i < 100; ++i) starts.push_back(rand2(rng));
  const Trajectory& demo = tr.data.trajectories.front();
  const auto conv = convergence_stats(m, starts, demo.dt, 3.0 * demo.duration());
  int hits = 0;
  for (double d : conv.distances) hits += d < kGoalRadius ? 1 : 0;
  const bool pass = v0 == 0.0 && below == 0 && hits == 100;
  report(3, "Lyapunov conditions", pass,
         "V(0) = " + fmt("%g", v0) + ", " + std::to_string(below) + "/10000 below delta|x|^2, " +
             std::to_string(hits) + "/100 starts within " + fmt("%.2f", kGoalRadius) + " after " +
             fmt("%.1f", 3.0 * demo.duration()) + " s",
         seconds_since(t0), 60);
}

void criterion_4() {
  const auto& tr = s_curve();
  const auto t0 = Clock::now();
  const auto rep = evaluate(tr.model, tr.data);
  // Baseline xdot = -x about the same target, in original units.
  const VectorXd target = tr.model.normalization.offset;
  const VectorField baseline = [&](const VectorXd& x) { return VectorXd(-(x - target)); };
  double base_sea = 0.0, base_v = 0.0;
  for (std::size_t i = 0; i < tr.data.trajectories.size(); ++i) {
    const Trajectory demo = tr.data.denormalized(i);
    const auto r = integrate(baseline, demo.points.front(), demo.dt, static_cast<int>(demo.size()) - 1,
                             Integrator::kEuler);
    Trajectory repro;
    repro.dt = demo.dt;
    repro.points = r.states;
    repro.velocities = r.velocities;
    base_sea += sea(demo, repro);
    base_v += v_rmse(baseline, demo);
  }
  const double n = static_cast<double>(tr.data.trajectories.size());
  base_sea /= n;
  base_v /= n;
  const double sea_ratio = rep.sea / base_sea;
  const double v_ratio = rep.v_rmse / base_v;
  report(4, "desk-scale accuracy", sea_ratio <= kSeaRatio && v_ratio <= kVrmseRatio,
         "SEA " + fmt("%.1f", rep.sea) + " vs baseline " + fmt("%.1f", base_sea) + " mm^2 (ratio " +
             fmt("%.3f", sea_ratio) + ", need <= " + fmt("%.2f", kSeaRatio) + "), V_rmse " +
             fmt("%.2f", rep.v_rmse) + " vs " + fmt("%.2f", base_v) + " mm/s (ratio " + fmt("%.3f", v_ratio) +
             ", need <= " + fmt("%.2f", kVrmseRatio) + "); training " + fmt("%.0f", tr.seconds) + " s",
         tr.seconds + seconds_since(t0), 600);
}

void criterion_5() {
  const auto& tr = ellipse();
  const auto t0 = Clock::now();
  const auto& m = tr.model;
  const double dt = tr.data.trajectories.front().dt;
  const VectorField field = [&m](const VectorXd& x) { return cycle::gated_velocity(m, x); };

  // Period estimate from a start on the first demonstration sample.
  cycle::Section sec;
  sec.normal = Eigen::Vector2d(0, 1);
  sec.ray = Eigen::Vector2d(1, 0);
  const VectorXd on_demo = tr.data.trajectories.front().points.front();
  const auto ref = cycle::poincare_return(field, sec, on_demo, dt, static_cast<int>(20 * 2 * std::numbers::pi / dt),
                                          Integrator::kEuler);
  const bool have_period = ref.period.has_value() && std::isfinite(*ref.period);
  const double period = have_period ? *ref.period : 2.0 * std::numbers::pi;

  Rng rng(505);
  const double band = kCycleRelativeBand * m.constants.delta;
  int reached = 0, settled = 0;
  double worst_gap = 0.0;
  const int steps = static_cast<int>(std::ceil(5.0 * period / dt));
  for (int i = 0; i < 20; ++i) {
    const VectorXd x0 = rand2(rng);
    const auto conv = convergence_stats(m, {x0}, dt, 5.0 * period);
    reached += conv.fraction == 1.0 ? 1 : 0;
    // Continue from the state after five periods and compare crossings.
    VectorXd x = x0;
    bool ok = true;
    try {
      x = integrate(field, x0, dt, steps, Integrator::kEuler, {}, kDivergenceBox).states.back();
    } catch (const DivergenceError&) {
      ok = false;
    }
    if (ok) {
      const auto pr = cycle::poincare_return(field, sec, x, dt, static_cast<int>(std::ceil(3.5 * period / dt)),
                                             Integrator::kEuler);
      if (pr.crossings.size() >= 2) {
        double gap = 0.0;
        for (std::size_t k = 1; k < pr.crossings.size(); ++k) {
          gap = std::max(gap, (pr.crossings[k] - pr.crossings[k - 1]).norm());
        }
        worst_gap = std::max(worst_gap, gap);
        settled += gap < kCrossingTol ? 1 : 0;
      } else {
        worst_gap = std::numeric_limits<double>::infinity();
      }
    } else {
      worst_gap = std::numeric_limits<double>::infinity();
    }
  }
  const bool pass = have_period && reached == 20 && settled == 20;
  report(5, "limit-cycle convergence", pass,
         "period " + (have_period ? fmt("%.3f", period) + " s" : std::string("not found")) + ", " +
             std::to_string(reached) + "/20 starts within |g - delta| < " + fmt("%.3f", band) +
             " after 5 periods, " + std::to_string(settled) + "/20 with crossing gaps < " +
             fmt("%.0e", kCrossingTol) + " (worst " + fmt("%.2e", worst_gap) + "); training " +
             fmt("%.0f", tr.seconds) + " s",
         tr.seconds + seconds_since(t0), 600);
}

void criterion_6() {
  const auto& tr = ellipse();
  const auto t0 = Clock::now();
  const auto& m = tr.model;
  const VectorField gated = [&m](const VectorXd& x) { return cycle::gated_velocity(m, x); };
  int pre = 0, post = 0, exact_bad = 0, blend_bad = 0;
  const int n = 40;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const VectorXd x = Eigen::Vector2d(-1.1 + 2.2 * i / (n - 1), -1.1 + 2.2 * j / (n - 1));
      ad::Tape t;
      const auto r = cycle::transverse_gate(m, t.constant(x));
      const VectorXd v = r.velocity.vector();
      if (r.report.t_value > 0.0) {
        ++pre;
        const VectorXd expect = (1.0 - m.constants.xi) * r.ungated.f3.vector();
        if (!((v - expect).norm() <= kGateTol * std::max(1.0, expect.norm()))) ++blend_bad;
      } else if (!(v == r.ungated.velocity.vector())) {
        ++exact_bad;
      }
      if (cycle::contraction_test(m, gated, x) > 0.0) ++post;
    }
  }
  const double total = n * n;
  const bool pass = exact_bad == 0 && blend_bad == 0 && post < pre;
  report(6, "gate behavior", pass,
         std::to_string(exact_bad) + " open points changed, " + std::to_string(blend_bad) +
             " gated points off (1 - xi) f3; T > 0 on " + fmt("%.1f", 100.0 * pre / total) + "% before and " +
             fmt("%.1f", 100.0 * post / total) + "% after the gate",
         seconds_since(t0), 60);
}

void criterion_7() {
  const auto t0 = Clock::now();
  Rng rng(707);
  double worst = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double a = rng.uniform(-10, 10), b = rng.uniform(-10, 10), c = rng.uniform(-10, 10);
    // Larger root of t^2 - (a + c) t + (ac - b^2).
    const double p = a + c, q = a * c - b * b;
    const double root = 0.5 * (p + std::sqrt(p * p - 4.0 * q));
    const double got = cycle::lambda_max_2x2((Eigen::Matrix2d() << a, b, b, c).finished());
    worst = std::max(worst, std::abs(got - root));
  }
  report(7, "lambda_max closed form", worst < kLambdaTol,
         "max abs difference " + fmt("%.2e", worst) + " on 10000 matrices (tol " + fmt("%.0e", kLambdaTol) + ")",
         seconds_since(t0), 1);
}

void criterion_8() {
  const auto t0 = Clock::now();
  Rng rng(808);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const int n = 3 + static_cast<int>(rng.index(8));
    // Demo below and reproduction above a shared increasing abscissa, then a
    // random rigid motion: each tetragon is convex and the outline is simple.
    const double th = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const Eigen::Matrix2d rot =
        (Eigen::Matrix2d() << std::cos(th), -std::sin(th), std::sin(th), std::cos(th)).finished();
    const Eigen::Vector2d shift = rand2(rng, 50.0);
    Trajectory demo, repro;
    demo.dt = repro.dt = 0.1;
    double s = rng.uniform(-1, 1);
    for (int k = 0; k < n; ++k) {
      s += rng.uniform(0.05, 2.0);
      demo.points.push_back(rot * Eigen::Vector2d(s, -rng.uniform(0.01, 2.0)) + shift);
      repro.points.push_back(rot * Eigen::Vector2d(s, rng.uniform(0.01, 2.0)) + shift);
    }
    demo.velocities = demo.points;
    repro.velocities = repro.points;
    std::vector<VectorXd> poly = demo.points;
    poly.insert(poly.end(), repro.points.rbegin(), repro.points.rend());
    double twice = 0.0;
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const auto& p = poly[k];
      const auto& q = poly[(k + 1) % poly.size()];
      twice += (p[0] - shift[0]) * (q[1] - shift[1]) - (q[0] - shift[0]) * (p[1] - shift[1]);
    }
    const double oracle = 0.5 * std::abs(twice);
    worst = std::max(worst, std::abs(sea(demo, repro) - oracle) / oracle);
  }
  report(8, "SEA polygon oracle", worst < kShoelaceTol,
         "max relative error " + fmt("%.2e", worst) + " on 1000 pairs (tol " + fmt("%.0e", kShoelaceTol) + ")",
         seconds_since(t0), 1);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + LYAPDS_CLI_PATH + "\" " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void criterion_9() {
  const auto t0 = Clock::now();
  const fs::path dir = fs::temp_directory_path() / "lyapds_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string d = "\"" + dir.string() + "\"";
  bool cli_ok = run_cli("synth --shape s_curve --demos 3 --seed 0 --out-dir " + d) == 0;
  const std::string train = "train " + d + "/manifest.json --seed 7 --iterations 300 -q -o " + d;
  cli_ok = cli_ok && run_cli(train + "/a.json") == 0 && run_cli(train + "/b.json") == 0;
  const std::string a = slurp(dir / "a.json");
  const bool identical = cli_ok && !a.empty() && a == slurp(dir / "b.json");

  // Save / load on every model the harness has at hand.
  std::vector<StableDsModel> models = {random_model(ModelKind::kPointToPoint, 9, {64, 64}),
                                       random_model(ModelKind::kCycle, 9, {64, 64})};
  if (cli_ok) models.push_back(load_model(dir / "a.json"));
  int mismatches = 0, evaluations = 0;
  Rng rng(909);
  for (std::size_t i = 0; i < models.size(); ++i) {
    const fs::path path = dir / ("round" + std::to_string(i) + ".json");
    save_model(path, models[i]);
    const StableDsModel back = load_model(path);
    for (int k = 0; k < 100; ++k) {
      const VectorXd x = rand2(rng, 1.2);
      ++evaluations;
      if (!(velocity(back, x) == velocity(models[i], x)) || !(lyapunov(back, x) == lyapunov(models[i], x))) {
        ++mismatches;
      }
    }
  }
  fs::remove_all(dir);
  report(9, "determinism", identical && mismatches == 0,
         std::string("train --seed 7 twice: ") + (identical ? "byte-identical" : "DIFFERENT or failed") + ", " +
             std::to_string(mismatches) + "/" + std::to_string(evaluations) + " round-trip evaluations differ",
         seconds_since(t0), 600);
}

double order(Integrator integ, int steps) {
  const VectorField decay = [](const VectorXd& x) { return VectorXd(-x); };
  auto err = [&](int n) {
    const auto r = integrate(decay, VectorXd::Ones(1), 1.0 / n, n, integ);
    return std::abs(r.states.back()[0] - std::exp(-1.0));
  };
  return std::log2(err(steps) / err(2 * steps));
}

void criterion_10() {
  const auto t0 = Clock::now();
  const double e = order(Integrator::kEuler, 64);
  const double r = order(Integrator::kRk4, 16);
  const bool pass = std::abs(e - kEulerOrder) <= kEulerOrderTol && std::abs(r - kRk4Order) <= kRk4OrderTol;
  report(10, "integrator order", pass,
         "Euler " + fmt("%.3f", e) + " (1.0 +- 0.2), RK4 " + fmt("%.3f", r) + " (4.0 +- 0.8)", seconds_since(t0),
         5);
}

void guarded(int id, const std::function<void()>& fn) {
  try {
    fn();
  } catch (const std::exception& e) {
    ++failures;
    std::printf("FAIL criterion %d: %s\n", id, e.what());
    std::fflush(stdout);
  }
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> criteria = {criterion_1, criterion_2, criterion_3, criterion_4,
                                                       criterion_5, criterion_6, criterion_7, criterion_8,
                                                       criterion_9, criterion_10};
  for (std::size_t i = 0; i < criteria.size(); ++i) guarded(static_cast<int>(i) + 1, criteria[i]);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
