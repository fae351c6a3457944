#include "lyapds/cli.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"

#include "lyapds/errors.hpp"
#include "lyapds/export.hpp"
#include "lyapds/metrics.hpp"
#include "lyapds/model_io.hpp"
#include "lyapds/rollout.hpp"
#include "lyapds/trainer.hpp"

namespace lyapds {

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitDivergence = 3;

// Writes to `path`, or stdout when the path is empty or "-".
void emit(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  out << text;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Eigen::VectorXd parse_vector(const std::string& text, const std::string& what) {
  std::vector<double> vals;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      vals.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ConfigError(what + ": '" + item + "' is not a number");
    }
  }
  if (vals.empty()) throw ConfigError(what + " is empty");
  return Eigen::Map<Eigen::VectorXd>(vals.data(), static_cast<Eigen::Index>(vals.size()));
}

// "step:dx1,dx2"
Perturbation parse_perturbation(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("--perturb expects step:dx1,dx2, got '" + text + "'");
  Perturbation p;
  try {
    std::size_t used = 0;
    p.step = std::stoi(text.substr(0, colon), &used);
    if (used != colon || p.step < 0) throw std::invalid_argument(text);
  } catch (const std::exception&) {
    throw ConfigError("--perturb step must be a non-negative integer, got '" + text + "'");
  }
  p.displacement = parse_vector(text.substr(colon + 1), "--perturb displacement");
  return p;
}

std::string relative_to(const fs::path& file, const fs::path& dir) {
  const fs::path abs_file = fs::absolute(file).lexically_normal();
  const fs::path abs_dir = fs::absolute(dir).lexically_normal();
  const fs::path rel = abs_file.lexically_relative(abs_dir);
  return rel.empty() ? abs_file.string() : rel.generic_string();
}

struct ConvertArgs {
  std::vector<std::string> csvs;
  std::string out;
  std::string kind = "p2p";
  std::string normalization;
};

int run_convert(const ConvertArgs& a) {
  DatasetManifest m;
  m.kind = parse_model_kind(a.kind);
  m.normalization = a.normalization.empty() ? default_normalization(m.kind) : parse_normalization(a.normalization);
  std::vector<Trajectory> trajs;
  for (const auto& c : a.csvs) trajs.push_back(ingest_csv(c));
  (void)normalize(trajs, m.kind, m.normalization);  // reject bad sets now, not at train time

  const fs::path dir = fs::path(a.out).parent_path().empty() ? fs::path(".") : fs::path(a.out).parent_path();
  for (const auto& c : a.csvs) m.trajectories.push_back(relative_to(c, dir));
  save_manifest(a.out, m);
  std::cerr << "wrote " << a.out << " (" << trajs.size() << " trajectories)\n";
  return kExitOk;
}

struct SynthArgs {
  std::string shape = "s_curve";
  int demos = 3;
  int periods = 3;
  std::uint64_t seed = 0;
  std::string out_dir = ".";
};

int run_synth(const SynthArgs& a) {
  fs::create_directories(a.out_dir);
  DatasetManifest m;
  std::vector<Trajectory> trajs;
  if (a.shape == "ellipse" || a.shape == "limacon") {
    m.kind = ModelKind::kCycle;
    trajs.push_back(synth_cycle_raw(parse_cycle_shape(a.shape), a.periods, a.seed));
  } else {
    m.kind = ModelKind::kPointToPoint;
    trajs = synth_p2p_raw(parse_p2p_shape(a.shape), a.demos, a.seed);
  }
  m.normalization = default_normalization(m.kind);
  for (std::size_t i = 0; i < trajs.size(); ++i) {
    const std::string name = a.shape + "_" + std::to_string(i) + ".csv";
    write_csv(fs::path(a.out_dir) / name, trajs[i]);
    m.trajectories.push_back(name);
  }
  const fs::path manifest = fs::path(a.out_dir) / "manifest.json";
  save_manifest(manifest, m);
  std::cerr << "wrote " << manifest.string() << "\n";
  return kExitOk;
}

struct TrainArgs {
  std::string manifest;
  std::string out;
  std::string config;
  std::string record;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  bool quiet = false;
};

int run_train(const TrainArgs& a) {
  const DemonstrationSet data = load_dataset(a.manifest);
  TrainConfig cfg;
  cfg.kind = data.kind;
  std::string config_path = a.config;
  if (config_path.empty()) {
    if (const char* env = std::getenv(kConfigEnvVar)) config_path = env;
  }
  if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
  for (const auto& kv : a.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (a.seed) cfg.seed = *a.seed;
  if (a.iterations) cfg.max_iterations = *a.iterations;

  TrainCallback progress;
  if (!a.quiet) {
    progress = [](int it, double loss, double lr) {
      if (it % 100 == 0) std::cerr << "iter " << it << " loss " << format_double(loss) << " lr " << lr << "\n";
    };
  }
  const TrainResult result = train(data, cfg, progress);
  if (!a.record.empty()) emit(a.record, result.record.to_csv());
  if (result.record.diverged) {
    std::cerr << "training diverged: " << result.record.message << "\n";
    return kExitDivergence;
  }
  save_model(a.out, result.model);
  std::cerr << "best full-data loss " << format_double(result.record.best_loss) << " after "
            << result.record.epochs << " epochs; wrote " << a.out << "\n";
  return kExitOk;
}

struct RolloutArgs {
  std::string model;
  std::string start;
  std::optional<double> dt;
  int steps = 100;
  std::string integrator = "euler";
  std::vector<std::string> perturb;
  std::string out;
};

int run_rollout(const RolloutArgs& a) {
  const StableDsModel model = load_model(a.model);
  RolloutSpec spec;
  spec.start = parse_vector(a.start, "--start");
  if (a.dt) spec.dt = *a.dt;
  spec.steps = a.steps;
  spec.integrator = parse_integrator(a.integrator);
  for (const auto& p : a.perturb) spec.perturbations.push_back(parse_perturbation(p));
  emit(a.out, to_csv(rollout(model, spec)));
  return kExitOk;
}

int run_eval(const std::string& model_path, const std::string& manifest, const std::string& out) {
  const StableDsModel model = load_model(model_path);
  const DemonstrationSet data = load_dataset(manifest);
  if (data.kind != model.kind) throw DataError("manifest kind does not match the model");
  emit(out, evaluate(model, data).to_json() + "\n");
  return kExitOk;
}

int run_field(const std::string& model_path, int grid, const std::string& bounds, const std::string& out) {
  const StableDsModel model = load_model(model_path);
  const Bounds b = bounds.empty() ? default_bounds(model) : parse_bounds(bounds);
  emit(out, field_grid(model, grid, b).to_csv());
  return kExitOk;
}

struct PlotArgs {
  std::vector<std::string> demos;
  std::vector<std::string> repros;
  std::string field;
  std::string target;
  std::string out;
};

int run_plot(const PlotArgs& a) {
  PlotInput in;
  for (const auto& d : a.demos) in.demonstrations.push_back(ingest_csv(d));
  for (const auto& r : a.repros) in.reproductions.push_back(ingest_csv(r));
  if (!a.field.empty()) in.field = parse_field_csv(read_file(a.field));
  if (!a.target.empty()) {
    const Eigen::VectorXd t = parse_vector(a.target, "--target");
    if (t.size() != 2) throw ContractError("--target must be planar");
    in.target = Eigen::Vector2d(t[0], t[1]);
  }
  emit(a.out, plot_svg(in));
  return kExitOk;
}

}  // namespace

int cli_main(int argc, char** argv) {
  CLI::App app{"Learn stable dynamical systems from demonstrations", "lyapds"};
  app.require_subcommand(1);

  ConvertArgs convert;
  auto* c = app.add_subcommand("convert", "Check demonstration CSVs and write a dataset manifest");
  c->add_option("csv", convert.csvs, "Trajectory CSVs (t,x1..xd[,v1..vd])")->required();
  c->add_option("-o,--out", convert.out, "Manifest path")->required();
  c->add_option("--kind", convert.kind, "p2p or cycle");
  c->add_option("--normalization", convert.normalization, "final_point or box_center");

  SynthArgs synth;
  auto* sy = app.add_subcommand("synth", "Write a synthetic demonstration set and its manifest");
  sy->add_option("--shape", synth.shape, "s_curve, sine, ellipse or limacon");
  sy->add_option("--demos", synth.demos, "Point-to-point demonstrations")->check(CLI::PositiveNumber);
  sy->add_option("--periods", synth.periods, "Cycle periods")->check(CLI::PositiveNumber);
  sy->add_option("--seed", synth.seed, "Noise seed");
  sy->add_option("--out-dir", synth.out_dir, "Output directory");

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "Train a model on a dataset manifest");
  t->add_option("manifest", tr.manifest, "Dataset manifest")->required();
  t->add_option("-o,--out", tr.out, "Model file")->required();
  t->add_option("--config", tr.config, std::string("key=value config file (default: $") + kConfigEnvVar + ")");
  t->add_option("--set", tr.overrides, "Config override key=value (repeatable)");
  t->add_option("--seed", tr.seed, "Initialization and shuffling seed");
  t->add_option("--iterations", tr.iterations, "Override max_iterations")->check(CLI::PositiveNumber);
  t->add_option("--record", tr.record, "Write the per-iteration loss record (CSV)");
  t->add_flag("-q,--quiet", tr.quiet, "No progress output");

  RolloutArgs ro;
  auto* r = app.add_subcommand("rollout", "Integrate the learned field from a start state");
  r->add_option("model", ro.model, "Model file")->required();
  r->add_option("--start", ro.start, "Start state x1,x2,... in original units")->required();
  r->add_option("--dt", ro.dt, "Step size (s)")->check(CLI::PositiveNumber);
  r->add_option("--steps", ro.steps, "Number of steps")->check(CLI::PositiveNumber);
  r->add_option("--integrator", ro.integrator, "euler or rk4");
  r->add_option("--perturb", ro.perturb, "Displacement step:dx1,dx2 added before that step (repeatable)");
  r->add_option("-o,--out", ro.out, "Trajectory CSV (default stdout)");

  std::string eval_model, eval_manifest, eval_out;
  auto* e = app.add_subcommand("eval", "Compute SEA, velocity RMSE and convergence on a dataset");
  e->add_option("model", eval_model, "Model file")->required();
  e->add_option("manifest", eval_manifest, "Dataset manifest")->required();
  e->add_option("-o,--out", eval_out, "Report JSON (default stdout)");

  std::string field_model, field_bounds, field_out;
  int field_n = 20;
  auto* f = app.add_subcommand("field", "Export the learned vector field on a grid");
  f->add_option("model", field_model, "Model file")->required();
  f->add_option("--grid", field_n, "Grid resolution n (n x n rows)")->check(CLI::Range(2, 100000));
  f->add_option("--bounds", field_bounds, "xmin,xmax,ymin,ymax in original units");
  f->add_option("-o,--out", field_out, "Field CSV (default stdout)");

  PlotArgs pl;
  auto* p = app.add_subcommand("plot", "Render trajectories and a field grid to SVG");
  p->add_option("--demo", pl.demos, "Demonstration CSV (dotted)");
  p->add_option("--repro", pl.repros, "Reproduction CSV (solid)");
  p->add_option("--field", pl.field, "Field CSV from 'field'");
  p->add_option("--target", pl.target, "Target marker x1,x2");
  p->add_option("-o,--out", pl.out, "SVG path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    std::cerr << err.what() << "\n\n" << app.help();
    return kExitUsage;
  }

  try {
    if (*c) return run_convert(convert);
    if (*sy) return run_synth(synth);
    if (*t) return run_train(tr);
    if (*r) return run_rollout(ro);
    if (*e) return run_eval(eval_model, eval_manifest, eval_out);
    if (*f) return run_field(field_model, field_n, field_bounds, field_out);
    if (*p) return run_plot(pl);
  } catch (const ConfigError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitUsage;
  } catch (const DivergenceError& err) {
    std::cerr << "divergence: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const NumericError& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return kExitDivergence;
  } catch (const DataError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const ContractError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::filesystem::filesystem_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}

}  // namespace lyapds
