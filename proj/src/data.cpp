#include "lyapds/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include "json.hpp"

#include "lyapds/config.hpp"
#include "lyapds/errors.hpp"
#include "lyapds/random.hpp"

namespace lyapds {

using Eigen::VectorXd;

void Trajectory::validate() const {
  if (points.size() < 2) throw DataError("trajectory needs at least 2 points");
  if (!(dt > 0.0)) throw DataError("trajectory dt must be positive");
  if (velocities.size() != points.size()) throw DataError("velocity and position counts differ");
  const auto d = points.front().size();
  for (std::size_t k = 0; k < points.size(); ++k) {
    if (points[k].size() != d || velocities[k].size() != d) {
      throw DataError("inconsistent dimension at sample " + std::to_string(k));
    }
    if (!points[k].allFinite() || !velocities[k].allFinite()) {
      throw DataError("non-finite entry at sample " + std::to_string(k));
    }
  }
}

// ---------------------------------------------------------------------------
// CSV

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::stringstream ss(line);
  while (std::getline(ss, item, sep)) {
    while (!item.empty() && (item.back() == '\r' || item.back() == ' ')) item.pop_back();
    while (!item.empty() && item.front() == ' ') item.erase(item.begin());
    out.push_back(item);
  }
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, std::size_t row) {
  double v = 0.0;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (ec != std::errc() || ptr != end || s.empty()) {
    throw DataError("line " + std::to_string(row) + ": '" + s + "' is not a number");
  }
  return v;
}

}  // namespace

std::vector<VectorXd> finite_difference_velocities(const std::vector<VectorXd>& points, double dt) {
  const std::size_t n = points.size();
  if (n < 2) throw DataError("finite differences need at least 2 points");
  std::vector<VectorXd> v(n);
  v.front() = (points[1] - points[0]) / dt;
  v.back() = (points[n - 1] - points[n - 2]) / dt;
  for (std::size_t k = 1; k + 1 < n; ++k) {
    v[k] = (points[k + 1] - points[k - 1]) / (2.0 * dt);
  }
  return v;
}

Trajectory parse_csv(const std::string& text, const DtPolicy& policy) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty CSV");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line.erase(0, 3);  // UTF-8 BOM
  const auto header = split(line, ',');
  if (header.empty() || header[0] != "t") throw DataError("CSV header must start with 't'");

  int dim = 0;
  while (static_cast<std::size_t>(dim + 1) < header.size() && header[static_cast<std::size_t>(dim + 1)] == "x" + std::to_string(dim + 1)) {
    ++dim;
  }
  if (dim == 0) throw DataError("CSV header needs position columns x1..xd");
  const std::size_t cols = header.size();
  bool has_v = false;
  if (cols == static_cast<std::size_t>(1 + 2 * dim)) {
    for (int j = 0; j < dim; ++j) {
      if (header[static_cast<std::size_t>(1 + dim + j)] != "v" + std::to_string(j + 1)) {
        throw DataError("CSV header: expected v" + std::to_string(j + 1));
      }
    }
    has_v = true;
  } else if (cols != static_cast<std::size_t>(1 + dim)) {
    throw DataError("CSV header must be t,x1..xd[,v1..vd]");
  }

  std::vector<double> times;
  std::vector<std::size_t> lines;
  Trajectory traj;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "\r") continue;
    const auto fields = split(line, ',');
    if (fields.size() != cols) {
      throw DataError("line " + std::to_string(row) + ": expected " + std::to_string(cols) + " fields");
    }
    times.push_back(parse_number(fields[0], row));
    lines.push_back(row);
    VectorXd x(dim);
    for (int j = 0; j < dim; ++j) x[j] = parse_number(fields[static_cast<std::size_t>(1 + j)], row);
    traj.points.push_back(x);
    if (has_v) {
      VectorXd v(dim);
      for (int j = 0; j < dim; ++j) v[j] = parse_number(fields[static_cast<std::size_t>(1 + dim + j)], row);
      traj.velocities.push_back(v);
    }
  }
  if (traj.points.size() < 2) throw DataError("trajectory CSV needs at least 2 rows");

  if (policy.fixed_dt) {
    traj.dt = *policy.fixed_dt;
  } else {
    const double first = times[1] - times[0];
    if (!(first > 0.0)) throw DataError("time column must be increasing");
    for (std::size_t k = 1; k < times.size(); ++k) {
      const double step = times[k] - times[k - 1];
      if (std::abs(step - first) > policy.tolerance * first) {
        throw DataError("line " + std::to_string(lines[k]) + ": non-uniform time step");
      }
    }
    traj.dt = (times.back() - times.front()) / static_cast<double>(times.size() - 1);
  }
  if (!has_v) traj.velocities = finite_difference_velocities(traj.points, traj.dt);
  traj.validate();
  return traj;
}

Trajectory ingest_csv(const std::filesystem::path& path, const DtPolicy& policy) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_csv(ss.str(), policy);
  } catch (const DataError& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

std::string to_csv(const Trajectory& traj, bool with_velocities) {
  const int d = traj.dim();
  std::string out = "t";
  for (int j = 1; j <= d; ++j) out += ",x" + std::to_string(j);
  if (with_velocities) {
    for (int j = 1; j <= d; ++j) out += ",v" + std::to_string(j);
  }
  out += "\n";
  for (std::size_t k = 0; k < traj.points.size(); ++k) {
    out += format_double(traj.dt * static_cast<double>(k));
    for (int j = 0; j < d; ++j) out += "," + format_double(traj.points[k][j]);
    if (with_velocities) {
      for (int j = 0; j < d; ++j) out += "," + format_double(traj.velocities[k][j]);
    }
    out += "\n";
  }
  return out;
}

void write_csv(const std::filesystem::path& path, const Trajectory& traj, bool with_velocities) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_csv(traj, with_velocities);
}

// ---------------------------------------------------------------------------
// Normalization

std::string to_string(NormalizationPolicy policy) {
  return policy == NormalizationPolicy::kFinalPoint ? "final_point" : "box_center";
}

NormalizationPolicy parse_normalization(const std::string& name) {
  if (name == "final_point") return NormalizationPolicy::kFinalPoint;
  if (name == "box_center") return NormalizationPolicy::kBoxCenter;
  throw ConfigError("unknown normalization policy '" + name + "'");
}

NormalizationPolicy default_normalization(ModelKind kind) {
  return kind == ModelKind::kPointToPoint ? NormalizationPolicy::kFinalPoint : NormalizationPolicy::kBoxCenter;
}

std::size_t DemonstrationSet::sample_count() const {
  std::size_t n = 0;
  for (const auto& t : trajectories) n += t.size();
  return n;
}

std::vector<std::pair<VectorXd, VectorXd>> DemonstrationSet::samples() const {
  std::vector<std::pair<VectorXd, VectorXd>> out;
  out.reserve(sample_count());
  for (const auto& t : trajectories) {
    for (std::size_t k = 0; k < t.size(); ++k) out.emplace_back(t.points[k], t.velocities[k]);
  }
  return out;
}

Trajectory DemonstrationSet::denormalized(std::size_t i) const {
  return denormalize(trajectories.at(i), normalization);
}

Trajectory denormalize(const Trajectory& normalized, const AffineMap& map) {
  Trajectory out;
  out.dt = normalized.dt;
  out.points.reserve(normalized.size());
  out.velocities.reserve(normalized.size());
  for (std::size_t k = 0; k < normalized.size(); ++k) {
    out.points.push_back(map.from_normalized(normalized.points[k]));
    out.velocities.push_back(map.velocity_from_normalized(normalized.velocities[k]));
  }
  return out;
}

Trajectory normalize_trajectory(const Trajectory& original, const AffineMap& map) {
  Trajectory out;
  out.dt = original.dt;
  out.points.reserve(original.size());
  out.velocities.reserve(original.size());
  for (std::size_t k = 0; k < original.size(); ++k) {
    out.points.push_back(map.to_normalized(original.points[k]));
    out.velocities.push_back(map.velocity_to_normalized(original.velocities[k]));
  }
  return out;
}

DemonstrationSet normalize(const std::vector<Trajectory>& trajectories, ModelKind kind,
                           NormalizationPolicy policy) {
  if (trajectories.empty()) throw DataError("no trajectories to normalize");
  const int d = trajectories.front().dim();
  for (const auto& t : trajectories) {
    t.validate();
    if (t.dim() != d) throw DataError("trajectories disagree on dimension");
  }
  if (kind == ModelKind::kCycle && d != 2) {
    throw DataError("limit-cycle data must be planar, got dimension " + std::to_string(d));
  }

  std::vector<Trajectory> work = trajectories;
  VectorXd offset(d);
  if (policy == NormalizationPolicy::kFinalPoint) {
    VectorXd common = VectorXd::Zero(d);
    for (const auto& t : work) common += t.points.back();
    common /= static_cast<double>(work.size());

    double radius = 0.0;
    for (const auto& t : work) {
      for (const auto& p : t.points) radius = std::max(radius, (p - common).norm());
    }
    std::string offenders;
    for (std::size_t i = 0; i < work.size(); ++i) {
      if ((work[i].points.back() - common).norm() > kEndpointTolerance * radius) {
        offenders += (offenders.empty() ? "" : ", ") + std::to_string(i);
      }
    }
    if (!offenders.empty()) {
      throw DataError("final points disagree by more than 5% of the data radius: trajectories " + offenders);
    }
    for (auto& t : work) {
      const VectorXd shift = common - t.points.back();
      for (auto& p : t.points) p += shift;
      t.points.back() = common;
    }
    offset = common;
  } else {
    VectorXd lo = work.front().points.front();
    VectorXd hi = lo;
    for (const auto& t : work) {
      for (const auto& p : t.points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
      }
    }
    offset = 0.5 * (lo + hi);
  }

  VectorXd scale = VectorXd::Zero(d);
  for (const auto& t : work) {
    for (const auto& p : t.points) scale = scale.cwiseMax((p - offset).cwiseAbs());
  }
  for (int j = 0; j < d; ++j) {
    if (!(scale[j] > 0.0)) scale[j] = 1.0;
  }

  DemonstrationSet set;
  set.kind = kind;
  set.normalization = AffineMap{scale, offset};
  for (const auto& t : work) set.trajectories.push_back(normalize_trajectory(t, set.normalization));
  if (policy == NormalizationPolicy::kFinalPoint) {
    for (auto& t : set.trajectories) t.points.back().setZero();
  }
  return set;
}

// ---------------------------------------------------------------------------
// Synthetic datasets

P2pShape parse_p2p_shape(const std::string& name) {
  if (name == "s_curve") return P2pShape::kSCurve;
  if (name == "sine") return P2pShape::kSine;
  throw ConfigError("unknown point-to-point shape '" + name + "' (expected s_curve or sine)");
}

CycleShape parse_cycle_shape(const std::string& name) {
  if (name == "ellipse") return CycleShape::kEllipse;
  if (name == "limacon") return CycleShape::kLimacon;
  throw ConfigError("unknown cycle shape '" + name + "' (expected ellipse or limacon)");
}

std::vector<Trajectory> synth_p2p_raw(P2pShape shape, int n_demos, std::uint64_t noise_seed,
                                      const P2pSynthOptions& opt) {
  if (n_demos < 1) throw ConfigError("need at least one demonstration");
  if (opt.samples < 2 || !(opt.duration > 0.0)) throw ConfigError("invalid sampling options");

  Rng rng(noise_seed);
  const double pi = std::numbers::pi;
  const double waves = shape == P2pShape::kSCurve ? 2.0 : 1.0;
  const double dt = opt.duration / static_cast<double>(opt.samples - 1);
  std::vector<Trajectory> out;
  for (int i = 0; i < n_demos; ++i) {
    const double spread = n_demos > 1 ? (static_cast<double>(i) - 0.5 * (n_demos - 1)) / (n_demos - 1) : 0.0;
    const double length = opt.length * (1.0 + 0.2 * spread) * (1.0 + opt.noise * rng.normal());
    const double amp = opt.amplitude * (1.0 + 0.3 * spread) * (1.0 + opt.noise * rng.normal());

    Trajectory t;
    t.dt = dt;
    for (int k = 0; k < opt.samples; ++k) {
      const double u = static_cast<double>(k) / (opt.samples - 1);
      const double rem = 1.0 - u;
      const double phase = 1.0 - rem * rem * rem;
      const double phase_rate = 3.0 * rem * rem / opt.duration;
      const double q = 1.0 - phase;  // 1 at the start, 0 at the target
      VectorXd x(2);
      VectorXd v(2);
      x << -length * q, amp * std::sin(waves * pi * q);
      // d/dt through q = 1 - phase
      v << length * phase_rate, -amp * waves * pi * std::cos(waves * pi * q) * phase_rate;
      t.points.push_back(x);
      t.velocities.push_back(v);
    }
    out.push_back(std::move(t));
  }
  return out;
}

DemonstrationSet synth_p2p(P2pShape shape, int n_demos, std::uint64_t noise_seed, const P2pSynthOptions& options) {
  return normalize(synth_p2p_raw(shape, n_demos, noise_seed, options), ModelKind::kPointToPoint);
}

Trajectory synth_cycle_raw(CycleShape shape, int n_periods, std::uint64_t noise_seed,
                           const CycleSynthOptions& opt) {
  if (n_periods < 1) throw ConfigError("need at least one period");
  if (opt.samples_per_period < 3) throw ConfigError("need at least 3 samples per period");
  if (shape == CycleShape::kLimacon && !(opt.limacon_a > opt.limacon_b)) {
    throw DataError("limacon needs a > b to be a simple closed curve");
  }

  Rng rng(noise_seed);
  const double two_pi = 2.0 * std::numbers::pi;
  const int n = n_periods * opt.samples_per_period + 1;
  Trajectory t;
  t.dt = two_pi / opt.samples_per_period;
  for (int k = 0; k < n; ++k) {
    // Reduce the angle per period so closure is exact at integer periods.
    const double phi = two_pi * static_cast<double>(k % opt.samples_per_period) / opt.samples_per_period;
    VectorXd x(2);
    VectorXd v(2);
    if (shape == CycleShape::kEllipse) {
      x << 2.0 * std::cos(phi), std::sin(phi);
      v << -2.0 * std::sin(phi), std::cos(phi);
      x *= opt.scale;
      v *= opt.scale;
    } else {
      const double r = opt.limacon_a + opt.limacon_b * std::cos(phi);
      const double dr = -opt.limacon_b * std::sin(phi);
      x << r * std::cos(phi), r * std::sin(phi);
      v << dr * std::cos(phi) - r * std::sin(phi), dr * std::sin(phi) + r * std::cos(phi);
    }
    if (opt.noise > 0.0) {
      for (int j = 0; j < 2; ++j) x[j] += opt.noise * rng.normal();
      for (int j = 0; j < 2; ++j) v[j] += opt.noise * rng.normal();
    }
    t.points.push_back(x);
    t.velocities.push_back(v);
  }
  return t;
}

DemonstrationSet synth_cycle(CycleShape shape, int n_periods, std::uint64_t noise_seed,
                             const CycleSynthOptions& options) {
  return normalize({synth_cycle_raw(shape, n_periods, noise_seed, options)}, ModelKind::kCycle);
}

// ---------------------------------------------------------------------------
// Manifest

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    DatasetManifest m;
    m.format_version = j.at("format_version").get<int>();
    if (m.format_version != kManifestFormatVersion) {
      throw DataError("unsupported manifest format_version " + std::to_string(m.format_version));
    }
    m.kind = parse_model_kind(j.at("kind").get<std::string>());
    m.normalization = j.contains("normalization") ? parse_normalization(j.at("normalization").get<std::string>())
                                                  : default_normalization(m.kind);
    m.trajectories = j.at("trajectories").get<std::vector<std::string>>();
    if (m.trajectories.empty()) throw DataError("manifest lists no trajectories");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("manifest " + path.string() + ": " + e.what());
  }
}

void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest) {
  nlohmann::ordered_json j;
  j["format_version"] = manifest.format_version;
  j["kind"] = to_string(manifest.kind);
  j["normalization"] = to_string(manifest.normalization);
  j["trajectories"] = manifest.trajectories;
  std::ofstream out(path);
  if (!out) throw DataError("cannot write manifest " + path.string());
  out << j.dump(2) << "\n";
}

DemonstrationSet load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest m = load_manifest(manifest_path);
  const auto base = manifest_path.parent_path();
  std::vector<Trajectory> trajs;
  for (const auto& rel : m.trajectories) {
    const std::filesystem::path p(rel);
    trajs.push_back(ingest_csv(p.is_absolute() ? p : base / p));
  }
  return normalize(trajs, m.kind, m.normalization);
}

}  // namespace lyapds
