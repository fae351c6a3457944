#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "lyapds/affine_map.hpp"
#include "lyapds/network.hpp"

namespace lyapds {

/// Uniformly sampled positions and velocities of one demonstration or rollout.
struct Trajectory {
  double dt = 0.0;
  std::vector<Eigen::VectorXd> points;
  std::vector<Eigen::VectorXd> velocities;

  std::size_t size() const { return points.size(); }
  int dim() const { return points.empty() ? 0 : static_cast<int>(points.front().size()); }
  double duration() const { return dt * static_cast<double>(points.size() > 0 ? points.size() - 1 : 0); }

  /// Throws DataError unless >= 2 points, dt > 0, equal lengths, finite entries.
  void validate() const;
};

/// How a CSV's time step is determined.
struct DtPolicy {
  std::optional<double> fixed_dt;  // ignore the t column spacing
  double tolerance = 0.01;         // allowed relative deviation of each step
};

/// Reads `t,x1..xd[,v1..vd]`. Missing velocities are central differences
/// (one-sided at the ends).
Trajectory ingest_csv(const std::filesystem::path& path, const DtPolicy& policy = {});
Trajectory parse_csv(const std::string& text, const DtPolicy& policy = {});

/// Central differences at interior points, one-sided at the two ends.
std::vector<Eigen::VectorXd> finite_difference_velocities(const std::vector<Eigen::VectorXd>& points,
                                                          double dt);

std::string to_csv(const Trajectory& traj, bool with_velocities = true);
void write_csv(const std::filesystem::path& path, const Trajectory& traj, bool with_velocities = true);

enum class NormalizationPolicy {
  kFinalPoint,   // common final point to the origin (point-to-point)
  kBoxCenter,    // bounding-box center to the origin (cycles)
};

std::string to_string(NormalizationPolicy policy);
NormalizationPolicy parse_normalization(const std::string& name);
NormalizationPolicy default_normalization(ModelKind kind);

/// Demonstrations in normalized coordinates plus the map back to the original units.
struct DemonstrationSet {
  ModelKind kind = ModelKind::kPointToPoint;
  AffineMap normalization;
  std::vector<Trajectory> trajectories;

  int dim() const { return normalization.dim() > 0 ? static_cast<int>(normalization.dim()) : 0; }
  std::size_t sample_count() const;

  /// Flattened (x, xdot) training pairs in trajectory order.
  std::vector<std::pair<Eigen::VectorXd, Eigen::VectorXd>> samples() const;

  /// Trajectory `i` in original units.
  Trajectory denormalized(std::size_t i) const;
};

/// Endpoint tolerance (fraction of the data radius) before rejection.
inline constexpr double kEndpointTolerance = 0.05;

/// Maps trajectories into [-1, 1]^d. With kFinalPoint each trajectory is first
/// shifted onto the common (mean) final point, which becomes the origin.
DemonstrationSet normalize(const std::vector<Trajectory>& trajectories, ModelKind kind,
                           NormalizationPolicy policy);
inline DemonstrationSet normalize(const std::vector<Trajectory>& trajectories, ModelKind kind) {
  return normalize(trajectories, kind, default_normalization(kind));
}

Trajectory denormalize(const Trajectory& normalized, const AffineMap& map);
Trajectory normalize_trajectory(const Trajectory& original, const AffineMap& map);

enum class P2pShape { kSCurve, kSine };
enum class CycleShape { kEllipse, kLimacon };

P2pShape parse_p2p_shape(const std::string& name);
CycleShape parse_cycle_shape(const std::string& name);

struct P2pSynthOptions {
  double noise = 0.02;     // relative jitter of per-demo length and amplitude
  int samples = 200;
  double duration = 4.0;   // seconds
  double length = 40.0;    // mm along x1
  double amplitude = 15.0; // mm along x2
};

/// Closed-form planar curves ending at the origin. The phase decelerates as
/// p(u) = 1 - (1 - u)^3, so velocity vanishes only at the target.
std::vector<Trajectory> synth_p2p_raw(P2pShape shape, int n_demos, std::uint64_t noise_seed,
                                      const P2pSynthOptions& options = {});
DemonstrationSet synth_p2p(P2pShape shape, int n_demos, std::uint64_t noise_seed,
                           const P2pSynthOptions& options = {});

struct CycleSynthOptions {
  int samples_per_period = 100;
  double noise = 0.0;      // Gaussian position/velocity noise (original units)
  double scale = 1.0;      // ellipse (2 cos t, sin t) * scale
  double limacon_a = 2.0;
  double limacon_b = 1.0;
};

/// Closed curves traversed n_periods times at unit angular rate (period 2 pi).
Trajectory synth_cycle_raw(CycleShape shape, int n_periods, std::uint64_t noise_seed,
                           const CycleSynthOptions& options = {});
DemonstrationSet synth_cycle(CycleShape shape, int n_periods, std::uint64_t noise_seed,
                             const CycleSynthOptions& options = {});

/// JSON dataset manifest: member CSVs (relative to the manifest), kind and
/// normalization policy.
struct DatasetManifest {
  int format_version = 1;
  ModelKind kind = ModelKind::kPointToPoint;
  NormalizationPolicy normalization = NormalizationPolicy::kFinalPoint;
  std::vector<std::string> trajectories;
};

inline constexpr int kManifestFormatVersion = 1;

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loads and normalizes every member trajectory.
DemonstrationSet load_dataset(const std::filesystem::path& manifest_path);

}  // namespace lyapds
