#pragma once

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "lyapds/data.hpp"
#include "lyapds/model.hpp"

namespace lyapds {

/// Planar rectangle in original units.
struct Bounds {
  double x_min = -1.0;
  double x_max = 1.0;
  double y_min = -1.0;
  double y_max = 1.0;

  void validate() const;
};

/// "xmin,xmax,ymin,ymax".
Bounds parse_bounds(const std::string& text);

/// The normalized square [-margin, margin]^2 mapped back to original units.
Bounds default_bounds(const StableDsModel& model, double margin = 1.1);

struct FieldRow {
  Eigen::Vector2d x;
  Eigen::Vector2d v;
  double lyapunov = 0.0;
  std::optional<double> t_value;  // cycles only
};

struct FieldGrid {
  bool has_t = false;
  std::vector<FieldRow> rows;

  /// Header `x1,x2,dx1,dx2,V[,T]`.
  std::string to_csv() const;
};

/// n x n grid (x fastest) of model velocities in original units, the Lyapunov
/// value and, for cycles, the contraction test T of the ungated field.
FieldGrid field_grid(const StableDsModel& model, int n, const Bounds& bounds);

FieldGrid parse_field_csv(const std::string& text);

struct PlotInput {
  std::vector<Trajectory> demonstrations;  // dotted
  std::vector<Trajectory> reproductions;   // solid
  std::optional<FieldGrid> field;          // one arrow per row
  std::optional<Eigen::Vector2d> target;   // dot marker
};

struct PlotStyle {
  int width = 640;
  int height = 640;
  double margin = 0.05;  // fraction of the data extent
  std::string demo_color = "#555555";
  std::string repro_color = "#d62728";
  std::string arrow_color = "#7f9fbf";
};

/// Standalone SVG. Output depends only on the inputs; throws ContractError for
/// non-planar data.
std::string plot_svg(const PlotInput& input, const PlotStyle& style = {});

}  // namespace lyapds
