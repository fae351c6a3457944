#include "lyapds/export.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "lyapds/config.hpp"
#include "lyapds/cycle_field.hpp"
#include "lyapds/errors.hpp"

namespace lyapds {

namespace {

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

double parse_number(const std::string& s, const std::string& context) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    while (used < s.size() && std::isspace(static_cast<unsigned char>(s[used]))) ++used;
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(context + ": '" + s + "' is not a number");
  }
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void Bounds::validate() const {
  if (!(std::isfinite(x_min) && std::isfinite(x_max) && std::isfinite(y_min) && std::isfinite(y_max)) ||
      !(x_max > x_min) || !(y_max > y_min)) {
    throw ContractError("bounds need finite x_min < x_max and y_min < y_max");
  }
}

Bounds parse_bounds(const std::string& text) {
  const auto parts = split(text, ',');
  if (parts.size() != 4) throw ConfigError("bounds must be 'xmin,xmax,ymin,ymax'");
  Bounds b;
  try {
    b = {std::stod(parts[0]), std::stod(parts[1]), std::stod(parts[2]), std::stod(parts[3])};
  } catch (const std::exception&) {
    throw ConfigError("bounds must be four numbers, got '" + text + "'");
  }
  try {
    b.validate();
  } catch (const ContractError& e) {
    throw ConfigError(e.what());
  }
  return b;
}

Bounds default_bounds(const StableDsModel& model, double margin) {
  if (model.dim != 2) throw ContractError("field export needs a planar model");
  const Eigen::VectorXd lo = model.normalization.from_normalized(Eigen::Vector2d(-margin, -margin));
  const Eigen::VectorXd hi = model.normalization.from_normalized(Eigen::Vector2d(margin, margin));
  return {lo[0], hi[0], lo[1], hi[1]};
}

std::string FieldGrid::to_csv() const {
  std::string out = has_t ? "x1,x2,dx1,dx2,V,T\n" : "x1,x2,dx1,dx2,V\n";
  for (const auto& r : rows) {
    out += format_double(r.x[0]) + "," + format_double(r.x[1]) + "," + format_double(r.v[0]) + "," +
           format_double(r.v[1]) + "," + format_double(r.lyapunov);
    if (has_t) out += "," + format_double(r.t_value.value_or(0.0));
    out += "\n";
  }
  return out;
}

FieldGrid field_grid(const StableDsModel& model, int n, const Bounds& bounds) {
  if (n < 2) throw ContractError("field grid resolution must be at least 2");
  if (model.dim != 2) throw ContractError("field export needs a planar model");
  bounds.validate();
  FieldGrid grid;
  grid.has_t = model.kind == ModelKind::kCycle;
  grid.rows.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  const AffineMap& map = model.normalization;
  for (int j = 0; j < n; ++j) {
    const double y = bounds.y_min + (bounds.y_max - bounds.y_min) * j / (n - 1);
    for (int i = 0; i < n; ++i) {
      const double x = bounds.x_min + (bounds.x_max - bounds.x_min) * i / (n - 1);
      const Eigen::Vector2d p(x, y);
      const Eigen::VectorXd z = map.to_normalized(p);
      FieldRow row;
      row.x = p;
      row.v = map.velocity_from_normalized(velocity(model, z));
      row.lyapunov = lyapunov(model, z);
      if (grid.has_t) row.t_value = cycle::gate_report(model, z).t_value;
      grid.rows.push_back(row);
    }
  }
  return grid;
}

FieldGrid parse_field_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty field CSV");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  FieldGrid grid;
  if (line == "x1,x2,dx1,dx2,V,T") {
    grid.has_t = true;
  } else if (line != "x1,x2,dx1,dx2,V") {
    throw DataError("field CSV header must be x1,x2,dx1,dx2,V[,T]");
  }
  const std::size_t cols = grid.has_t ? 6 : 5;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != cols) throw DataError("field CSV row " + std::to_string(row) + " has the wrong column count");
    const std::string ctx = "field CSV row " + std::to_string(row);
    FieldRow r;
    r.x = {parse_number(f[0], ctx), parse_number(f[1], ctx)};
    r.v = {parse_number(f[2], ctx), parse_number(f[3], ctx)};
    r.lyapunov = parse_number(f[4], ctx);
    if (grid.has_t) r.t_value = parse_number(f[5], ctx);
    grid.rows.push_back(r);
  }
  return grid;
}

std::string plot_svg(const PlotInput& input, const PlotStyle& style) {
  for (const auto* set : {&input.demonstrations, &input.reproductions}) {
    for (const auto& t : *set) {
      if (t.dim() != 2) throw ContractError("plots need planar trajectories, got dimension " + std::to_string(t.dim()));
    }
  }

  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  auto extend = [&](double x, double y) {
    x_lo = std::min(x_lo, x);
    x_hi = std::max(x_hi, x);
    y_lo = std::min(y_lo, y);
    y_hi = std::max(y_hi, y);
  };
  for (const auto* set : {&input.demonstrations, &input.reproductions}) {
    for (const auto& t : *set) {
      for (const auto& p : t.points) extend(p[0], p[1]);
    }
  }
  if (input.field) {
    for (const auto& r : input.field->rows) extend(r.x[0], r.x[1]);
  }
  if (input.target) extend((*input.target)[0], (*input.target)[1]);
  if (!std::isfinite(x_lo)) {
    x_lo = y_lo = -1.0;
    x_hi = y_hi = 1.0;
  }
  // Equal aspect ratio, centered.
  double span = std::max({x_hi - x_lo, y_hi - y_lo, 1e-12});
  span *= 1.0 + 2.0 * style.margin;
  const double cx = 0.5 * (x_lo + x_hi);
  const double cy = 0.5 * (y_lo + y_hi);
  const double px = std::min(style.width, style.height) / span;
  auto sx = [&](double x) { return 0.5 * style.width + (x - cx) * px; };
  auto sy = [&](double y) { return 0.5 * style.height - (y - cy) * px; };

  std::ostringstream svg;
  svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << style.width << "\" height=\"" << style.height
      << "\" viewBox=\"0 0 " << style.width << " " << style.height << "\">\n"
      << "<defs><marker id=\"head\" viewBox=\"0 0 10 10\" refX=\"9\" refY=\"5\" markerWidth=\"4\" "
         "markerHeight=\"4\" orient=\"auto\"><path d=\"M0,0 L10,5 L0,10 z\" fill=\""
      << style.arrow_color << "\"/></marker></defs>\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  if (input.field && !input.field->rows.empty()) {
    const auto& rows = input.field->rows;
    double vmax = 0.0;
    for (const auto& r : rows) vmax = std::max(vmax, r.v.norm());
    const double cell = span / std::max(2.0, std::sqrt(static_cast<double>(rows.size())));
    const double k = vmax > 0.0 ? 0.8 * cell / vmax : 0.0;
    svg << "<g stroke=\"" << style.arrow_color << "\" stroke-width=\"1\" marker-end=\"url(#head)\">\n";
    for (const auto& r : rows) {
      svg << "<line x1=\"" << num(sx(r.x[0])) << "\" y1=\"" << num(sy(r.x[1])) << "\" x2=\""
          << num(sx(r.x[0] + k * r.v[0])) << "\" y2=\"" << num(sy(r.x[1] + k * r.v[1])) << "\"/>\n";
    }
    svg << "</g>\n";
  }

  auto polyline = [&](const Trajectory& t, const std::string& color, const char* dash) {
    svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"";
    if (dash) svg << " stroke-dasharray=\"" << dash << "\"";
    svg << " points=\"";
    for (std::size_t i = 0; i < t.points.size(); ++i) {
      if (i) svg << ' ';
      svg << num(sx(t.points[i][0])) << ',' << num(sy(t.points[i][1]));
    }
    svg << "\"/>\n";
  };
  for (const auto& t : input.demonstrations) polyline(t, style.demo_color, "2,4");
  for (const auto& t : input.reproductions) polyline(t, style.repro_color, nullptr);

  if (input.target) {
    svg << "<circle cx=\"" << num(sx((*input.target)[0])) << "\" cy=\"" << num(sy((*input.target)[1]))
        << "\" r=\"5\" fill=\"black\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lyapds
