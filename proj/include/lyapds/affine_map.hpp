#pragma once

#include <Eigen/Dense>

namespace lyapds {

/// Per-dimension map into normalized coordinates:
///   x_norm = (x - offset) / scale,   v_norm = v / scale.
struct AffineMap {
  Eigen::VectorXd scale;
  Eigen::VectorXd offset;

  static AffineMap identity(Eigen::Index dim) {
    return {Eigen::VectorXd::Ones(dim), Eigen::VectorXd::Zero(dim)};
  }

  Eigen::Index dim() const { return scale.size(); }

  Eigen::VectorXd to_normalized(const Eigen::VectorXd& x) const {
    return (x - offset).cwiseQuotient(scale);
  }
  Eigen::VectorXd from_normalized(const Eigen::VectorXd& x) const {
    return x.cwiseProduct(scale) + offset;
  }
  Eigen::VectorXd velocity_to_normalized(const Eigen::VectorXd& v) const { return v.cwiseQuotient(scale); }
  Eigen::VectorXd velocity_from_normalized(const Eigen::VectorXd& v) const { return v.cwiseProduct(scale); }

  friend bool operator==(const AffineMap& a, const AffineMap& b) {
    return a.scale == b.scale && a.offset == b.offset;
  }
};

}  // namespace lyapds
