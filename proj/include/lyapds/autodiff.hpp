#pragma once

// Reverse-mode automatic differentiation over small dense tensors.
//
// A Tape records primitive operations on scalars (1x1), column vectors (d x 1)
// and matrices. Every node's inputs have smaller ids than the node itself, so a
// single reverse sweep in id order computes all adjoints.
//
// Input gradients (d out / d x) are emitted back onto the tape as ordinary
// primitives by input_gradient(). The result is therefore itself a tape value
// and one subsequent backward() pass differentiates losses that contain it.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace lyapds::ad {

struct Shape {
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  bool is_scalar() const { return rows == 1 && cols == 1; }
  bool is_vector() const { return cols == 1; }
  Eigen::Index size() const { return rows * cols; }
  friend bool operator==(const Shape&, const Shape&) = default;
};

std::string to_string(const Shape& s);

/// One named block of a flat parameter array. Matrices are stored row-major.
struct Segment {
  std::string name;
  std::size_t offset = 0;
  Eigen::Index rows = 0;
  Eigen::Index cols = 0;

  std::size_t size() const { return static_cast<std::size_t>(rows * cols); }
};

/// Flat parameter storage with a segment layout. Segments are disjoint and
/// cover the array in order.
class ParamVector {
 public:
  ParamVector() = default;

  /// Appends a zero-initialized segment and returns its index.
  std::size_t add_segment(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return values_.size(); }
  const std::vector<Segment>& layout() const { return layout_; }
  const Segment& segment(std::size_t i) const { return layout_.at(i); }

  std::vector<double>& values() { return values_; }
  const std::vector<double>& values() const { return values_; }

  double& operator[](std::size_t i) { return values_[i]; }
  double operator[](std::size_t i) const { return values_[i]; }

  Eigen::MatrixXd matrix(std::size_t segment_index) const;

  /// Replaces the values; throws ConfigError if the length differs.
  void assign(std::vector<double> values);

  /// Throws ConfigError unless the layout is contiguous and covers values().
  void validate() const;

  friend bool operator==(const ParamVector& a, const ParamVector& b) {
    return a.values_ == b.values_ && a.layout_.size() == b.layout_.size();
  }

 private:
  std::vector<double> values_;
  std::vector<Segment> layout_;
};

enum class Op : std::uint8_t {
  kConstant,
  kParameter,
  kAdd,
  kSub,
  kMul,       // element-wise, equal shapes
  kDiv,       // element-wise, equal shapes
  kMatVec,    // M v
  kMatVecT,   // M^T v
  kOuter,     // u v^T
  kDot,       // u . v -> scalar
  kScale,     // scalar * tensor
  kSquare,
  kSqrt,
  kTanh,
  kSoftplus,
  kSigmoid,
  kRelu,
  kSum,       // tensor -> scalar
  kNeg,
};

const char* op_name(Op op);

class Tape;

/// Handle to a tape node. Cheap to copy; valid while its tape lives.
class Value {
 public:
  Value() = default;

  Tape* tape() const { return tape_; }
  int id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

  const Eigen::MatrixXd& value() const;
  Shape shape() const;
  /// Forward value of a 1x1 node.
  double scalar() const;
  Eigen::VectorXd vector() const;

 private:
  friend class Tape;
  friend Value input_gradient(Value out, Value x);
  Value(Tape* tape, int id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  int id_ = -1;
};

/// Parameter gradients keyed by the ParamVector they belong to.
class Gradients {
 public:
  /// Gradient in the layout of `p`; all zero if `p` was unreachable.
  std::vector<double> of(const ParamVector& p) const;

 private:
  friend class Tape;
  std::unordered_map<const ParamVector*, std::vector<double>> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Value constant(Eigen::MatrixXd v);
  Value constant(double v);
  Value constant(const Eigen::VectorXd& v);
  /// Leaf bound to one segment of `p`; `p` must outlive backward().
  Value parameter(const ParamVector& p, std::size_t segment_index);

  /// Appends a primitive node after shape and domain checks.
  Value record(Op op, Value lhs, Value rhs = {});

  std::size_t size() const { return nodes_.size(); }
  const Eigen::MatrixXd& value(int id) const { return nodes_[static_cast<std::size_t>(id)].value; }
  Op op(int id) const { return nodes_[static_cast<std::size_t>(id)].op; }

  /// Reverse sweep from a scalar loss. Throws ContractError for non-scalar loss.
  Gradients backward(Value loss) const;

 private:
  friend Value input_gradient(Value out, Value x);

  struct Node {
    Op op;
    int lhs = -1;
    int rhs = -1;
    Eigen::MatrixXd value;
    const ParamVector* param = nullptr;
    std::size_t segment = 0;
  };

  Value push(Node node);
  void check_same_tape(const Value& v) const;

  std::deque<Node> nodes_;
};

// Primitive builders. All operands must live on the same tape.
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value mul(Value a, Value b);
Value div(Value a, Value b);
Value matvec(Value m, Value v);
Value matvec_t(Value m, Value v);
Value outer(Value u, Value v);
Value dot(Value a, Value b);
Value scale(Value s, Value t);
Value square(Value a);
Value sqrt(Value a);
Value tanh(Value a);
Value softplus(Value a);
Value sigmoid(Value a);
Value relu(Value a);
Value sum(Value a);
Value neg(Value a);

inline Value operator+(Value a, Value b) { return add(a, b); }
inline Value operator-(Value a, Value b) { return sub(a, b); }
inline Value operator-(Value a) { return neg(a); }

/// scale() with a literal scalar factor.
Value scale(double s, Value t);

/// Gradient of the scalar `out` with respect to `x`, emitted as primitives on
/// the same tape. Nodes that do not depend on `x` are treated as constants of
/// the expression; their own dependence on parameters is preserved.
Value input_gradient(Value out, Value x);

/// Builds `net(x)` on the tape of `x` and returns its input gradient.
Value input_gradient(const std::function<Value(Value)>& net, Value x);

/// Central-difference Jacobian J[i][j] = d field_i / d x_j. Not tape-recorded.
using FieldFn = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
Eigen::MatrixXd jacobian_fd(const FieldFn& field, const Eigen::VectorXd& x, double h);

/// Numerically stable softplus for plain doubles.
double softplus(double z);
double sigmoid(double z);

struct GradcheckReport {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  std::size_t checked = 0;
  bool passed = false;
};

/// Builds a scalar loss on a fresh tape from the current parameter values.
using LossBuilder = std::function<Value(Tape&)>;

/// Compares backward() against central differences, coordinate by coordinate.
/// Relative error is |analytic - numeric| / max(|analytic|, |numeric|, floor)
/// with floor = 1e-4 * max(1, |loss|). If `coords` is non-empty only the listed
/// (param index, coordinate) pairs are checked.
GradcheckReport gradcheck(const LossBuilder& builder, std::span<ParamVector* const> params,
                          double tol, double h = 1e-6,
                          std::span<const std::pair<std::size_t, std::size_t>> coords = {});

}  // namespace lyapds::ad
