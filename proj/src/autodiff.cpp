#include "lyapds/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "lyapds/errors.hpp"

namespace lyapds::ad {

using Eigen::MatrixXd;
using RowMajorMap = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>;

std::string to_string(const Shape& s) {
  std::ostringstream os;
  os << s.rows << "x" << s.cols;
  return os.str();
}

double softplus(double z) {
  return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

// ---------------------------------------------------------------------------
// ParamVector

std::size_t ParamVector::add_segment(std::string name, Eigen::Index rows, Eigen::Index cols) {
  if (rows <= 0 || cols <= 0) {
    throw ConfigError("segment '" + name + "' must have positive extents");
  }
  Segment seg{std::move(name), values_.size(), rows, cols};
  values_.resize(values_.size() + seg.size(), 0.0);
  layout_.push_back(std::move(seg));
  return layout_.size() - 1;
}

MatrixXd ParamVector::matrix(std::size_t segment_index) const {
  const Segment& seg = layout_.at(segment_index);
  return RowMajorMap(values_.data() + seg.offset, seg.rows, seg.cols);
}

void ParamVector::assign(std::vector<double> values) {
  if (values.size() != values_.size()) {
    throw ConfigError("parameter length " + std::to_string(values.size()) + " does not match layout " +
                      std::to_string(values_.size()));
  }
  values_ = std::move(values);
}

void ParamVector::validate() const {
  std::size_t expected = 0;
  for (const auto& seg : layout_) {
    if (seg.offset != expected) {
      throw ConfigError("segment '" + seg.name + "' is not contiguous");
    }
    expected += seg.size();
  }
  if (expected != values_.size()) {
    throw ConfigError("layout covers " + std::to_string(expected) + " values, storage holds " +
                      std::to_string(values_.size()));
  }
}

// ---------------------------------------------------------------------------
// Value

const MatrixXd& Value::value() const { return tape_->value(id_); }

Shape Value::shape() const {
  const auto& v = value();
  return {v.rows(), v.cols()};
}

double Value::scalar() const {
  const auto& v = value();
  if (v.size() != 1) {
    throw ContractError("scalar() on a " + to_string(shape()) + " value");
  }
  return v(0, 0);
}

Eigen::VectorXd Value::vector() const {
  const auto& v = value();
  if (v.cols() != 1) {
    throw ContractError("vector() on a " + to_string(shape()) + " value");
  }
  return v.col(0);
}

std::vector<double> Gradients::of(const ParamVector& p) const {
  auto it = grads_.find(&p);
  if (it == grads_.end()) {
    return std::vector<double>(p.size(), 0.0);
  }
  return it->second;
}

const char* op_name(Op op) {
  switch (op) {
    case Op::kConstant: return "constant";
    case Op::kParameter: return "parameter";
    case Op::kAdd: return "add";
    case Op::kSub: return "sub";
    case Op::kMul: return "mul";
    case Op::kDiv: return "div";
    case Op::kMatVec: return "matvec";
    case Op::kMatVecT: return "matvec_t";
    case Op::kOuter: return "outer";
    case Op::kDot: return "dot";
    case Op::kScale: return "scale";
    case Op::kSquare: return "square";
    case Op::kSqrt: return "sqrt";
    case Op::kTanh: return "tanh";
    case Op::kSoftplus: return "softplus";
    case Op::kSigmoid: return "sigmoid";
    case Op::kRelu: return "relu";
    case Op::kSum: return "sum";
    case Op::kNeg: return "neg";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// Tape

Value Tape::push(Node node) {
  if (!node.value.allFinite()) {
    throw NumericError(std::string("non-finite value produced by ") + op_name(node.op) + " at node " +
                       std::to_string(nodes_.size()));
  }
  nodes_.push_back(std::move(node));
  return Value(this, static_cast<int>(nodes_.size() - 1));
}

void Tape::check_same_tape(const Value& v) const {
  if (v.tape_ != this) {
    throw ContractError("operand belongs to a different tape");
  }
}

Value Tape::constant(MatrixXd v) { return push(Node{Op::kConstant, -1, -1, std::move(v)}); }

Value Tape::constant(double v) { return constant(MatrixXd(MatrixXd::Constant(1, 1, v))); }

Value Tape::constant(const Eigen::VectorXd& v) { return constant(MatrixXd(v)); }

Value Tape::parameter(const ParamVector& p, std::size_t segment_index) {
  Node node{Op::kParameter, -1, -1, p.matrix(segment_index)};
  node.param = &p;
  node.segment = segment_index;
  return push(std::move(node));
}

namespace {

[[noreturn]] void shape_error(Op op, const Shape& a, const Shape& b) {
  throw ConfigError(std::string("shape mismatch in ") + op_name(op) + ": " + to_string(a) + " vs " +
                    to_string(b));
}

bool is_binary(Op op) {
  switch (op) {
    case Op::kAdd:
    case Op::kSub:
    case Op::kMul:
    case Op::kDiv:
    case Op::kMatVec:
    case Op::kMatVecT:
    case Op::kOuter:
    case Op::kDot:
    case Op::kScale:
      return true;
    default:
      return false;
  }
}

}  // namespace

Value Tape::record(Op op, Value lhs, Value rhs) {
  if (op == Op::kConstant || op == Op::kParameter) {
    throw ContractError("leaves are created with constant() / parameter()");
  }
  check_same_tape(lhs);
  const MatrixXd& a = lhs.value();
  const Shape sa{a.rows(), a.cols()};

  Node node{op, lhs.id_, -1, {}};
  if (is_binary(op)) {
    check_same_tape(rhs);
    node.rhs = rhs.id_;
    const MatrixXd& b = rhs.value();
    const Shape sb{b.rows(), b.cols()};
    switch (op) {
      case Op::kAdd:
        if (sa != sb) shape_error(op, sa, sb);
        node.value = a + b;
        break;
      case Op::kSub:
        if (sa != sb) shape_error(op, sa, sb);
        node.value = a - b;
        break;
      case Op::kMul:
        if (sa != sb) shape_error(op, sa, sb);
        node.value = a.cwiseProduct(b);
        break;
      case Op::kDiv:
        if (sa != sb) shape_error(op, sa, sb);
        if ((b.array() == 0.0).any()) {
          throw NumericError("division by exact zero at node " + std::to_string(nodes_.size()));
        }
        node.value = a.cwiseQuotient(b);
        break;
      case Op::kMatVec:
        if (!sb.is_vector() || sa.cols != sb.rows) shape_error(op, sa, sb);
        node.value = a * b;
        break;
      case Op::kMatVecT:
        if (!sb.is_vector() || sa.rows != sb.rows) shape_error(op, sa, sb);
        node.value = a.transpose() * b;
        break;
      case Op::kOuter:
        if (!sa.is_vector() || !sb.is_vector()) shape_error(op, sa, sb);
        node.value = a * b.transpose();
        break;
      case Op::kDot:
        if (!sa.is_vector() || sa != sb) shape_error(op, sa, sb);
        node.value = MatrixXd::Constant(1, 1, a.col(0).dot(b.col(0)));
        break;
      case Op::kScale:
        if (!sa.is_scalar()) shape_error(op, sa, sb);
        node.value = a(0, 0) * b;
        break;
      default:
        break;
    }
  } else {
    switch (op) {
      case Op::kSquare:
        node.value = a.array().square().matrix();
        break;
      case Op::kSqrt:
        if ((a.array() < 0.0).any()) {
          throw NumericError("sqrt of a negative value at node " + std::to_string(nodes_.size()));
        }
        node.value = a.array().sqrt().matrix();
        break;
      case Op::kTanh:
        node.value = a.array().tanh().matrix();
        break;
      case Op::kSoftplus:
        node.value = a.unaryExpr([](double z) { return ad::softplus(z); });
        break;
      case Op::kSigmoid:
        node.value = a.unaryExpr([](double z) { return ad::sigmoid(z); });
        break;
      case Op::kRelu:
        node.value = a.cwiseMax(0.0);
        break;
      case Op::kSum:
        node.value = MatrixXd::Constant(1, 1, a.sum());
        break;
      case Op::kNeg:
        node.value = -a;
        break;
      default:
        throw ContractError(std::string("unsupported op ") + op_name(op));
    }
  }
  return push(std::move(node));
}

Gradients Tape::backward(Value loss) const {
  if (loss.tape_ != this) {
    throw ContractError("loss belongs to a different tape");
  }
  if (!loss.shape().is_scalar()) {
    throw ContractError("backward() needs a scalar loss, got " + to_string(loss.shape()));
  }

  const auto n = static_cast<std::size_t>(loss.id_) + 1;
  std::vector<MatrixXd> adj(n);
  std::vector<char> has(n, 0);
  auto acc = [&](int id, const MatrixXd& g) {
    const auto i = static_cast<std::size_t>(id);
    if (has[i]) {
      adj[i] += g;
    } else {
      adj[i] = g;
      has[i] = 1;
    }
  };

  Gradients out;
  adj[n - 1] = MatrixXd::Ones(1, 1);
  has[n - 1] = 1;

  for (std::size_t k = n; k-- > 0;) {
    if (!has[k]) continue;
    const Node& node = nodes_[k];
    const MatrixXd& g = adj[k];
    switch (node.op) {
      case Op::kConstant:
        break;
      case Op::kParameter: {
        auto& grad = out.grads_[node.param];
        if (grad.empty()) grad.assign(node.param->size(), 0.0);
        const Segment& seg = node.param->segment(node.segment);
        for (Eigen::Index r = 0; r < seg.rows; ++r) {
          for (Eigen::Index c = 0; c < seg.cols; ++c) {
            grad[seg.offset + static_cast<std::size_t>(r * seg.cols + c)] += g(r, c);
          }
        }
        break;
      }
      case Op::kAdd:
        acc(node.lhs, g);
        acc(node.rhs, g);
        break;
      case Op::kSub:
        acc(node.lhs, g);
        acc(node.rhs, -g);
        break;
      case Op::kMul:
        acc(node.lhs, g.cwiseProduct(value(node.rhs)));
        acc(node.rhs, g.cwiseProduct(value(node.lhs)));
        break;
      case Op::kDiv: {
        const MatrixXd& b = value(node.rhs);
        acc(node.lhs, g.cwiseQuotient(b));
        acc(node.rhs, -(g.cwiseProduct(node.value)).cwiseQuotient(b));
        break;
      }
      case Op::kMatVec:
        acc(node.lhs, g * value(node.rhs).transpose());
        acc(node.rhs, value(node.lhs).transpose() * g);
        break;
      case Op::kMatVecT:
        acc(node.lhs, value(node.rhs) * g.transpose());
        acc(node.rhs, value(node.lhs) * g);
        break;
      case Op::kOuter:
        acc(node.lhs, g * value(node.rhs));
        acc(node.rhs, g.transpose() * value(node.lhs));
        break;
      case Op::kDot:
        acc(node.lhs, g(0, 0) * value(node.rhs));
        acc(node.rhs, g(0, 0) * value(node.lhs));
        break;
      case Op::kScale: {
        const MatrixXd& t = value(node.rhs);
        acc(node.lhs, MatrixXd::Constant(1, 1, g.cwiseProduct(t).sum()));
        acc(node.rhs, value(node.lhs)(0, 0) * g);
        break;
      }
      case Op::kSquare:
        acc(node.lhs, 2.0 * g.cwiseProduct(value(node.lhs)));
        break;
      case Op::kSqrt:
        acc(node.lhs, (0.5 * g.array() / node.value.array()).matrix());
        break;
      case Op::kTanh:
        acc(node.lhs, (g.array() * (1.0 - node.value.array().square())).matrix());
        break;
      case Op::kSoftplus:
        acc(node.lhs, g.cwiseProduct(value(node.lhs).unaryExpr([](double z) { return ad::sigmoid(z); })));
        break;
      case Op::kSigmoid:
        acc(node.lhs, (g.array() * node.value.array() * (1.0 - node.value.array())).matrix());
        break;
      case Op::kRelu:
        acc(node.lhs, (g.array() * (value(node.lhs).array() > 0.0).cast<double>()).matrix());
        break;
      case Op::kSum: {
        const MatrixXd& a = value(node.lhs);
        acc(node.lhs, MatrixXd::Constant(a.rows(), a.cols(), g(0, 0)));
        break;
      }
      case Op::kNeg:
        acc(node.lhs, -g);
        break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Free builders

Value add(Value a, Value b) { return a.tape()->record(Op::kAdd, a, b); }
Value sub(Value a, Value b) { return a.tape()->record(Op::kSub, a, b); }
Value mul(Value a, Value b) { return a.tape()->record(Op::kMul, a, b); }
Value div(Value a, Value b) { return a.tape()->record(Op::kDiv, a, b); }
Value matvec(Value m, Value v) { return m.tape()->record(Op::kMatVec, m, v); }
Value matvec_t(Value m, Value v) { return m.tape()->record(Op::kMatVecT, m, v); }
Value outer(Value u, Value v) { return u.tape()->record(Op::kOuter, u, v); }
Value dot(Value a, Value b) { return a.tape()->record(Op::kDot, a, b); }
Value scale(Value s, Value t) { return s.tape()->record(Op::kScale, s, t); }
Value scale(double s, Value t) { return scale(t.tape()->constant(s), t); }
Value square(Value a) { return a.tape()->record(Op::kSquare, a); }
Value sqrt(Value a) { return a.tape()->record(Op::kSqrt, a); }
Value tanh(Value a) { return a.tape()->record(Op::kTanh, a); }
Value softplus(Value a) { return a.tape()->record(Op::kSoftplus, a); }
Value sigmoid(Value a) { return a.tape()->record(Op::kSigmoid, a); }
Value relu(Value a) { return a.tape()->record(Op::kRelu, a); }
Value sum(Value a) { return a.tape()->record(Op::kSum, a); }
Value neg(Value a) { return a.tape()->record(Op::kNeg, a); }

// ---------------------------------------------------------------------------
// Input gradient by emitted adjoints

Value input_gradient(Value out, Value x) {
  Tape* tape = out.tape();
  if (tape == nullptr || x.tape() != tape) {
    throw ContractError("input_gradient operands must share a tape");
  }
  if (!out.shape().is_scalar()) {
    throw ContractError("input_gradient needs a scalar output, got " + to_string(out.shape()));
  }
  const int first = x.id();
  const int last = out.id();
  if (last < first) {
    return tape->constant(MatrixXd(MatrixXd::Zero(x.shape().rows, x.shape().cols)));
  }

  // Which nodes in [first, last] depend on x.
  const auto span = static_cast<std::size_t>(last - first + 1);
  std::vector<char> dep(span, 0);
  dep[0] = 1;
  auto depends = [&](int id) { return id >= first && dep[static_cast<std::size_t>(id - first)] != 0; };
  for (int id = first + 1; id <= last; ++id) {
    const auto& node = tape->nodes_[static_cast<std::size_t>(id)];
    dep[static_cast<std::size_t>(id - first)] = (depends(node.lhs) || depends(node.rhs)) ? 1 : 0;
  }
  if (!depends(last)) {
    return tape->constant(MatrixXd(MatrixXd::Zero(x.shape().rows, x.shape().cols)));
  }

  std::vector<Value> adj(span);
  auto acc = [&](int id, auto&& make) {
    if (!depends(id)) return;
    Value contribution = make();
    auto& slot = adj[static_cast<std::size_t>(id - first)];
    slot = slot.valid() ? add(slot, contribution) : contribution;
  };

  adj[span - 1] = tape->constant(1.0);
  for (int id = last; id > first; --id) {
    if (!depends(id)) continue;
    const Value g = adj[static_cast<std::size_t>(id - first)];
    if (!g.valid()) continue;

    // Copy: the deque may grow while we emit but element references stay valid.
    const Op op = tape->nodes_[static_cast<std::size_t>(id)].op;
    const int l = tape->nodes_[static_cast<std::size_t>(id)].lhs;
    const int r = tape->nodes_[static_cast<std::size_t>(id)].rhs;
    const Value A(tape, l);
    const Value B(tape, r);
    const Value O(tape, id);

    switch (op) {
      case Op::kConstant:
      case Op::kParameter:
        break;
      case Op::kAdd:
        acc(l, [&] { return g; });
        acc(r, [&] { return g; });
        break;
      case Op::kSub:
        acc(l, [&] { return g; });
        acc(r, [&] { return neg(g); });
        break;
      case Op::kMul:
        acc(l, [&] { return mul(g, B); });
        acc(r, [&] { return mul(g, A); });
        break;
      case Op::kDiv:
        acc(l, [&] { return div(g, B); });
        acc(r, [&] { return neg(div(mul(g, O), B)); });
        break;
      case Op::kMatVec:
        acc(l, [&] { return outer(g, B); });
        acc(r, [&] { return matvec_t(A, g); });
        break;
      case Op::kMatVecT:
        acc(l, [&] { return outer(B, g); });
        acc(r, [&] { return matvec(A, g); });
        break;
      case Op::kOuter:
        acc(l, [&] { return matvec(g, B); });
        acc(r, [&] { return matvec_t(g, A); });
        break;
      case Op::kDot:
        acc(l, [&] { return scale(g, B); });
        acc(r, [&] { return scale(g, A); });
        break;
      case Op::kScale:
        acc(l, [&] { return sum(mul(g, B)); });
        acc(r, [&] { return scale(A, g); });
        break;
      case Op::kSquare:
        acc(l, [&] { return mul(g, scale(2.0, A)); });
        break;
      case Op::kSqrt:
        acc(l, [&] { return div(g, scale(2.0, O)); });
        break;
      case Op::kTanh:
        acc(l, [&] {
          const Value ones = tape->constant(MatrixXd(MatrixXd::Ones(O.shape().rows, O.shape().cols)));
          return mul(g, sub(ones, square(O)));
        });
        break;
      case Op::kSoftplus:
        acc(l, [&] { return mul(g, sigmoid(A)); });
        break;
      case Op::kSigmoid:
        acc(l, [&] {
          const Value ones = tape->constant(MatrixXd(MatrixXd::Ones(O.shape().rows, O.shape().cols)));
          return mul(g, mul(O, sub(ones, O)));
        });
        break;
      case Op::kRelu:
        acc(l, [&] {
          MatrixXd mask = (A.value().array() > 0.0).cast<double>().matrix();
          return mul(g, tape->constant(std::move(mask)));
        });
        break;
      case Op::kSum:
        acc(l, [&] {
          return scale(g, tape->constant(MatrixXd(MatrixXd::Ones(A.shape().rows, A.shape().cols))));
        });
        break;
      case Op::kNeg:
        acc(l, [&] { return neg(g); });
        break;
    }
  }
  const Value result = adj[0];
  return result.valid() ? result : tape->constant(MatrixXd(MatrixXd::Zero(x.shape().rows, x.shape().cols)));
}

Value input_gradient(const std::function<Value(Value)>& net, Value x) {
  return input_gradient(net(x), x);
}

// ---------------------------------------------------------------------------
// Finite differences

MatrixXd jacobian_fd(const FieldFn& field, const Eigen::VectorXd& x, double h) {
  if (!(h > 0.0)) {
    throw ConfigError("jacobian_fd step must be positive");
  }
  const Eigen::Index d = x.size();
  MatrixXd jac;
  Eigen::VectorXd xp = x;
  for (Eigen::Index j = 0; j < d; ++j) {
    xp[j] = x[j] + h;
    const Eigen::VectorXd fp = field(xp);
    xp[j] = x[j] - h;
    const Eigen::VectorXd fm = field(xp);
    xp[j] = x[j];
    if (j == 0) jac.resize(fp.size(), d);
    jac.col(j) = (fp - fm) / (2.0 * h);
  }
  return jac;
}

GradcheckReport gradcheck(const LossBuilder& builder, std::span<ParamVector* const> params, double tol,
                          double h, std::span<const std::pair<std::size_t, std::size_t>> coords) {
  Tape tape;
  const Value loss = builder(tape);
  const double loss0 = loss.scalar();
  const Gradients grads = tape.backward(loss);

  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (ParamVector* p : params) analytic.push_back(grads.of(*p));

  auto eval = [&] {
    Tape t;
    return builder(t).scalar();
  };

  const double floor = 1e-4 * std::max(1.0, std::abs(loss0));
  GradcheckReport report;
  auto check = [&](std::size_t pi, std::size_t i) {
    double& theta = (*params[pi])[i];
    const double saved = theta;
    theta = saved + h;
    const double lp = eval();
    theta = saved - h;
    const double lm = eval();
    theta = saved;
    const double numeric = (lp - lm) / (2.0 * h);
    const double a = analytic[pi][i];
    const double denom = std::max({std::abs(a), std::abs(numeric), floor});
    const double rel = std::abs(a - numeric) / denom;
    if (report.checked == 0 || rel > report.max_rel_error) {
      report.max_rel_error = rel;
      report.worst_param = pi;
      report.worst_index = i;
    }
    ++report.checked;
  };

  if (coords.empty()) {
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
      for (std::size_t i = 0; i < params[pi]->size(); ++i) check(pi, i);
    }
  } else {
    for (const auto& [pi, i] : coords) check(pi, i);
  }
  report.passed = report.max_rel_error < tol;
  return report;
}

}  // namespace lyapds::ad
