#pragma once

#include <deque>
#include <functional>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace neurasr::ad {

using Matrix = Eigen::MatrixXd;

/// Learnable tensor owned by a model. The tape never stores references to
/// parameters beyond one recording; gradients accumulate into `grad`.
struct Parameter {
  std::string name;
  Matrix value;
  Matrix grad;

  Parameter() = default;
  Parameter(std::string n, Matrix v)
      : name(std::move(n)), value(std::move(v)), grad(Matrix::Zero(value.rows(), value.cols())) {}

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

class Tape;

/// Handle to a node recorded on a Tape.
class Var {
 public:
  Var() = default;

  const Matrix& value() const;
  /// Gradient after Tape::backward; zero if nothing flowed into this node.
  Matrix grad() const;
  double scalar() const;
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Eigen::Index size() const { return value().size(); }

  Tape* tape() const { return tape_; }
  std::size_t id() const { return id_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Records a computation for one reverse pass. Single threaded, single use:
/// backward() may run once per recording.
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, std::size_t self)>;

  /// With record == false no backward closures are kept (inference).
  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Matrix value);
  Var variable(Matrix value);
  Var param(Parameter& p);

  /// Reverse sweep from a scalar loss. Throws ArgumentError for non-scalar
  /// losses and StateError when called a second time.
  void backward(const Var& loss);

  bool recording() const { return record_; }
  bool consumed() const { return consumed_; }
  std::size_t size() const { return nodes_.size(); }

  // Op-author interface.
  Var push(Matrix value, bool requires_grad, BackwardFn fn);
  const Matrix& value_of(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  /// Lazily zero-initialized gradient buffer.
  Matrix& grad_of(std::size_t id);
  bool has_grad(std::size_t id) const { return nodes_[id].has_grad; }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    Parameter* param = nullptr;
  };
  std::deque<Node> nodes_;
  bool record_ = true;
  bool consumed_ = false;
};

// Elementwise and linear-algebra ops. Shapes are checked; mismatches throw
// ArgumentError. All ops require operands from the same tape.
Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
/// Adds column vector v to every column of m.
Var add_colwise(const Var& m, const Var& v);
Var scale(const Var& a, double s);
/// alpha * a + beta, elementwise.
Var affine(const Var& a, double alpha, double beta);
Var sigmoid(const Var& a);
Var tanh(const Var& a);
Var log(const Var& a);
Var sum(const Var& a);
/// Sum of scalar nodes.
Var add_n(const std::vector<Var>& scalars);
Var concat_rows(const std::vector<Var>& parts);
/// Concatenates column vectors (or matrices) left to right.
Var hstack(const std::vector<Var>& columns);
Var column(const Var& m, Eigen::Index j);
Var element(const Var& a, Eigen::Index index);
Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols);
/// Softmax over all entries with max subtraction.
Var softmax(const Var& logits);
/// Softmax of each column independently.
Var softmax_columns(const Var& logits);
/// -ln max(p[target], 1e-12).
Var cross_entropy(const Var& probs, Eigen::Index target);

inline Var operator+(const Var& a, const Var& b) { return add(a, b); }
inline Var operator-(const Var& a, const Var& b) { return sub(a, b); }
inline Var operator*(const Var& a, const Var& b) { return mul(a, b); }

}  // namespace neurasr::ad
