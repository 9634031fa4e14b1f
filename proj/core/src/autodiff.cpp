#include "neurasr/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "neurasr/error.hpp"

namespace neurasr::ad {

namespace {

std::string shape(const Matrix& m) {
  return std::to_string(m.rows()) + "x" + std::to_string(m.cols());
}

Tape& tape_of(const Var& a) {
  if (!a.valid()) throw ArgumentError("operation on an unbound Var");
  return *a.tape();
}

Tape& tape_of(const Var& a, const Var& b) {
  Tape& t = tape_of(a);
  if (b.tape() != &t) throw ArgumentError("operands recorded on different tapes");
  return t;
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ArgumentError(std::string(op) + ": shape mismatch " + shape(a.value()) + " vs " + shape(b.value()));
  }
}

}  // namespace

const Matrix& Var::value() const { return tape_of(*this).value_of(id_); }

Matrix Var::grad() const {
  const Tape& t = *tape_;
  if (!t.has_grad(id_)) return Matrix::Zero(rows(), cols());
  return const_cast<Tape&>(t).grad_of(id_);
}

double Var::scalar() const {
  if (size() != 1) throw ArgumentError("scalar() on a " + shape(value()) + " tensor");
  return value()(0, 0);
}

Var Tape::push(Matrix value, bool requires_grad, BackwardFn fn) {
  if (consumed_) throw StateError("tape already consumed by backward()");
  Node& n = nodes_.emplace_back();
  n.value = std::move(value);
  n.requires_grad = requires_grad && record_;
  if (n.requires_grad) n.backward = std::move(fn);
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) { return push(std::move(value), false, nullptr); }

Var Tape::variable(Matrix value) { return push(std::move(value), true, nullptr); }

Var Tape::param(Parameter& p) {
  Var v = push(p.value, true, nullptr);
  if (record_) nodes_[v.id()].param = &p;
  return v;
}

Matrix& Tape::grad_of(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad.setZero(n.value.rows(), n.value.cols());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape() != this) throw ArgumentError("loss was not recorded on this tape");
  if (loss.size() != 1) throw ArgumentError("backward() needs a scalar loss, got " + shape(loss.value()));
  if (consumed_) throw StateError("backward() already ran on this tape; record a new computation");
  consumed_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  grad_of(loss.id())(0, 0) = 1.0;
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (!n.has_grad) continue;
    if (n.backward) n.backward(*this, i);
    if (n.param) n.param->grad += n.grad;
  }
}

Var matmul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  if (a.cols() != b.rows()) {
    throw ArgumentError("matmul: " + shape(a.value()) + " times " + shape(b.value()));
  }
  Matrix out;
  if (b.cols() == 1) {
    out.noalias() = a.value() * b.value();
  } else {
    out = a.value() * b.value();
  }
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(std::move(out), t.requires_grad(ia) || t.requires_grad(ib), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.requires_grad(ia)) tp.grad_of(ia).noalias() += g * tp.value_of(ib).transpose();
    if (tp.requires_grad(ib)) tp.grad_of(ib).noalias() += tp.value_of(ia).transpose() * g;
  });
}

Var add(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "add");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() + b.value(), t.requires_grad(ia) || t.requires_grad(ib), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.requires_grad(ia)) tp.grad_of(ia) += g;
    if (tp.requires_grad(ib)) tp.grad_of(ib) += g;
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "sub");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value() - b.value(), t.requires_grad(ia) || t.requires_grad(ib), [ia, ib](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.requires_grad(ia)) tp.grad_of(ia) += g;
    if (tp.requires_grad(ib)) tp.grad_of(ib) -= g;
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = tape_of(a, b);
  require_same_shape(a, b, "mul");
  const std::size_t ia = a.id(), ib = b.id();
  return t.push(a.value().cwiseProduct(b.value()), t.requires_grad(ia) || t.requires_grad(ib),
                [ia, ib](Tape& tp, std::size_t self) {
                  const Matrix& g = tp.grad_of(self);
                  if (tp.requires_grad(ia)) tp.grad_of(ia) += g.cwiseProduct(tp.value_of(ib));
                  if (tp.requires_grad(ib)) tp.grad_of(ib) += g.cwiseProduct(tp.value_of(ia));
                });
}

Var add_colwise(const Var& m, const Var& v) {
  Tape& t = tape_of(m, v);
  if (v.cols() != 1 || v.rows() != m.rows()) {
    throw ArgumentError("add_colwise: " + shape(m.value()) + " plus " + shape(v.value()));
  }
  Matrix out = m.value();
  out.colwise() += v.value().col(0);
  const std::size_t im = m.id(), iv = v.id();
  return t.push(std::move(out), t.requires_grad(im) || t.requires_grad(iv), [im, iv](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    if (tp.requires_grad(im)) tp.grad_of(im) += g;
    if (tp.requires_grad(iv)) tp.grad_of(iv) += g.rowwise().sum();
  });
}

Var scale(const Var& a, double s) { return affine(a, s, 0.0); }

Var affine(const Var& a, double alpha, double beta) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Matrix out = (alpha * a.value().array() + beta).matrix();
  return t.push(std::move(out), t.requires_grad(ia), [ia, alpha](Tape& tp, std::size_t self) {
    tp.grad_of(ia) += alpha * tp.grad_of(self);
  });
}

Var sigmoid(const Var& a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return t.push(std::move(out), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value_of(self);
    tp.grad_of(ia).array() += tp.grad_of(self).array() * y.array() * (1.0 - y.array());
  });
}

Var tanh(const Var& a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Matrix out = a.value().array().tanh().matrix();
  return t.push(std::move(out), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value_of(self);
    tp.grad_of(ia).array() += tp.grad_of(self).array() * (1.0 - y.array().square());
  });
}

Var log(const Var& a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  return t.push(a.value().array().log().matrix(), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
    tp.grad_of(ia).array() += tp.grad_of(self).array() / tp.value_of(ia).array();
  });
}

Var sum(const Var& a) {
  Tape& t = tape_of(a);
  const std::size_t ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return t.push(std::move(out), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
    tp.grad_of(ia).array() += tp.grad_of(self)(0, 0);
  });
}

Var add_n(const std::vector<Var>& scalars) {
  if (scalars.empty()) throw ArgumentError("add_n of an empty list");
  Tape& t = tape_of(scalars.front());
  Matrix out = Matrix::Zero(1, 1);
  std::vector<std::size_t> ids;
  bool rg = false;
  for (const auto& s : scalars) {
    if (s.tape() != &t) throw ArgumentError("operands recorded on different tapes");
    if (s.size() != 1) throw ArgumentError("add_n expects scalars");
    out(0, 0) += s.value()(0, 0);
    ids.push_back(s.id());
    rg = rg || t.requires_grad(s.id());
  }
  return t.push(std::move(out), rg, [ids = std::move(ids)](Tape& tp, std::size_t self) {
    const double g = tp.grad_of(self)(0, 0);
    for (auto i : ids) {
      if (tp.requires_grad(i)) tp.grad_of(i)(0, 0) += g;
    }
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ArgumentError("concat_rows of an empty list");
  Tape& t = tape_of(parts.front());
  const Eigen::Index cols = parts.front().cols();
  Eigen::Index rows = 0;
  bool rg = false;
  for (const auto& p : parts) {
    if (p.tape() != &t) throw ArgumentError("operands recorded on different tapes");
    if (p.cols() != cols) throw ArgumentError("concat_rows: column counts differ");
    rows += p.rows();
    rg = rg || t.requires_grad(p.id());
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    spans.emplace_back(p.id(), offset);
    offset += p.rows();
  }
  return t.push(std::move(out), rg, [spans = std::move(spans)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    for (const auto& [id, off] : spans) {
      if (tp.requires_grad(id)) {
        Matrix& gi = tp.grad_of(id);
        gi += g.middleRows(off, gi.rows());
      }
    }
  });
}

Var hstack(const std::vector<Var>& columns) {
  if (columns.empty()) throw ArgumentError("hstack of an empty list");
  Tape& t = tape_of(columns.front());
  const Eigen::Index rows = columns.front().rows();
  Eigen::Index cols = 0;
  bool rg = false;
  for (const auto& c : columns) {
    if (c.tape() != &t) throw ArgumentError("operands recorded on different tapes");
    if (c.rows() != rows) throw ArgumentError("hstack: row counts differ");
    cols += c.cols();
    rg = rg || t.requires_grad(c.id());
  }
  Matrix out(rows, cols);
  std::vector<std::pair<std::size_t, Eigen::Index>> spans;
  Eigen::Index offset = 0;
  for (const auto& c : columns) {
    out.middleCols(offset, c.cols()) = c.value();
    spans.emplace_back(c.id(), offset);
    offset += c.cols();
  }
  return t.push(std::move(out), rg, [spans = std::move(spans)](Tape& tp, std::size_t self) {
    const Matrix& g = tp.grad_of(self);
    for (const auto& [id, off] : spans) {
      if (tp.requires_grad(id)) {
        Matrix& gi = tp.grad_of(id);
        gi += g.middleCols(off, gi.cols());
      }
    }
  });
}

Var column(const Var& m, Eigen::Index j) {
  Tape& t = tape_of(m);
  if (j < 0 || j >= m.cols()) throw ArgumentError("column index out of range");
  const std::size_t im = m.id();
  return t.push(m.value().col(j), t.requires_grad(im), [im, j](Tape& tp, std::size_t self) {
    tp.grad_of(im).col(j) += tp.grad_of(self);
  });
}

Var element(const Var& a, Eigen::Index index) {
  Tape& t = tape_of(a);
  if (index < 0 || index >= a.size()) throw ArgumentError("element index out of range");
  const std::size_t ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().data()[index];
  return t.push(std::move(out), t.requires_grad(ia), [ia, index](Tape& tp, std::size_t self) {
    tp.grad_of(ia).data()[index] += tp.grad_of(self)(0, 0);
  });
}

Var reshape(const Var& a, Eigen::Index rows, Eigen::Index cols) {
  Tape& t = tape_of(a);
  if (rows * cols != a.size()) throw ArgumentError("reshape changes element count");
  const std::size_t ia = a.id();
  Matrix out = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  return t.push(std::move(out), t.requires_grad(ia), [ia](Tape& tp, std::size_t self) {
    Matrix& gi = tp.grad_of(ia);
    const Matrix& g = tp.grad_of(self);
    Eigen::Map<Matrix>(gi.data(), g.rows(), g.cols()) += g;
  });
}

Var softmax(const Var& logits) {
  Tape& t = tape_of(logits);
  const std::size_t il = logits.id();
  const Matrix& x = logits.value();
  Matrix out = (x.array() - x.maxCoeff()).exp().matrix();
  out /= out.sum();
  return t.push(std::move(out), t.requires_grad(il), [il](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value_of(self);
    const Matrix& g = tp.grad_of(self);
    const double dot = y.cwiseProduct(g).sum();
    tp.grad_of(il).array() += y.array() * (g.array() - dot);
  });
}

Var softmax_columns(const Var& logits) {
  Tape& t = tape_of(logits);
  const std::size_t il = logits.id();
  const Matrix& x = logits.value();
  Matrix out(x.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    out.col(c) = (x.col(c).array() - x.col(c).maxCoeff()).exp().matrix();
    out.col(c) /= out.col(c).sum();
  }
  return t.push(std::move(out), t.requires_grad(il), [il](Tape& tp, std::size_t self) {
    const Matrix& y = tp.value_of(self);
    const Matrix& g = tp.grad_of(self);
    const Eigen::RowVectorXd dots = y.cwiseProduct(g).colwise().sum();
    tp.grad_of(il).array() += y.array() * (g.rowwise() - dots).array();
  });
}

Var cross_entropy(const Var& probs, Eigen::Index target) {
  Tape& t = tape_of(probs);
  if (target < 0 || target >= probs.size()) {
    throw ArgumentError("cross_entropy target " + std::to_string(target) + " out of range [0, " +
                        std::to_string(probs.size()) + ")");
  }
  constexpr double kFloor = 1e-12;
  const std::size_t ip = probs.id();
  const double p = probs.value().data()[target];
  Matrix out(1, 1);
  out(0, 0) = -std::log(std::max(p, kFloor));
  return t.push(std::move(out), t.requires_grad(ip), [ip, target, p](Tape& tp, std::size_t self) {
    if (p > kFloor) tp.grad_of(ip).data()[target] -= tp.grad_of(self)(0, 0) / p;
  });
}

}  // namespace neurasr::ad
