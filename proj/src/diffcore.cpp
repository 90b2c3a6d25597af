// SPDX-License-Identifier: Apache-2.0

#include "hip/diffcore.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace hip::ad {

namespace {

constexpr double kMaskThreshold = kMaskedLogit * 0.5;

[[noreturn]] void shape_error(std::string_view op, const Matrix& a, const Matrix& b) {
  std::ostringstream out;
  out << op << ": shape mismatch " << shape_string(a) << " vs " << shape_string(b);
  throw std::invalid_argument(out.str());
}

void require_same_shape(std::string_view op, Var a, Var b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a.value(), b.value());
}

void require_same_tape(Var a, Var b) {
  if (&a.tape() != &b.tape()) throw std::invalid_argument("operands live on different tapes");
}

// Accumulate into input `slot` of node `self` only when that input wants it.
template <typename Expr>
void accumulate(Tape& tape, std::size_t input, const Expr& contribution) {
  if (tape.requires_grad(input)) tape.grad_accumulator(input) += contribution;
}

}  // namespace

std::string shape_string(const Matrix& m) {
  return "[" + std::to_string(m.rows()) + "x" + std::to_string(m.cols()) + "]";
}

const Matrix& Var::value() const { return tape_->value(id_); }
const Matrix& Var::grad() const { return tape_->grad(id_); }

// ---- tape ---------------------------------------------------------------

Var Tape::leaf(Matrix value, std::string label) {
  if (!value.allFinite()) throw NonFiniteError("leaf '" + label + "' holds non-finite values");
  nodes_.push_back(Node{std::move(label), {}, std::move(value), {}, true, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::constant(Matrix value) {
  if (!value.allFinite()) throw NonFiniteError("constant holds non-finite values");
  nodes_.push_back(Node{"constant", {}, std::move(value), {}, false, nullptr});
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Matrix value, std::vector<std::size_t> inputs,
                 Backward backward) {
  const std::size_t id = nodes_.size();
  if (!value.allFinite()) {
    throw NonFiniteError("node #" + std::to_string(id) + " (" + std::string(op) +
                         ") produced a non-finite value");
  }
  bool needs = false;
  for (std::size_t in : inputs) needs = needs || nodes_[in].requires_grad;
  nodes_.push_back(Node{std::string(op), std::move(inputs), std::move(value), {}, needs,
                        needs ? std::move(backward) : nullptr});
  return Var(this, id);
}

const Matrix& Tape::grad(std::size_t id) const {
  const Node& node = nodes_[id];
  if (node.grad.size() == 0) {
    // Untouched gradients are zero; materialize lazily on the mutable path.
    const_cast<Node&>(node).grad = Matrix::Zero(node.value.rows(), node.value.cols());
  }
  return node.grad;
}

Matrix& Tape::grad_accumulator(std::size_t id) {
  Node& node = nodes_[id];
  if (node.grad.size() == 0) node.grad = Matrix::Zero(node.value.rows(), node.value.cols());
  return node.grad;
}

std::string Tape::describe(std::size_t id) const {
  return "#" + std::to_string(id) + " (" + nodes_[id].op + ") " + shape_string(nodes_[id].value);
}

void Tape::backward(Var root) {
  if (root.rows() != 1 || root.cols() != 1) {
    throw std::invalid_argument("backward: root must be scalar, got " +
                                shape_string(root.value()));
  }
  if (!nodes_[root.id()].requires_grad) return;
  grad_accumulator(root.id())(0, 0) += 1.0;
  for (std::size_t i = root.id() + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.size() == 0) continue;
    node.backward(*this, i);
  }
}

void Tape::zero_grad() {
  for (Node& node : nodes_) node.grad.resize(0, 0);
}

const Matrix& forward(Var root) { return root.value(); }

// ---- primitives ---------------------------------------------------------

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  if (a.cols() != b.rows()) shape_error("matmul", a.value(), b.value());
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("matmul", a.value() * b.value(), {ia, ib},
                         [ia, ib](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           accumulate(t, ia, g * t.value(ib).transpose());
                           accumulate(t, ib, t.value(ia).transpose() * g);
                         });
}

Var transpose(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record("transpose", a.value().transpose(), {ia},
                         [ia](Tape& t, std::size_t self) {
                           accumulate(t, ia, t.grad(self).transpose());
                         });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("add", a.value() + b.value(), {ia, ib},
                         [ia, ib](Tape& t, std::size_t self) {
                           accumulate(t, ia, t.grad(self));
                           accumulate(t, ib, t.grad(self));
                         });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("sub", a.value() - b.value(), {ia, ib},
                         [ia, ib](Tape& t, std::size_t self) {
                           accumulate(t, ia, t.grad(self));
                           accumulate(t, ib, -t.grad(self));
                         });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a, b);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record("mul", a.value().cwiseProduct(b.value()), {ia, ib},
                         [ia, ib](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           accumulate(t, ia, g.cwiseProduct(t.value(ib)));
                           accumulate(t, ib, g.cwiseProduct(t.value(ia)));
                         });
}

Var add_rowwise(Var a, Var row) {
  require_same_tape(a, row);
  if (row.rows() != 1 || row.cols() != a.cols()) shape_error("add_rowwise", a.value(), row.value());
  const std::size_t ia = a.id(), ir = row.id();
  Matrix out = a.value().rowwise() + row.value().row(0);
  return a.tape().record("add_rowwise", std::move(out), {ia, ir},
                         [ia, ir](Tape& t, std::size_t self) {
                           const Matrix& g = t.grad(self);
                           accumulate(t, ia, g);
                           accumulate(t, ir, g.colwise().sum());
                         });
}

Var mul_colwise(Var a, Var col) {
  require_same_tape(a, col);
  if (col.cols() != 1 || col.rows() != a.rows()) shape_error("mul_colwise", a.value(), col.value());
  const std::size_t ia = a.id(), ic = col.id();
  Matrix out = (a.value().array().colwise() * col.value().col(0).array()).matrix();
  return a.tape().record(
      "mul_colwise", std::move(out), {ia, ic}, [ia, ic](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        accumulate(t, ia, (g.array().colwise() * t.value(ic).col(0).array()).matrix());
        accumulate(t, ic, g.cwiseProduct(t.value(ia)).rowwise().sum());
      });
}

Var scale(Var a, double factor) {
  const std::size_t ia = a.id();
  return a.tape().record("scale", a.value() * factor, {ia},
                         [ia, factor](Tape& t, std::size_t self) {
                           accumulate(t, ia, t.grad(self) * factor);
                         });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no operands");
  Tape& tape = parts.front().tape();
  const Index rows = parts.front().rows();
  Index cols = 0;
  std::vector<std::size_t> ids;
  std::vector<Index> widths;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.rows() != rows) shape_error("concat_cols", parts.front().value(), p.value());
    ids.push_back(p.id());
    widths.push_back(p.cols());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleCols(offset, p.cols()) = p.value();
    offset += p.cols();
  }
  return tape.record("concat_cols", std::move(out), ids,
                     [ids, widths](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       Index off = 0;
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         accumulate(t, ids[i], g.middleCols(off, widths[i]));
                         off += widths[i];
                       }
                     });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: no operands");
  Tape& tape = parts.front().tape();
  const Index cols = parts.front().cols();
  Index rows = 0;
  std::vector<std::size_t> ids;
  std::vector<Index> heights;
  for (const Var& p : parts) {
    require_same_tape(parts.front(), p);
    if (p.cols() != cols) shape_error("concat_rows", parts.front().value(), p.value());
    ids.push_back(p.id());
    heights.push_back(p.rows());
    rows += p.rows();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const Var& p : parts) {
    out.middleRows(offset, p.rows()) = p.value();
    offset += p.rows();
  }
  return tape.record("concat_rows", std::move(out), ids,
                     [ids, heights](Tape& t, std::size_t self) {
                       const Matrix& g = t.grad(self);
                       Index off = 0;
                       for (std::size_t i = 0; i < ids.size(); ++i) {
                         accumulate(t, ids[i], g.middleRows(off, heights[i]));
                         off += heights[i];
                       }
                     });
}

Var slice_cols(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw std::invalid_argument("slice_cols: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_string(a.value()));
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice_cols", a.value().middleCols(start, count), {ia},
                         [ia, start, count](Tape& t, std::size_t self) {
                           if (t.requires_grad(ia))
                             t.grad_accumulator(ia).middleCols(start, count) += t.grad(self);
                         });
}

Var slice_rows(Var a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.rows()) {
    throw std::invalid_argument("slice_rows: range [" + std::to_string(start) + ", " +
                                std::to_string(start + count) + ") outside " +
                                shape_string(a.value()));
  }
  const std::size_t ia = a.id();
  return a.tape().record("slice_rows", a.value().middleRows(start, count), {ia},
                         [ia, start, count](Tape& t, std::size_t self) {
                           if (t.requires_grad(ia))
                             t.grad_accumulator(ia).middleRows(start, count) += t.grad(self);
                         });
}

Var relu(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record("relu", a.value().cwiseMax(0.0), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ia);
    accumulate(t, ia, (x.array() > 0.0).cast<double>().matrix().cwiseProduct(t.grad(self)));
  });
}

Var sigmoid(Var a) {
  const std::size_t ia = a.id();
  Matrix out = a.value().unaryExpr([](double x) {
    // Split by sign so exp never overflows.
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
  });
  return a.tape().record("sigmoid", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    accumulate(t, ia, (y.array() * (1.0 - y.array()) * t.grad(self).array()).matrix());
  });
}

Var tanh(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record("tanh", a.value().array().tanh().matrix(), {ia},
                         [ia](Tape& t, std::size_t self) {
                           const Matrix& y = t.value(self);
                           accumulate(t, ia,
                                      ((1.0 - y.array().square()) * t.grad(self).array()).matrix());
                         });
}

namespace {

// Softmax of one lane (row or column); masked slots get exactly zero.
Eigen::VectorXd softmax_lane(const Eigen::VectorXd& x, const Eigen::VectorXd* mask) {
  const Index n = x.size();
  auto masked = [&](Index j) { return mask && (*mask)(j) <= kMaskThreshold; };
  double peak = -std::numeric_limits<double>::infinity();
  for (Index j = 0; j < n; ++j)
    if (!masked(j)) peak = std::max(peak, x(j) + (mask ? (*mask)(j) : 0.0));
  if (!std::isfinite(peak)) throw std::invalid_argument("softmax: every position of a lane is masked");
  Eigen::VectorXd y = Eigen::VectorXd::Zero(n);
  double total = 0.0;
  for (Index j = 0; j < n; ++j) {
    if (masked(j)) continue;
    y(j) = std::exp(x(j) + (mask ? (*mask)(j) : 0.0) - peak);
    total += y(j);
  }
  return y / total;
}

}  // namespace

Var softmax(Var a, Axis axis, const Matrix* mask) {
  const Matrix& x = a.value();
  if (mask && (mask->rows() != x.rows() || mask->cols() != x.cols())) {
    shape_error("softmax mask", x, *mask);
  }
  Matrix y(x.rows(), x.cols());
  if (axis == Axis::Cols) {
    for (Index i = 0; i < x.rows(); ++i) {
      Eigen::VectorXd lane_mask;
      if (mask) lane_mask = mask->row(i).transpose();
      y.row(i) = softmax_lane(x.row(i).transpose(), mask ? &lane_mask : nullptr).transpose();
    }
  } else {
    for (Index j = 0; j < x.cols(); ++j) {
      Eigen::VectorXd lane_mask;
      if (mask) lane_mask = mask->col(j);
      y.col(j) = softmax_lane(x.col(j), mask ? &lane_mask : nullptr);
    }
  }
  const std::size_t ia = a.id();
  return a.tape().record("softmax", std::move(y), {ia}, [ia, axis](Tape& t, std::size_t self) {
    const Matrix& y = t.value(self);
    const Matrix& g = t.grad(self);
    Matrix gy = g.cwiseProduct(y);
    // dx = y * (g - <y, g>) along the normalized axis; y == 0 at masked slots.
    if (axis == Axis::Cols) {
      Eigen::VectorXd dots = gy.rowwise().sum();
      accumulate(t, ia, (gy - (y.array().colwise() * dots.array()).matrix()));
    } else {
      Eigen::RowVectorXd dots = gy.colwise().sum();
      accumulate(t, ia, (gy - (y.array().rowwise() * dots.array()).matrix()));
    }
  });
}

Var circular_correlation(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("circular_correlation", a, b);
  const Matrix& x = a.value();
  const Matrix& w = b.value();
  const Index d = x.cols();
  Matrix out = Matrix::Zero(x.rows(), d);
  for (Index r = 0; r < x.rows(); ++r)
    for (Index i = 0; i < d; ++i)
      for (Index k = 0; k < d; ++k) out(r, i) += x(r, k) * w(r, (k + i) % d);
  const std::size_t ia = a.id(), ib = b.id();
  return a.tape().record(
      "circular_correlation", std::move(out), {ia, ib}, [ia, ib](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        const Matrix& x = t.value(ia);
        const Matrix& w = t.value(ib);
        const Index d = x.cols();
        const bool want_a = t.requires_grad(ia), want_b = t.requires_grad(ib);
        Matrix ga = Matrix::Zero(x.rows(), d), gb = Matrix::Zero(x.rows(), d);
        for (Index r = 0; r < x.rows(); ++r)
          for (Index i = 0; i < d; ++i)
            for (Index k = 0; k < d; ++k) {
              const Index j = (k + i) % d;
              ga(r, k) += g(r, i) * w(r, j);
              gb(r, j) += g(r, i) * x(r, k);
            }
        if (want_a) t.grad_accumulator(ia) += ga;
        if (want_b) t.grad_accumulator(ib) += gb;
      });
}

Var gather_rows(Var table, std::span<const Index> rows) {
  const Matrix& src = table.value();
  Matrix out(static_cast<Index>(rows.size()), src.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= src.rows()) {
      throw std::out_of_range("gather_rows: row " + std::to_string(rows[i]) + " outside " +
                              shape_string(src));
    }
    out.row(static_cast<Index>(i)) = src.row(rows[i]);
  }
  const std::size_t it = table.id();
  std::vector<Index> idx(rows.begin(), rows.end());
  return table.tape().record("gather_rows", std::move(out), {it},
                             [it, idx = std::move(idx)](Tape& t, std::size_t self) {
                               if (!t.requires_grad(it)) return;
                               const Matrix& g = t.grad(self);
                               Matrix& acc = t.grad_accumulator(it);
                               for (std::size_t i = 0; i < idx.size(); ++i)
                                 acc.row(idx[i]) += g.row(static_cast<Index>(i));
                             });
}

Var scatter_add_rows(Var src, std::span<const Index> index, Index count) {
  const Matrix& x = src.value();
  if (static_cast<Index>(index.size()) != x.rows()) {
    throw std::invalid_argument("scatter_add_rows: " + std::to_string(index.size()) +
                                " indices for " + shape_string(x));
  }
  Matrix out = Matrix::Zero(count, x.cols());
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || index[i] >= count) {
      throw std::out_of_range("scatter_add_rows: target row " + std::to_string(index[i]) +
                              " outside " + std::to_string(count));
    }
    out.row(index[i]) += x.row(static_cast<Index>(i));
  }
  const std::size_t is = src.id();
  std::vector<Index> idx(index.begin(), index.end());
  return src.tape().record("scatter_add_rows", std::move(out), {is},
                           [is, idx = std::move(idx)](Tape& t, std::size_t self) {
                             if (!t.requires_grad(is)) return;
                             const Matrix& g = t.grad(self);
                             Matrix& acc = t.grad_accumulator(is);
                             for (std::size_t i = 0; i < idx.size(); ++i)
                               acc.row(static_cast<Index>(i)) += g.row(idx[i]);
                           });
}

Var sum(Var a) {
  const std::size_t ia = a.id();
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  return a.tape().record("sum", std::move(out), {ia}, [ia](Tape& t, std::size_t self) {
    const Matrix& x = t.value(ia);
    accumulate(t, ia, Matrix::Constant(x.rows(), x.cols(), t.grad(self)(0, 0)));
  });
}

Var mean(Var a) {
  if (a.value().size() == 0) throw std::invalid_argument("mean: empty operand");
  return scale(sum(a), 1.0 / static_cast<double>(a.value().size()));
}

Var row_sum(Var a) {
  const std::size_t ia = a.id();
  return a.tape().record("row_sum", a.value().rowwise().sum(), {ia},
                         [ia](Tape& t, std::size_t self) {
                           const Matrix& x = t.value(ia);
                           accumulate(t, ia, t.grad(self).replicate(1, x.cols()));
                         });
}

Var normalize_rows(Var a, double eps) {
  const std::size_t ia = a.id();
  const Eigen::VectorXd norms = (a.value().rowwise().squaredNorm().array() + eps).sqrt().matrix();
  Matrix out = norms.cwiseInverse().asDiagonal() * a.value();
  return a.tape().record("normalize_rows", std::move(out), {ia},
                         [ia, norms](Tape& t, std::size_t self) {
                           const Matrix& y = t.value(self);
                           const Matrix& g = t.grad(self);
                           const Eigen::VectorXd along = y.cwiseProduct(g).rowwise().sum();
                           accumulate(t, ia,
                                      norms.cwiseInverse().asDiagonal() *
                                          (g - along.asDiagonal() * y));
                         });
}

Var channel_dot(Var x, Var w, Index channels) {
  require_same_tape(x, w);
  if (channels <= 0 || x.cols() % channels != 0 || w.rows() != 1 ||
      w.cols() != x.cols() / channels) {
    shape_error("channel_dot", x.value(), w.value());
  }
  const Index width = w.cols();
  Matrix out(x.rows(), channels);
  for (Index k = 0; k < channels; ++k)
    out.col(k) = x.value().middleCols(k * width, width) * w.value().row(0).transpose();
  const std::size_t ix = x.id(), iw = w.id();
  return x.tape().record(
      "channel_dot", std::move(out), {ix, iw}, [ix, iw, channels, width](Tape& t, std::size_t self) {
        const Matrix& g = t.grad(self);
        if (t.requires_grad(ix)) {
          Matrix& acc = t.grad_accumulator(ix);
          for (Index k = 0; k < channels; ++k)
            acc.middleCols(k * width, width) += g.col(k) * t.value(iw);
        }
        if (t.requires_grad(iw)) {
          Matrix& acc = t.grad_accumulator(iw);
          for (Index k = 0; k < channels; ++k)
            acc += g.col(k).transpose() * t.value(ix).middleCols(k * width, width);
        }
      });
}

Var neg_log_at(Var probabilities, std::span<const Index> targets) {
  const Matrix& p = probabilities.value();
  if (static_cast<Index>(targets.size()) != p.rows()) {
    throw std::invalid_argument("neg_log_at: " + std::to_string(targets.size()) +
                                " targets for " + shape_string(p));
  }
  Matrix out = Matrix::Zero(1, 1);
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double v = p(static_cast<Index>(i), targets[i]);
    if (!(v > 0.0)) throw std::domain_error("neg_log_at: non-positive probability");
    out(0, 0) -= std::log(v);
  }
  const std::size_t ip = probabilities.id();
  std::vector<Index> idx(targets.begin(), targets.end());
  return probabilities.tape().record(
      "neg_log_at", std::move(out), {ip}, [ip, idx = std::move(idx)](Tape& t, std::size_t self) {
        if (!t.requires_grad(ip)) return;
        const double g = t.grad(self)(0, 0);
        Matrix& acc = t.grad_accumulator(ip);
        for (std::size_t i = 0; i < idx.size(); ++i)
          acc(static_cast<Index>(i), idx[i]) -= g / t.value(ip)(static_cast<Index>(i), idx[i]);
      });
}

Var neg_log_softmax_at(Var logits, std::span<const Index> targets) {
  const Matrix& x = logits.value();
  if (static_cast<Index>(targets.size()) != x.rows()) {
    throw std::invalid_argument("neg_log_softmax_at: " + std::to_string(targets.size()) +
                                " targets for " + shape_string(x));
  }
  Matrix probs(x.rows(), x.cols());
  Matrix out = Matrix::Zero(1, 1);
  for (Index i = 0; i < x.rows(); ++i) {
    const Index target = targets[static_cast<std::size_t>(i)];
    if (target < 0 || target >= x.cols()) {
      throw std::out_of_range("neg_log_softmax_at: target " + std::to_string(target) +
                              " outside " + shape_string(x));
    }
    const double peak = x.row(i).maxCoeff();
    probs.row(i) = (x.row(i).array() - peak).exp().matrix();
    const double total = probs.row(i).sum();
    probs.row(i) /= total;
    out(0, 0) += std::log(total) + peak - x(i, target);
  }
  const std::size_t il = logits.id();
  std::vector<Index> idx(targets.begin(), targets.end());
  return logits.tape().record(
      "neg_log_softmax_at", std::move(out), {il},
      [il, idx = std::move(idx), probs = std::move(probs)](Tape& t, std::size_t self) {
        if (!t.requires_grad(il)) return;
        const double g = t.grad(self)(0, 0);
        Matrix delta = probs;
        for (std::size_t i = 0; i < idx.size(); ++i) delta(static_cast<Index>(i), idx[i]) -= 1.0;
        t.grad_accumulator(il) += g * delta;
      });
}

Var dropout(Var a, double rate, Mode mode, std::mt19937_64& rng) {
  if (mode == Mode::Eval || rate <= 0.0) return a;
  if (rate >= 1.0) throw std::invalid_argument("dropout: rate must be < 1");
  std::bernoulli_distribution keep(1.0 - rate);
  Matrix mask(a.rows(), a.cols());
  for (Index j = 0; j < mask.cols(); ++j)
    for (Index i = 0; i < mask.rows(); ++i) mask(i, j) = keep(rng) ? 1.0 / (1.0 - rate) : 0.0;
  const std::size_t ia = a.id();
  Matrix out = a.value().cwiseProduct(mask);
  return a.tape().record("dropout", std::move(out), {ia},
                         [ia, mask = std::move(mask)](Tape& t, std::size_t self) {
                           accumulate(t, ia, t.grad(self).cwiseProduct(mask));
                         });
}

// ---- parameters ---------------------------------------------------------

Matrix& ParameterStore::add(const std::string& name, Matrix value) {
  auto [it, inserted] = arrays_.insert_or_assign(name, std::move(value));
  (void)inserted;
  return it->second;
}

Matrix& ParameterStore::at(const std::string& name) {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

const Matrix& ParameterStore::at(const std::string& name) const {
  auto it = arrays_.find(name);
  if (it == arrays_.end()) throw std::out_of_range("unknown parameter '" + name + "'");
  return it->second;
}

std::size_t ParameterStore::scalar_count() const {
  std::size_t total = 0;
  for (const auto& [name, value] : arrays_) total += static_cast<std::size_t>(value.size());
  return total;
}

Var ParameterBinding::operator()(const std::string& name) {
  auto it = leaves_.find(name);
  if (it != leaves_.end()) return it->second;
  Var leaf = tape_.leaf(store_.at(name), name);
  leaves_.emplace(name, leaf);
  return leaf;
}

void ParameterBinding::bind(const std::string& name, Var leaf) {
  if (!store_.contains(name)) throw std::out_of_range("unknown parameter '" + name + "'");
  leaves_.insert_or_assign(name, leaf);
}

GradientMap ParameterBinding::gradients() const {
  GradientMap grads;
  for (const auto& [name, leaf] : leaves_) grads.emplace(name, leaf.grad());
  return grads;
}

void adam_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state) {
  static bool warned_missing = false;
  const AdamConfig& cfg = state.config;
  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(cfg.beta1, t);
  const double correction2 = 1.0 - std::pow(cfg.beta2, t);
  for (auto& [name, value] : params) {
    Matrix& m = state.first_moment[name];
    Matrix& v = state.second_moment[name];
    if (m.size() == 0) m = Matrix::Zero(value.rows(), value.cols());
    if (v.size() == 0) v = Matrix::Zero(value.rows(), value.cols());
    auto g = grads.find(name);
    if (g == grads.end()) {
      if (!warned_missing) {
        std::clog << "adam_step: no gradient for '" << name << "', treating as zero\n";
        warned_missing = true;
      }
      m *= cfg.beta1;
      v *= cfg.beta2;
    } else {
      if (g->second.rows() != value.rows() || g->second.cols() != value.cols()) {
        shape_error("adam_step '" + name + "'", value, g->second);
      }
      m = cfg.beta1 * m + (1.0 - cfg.beta1) * g->second;
      v = cfg.beta2 * v + (1.0 - cfg.beta2) * g->second.cwiseAbs2();
    }
    value.array() -= cfg.learning_rate * (m.array() / correction1) /
                     ((v.array() / correction2).sqrt() + cfg.epsilon);
  }
}

// ---- gradcheck ----------------------------------------------------------

double GradcheckReport::max_error() const {
  double worst = 0.0;
  for (double e : max_relative_error) worst = std::max(worst, e);
  return worst;
}

namespace {

Var reduce_to_scalar(Var out, const Matrix& projection) {
  if (out.rows() == 1 && out.cols() == 1) return out;
  return sum(mul(out, out.tape().constant(projection)));
}

double evaluate(const Closure& closure, const std::vector<Matrix>& inputs, Matrix& projection,
                std::mt19937_64& rng) {
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& in : inputs) vars.push_back(tape.constant(in));
  Var out = closure(tape, vars);
  if (projection.size() == 0 && out.value().size() != 1) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    projection = Matrix::NullaryExpr(out.rows(), out.cols(), [&] { return dist(rng); });
  }
  return reduce_to_scalar(out, projection).value()(0, 0);
}

}  // namespace

GradcheckReport gradcheck(const Closure& closure, std::vector<Matrix> inputs, std::string name,
                          double step) {
  std::mt19937_64 rng(0x5eed);
  Matrix projection;
  GradcheckReport report;
  report.name = std::move(name);

  Tape tape;
  std::vector<Var> vars;
  for (std::size_t i = 0; i < inputs.size(); ++i)
    vars.push_back(tape.leaf(inputs[i], "input" + std::to_string(i)));
  Var out = closure(tape, vars);
  if (out.value().size() != 1) {
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    projection = Matrix::NullaryExpr(out.rows(), out.cols(), [&] { return dist(rng); });
  }
  Var root = reduce_to_scalar(out, projection);
  tape.backward(root);

  for (std::size_t i = 0; i < inputs.size(); ++i) {
    const Matrix analytic = vars[i].grad();
    double worst = 0.0;
    for (Index j = 0; j < inputs[i].size(); ++j) {
      const double saved = inputs[i](j);
      inputs[i](j) = saved + step;
      const double plus = evaluate(closure, inputs, projection, rng);
      inputs[i](j) = saved - step;
      const double minus = evaluate(closure, inputs, projection, rng);
      inputs[i](j) = saved;
      const double numeric = (plus - minus) / (2.0 * step);
      const double denom = std::max({std::abs(analytic(j)), std::abs(numeric), 1e-3});
      worst = std::max(worst, std::abs(analytic(j) - numeric) / denom);
    }
    report.max_relative_error.push_back(worst);
  }
  return report;
}

}  // namespace hip::ad
