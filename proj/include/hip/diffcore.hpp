// SPDX-License-Identifier: Apache-2.0
//
// Reverse-mode differentiation over dense Eigen matrices.
//
// Evaluation is eager: every primitive computes its value when it is
// recorded on the tape, so a node's value is computed exactly once and the
// tape order is already topological. `backward` walks the tape in reverse.
//
// Masking convention: an additive mask entry <= kMaskedLogit / 2 marks a
// position as excluded. Excluded positions receive exactly zero weight from
// `softmax` and exactly zero incoming gradient. The sentinel is finite
// (-1e30) so ordinary arithmetic on masks never produces inf or nan.

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hip::ad {

using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

inline constexpr double kMaskedLogit = -1e30;

/// Thrown when a primitive produces a NaN or infinite value.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Axis { Rows, Cols };
enum class Mode { Train, Eval };

class Tape;

/// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
class Var {
 public:
  Var() = default;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  const Matrix& value() const;
  const Matrix& grad() const;
  Index rows() const { return value().rows(); }
  Index cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t)>;

  Tape() { nodes_.reserve(256); }
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Trainable input; gradients accumulate here.
  Var leaf(Matrix value, std::string label = "leaf");
  /// Input that never receives a gradient.
  Var constant(Matrix value);

  /// Appends a computed node. Rejects non-finite values naming the node.
  Var record(std::string_view op, Matrix value, std::vector<std::size_t> inputs,
             Backward backward);

  const Matrix& value(std::size_t id) const { return nodes_[id].value; }
  const Matrix& grad(std::size_t id) const;
  /// Zero-initialized on first access.
  Matrix& grad_accumulator(std::size_t id);
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::string describe(std::size_t id) const;
  std::size_t size() const { return nodes_.size(); }

  /// Accumulates d(root)/d(node) into every node that requires a gradient.
  /// The root must be 1x1.
  void backward(Var root);
  void zero_grad();

 private:
  struct Node {
    std::string op;
    std::vector<std::size_t> inputs;
    Matrix value;
    Matrix grad;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
};

/// The value of an eagerly evaluated graph root.
const Matrix& forward(Var root);

// ---- primitives ---------------------------------------------------------

Var matmul(Var a, Var b);
Var transpose(Var a);
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
/// a (n x c) + row (1 x c) broadcast down the rows.
Var add_rowwise(Var a, Var row);
/// a (n x c) scaled per row by col (n x 1).
Var mul_colwise(Var a, Var col);
Var scale(Var a, double factor);
Var concat_cols(std::span<const Var> parts);
Var concat_rows(std::span<const Var> parts);
Var slice_cols(Var a, Index start, Index count);
Var slice_rows(Var a, Index start, Index count);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax along `axis`, with an optional additive mask of the same shape.
Var softmax(Var a, Axis axis, const Matrix* mask = nullptr);
/// Row-wise circular correlation: out[i] = sum_k a[k] * b[(k + i) mod d].
Var circular_correlation(Var a, Var b);
Var gather_rows(Var table, std::span<const Index> rows);
/// out (count x c), out[index[i]] += src[i]. Adjoint of gather_rows.
Var scatter_add_rows(Var src, std::span<const Index> index, Index count);
Var sum(Var a);
Var mean(Var a);
/// n x c -> n x 1.
Var row_sum(Var a);
/// Each row divided by sqrt(|row|^2 + eps).
Var normalize_rows(Var a, double eps = 1e-12);
/// x (n x d) against w (1 x d/K): out[i, k] = <x[i, kth block], w>.
Var channel_dot(Var x, Var w, Index channels);
/// sum_i -log(p[i, target[i]]).
Var neg_log_at(Var probabilities, std::span<const Index> targets);
/// sum_i -log softmax(logits[i])[target[i]], computed stably.
Var neg_log_softmax_at(Var logits, std::span<const Index> targets);
/// Inverted dropout with a seeded mask; identity in eval mode.
Var dropout(Var a, double rate, Mode mode, std::mt19937_64& rng);

// ---- parameters and optimization ---------------------------------------

/// Named trainable arrays, ordered by name so iteration is deterministic.
class ParameterStore {
 public:
  Matrix& add(const std::string& name, Matrix value);
  Matrix& at(const std::string& name);
  const Matrix& at(const std::string& name) const;
  bool contains(const std::string& name) const { return arrays_.contains(name); }
  std::size_t size() const { return arrays_.size(); }
  auto begin() const { return arrays_.begin(); }
  auto end() const { return arrays_.end(); }
  auto begin() { return arrays_.begin(); }
  auto end() { return arrays_.end(); }
  std::size_t scalar_count() const;

  friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

 private:
  std::map<std::string, Matrix> arrays_;
};

using GradientMap = std::map<std::string, Matrix>;

/// Exposes a ParameterStore on a tape: each parameter becomes a leaf the
/// first time it is requested.
class ParameterBinding {
 public:
  ParameterBinding(Tape& tape, const ParameterStore& store) : tape_(tape), store_(store) {}

  Var operator()(const std::string& name);
  /// Uses `leaf` for `name` instead of a fresh copy of the stored value.
  void bind(const std::string& name, Var leaf);
  Tape& tape() { return tape_; }
  GradientMap gradients() const;

 private:
  Tape& tape_;
  const ParameterStore& store_;
  std::map<std::string, Var> leaves_;
};

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

struct OptimizerState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::map<std::string, Matrix> first_moment;
  std::map<std::string, Matrix> second_moment;

  friend bool operator==(const OptimizerState&, const OptimizerState&) = default;
};

/// One bias-corrected Adam update. Parameters missing from `grads` are
/// updated with a zero gradient; the first such miss is logged.
void adam_step(ParameterStore& params, const GradientMap& grads, OptimizerState& state);

// ---- finite-difference checking ----------------------------------------

struct GradcheckReport {
  std::string name;
  std::vector<double> max_relative_error;  // one per input
  double max_error() const;
  bool passed(double tolerance = 1e-4) const { return max_error() < tolerance; }
};

using Closure = std::function<Var(Tape&, std::span<const Var>)>;

/// Compares analytic gradients of `closure` against central differences.
/// Non-scalar outputs are reduced with a fixed random projection.
/// Error per entry is |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
GradcheckReport gradcheck(const Closure& closure, std::vector<Matrix> inputs,
                          std::string name = {}, double step = 1e-5);

std::string shape_string(const Matrix& m);

}  // namespace hip::ad
