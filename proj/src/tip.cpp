// SPDX-License-Identifier: Apache-2.0

#include "hip/tip.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace hip::tip {

using ad::Index;

Matrix causal_mask(std::span<const bool> valid) {
  const auto m = static_cast<Index>(valid.size());
  Matrix mask = Matrix::Zero(m, m);
  for (Index i = 0; i < m; ++i)
    for (Index j = 0; j < m; ++j)
      if (j > i || !valid[static_cast<std::size_t>(j)]) mask(i, j) = ad::kMaskedLogit;
  return mask;
}

Var temporal_self_attention(Var timeline, std::span<const bool> valid,
                            const AttentionParams& params) {
  const Index m = timeline.rows();
  if (static_cast<Index>(valid.size()) != m)
    throw std::invalid_argument("temporal_self_attention: " + std::to_string(valid.size()) +
                                " validity flags for " + std::to_string(m) + " rows");
  if (std::none_of(valid.begin(), valid.end(), [](bool v) { return v; }))
    throw std::invalid_argument("temporal_self_attention: entity has no valid window row");

  ad::Tape& tape = timeline.tape();
  Matrix mask = causal_mask(valid);
  // A query that sees no valid key yields a zero row instead of a softmax.
  Matrix live = Matrix::Ones(m, 1);
  for (Index i = 0; i < m; ++i) {
    if ((mask.row(i).array() > ad::kMaskedLogit * 0.5).any()) continue;
    mask.row(i).setZero();
    live(i, 0) = 0.0;
  }
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(timeline.cols()));
  Var q = ad::matmul(timeline, params.query);
  Var k = ad::matmul(timeline, params.key);
  Var v = ad::matmul(timeline, params.value);
  Var scores = ad::scale(ad::matmul(q, ad::transpose(k)), inv_sqrt_d);
  Var beta = ad::softmax(scores, ad::Axis::Cols, &mask);
  if (live.sum() < static_cast<double>(m)) beta = ad::mul_colwise(beta, tape.constant(live));
  return ad::matmul(beta, v);
}

Var latest_attention(std::span<const Var> steps, const Matrix& valid,
                     const AttentionParams& params) {
  if (steps.empty()) throw std::invalid_argument("latest_attention: empty window");
  const auto w = static_cast<Index>(steps.size());
  const Index n = steps.back().rows();
  if (valid.rows() != n || valid.cols() != w)
    throw std::invalid_argument("latest_attention: validity " + ad::shape_string(valid) +
                                " does not match " + std::to_string(n) + " entities x " +
                                std::to_string(w) + " steps");
  const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(steps.back().cols()));

  Var q = ad::matmul(steps.back(), params.query);
  std::vector<Var> scores;
  std::vector<Var> values;
  for (const Var& x : steps) {
    scores.push_back(ad::row_sum(ad::mul(q, ad::matmul(x, params.key))));
    values.push_back(ad::matmul(x, params.value));
  }
  Matrix mask = Matrix::Zero(n, w);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < w; ++j)
      if (valid(i, j) == 0.0) mask(i, j) = ad::kMaskedLogit;
  Var beta = ad::softmax(ad::scale(ad::concat_cols(scores), inv_sqrt_d), ad::Axis::Cols, &mask);
  Var z;
  for (Index j = 0; j < w; ++j) {
    Var term = ad::mul_colwise(values[static_cast<std::size_t>(j)], ad::slice_cols(beta, j, 1));
    z = z.valid() ? ad::add(z, term) : term;
  }
  return z;
}

std::vector<PairSequence> extract_pair_sequences(
    std::span<const SnapshotGraph* const> window,
    std::span<const std::pair<EntityId, EntityId>> pairs, int max_events) {
  std::vector<PairSequence> out;
  for (const auto& [subject, object] : pairs) {
    PairSequence seq{subject, object, {}};
    for (std::size_t j = 0; j < window.size(); ++j)
      for (const auto& [r, o] : window[j]->neighbors(subject))
        if (o == object) seq.events.push_back({r, static_cast<int>(j)});
    if (seq.events.empty()) continue;
    if (static_cast<int>(seq.events.size()) > max_events)
      seq.events.erase(seq.events.begin(),
                       seq.events.end() - static_cast<std::ptrdiff_t>(max_events));
    out.push_back(std::move(seq));
  }
  return out;
}

Var gru_cell(Var input, Var hidden, const GruParams& p) {
  auto gate = [&](Var w, Var u, Var b) {
    return ad::add_rowwise(ad::add(ad::matmul(input, w), ad::matmul(hidden, u)), b);
  };
  Var update = ad::sigmoid(gate(p.w_update, p.u_update, p.b_update));
  Var reset = ad::sigmoid(gate(p.w_reset, p.u_reset, p.b_reset));
  Var candidate = ad::tanh(ad::add_rowwise(
      ad::add(ad::matmul(input, p.w_candidate), ad::matmul(ad::mul(reset, hidden), p.u_candidate)),
      p.b_candidate));
  // (1 - z) h + z c  ==  h + z (c - h)
  return ad::add(hidden, ad::mul(update, ad::sub(candidate, hidden)));
}

Var gru_relation_encoding(Var inputs, const GruParams& params) {
  if (inputs.rows() == 0) throw std::invalid_argument("gru_relation_encoding: empty sequence");
  ad::Tape& tape = inputs.tape();
  Var hidden = tape.constant(Matrix::Zero(1, params.u_update.rows()));
  for (Index n = 0; n < inputs.rows(); ++n)
    hidden = gru_cell(ad::slice_rows(inputs, n, 1), hidden, params);
  return hidden;
}

Var encode_pairs(std::span<const PairSequence> sequences, Var relation_history,
                 Index rows_per_step, const GruParams& params) {
  ad::Tape& tape = relation_history.tape();
  const auto pairs = static_cast<Index>(sequences.size());
  const Index dim = params.u_update.rows();
  if (pairs == 0) return tape.constant(Matrix::Zero(0, dim));
  std::size_t longest = 0;
  for (const PairSequence& s : sequences) {
    if (s.events.empty()) throw std::invalid_argument("encode_pairs: empty pair sequence");
    longest = std::max(longest, s.events.size());
  }
  // Left-pad so every sequence ends on the last step; padded steps keep h = 0.
  Var hidden = tape.constant(Matrix::Zero(pairs, dim));
  for (std::size_t n = 0; n < longest; ++n) {
    std::vector<Index> rows(static_cast<std::size_t>(pairs), 0);
    Matrix active = Matrix::Zero(pairs, 1);
    for (Index p = 0; p < pairs; ++p) {
      const auto& events = sequences[static_cast<std::size_t>(p)].events;
      const std::size_t pad = longest - events.size();
      if (n < pad) continue;
      const PairEvent& e = events[n - pad];
      rows[static_cast<std::size_t>(p)] = e.step * rows_per_step + e.relation;
      active(p, 0) = 1.0;
    }
    Var next = gru_cell(ad::gather_rows(relation_history, rows), hidden, params);
    if (active.sum() == static_cast<double>(pairs))
      hidden = next;
    else
      hidden = ad::add(hidden, ad::mul_colwise(ad::sub(next, hidden), tape.constant(active)));
  }
  return hidden;
}

}  // namespace hip::tip
