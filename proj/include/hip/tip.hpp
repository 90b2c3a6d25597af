// SPDX-License-Identifier: Apache-2.0
//
// Temporal information passing: causal self-attention over an entity's
// windowed structural embeddings, and a GRU over the relation sequence of
// an entity pair.

#pragma once

#include "hip/diffcore.hpp"
#include "hip/tkg_store.hpp"

#include <span>
#include <utility>
#include <vector>

namespace hip::tip {

using ad::Matrix;
using ad::Var;

struct AttentionParams {
  Var query;  // d x d
  Var key;
  Var value;
};

struct GruParams {
  Var w_update, u_update, b_update;  // d x d, d x d, 1 x d
  Var w_reset, u_reset, b_reset;
  Var w_candidate, u_candidate, b_candidate;
};

/// Additive mask for a timeline of `valid.size()` rows ordered oldest
/// first: query i sees key j only if j <= i and row j is valid.
Matrix causal_mask(std::span<const bool> valid);

/// Z = softmax((X Wq)(X Wk)^T / sqrt(d) + M) (X Wv) over one timeline
/// (rows oldest first). Throws if no row is valid. Rows of Z whose query
/// position sees no valid key are zero.
Var temporal_self_attention(Var timeline, std::span<const bool> valid,
                            const AttentionParams& params);

/// The final row of temporal_self_attention for every entity at once.
/// `steps[j]` is the |E| x d structural table at window position j (oldest
/// first); `valid` is |E| x steps, and its last column must be all ones.
Var latest_attention(std::span<const Var> steps, const Matrix& valid,
                     const AttentionParams& params);

struct PairEvent {
  RelationId relation = 0;
  int step = 0;  // window position of the snapshot holding the event

  friend bool operator==(const PairEvent&, const PairEvent&) = default;
};

struct PairSequence {
  EntityId subject = 0;
  EntityId object = 0;
  std::vector<PairEvent> events;  // oldest first
};

/// For each requested (subject, object) pair, the up-to `max_events` most
/// recent events inside the window. Pairs without events are omitted.
std::vector<PairSequence> extract_pair_sequences(
    std::span<const SnapshotGraph* const> window,
    std::span<const std::pair<EntityId, EntityId>> pairs, int max_events);

/// h' = (1 - z) * h + z * tanh(x Wc + (r * h) Uc + bc) with
/// z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br). Batched by rows.
Var gru_cell(Var input, Var hidden, const GruParams& params);

/// Last hidden state over `inputs` (length x d, oldest first) from a zero
/// initial state. Throws on an empty sequence.
Var gru_relation_encoding(Var inputs, const GruParams& params);

/// Batched gru_relation_encoding. `relation_history` stacks the relation
/// tables of every window position (`rows_per_step` rows each); event n of
/// a pair reads row step * rows_per_step + relation. Returns P x d.
Var encode_pairs(std::span<const PairSequence> sequences, Var relation_history,
                 Eigen::Index rows_per_step, const GruParams& params);

}  // namespace hip::tip
