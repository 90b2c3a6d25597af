// SPDX-License-Identifier: Apache-2.0
//
// Structural information passing: a channel-disentangled CompGCN layer.
//
// Row-vector convention throughout: an embedding is a row, a channel
// projection U_k^T x is the k-th column block of x * U, and a per-channel
// transform W^{k} c_k is c * (W ⊙ block-diagonal mask).

#pragma once

#include "hip/config.hpp"
#include "hip/diffcore.hpp"
#include "hip/tkg_store.hpp"

#include <random>
#include <span>
#include <vector>

namespace hip::sip {

using ad::Matrix;
using ad::Var;

struct SipConfig {
  int channels = 4;
  int layers = 2;
  /// dims[l] is the width of layer l's input; dims[layers] is the output.
  std::vector<int> dims = {200, 200, 200};
  Composition composition = Composition::Multiplication;
  Normalization normalization = Normalization::None;
  bool activation = true;
  bool retain_absent = true;
  /// L2-normalize entity and relation rows after each snapshot.
  bool normalize = true;
  double dropout = 0.0;

  static SipConfig uniform(int dim, int channels, int layers);
  void validate() const;
};

/// Weights of one aggregation layer.
struct LayerParams {
  Var project_entity;    // U: d_in x d_in
  Var project_message;   // V: d_in x d_in
  Var attention;         // W: 1 x 2 d_in / K, [message half | entity half]
  Var w_original;        // d_in x d_out, block-diagonal by channel
  Var w_inverse;
  Var w_self_loop;
  Var w_relation;        // d_in x d_out
};

/// Entity table (|E| x d) and relation table (2|R| + 1 x d, last row is
/// the self-loop relation).
struct StructuralState {
  Var entities;
  Var relations;
};

/// 0/1 mask keeping the K diagonal blocks of a rows x cols matrix.
Matrix block_diagonal_mask(Eigen::Index rows, Eigen::Index cols, int channels);
/// K x width matrix replicating channel weight k over its column block.
Matrix channel_expansion(int channels, Eigen::Index width);

/// h = x U; channel k occupies columns [k d/K, (k + 1) d/K).
Var project_channels(Var x, Var projection, int channels);
/// phi(x_r, x_o), row-wise.
Var compose(Var x_relation, Var x_object, Composition op);
/// c = phi(x_r, x_o) V, split into channel blocks like project_channels.
Var compose_message(Var x_relation, Var x_object, Composition op, Var projection, int channels);
/// alpha[i, k] = softmax_k ReLU(W [c_{i,k}; h_{i,k}]); rows sum to one.
Var channel_attention(Var messages, Var subject_channels, Var attention, int channels);

/// One disentangled aggregation over `snapshot` plus a self-loop message
/// per entity. Returns the next-layer entity table (|E| x d_out).
Var aggregate_layer(const SnapshotGraph& snapshot, Var entities, Var relations,
                    const LayerParams& params, const SipConfig& config);

/// Runs every layer over `snapshot`. With retain_absent, entities that have
/// no edge in the snapshot keep their previous rows; with normalize, every
/// entity and relation row of the result has unit length.
StructuralState sip_forward(const SnapshotGraph& snapshot, const StructuralState& previous,
                            std::span<const LayerParams> layers, const SipConfig& config,
                            ad::Mode mode, std::mt19937_64* rng);

}  // namespace hip::sip
