// SPDX-License-Identifier: Apache-2.0
//
// Parameter layout of the full network and the windowed encoder shared by
// training and reasoning.

#pragma once

#include "hip/config.hpp"
#include "hip/diffcore.hpp"
#include "hip/sip.hpp"
#include "hip/tip.hpp"
#include "hip/tkg_store.hpp"

#include <random>
#include <span>
#include <vector>

namespace hip {

/// Everything derived from one window of snapshots preceding a target time.
struct WindowEncoding {
  std::vector<const SnapshotGraph*> window;
  /// Entity tables after each window snapshot, oldest first (the base table
  /// alone when the window is empty).
  std::vector<ad::Var> entity_steps;
  /// Relation tables before each window snapshot, plus the final one.
  std::vector<ad::Var> relation_steps;
  /// Structural embeddings at the target time.
  sip::StructuralState current;
  /// Temporal entity embeddings z_s at the target time.
  ad::Var temporal_entities;
  /// relation_steps[0 .. w-1] stacked; window position j occupies rows
  /// [j (2|R| + 1), (j + 1)(2|R| + 1)).
  ad::Var relation_history;
  ad::Matrix validity;
};

class HipModel {
 public:
  HipModel(TrainConfig config, EntityId num_entities, RelationId num_relations);

  /// Draws every parameter from the seeded generator.
  void initialize(std::uint64_t seed);

  ad::ParameterStore& parameters() { return params_; }
  const ad::ParameterStore& parameters() const { return params_; }
  const TrainConfig& config() const { return config_; }
  TrainConfig& config() { return config_; }
  EntityId num_entities() const { return num_entities_; }
  RelationId num_relations() const { return num_relations_; }
  /// Relation rows in structural tables: 2|R| + 1.
  Eigen::Index relation_rows() const { return 2 * num_relations_ + 1; }

  sip::SipConfig sip_config() const;
  std::vector<sip::LayerParams> sip_layers(ad::ParameterBinding& bind) const;
  tip::AttentionParams attention(ad::ParameterBinding& bind) const;
  tip::GruParams gru(ad::ParameterBinding& bind) const;

  /// Rolls the structural aggregator over `window` from the base tables and
  /// applies temporal attention at the final position.
  WindowEncoding encode(ad::ParameterBinding& bind, std::span<const SnapshotGraph* const> window,
                        ad::Mode mode, std::mt19937_64* rng) const;

  /// z_so for each sequence (rows in sequence order).
  ad::Var pair_embeddings(ad::ParameterBinding& bind, const WindowEncoding& encoding,
                          std::span<const tip::PairSequence> sequences) const;

 private:
  TrainConfig config_;
  EntityId num_entities_;
  RelationId num_relations_;
  ad::ParameterStore params_;
};

}  // namespace hip
