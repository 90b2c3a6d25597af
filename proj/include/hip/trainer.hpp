// SPDX-License-Identifier: Apache-2.0
//
// Joint training of every parameter over historical snapshots, and the
// binary checkpoint format.
//
// Checkpoint layout (little-endian):
//   magic "HIPCKPT\0" | u32 version | str config | u32 |E| | u32 |R|
//   u64 epoch | f64 lr, beta1, beta2, eps | u64 adam step
//   arrays(params) | arrays(first moments) | arrays(second moments)
// where str = u32 length + bytes and arrays = u64 count followed by
// (str name, u64 rows, u64 cols, rows*cols f64 in row-major order).

#pragma once

#include "hip/config.hpp"
#include "hip/diffcore.hpp"
#include "hip/model.hpp"
#include "hip/tkg_store.hpp"

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <span>
#include <vector>

namespace hip {

struct LossBreakdown {
  double total = 0.0;
  double temporal = 0.0;
  double structural = 0.0;
  double repetitive = 0.0;
  std::size_t quadruples = 0;
  std::size_t temporal_terms = 0;
};

struct LossResult {
  ad::Var total;
  LossBreakdown parts;
};

/// Vocabulary counts (B x |E|) for a batch under the configured scope.
ad::Matrix batch_counts(const TrainConfig& config, const HistoryVocabulary& vocabulary,
                        std::span<const SnapshotGraph* const> window, std::span<const Edge> batch,
                        EntityId num_entities);

/// Sum over the batch of the enabled terms: relation cross-entropy from the
/// temporal score (pairs with window history only), object cross-entropy
/// over tri-linear logits, and object cross-entropy of the repetitive score.
LossResult compute_loss(ad::ParameterBinding& bind, const HipModel& model,
                        const WindowEncoding& encoding, std::span<const Edge> batch,
                        const ad::Matrix& counts);

struct EpochMetrics {
  int epoch = 0;
  double loss = 0.0;  // mean per training edge
  double temporal = 0.0;
  double structural = 0.0;
  double repetitive = 0.0;
  double seconds = 0.0;
};

class Trainer {
 public:
  explicit Trainer(HipModel& model);

  /// One chronological pass. Every snapshot after the first is a target;
  /// its edges are shuffled (seeded by seed and epoch) into batches, and
  /// each batch re-encodes the preceding window and takes one Adam step.
  EpochMetrics train_epoch(std::span<const SnapshotGraph> snapshots);

  HipModel& model() { return model_; }
  ad::OptimizerState& optimizer() { return optimizer_; }
  const ad::OptimizerState& optimizer() const { return optimizer_; }
  int epoch() const { return epoch_; }
  void set_epoch(int epoch) { epoch_ = epoch; }

 private:
  HipModel& model_;
  ad::OptimizerState optimizer_;
  int epoch_ = 0;
};

/// CSV training log: header then one row per epoch.
void write_log_header(std::ostream& out);
void write_log_row(std::ostream& out, const EpochMetrics& metrics);

struct Checkpoint {
  static constexpr std::uint32_t kVersion = 1;

  TrainConfig config;
  EntityId num_entities = 0;
  RelationId num_relations = 0;
  std::uint64_t epoch = 0;
  ad::ParameterStore parameters;
  ad::OptimizerState optimizer;
};

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
/// Throws on bad magic, version mismatch or truncation.
Checkpoint load_checkpoint(const std::filesystem::path& path);

class CheckpointVersionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace hip
