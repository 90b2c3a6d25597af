// SPDX-License-Identifier: Apache-2.0
//
// Multi-step extrapolation: predicted snapshots are rolled forward between
// the last observed time and each query time, then queries are ranked
// against every entity.

#pragma once

#include "hip/config.hpp"
#include "hip/model.hpp"
#include "hip/tkg_store.hpp"

#include <Eigen/Dense>

#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace hip {

/// Object query (subject, relation, time). Subject queries are expressed
/// with the inverse relation id r + |R|.
struct Query {
  EntityId subject = 0;
  RelationId relation = 0;
  Timestamp time = 0;
  std::optional<EntityId> truth;

  friend bool operator==(const Query&, const Query&) = default;
};

/// Object and inverse queries for every quadruple, in input order.
std::vector<Query> make_queries(std::span<const Quadruple> quadruples, RelationId num_relations,
                                bool both_directions);

struct EdgeProvenance {
  Edge edge;
  std::size_t query = 0;  // index into the query list handed to step_predict
  double score = 0.0;
  int step = 0;
};

struct PredictedGraph {
  SnapshotGraph graph;
  std::vector<EdgeProvenance> provenance;
};

struct RankedAnswer {
  Query query;
  Eigen::VectorXd scores;           // one per entity
  std::vector<EntityId> ranking;    // descending score, ties by lower id
};

/// Entities sorted by descending score, ties by lower id.
std::vector<EntityId> rank_descending(const Eigen::VectorXd& scores);

/// Frozen-parameter view of the model at one reasoning time: the window
/// encoding built from everything stored before `time`.
class StepContext {
 public:
  StepContext(const HipModel& model, const TemporalGraphStore& store, Timestamp time);
  StepContext(const StepContext&) = delete;
  StepContext& operator=(const StepContext&) = delete;

  Timestamp time() const { return time_; }
  const WindowEncoding& encoding() const { return encoding_; }

  /// Softmax over the 2|R| relation types for each (subject, object) pair;
  /// rows follow `pairs`, and pairs without window history yield no row
  /// (`has_history` reports which ones did).
  Eigen::MatrixXd relation_distribution(std::span<const std::pair<EntityId, EntityId>> pairs,
                                        std::vector<bool>& has_history);

  /// sigmoid(<x_s, x_r, x_o>) for every object o.
  Eigen::VectorXd structural_scores(EntityId subject, RelationId relation);
  /// softmax over objects of the repetitive logits with vocabulary counts.
  Eigen::VectorXd repetitive_scores(EntityId subject, RelationId relation);
  /// Per-entity scores of `mode`: I_s + I_h for Full and Combined, I_h for
  /// Vocabulary, I_s for Structural.
  Eigen::VectorXd scores(EntityId subject, RelationId relation, ScoreMode mode);

 private:
  const HipModel& model_;
  const TemporalGraphStore& store_;
  Timestamp time_;
  ad::Tape tape_;
  ad::ParameterBinding bind_;
  WindowEncoding encoding_;
};

/// One quadruple (s, r*, o, t) per candidate object o of s that has window
/// history, with r* the most likely relation (ties by lower id).
std::vector<Quadruple> generate_candidate_quadruples(StepContext& context,
                                                     const TemporalGraphStore& store,
                                                     EntityId subject);

/// Scores the candidates of every query with I_s + I_h, keeps the top `k`
/// per query (ties by lower object id) and unions them into a predicted
/// snapshot at the context time. An edge chosen by several queries is
/// stored once, with the provenance of the first.
PredictedGraph step_predict(StepContext& context, const TemporalGraphStore& store,
                            std::span<const Query> queries, int k, int step);

struct ReasonerOptions {
  int topk = 10;
  FeedbackMode feedback = FeedbackMode::Predicted;
  ScoreMode score = ScoreMode::Full;
};

ReasonerOptions reasoner_options(const TrainConfig& config);

/// Answers queries at any future times. Target times are visited in
/// ascending order starting right after the latest stored snapshot; after
/// answering the queries at time t', the store is extended with the
/// predicted snapshot built from the queries still ahead (Predicted), the
/// true snapshot at t' (GroundTruth) or nothing (None). Score modes other
/// than Full never roll predicted snapshots. Answers are in query order.
std::vector<RankedAnswer> reason(const HipModel& model, TemporalGraphStore& store,
                                 std::span<const Query> queries, const ReasonerOptions& options,
                                 std::span<const SnapshotGraph> revealed = {},
                                 std::vector<PredictedGraph>* predicted = nullptr);

/// Single-horizon form: every query lies at latest + horizon. Rejects
/// horizon < 1 and queries at other times.
std::vector<RankedAnswer> multi_step_reason(const HipModel& model, TemporalGraphStore& store,
                                            std::span<const Query> queries, int horizon,
                                            int topk,
                                            std::vector<PredictedGraph>* predicted = nullptr);

/// Prediction file: subject, relation, target time, rank of the known
/// answer (or "-"), and the top 20 object ids comma-joined; tab-separated.
void write_predictions(const std::filesystem::path& file, std::span<const RankedAnswer> answers,
                       std::span<const std::optional<int>> ranks,
                       const std::function<Timestamp(Timestamp)>& to_raw);

/// Query file: one `subject relation time [object|?]` per line, raw time.
std::vector<Query> read_query_file(const std::filesystem::path& file, const DatasetBundle& bundle);

}  // namespace hip
