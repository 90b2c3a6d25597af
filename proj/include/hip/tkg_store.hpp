// SPDX-License-Identifier: Apache-2.0
//
// Quadruple datasets, per-timestamp snapshots and the historical vocabulary.
//
// Every stored edge (s, r, o) is paired with its inverse (o, r + |R|, s), so
// subject queries (?, r, o) become object queries (o, r + |R|, ?).

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

namespace hip {

using EntityId = std::int32_t;
using RelationId = std::int32_t;
using Timestamp = std::int64_t;

struct Quadruple {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;
  Timestamp time = 0;

  friend bool operator==(const Quadruple&, const Quadruple&) = default;
};

struct Edge {
  EntityId subject = 0;
  RelationId relation = 0;
  EntityId object = 0;

  friend bool operator==(const Edge&, const Edge&) = default;
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

enum class SnapshotKind { Observed, Predicted };

/// All edges of one timestamp, inverse-augmented, with a subject index.
class SnapshotGraph {
 public:
  SnapshotGraph(Timestamp time, RelationId num_relations,
                SnapshotKind kind = SnapshotKind::Observed)
      : time_(time), num_relations_(num_relations), kind_(kind) {}

  /// Stores (s, r, o) followed by (o, r + |R|, s). `relation` must be < |R|.
  void add_event(EntityId subject, RelationId relation, EntityId object);
  /// Stores an edge given with an already-augmented relation id (< 2|R|)
  /// together with its inverse.
  void add_edge(const Edge& edge);

  Timestamp time() const { return time_; }
  SnapshotKind kind() const { return kind_; }
  RelationId num_relations() const { return num_relations_; }
  const std::vector<Edge>& edges() const { return edges_; }
  std::size_t raw_count() const { return edges_.size() / 2; }
  bool empty() const { return edges_.empty(); }

  /// (relation, object) pairs of `subject`, in insertion order.
  std::span<const std::pair<RelationId, EntityId>> neighbors(EntityId subject) const;
  bool contains_entity(EntityId entity) const { return adjacency_.contains(entity); }
  bool contains(const Edge& edge) const;

 private:
  void push(const Edge& edge);

  Timestamp time_;
  RelationId num_relations_;
  SnapshotKind kind_;
  std::vector<Edge> edges_;
  std::unordered_map<EntityId, std::vector<std::pair<RelationId, EntityId>>> adjacency_;
};

/// One snapshot per distinct timestamp, ascending, file order kept within.
std::vector<SnapshotGraph> build_snapshots(std::span<const Quadruple> quadruples,
                                           RelationId num_relations);

struct DatasetBundle {
  std::string name;
  EntityId num_entities = 0;
  RelationId num_relations = 0;
  std::vector<Quadruple> train;
  std::vector<Quadruple> valid;
  std::vector<Quadruple> test;
  bool has_valid = false;
  /// Raw timestamps map to ordinals as (raw - time_origin) / time_gap.
  Timestamp time_origin = 0;
  Timestamp time_gap = 1;

  Timestamp to_raw(Timestamp ordinal) const { return ordinal * time_gap + time_origin; }
};

/// Reads train.txt, valid.txt (optional), test.txt and stat.txt from a
/// directory. The time gap is inferred as the gcd of timestamp offsets
/// unless given.
DatasetBundle load_dataset(const std::filesystem::path& directory,
                           std::optional<Timestamp> time_gap = std::nullopt);

/// Parses one quadruple file; `num_entities`/`num_relations` bound the ids.
std::vector<Quadruple> read_quadruples(const std::filesystem::path& file, EntityId num_entities,
                                       RelationId num_relations);

void write_quadruples(const std::filesystem::path& file, std::span<const Quadruple> quadruples);
void write_dataset(const std::filesystem::path& directory, const DatasetBundle& bundle);

/// Keeps entities with at least `min_events` incident events across all
/// splits (ids re-packed densely), then uses ordinals [0, train_span) as
/// training data and [train_span, train_span + test_span) as test data.
DatasetBundle subsample_by_activity(const DatasetBundle& bundle, int min_events,
                                    Timestamp train_span, Timestamp test_span);

/// Per (subject, relation) object counts over all absorbed snapshots.
class HistoryVocabulary {
 public:
  /// Rejects snapshots not strictly after the last absorbed one.
  void update(const SnapshotGraph& snapshot);

  int count(EntityId subject, RelationId relation, EntityId object) const;
  /// Dense length-`num_entities` count vector for (subject, relation).
  Eigen::VectorXd count_vector(EntityId subject, RelationId relation,
                               EntityId num_entities) const;
  const std::map<EntityId, int>* objects(EntityId subject, RelationId relation) const;
  std::optional<Timestamp> last_updated() const { return last_updated_; }
  std::size_t size() const { return counts_.size(); }

 private:
  static std::uint64_t key(EntityId s, RelationId r) {
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(s)) << 32) |
           static_cast<std::uint32_t>(r);
  }

  std::unordered_map<std::uint64_t, std::map<EntityId, int>> counts_;
  std::optional<Timestamp> last_updated_;
};

/// Counts over an explicit list of snapshots (window-limited vocabulary).
Eigen::VectorXd window_count_vector(std::span<const SnapshotGraph* const> window,
                                    EntityId subject, RelationId relation,
                                    EntityId num_entities);

/// Time-ordered history of observed and predicted snapshots, together with
/// the vocabulary and an index of first contact between entity pairs.
class TemporalGraphStore {
 public:
  TemporalGraphStore(EntityId num_entities, RelationId num_relations)
      : num_entities_(num_entities), num_relations_(num_relations) {}

  /// Appends a snapshot strictly after the latest one and absorbs it into
  /// the vocabulary and the pair index.
  void append(SnapshotGraph snapshot);

  const std::vector<SnapshotGraph>& snapshots() const { return snapshots_; }
  const HistoryVocabulary& vocabulary() const { return vocabulary_; }
  EntityId num_entities() const { return num_entities_; }
  RelationId num_relations() const { return num_relations_; }
  std::optional<Timestamp> latest_time() const;

  /// The last `size` snapshots with time < `before`, oldest first.
  std::vector<const SnapshotGraph*> window(Timestamp before, int size) const;

  /// Entities o with some stored edge (s, *, o) at a time < `up_to`, sorted.
  std::vector<EntityId> candidate_entities(EntityId subject, Timestamp up_to) const;

 private:
  EntityId num_entities_;
  RelationId num_relations_;
  std::vector<SnapshotGraph> snapshots_;
  HistoryVocabulary vocabulary_;
  // subject -> object -> earliest timestamp of contact
  std::unordered_map<EntityId, std::map<EntityId, Timestamp>> first_contact_;
};

}  // namespace hip
