// SPDX-License-Identifier: Apache-2.0
//
// Filtered ranking metrics and a frequency baseline.

#pragma once

#include "hip/config.hpp"
#include "hip/reasoner.hpp"
#include "hip/tkg_store.hpp"

#include <Eigen/Dense>

#include <iosfwd>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <tuple>
#include <vector>

namespace hip {

/// 1 + number of unfiltered competitors scoring at least as high as the
/// truth (ties go against the truth). Throws if the truth id is out of
/// range or inside the filter set.
int filtered_rank(const Eigen::VectorXd& scores, EntityId truth, const std::set<EntityId>& filter);

/// True objects of (subject, augmented relation) either per timestamp
/// (time-aware) or over all time (static).
class FilterIndex {
 public:
  FilterIndex(FilterMode mode, RelationId num_relations);
  void add(std::span<const Quadruple> quadruples);

  /// Objects to discount for `query`, never containing its truth.
  std::set<EntityId> filter_for(const Query& query) const;

 private:
  FilterMode mode_;
  RelationId num_relations_;
  std::map<std::tuple<EntityId, RelationId, Timestamp>, std::set<EntityId>> objects_;
};

struct TimestampMetrics {
  Timestamp time = 0;
  std::size_t count = 0;
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
};

struct MetricReport {
  double mrr = 0.0;
  double hits1 = 0.0;
  double hits3 = 0.0;
  double hits10 = 0.0;
  std::size_t count = 0;
  std::vector<TimestampMetrics> per_timestamp;  // ascending time
};

/// Aggregates ranks (one per query). Throws on an empty set.
MetricReport evaluate(std::span<const Query> queries, std::span<const int> ranks);

/// Ranks of every answer whose query carries a truth, in order.
std::vector<int> rank_answers(std::span<const RankedAnswer> answers, const FilterIndex& filter);

/// Metrics as a JSON object; `to_raw` maps ordinal times in the breakdown.
std::string to_json(const MetricReport& report, const std::function<Timestamp(Timestamp)>& to_raw);
void write_csv(std::ostream& out, const MetricReport& report,
               const std::function<Timestamp(Timestamp)>& to_raw);

/// Scores objects by historical count for (s, r) with ties broken toward
/// lower ids: count + (n - o) / (n + 1).
std::vector<RankedAnswer> frequency_baseline(const HistoryVocabulary& vocabulary,
                                             std::span<const Query> queries,
                                             EntityId num_entities);

}  // namespace hip
