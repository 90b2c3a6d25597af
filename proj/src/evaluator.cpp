// SPDX-License-Identifier: Apache-2.0

#include "hip/evaluator.hpp"

#include "json.hpp"

#include <ostream>
#include <stdexcept>

namespace hip {

int filtered_rank(const Eigen::VectorXd& scores, EntityId truth, const std::set<EntityId>& filter) {
  if (truth < 0 || truth >= scores.size())
    throw std::out_of_range("filtered_rank: truth id " + std::to_string(truth) + " out of range");
  if (filter.contains(truth)) throw std::invalid_argument("filtered_rank: truth is filtered");
  const double target = scores(truth);
  int rank = 1;
  for (Eigen::Index o = 0; o < scores.size(); ++o) {
    if (o == truth || filter.contains(static_cast<EntityId>(o))) continue;
    if (scores(o) >= target) ++rank;
  }
  return rank;
}

FilterIndex::FilterIndex(FilterMode mode, RelationId num_relations)
    : mode_(mode), num_relations_(num_relations) {}

void FilterIndex::add(std::span<const Quadruple> quadruples) {
  for (const Quadruple& q : quadruples) {
    const Timestamp t = mode_ == FilterMode::TimeAware ? q.time : 0;
    objects_[{q.subject, q.relation, t}].insert(q.object);
    objects_[{q.object, q.relation + num_relations_, t}].insert(q.subject);
  }
}

std::set<EntityId> FilterIndex::filter_for(const Query& query) const {
  const Timestamp t = mode_ == FilterMode::TimeAware ? query.time : 0;
  auto it = objects_.find({query.subject, query.relation, t});
  if (it == objects_.end()) return {};
  std::set<EntityId> out = it->second;
  if (query.truth) out.erase(*query.truth);
  return out;
}

namespace {

void accumulate(TimestampMetrics& m, int rank) {
  ++m.count;
  m.mrr += 1.0 / rank;
  m.hits1 += rank <= 1;
  m.hits3 += rank <= 3;
  m.hits10 += rank <= 10;
}

void finish(TimestampMetrics& m) {
  const double n = static_cast<double>(m.count);
  m.mrr /= n;
  m.hits1 /= n;
  m.hits3 /= n;
  m.hits10 /= n;
}

}  // namespace

MetricReport evaluate(std::span<const Query> queries, std::span<const int> ranks) {
  if (queries.empty()) throw std::invalid_argument("evaluate: empty query set");
  if (queries.size() != ranks.size())
    throw std::invalid_argument("evaluate: one rank per query required");
  TimestampMetrics total;
  std::map<Timestamp, TimestampMetrics> by_time;
  for (std::size_t i = 0; i < queries.size(); ++i) {
    if (ranks[i] < 1) throw std::invalid_argument("evaluate: rank below 1");
    accumulate(total, ranks[i]);
    TimestampMetrics& m = by_time[queries[i].time];
    m.time = queries[i].time;
    accumulate(m, ranks[i]);
  }
  finish(total);
  MetricReport report{total.mrr, total.hits1, total.hits3, total.hits10, total.count, {}};
  for (auto& [t, m] : by_time) {
    finish(m);
    report.per_timestamp.push_back(m);
  }
  return report;
}

std::vector<int> rank_answers(std::span<const RankedAnswer> answers, const FilterIndex& filter) {
  std::vector<int> ranks;
  for (const RankedAnswer& a : answers)
    if (a.query.truth) ranks.push_back(filtered_rank(a.scores, *a.query.truth, filter.filter_for(a.query)));
  return ranks;
}

std::string to_json(const MetricReport& report, const std::function<Timestamp(Timestamp)>& to_raw) {
  nlohmann::ordered_json j;
  j["mrr"] = report.mrr;
  j["hits@1"] = report.hits1;
  j["hits@3"] = report.hits3;
  j["hits@10"] = report.hits10;
  j["count"] = report.count;
  auto& rows = j["per_timestamp"] = nlohmann::ordered_json::array();
  for (const TimestampMetrics& m : report.per_timestamp) {
    nlohmann::ordered_json row;
    row["time"] = to_raw(m.time);
    row["count"] = m.count;
    row["mrr"] = m.mrr;
    row["hits@1"] = m.hits1;
    row["hits@3"] = m.hits3;
    row["hits@10"] = m.hits10;
    rows.push_back(std::move(row));
  }
  return j.dump(2) + "\n";
}

void write_csv(std::ostream& out, const MetricReport& report,
               const std::function<Timestamp(Timestamp)>& to_raw) {
  out.precision(10);
  out << "time,count,mrr,hits@1,hits@3,hits@10\n";
  for (const TimestampMetrics& m : report.per_timestamp)
    out << to_raw(m.time) << ',' << m.count << ',' << m.mrr << ',' << m.hits1 << ',' << m.hits3
        << ',' << m.hits10 << '\n';
}

std::vector<RankedAnswer> frequency_baseline(const HistoryVocabulary& vocabulary,
                                             std::span<const Query> queries,
                                             EntityId num_entities) {
  std::vector<RankedAnswer> out;
  out.reserve(queries.size());
  const double n = num_entities;
  const Eigen::VectorXd tie_break =
      (n - Eigen::VectorXd::LinSpaced(num_entities, 0.0, n - 1.0).array()) / (n + 1.0);
  for (const Query& q : queries) {
    RankedAnswer a{q, vocabulary.count_vector(q.subject, q.relation, num_entities) + tie_break, {}};
    a.ranking = rank_descending(a.scores);
    out.push_back(std::move(a));
  }
  return out;
}

}  // namespace hip
