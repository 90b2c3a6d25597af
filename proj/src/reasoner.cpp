// SPDX-License-Identifier: Apache-2.0

#include "hip/reasoner.hpp"

#include "hip/scoring.hpp"
#include "hip/tip.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace hip {

using ad::Index;
using ad::Var;

std::vector<Query> make_queries(std::span<const Quadruple> quadruples, RelationId num_relations,
                                bool both_directions) {
  std::vector<Query> out;
  out.reserve(quadruples.size() * (both_directions ? 2 : 1));
  for (const Quadruple& q : quadruples) {
    out.push_back({q.subject, q.relation, q.time, q.object});
    if (both_directions) out.push_back({q.object, q.relation + num_relations, q.time, q.subject});
  }
  return out;
}

std::vector<EntityId> rank_descending(const Eigen::VectorXd& scores) {
  std::vector<EntityId> order(static_cast<std::size_t>(scores.size()));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](EntityId a, EntityId b) { return scores(a) > scores(b); });
  return order;
}

StepContext::StepContext(const HipModel& model, const TemporalGraphStore& store, Timestamp time)
    : model_(model), store_(store), time_(time), bind_(tape_, model.parameters()) {
  const auto window = store.window(time, model.config().window);
  encoding_ = model.encode(bind_, window, ad::Mode::Eval, nullptr);
}

Eigen::MatrixXd StepContext::relation_distribution(
    std::span<const std::pair<EntityId, EntityId>> pairs, std::vector<bool>& has_history) {
  has_history.assign(pairs.size(), false);
  if (encoding_.window.empty()) return {};
  const auto sequences =
      tip::extract_pair_sequences(encoding_.window, pairs, model_.config().window);
  if (sequences.empty()) return {};
  std::vector<Index> subjects, objects;
  std::size_t next = 0;
  for (std::size_t i = 0; i < pairs.size() && next < sequences.size(); ++i) {
    if (sequences[next].subject == pairs[i].first && sequences[next].object == pairs[i].second) {
      has_history[i] = true;
      subjects.push_back(pairs[i].first);
      objects.push_back(pairs[i].second);
      ++next;
    }
  }
  Var z_pairs = model_.pair_embeddings(bind_, encoding_, sequences);
  Var dist = scoring::temporal_distribution(ad::gather_rows(encoding_.temporal_entities, subjects),
                                            z_pairs,
                                            ad::gather_rows(encoding_.temporal_entities, objects),
                                            bind_("score.temporal"));
  return dist.value();
}

Eigen::VectorXd StepContext::structural_scores(EntityId subject, RelationId relation) {
  const ad::Matrix& ent = encoding_.current.entities.value();
  const ad::Matrix& rel = encoding_.current.relations.value();
  const Eigen::RowVectorXd query = ent.row(subject).cwiseProduct(rel.row(relation));
  const Eigen::VectorXd logits = ent * query.transpose();
  return logits.unaryExpr([](double x) {
    return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
  });
}

Eigen::VectorXd StepContext::repetitive_scores(EntityId subject, RelationId relation) {
  const EntityId n = model_.num_entities();
  const TrainConfig& config = model_.config();
  Eigen::VectorXd counts;
  if (config.vocabulary_scope == VocabularyScope::AllHistory) {
    counts = store_.vocabulary().count_vector(subject, relation, n);
  } else {
    counts = window_count_vector(encoding_.window, subject, relation, n);
  }
  if (config.binarize_vocabulary) counts = (counts.array() > 0.0).cast<double>().matrix();

  const ad::ParameterStore& p = model_.parameters();
  Eigen::RowVectorXd input(2 * config.dim);
  input << p.at("pref.entity").row(subject), p.at("pref.relation").row(relation);
  const Eigen::VectorXd logits =
      (input * p.at("score.repetitive")).transpose() + counts;
  const Eigen::VectorXd shifted = (logits.array() - logits.maxCoeff()).exp().matrix();
  return shifted / shifted.sum();
}

Eigen::VectorXd StepContext::scores(EntityId subject, RelationId relation, ScoreMode mode) {
  switch (mode) {
    case ScoreMode::Vocabulary:
      return repetitive_scores(subject, relation);
    case ScoreMode::Structural:
      return structural_scores(subject, relation);
    case ScoreMode::Full:
    case ScoreMode::Combined:
      break;
  }
  return scoring::combined_score(structural_scores(subject, relation),
                                 repetitive_scores(subject, relation));
}

std::vector<Quadruple> generate_candidate_quadruples(StepContext& context,
                                                     const TemporalGraphStore& store,
                                                     EntityId subject) {
  const auto objects = store.candidate_entities(subject, context.time());
  std::vector<Quadruple> out;
  if (objects.empty()) {
    std::clog << "reasoner: subject " << subject << " has no candidate pairs at t="
              << context.time() << '\n';
    return out;
  }
  std::vector<std::pair<EntityId, EntityId>> pairs;
  for (EntityId o : objects) pairs.emplace_back(subject, o);
  std::vector<bool> has_history;
  const Eigen::MatrixXd dist = context.relation_distribution(pairs, has_history);
  Index row = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (!has_history[i]) continue;
    Index best = 0;
    dist.row(row).maxCoeff(&best);  // first maximum, i.e. lowest id on ties
    out.push_back({subject, static_cast<RelationId>(best), pairs[i].second, context.time()});
    ++row;
  }
  return out;
}

PredictedGraph step_predict(StepContext& context, const TemporalGraphStore& store,
                            std::span<const Query> queries, int k, int step) {
  if (k < 1) throw std::invalid_argument("step_predict: k must be positive");
  PredictedGraph out{SnapshotGraph(context.time(), store.num_relations(), SnapshotKind::Predicted),
                     {}};
  std::map<EntityId, std::vector<Quadruple>> candidates_of;
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const EntityId s = queries[qi].subject;
    auto it = candidates_of.find(s);
    if (it == candidates_of.end())
      it = candidates_of.emplace(s, generate_candidate_quadruples(context, store, s)).first;
    const auto& candidates = it->second;
    if (candidates.empty()) continue;

    std::vector<std::pair<double, EntityId>> scored;
    std::map<RelationId, Eigen::VectorXd> by_relation;
    for (const Quadruple& c : candidates) {
      auto hit = by_relation.find(c.relation);
      if (hit == by_relation.end())
        hit = by_relation
                  .emplace(c.relation, context.scores(c.subject, c.relation, ScoreMode::Combined))
                  .first;
      scored.emplace_back(hit->second(c.object), c.object);
    }
    std::vector<std::size_t> order(scored.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (scored[a].first != scored[b].first) return scored[a].first > scored[b].first;
      return scored[a].second < scored[b].second;
    });
    const std::size_t keep = std::min(order.size(), static_cast<std::size_t>(k));
    for (std::size_t j = 0; j < keep; ++j) {
      const Quadruple& c = candidates[order[j]];
      const Edge edge{c.subject, c.relation, c.object};
      if (out.graph.contains(edge)) continue;  // the snapshot is a set union
      out.graph.add_edge(edge);
      out.provenance.push_back({edge, qi, scored[order[j]].first, step});
    }
  }
  return out;
}

ReasonerOptions reasoner_options(const TrainConfig& config) {
  return {config.topk, config.feedback_mode, config.score_mode};
}

std::vector<RankedAnswer> reason(const HipModel& model, TemporalGraphStore& store,
                                 std::span<const Query> queries, const ReasonerOptions& options,
                                 std::span<const SnapshotGraph> revealed,
                                 std::vector<PredictedGraph>* predicted) {
  std::vector<RankedAnswer> answers(queries.size());
  if (queries.empty()) return answers;
  const Timestamp start = store.latest_time() ? *store.latest_time() + 1 : 0;
  Timestamp last = start;
  for (const Query& q : queries) {
    if (q.time < start)
      throw std::invalid_argument("reason: query time " + std::to_string(q.time) +
                                  " is not after the stored history");
    last = std::max(last, q.time);
  }
  FeedbackMode feedback = options.feedback;
  if (options.score != ScoreMode::Full && feedback == FeedbackMode::Predicted)
    feedback = FeedbackMode::None;

  std::map<Timestamp, std::vector<std::size_t>> by_time;
  for (std::size_t i = 0; i < queries.size(); ++i) by_time[queries[i].time].push_back(i);
  std::map<Timestamp, const SnapshotGraph*> truth_at;
  for (const SnapshotGraph& g : revealed) truth_at[g.time()] = &g;

  int step = 0;
  for (Timestamp t = start; t <= last; ++t) {
    ++step;
    StepContext context(model, store, t);
    if (auto it = by_time.find(t); it != by_time.end()) {
      for (std::size_t i : it->second) {
        const Query& q = queries[i];
        answers[i].query = q;
        answers[i].scores = context.scores(q.subject, q.relation, options.score);
        answers[i].ranking = rank_descending(answers[i].scores);
      }
    }
    if (t == last) break;
    if (feedback == FeedbackMode::Predicted) {
      std::vector<Query> ahead;
      for (const Query& q : queries)
        if (q.time > t) ahead.push_back(q);
      PredictedGraph g = step_predict(context, store, ahead, options.topk, step);
      if (!g.graph.empty()) store.append(g.graph);
      if (predicted) predicted->push_back(std::move(g));
    } else if (feedback == FeedbackMode::GroundTruth) {
      if (auto it = truth_at.find(t); it != truth_at.end() && !it->second->empty())
        store.append(*it->second);
    }
  }
  return answers;
}

std::vector<RankedAnswer> multi_step_reason(const HipModel& model, TemporalGraphStore& store,
                                            std::span<const Query> queries, int horizon,
                                            int topk, std::vector<PredictedGraph>* predicted) {
  if (horizon < 1) throw std::invalid_argument("multi_step_reason: horizon must be at least 1");
  const Timestamp target = (store.latest_time() ? *store.latest_time() : -1) + horizon;
  for (const Query& q : queries)
    if (q.time != target)
      throw std::invalid_argument("multi_step_reason: query at t=" + std::to_string(q.time) +
                                  ", expected t=" + std::to_string(target));
  ReasonerOptions options{topk, FeedbackMode::Predicted, ScoreMode::Full};
  return reason(model, store, queries, options, {}, predicted);
}

void write_predictions(const std::filesystem::path& file, std::span<const RankedAnswer> answers,
                       std::span<const std::optional<int>> ranks,
                       const std::function<Timestamp(Timestamp)>& to_raw) {
  std::ofstream out(file);
  if (!out) throw std::runtime_error("cannot write predictions to " + file.string());
  for (std::size_t i = 0; i < answers.size(); ++i) {
    const RankedAnswer& a = answers[i];
    out << a.query.subject << '\t' << a.query.relation << '\t' << to_raw(a.query.time) << '\t';
    if (i < ranks.size() && ranks[i]) out << *ranks[i];
    else out << '-';
    out << '\t';
    const std::size_t top = std::min<std::size_t>(20, a.ranking.size());
    for (std::size_t j = 0; j < top; ++j) out << (j ? "," : "") << a.ranking[j];
    out << '\n';
  }
}

std::vector<Query> read_query_file(const std::filesystem::path& file, const DatasetBundle& bundle) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open query file " + file.string());
  std::vector<Query> out;
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream fields(line);
    long long s = 0, r = 0, t = 0;
    std::string object;
    if (!(fields >> s >> r >> t))
      throw std::runtime_error(file.string() + ":" + std::to_string(number) +
                               ": expected `subject relation time [object]`");
    fields >> object;
    auto where = [&] { return file.string() + ":" + std::to_string(number) + ": "; };
    if (s < 0 || s >= bundle.num_entities) throw std::runtime_error(where() + "subject out of range");
    if (r < 0 || r >= 2LL * bundle.num_relations)
      throw std::runtime_error(where() + "relation out of range");
    if ((t - bundle.time_origin) % bundle.time_gap != 0)
      throw std::runtime_error(where() + "time is not on the dataset grid");
    Query q{static_cast<EntityId>(s), static_cast<RelationId>(r),
            (t - bundle.time_origin) / bundle.time_gap, std::nullopt};
    if (!object.empty() && object != "?") {
      const long long o = std::stoll(object);
      if (o < 0 || o >= bundle.num_entities) throw std::runtime_error(where() + "object out of range");
      q.truth = static_cast<EntityId>(o);
    }
    out.push_back(q);
  }
  return out;
}

}  // namespace hip
