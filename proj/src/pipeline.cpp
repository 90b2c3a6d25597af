// SPDX-License-Identifier: Apache-2.0

#include "hip/pipeline.hpp"

#include <stdexcept>

namespace hip {

namespace {

struct SplitView {
  std::vector<SnapshotGraph> history;
  std::vector<Quadruple> targets;
};

SplitView split_view(const DatasetBundle& data, Split split) {
  SplitView view;
  std::vector<Quadruple> history = data.train;
  if (split == Split::Test) {
    history.insert(history.end(), data.valid.begin(), data.valid.end());
    view.targets = data.test;
  } else {
    if (!data.has_valid || data.valid.empty())
      throw std::invalid_argument("dataset " + data.name + " has no validation split");
    view.targets = data.valid;
  }
  view.history = build_snapshots(history, data.num_relations);
  return view;
}

FilterIndex make_filter(const DatasetBundle& data, FilterMode mode) {
  FilterIndex filter(mode, data.num_relations);
  filter.add(data.train);
  filter.add(data.valid);
  filter.add(data.test);
  return filter;
}

Evaluation finish(std::vector<RankedAnswer> answers, const FilterIndex& filter) {
  Evaluation e;
  e.answers = std::move(answers);
  e.ranks = rank_answers(e.answers, filter);
  std::vector<Query> queries;
  for (const RankedAnswer& a : e.answers)
    if (a.query.truth) queries.push_back(a.query);
  e.report = evaluate(queries, e.ranks);
  return e;
}

}  // namespace

FitResult fit(Trainer& trainer, const DatasetBundle& data,
              const std::function<void(const EpochMetrics&)>& on_epoch) {
  HipModel& model = trainer.model();
  const TrainConfig& config = model.config();
  const auto snapshots = build_snapshots(data.train, data.num_relations);
  const bool validate = config.validate_every > 0 && data.has_valid && !data.valid.empty();

  FitResult result;
  ad::ParameterStore best;
  while (trainer.epoch() < config.epochs) {
    EpochMetrics m = trainer.train_epoch(snapshots);
    result.epochs.push_back(m);
    if (on_epoch) on_epoch(m);
    if (validate && (trainer.epoch() % config.validate_every == 0 ||
                     trainer.epoch() == config.epochs)) {
      const double mrr = evaluate_split(model, data, Split::Valid).report.mrr;
      if (!result.best_valid_mrr || mrr > *result.best_valid_mrr) {
        result.best_valid_mrr = mrr;
        result.best_epoch = trainer.epoch();
        best = model.parameters();
      }
    }
  }
  if (result.best_valid_mrr) model.parameters() = best;
  return result;
}

Evaluation evaluate_split(const HipModel& model, const DatasetBundle& data, Split split) {
  const TrainConfig& config = model.config();
  SplitView view = split_view(data, split);
  TemporalGraphStore store(data.num_entities, data.num_relations);
  for (SnapshotGraph& g : view.history) store.append(std::move(g));

  const auto queries = make_queries(view.targets, data.num_relations, config.both_directions);
  const auto revealed = build_snapshots(view.targets, data.num_relations);
  auto answers = reason(model, store, queries, reasoner_options(config), revealed);
  return finish(std::move(answers), make_filter(data, config.filter_mode));
}

Evaluation evaluate_frequency(const DatasetBundle& data, Split split, FilterMode filter,
                              bool both_directions) {
  SplitView view = split_view(data, split);
  HistoryVocabulary vocabulary;
  for (const SnapshotGraph& g : view.history) vocabulary.update(g);
  const auto queries = make_queries(view.targets, data.num_relations, both_directions);
  return finish(frequency_baseline(vocabulary, queries, data.num_entities),
                make_filter(data, filter));
}

}  // namespace hip
