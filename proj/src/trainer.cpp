// SPDX-License-Identifier: Apache-2.0

#include "hip/trainer.hpp"

#include "hip/scoring.hpp"

#include <algorithm>
#include <chrono>
#include <map>
#include <ostream>
#include <stdexcept>

namespace hip {

using ad::Index;
using ad::Matrix;
using ad::Var;

Matrix batch_counts(const TrainConfig& config, const HistoryVocabulary& vocabulary,
                    std::span<const SnapshotGraph* const> window, std::span<const Edge> batch,
                    EntityId num_entities) {
  std::vector<EntityId> subjects;
  std::vector<RelationId> relations;
  for (const Edge& e : batch) {
    subjects.push_back(e.subject);
    relations.push_back(e.relation);
  }
  if (config.vocabulary_scope == VocabularyScope::AllHistory)
    return scoring::count_rows(vocabulary, subjects, relations, num_entities,
                               config.binarize_vocabulary);
  Matrix out(static_cast<Index>(batch.size()), num_entities);
  for (std::size_t i = 0; i < batch.size(); ++i) {
    Eigen::VectorXd row = window_count_vector(window, subjects[i], relations[i], num_entities);
    if (config.binarize_vocabulary) row = (row.array() > 0.0).cast<double>().matrix();
    out.row(static_cast<Index>(i)) = row.transpose();
  }
  return out;
}

LossResult compute_loss(ad::ParameterBinding& bind, const HipModel& model,
                        const WindowEncoding& encoding, std::span<const Edge> batch,
                        const Matrix& counts) {
  if (batch.empty()) throw std::invalid_argument("compute_loss: empty batch");
  const LossTerms& terms = model.config().loss_terms;
  if (!terms.any()) throw std::invalid_argument("compute_loss: no loss term enabled");

  std::vector<Index> subjects, relations, objects;
  for (const Edge& e : batch) {
    subjects.push_back(e.subject);
    relations.push_back(e.relation);
    objects.push_back(e.object);
  }

  LossResult result;
  result.parts.quadruples = batch.size();
  auto accumulate = [&](Var term) {
    result.total = result.total.valid() ? ad::add(result.total, term) : term;
  };

  if (terms.structural) {
    Var x_s = ad::gather_rows(encoding.current.entities, subjects);
    Var x_r = ad::gather_rows(encoding.current.relations, relations);
    Var logits = scoring::structural_logits(x_s, x_r, encoding.current.entities);
    Var loss = ad::neg_log_softmax_at(logits, objects);
    result.parts.structural = loss.value()(0, 0);
    accumulate(loss);
  }

  if (terms.repetitive) {
    Var e_s = ad::gather_rows(bind("pref.entity"), subjects);
    Var e_r = ad::gather_rows(bind("pref.relation"), relations);
    Var logits = scoring::repetitive_logits(e_s, e_r, bind("score.repetitive"), counts);
    Var loss = ad::neg_log_softmax_at(logits, objects);
    result.parts.repetitive = loss.value()(0, 0);
    accumulate(loss);
  }

  if (terms.temporal && !encoding.window.empty()) {
    std::vector<std::pair<EntityId, EntityId>> pairs;
    for (const Edge& e : batch) pairs.emplace_back(e.subject, e.object);
    std::sort(pairs.begin(), pairs.end());
    pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
    const auto sequences = tip::extract_pair_sequences(encoding.window, pairs, model.config().window);
    std::map<std::pair<EntityId, EntityId>, Index> row_of;
    for (std::size_t i = 0; i < sequences.size(); ++i)
      row_of[{sequences[i].subject, sequences[i].object}] = static_cast<Index>(i);

    std::vector<Index> pair_rows, t_subjects, t_objects, t_relations;
    for (const Edge& e : batch) {
      auto it = row_of.find({e.subject, e.object});
      if (it == row_of.end()) continue;
      pair_rows.push_back(it->second);
      t_subjects.push_back(e.subject);
      t_objects.push_back(e.object);
      t_relations.push_back(e.relation);
    }
    if (!pair_rows.empty()) {
      Var z_pairs = model.pair_embeddings(bind, encoding, sequences);
      Var logits = scoring::temporal_logits(ad::gather_rows(encoding.temporal_entities, t_subjects),
                                            ad::gather_rows(z_pairs, pair_rows),
                                            ad::gather_rows(encoding.temporal_entities, t_objects),
                                            bind("score.temporal"));
      Var loss = ad::neg_log_softmax_at(logits, t_relations);
      result.parts.temporal = loss.value()(0, 0);
      result.parts.temporal_terms = pair_rows.size();
      accumulate(loss);
    }
  }

  if (!result.total.valid()) {
    // Only the temporal term is enabled and no pair has window history.
    result.total = bind.tape().constant(Matrix::Zero(1, 1));
  }
  result.parts.total = result.total.value()(0, 0);
  return result;
}

Trainer::Trainer(HipModel& model) : model_(model) {
  optimizer_.config.learning_rate = model.config().learning_rate;
}

EpochMetrics Trainer::train_epoch(std::span<const SnapshotGraph> snapshots) {
  const auto started = std::chrono::steady_clock::now();
  const TrainConfig& config = model_.config();
  std::seed_seq seq{static_cast<std::uint64_t>(config.seed), static_cast<std::uint64_t>(epoch_)};
  std::mt19937_64 rng(seq);

  TemporalGraphStore history(model_.num_entities(), model_.num_relations());
  EpochMetrics metrics;
  metrics.epoch = epoch_ + 1;
  std::size_t edges_seen = 0;

  for (std::size_t i = 0; i < snapshots.size(); ++i) {
    const SnapshotGraph& target = snapshots[i];
    if (i > 0 && !target.empty()) {
      const auto window = history.window(target.time(), config.window);
      std::vector<Edge> edges = target.edges();
      std::shuffle(edges.begin(), edges.end(), rng);
      for (std::size_t begin = 0; begin < edges.size();
           begin += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end =
            std::min(edges.size(), begin + static_cast<std::size_t>(config.batch_size));
        std::span<const Edge> batch(edges.data() + begin, end - begin);

        ad::Tape tape;
        ad::ParameterBinding bind(tape, model_.parameters());
        WindowEncoding enc = model_.encode(bind, window, ad::Mode::Train, &rng);
        const Matrix counts = batch_counts(config, history.vocabulary(), window, batch,
                                           model_.num_entities());
        LossResult loss = compute_loss(bind, model_, enc, batch, counts);
        tape.backward(loss.total);
        ad::adam_step(model_.parameters(), bind.gradients(), optimizer_);

        metrics.loss += loss.parts.total;
        metrics.temporal += loss.parts.temporal;
        metrics.structural += loss.parts.structural;
        metrics.repetitive += loss.parts.repetitive;
        edges_seen += batch.size();
      }
    }
    history.append(target);
  }
  if (edges_seen > 0) {
    const double n = static_cast<double>(edges_seen);
    metrics.loss /= n;
    metrics.temporal /= n;
    metrics.structural /= n;
    metrics.repetitive /= n;
  }
  ++epoch_;
  metrics.seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return metrics;
}

void write_log_header(std::ostream& out) {
  out << "epoch,loss,temporal,structural,repetitive,seconds\n";
}

void write_log_row(std::ostream& out, const EpochMetrics& m) {
  out << m.epoch << ',' << m.loss << ',' << m.temporal << ',' << m.structural << ','
      << m.repetitive << ',' << m.seconds << '\n';
}

}  // namespace hip
