// SPDX-License-Identifier: Apache-2.0

#include "hip/scoring.hpp"

#include <array>
#include <stdexcept>

namespace hip::scoring {

Var temporal_logits(Var subject, Var pair, Var object, Var weight) {
  const std::array<Var, 3> parts{subject, pair, object};
  return ad::matmul(ad::concat_cols(parts), weight);
}

Var temporal_distribution(Var subject, Var pair, Var object, Var weight) {
  return ad::softmax(temporal_logits(subject, pair, object, weight), ad::Axis::Cols);
}

Var trilinear(Var subject, Var relation, Var object) {
  return ad::row_sum(ad::mul(ad::mul(subject, relation), object));
}

Var structural_score(Var subject, Var relation, Var object) {
  return ad::sigmoid(trilinear(subject, relation, object));
}

Var structural_logits(Var subject, Var relation, Var entities) {
  return ad::matmul(ad::mul(subject, relation), ad::transpose(entities));
}

Var repetitive_logits(Var subject_pref, Var relation_pref, Var weight, const Matrix& counts) {
  const std::array<Var, 2> parts{subject_pref, relation_pref};
  Var logits = ad::matmul(ad::concat_cols(parts), weight);
  if (counts.rows() != logits.rows() || counts.cols() != logits.cols())
    throw std::invalid_argument("repetitive_logits: counts " + ad::shape_string(counts) +
                                " vs logits " + ad::shape_string(logits.value()));
  return ad::add(logits, logits.tape().constant(counts));
}

Var repetitive_distribution(Var subject_pref, Var relation_pref, Var weight,
                            const Matrix& counts) {
  return ad::softmax(repetitive_logits(subject_pref, relation_pref, weight, counts),
                     ad::Axis::Cols);
}

Eigen::VectorXd combined_score(const Eigen::VectorXd& structural,
                               const Eigen::VectorXd& repetitive) {
  if (structural.size() != repetitive.size())
    throw std::invalid_argument("combined_score: length mismatch");
  return structural + repetitive;
}

Matrix count_rows(const HistoryVocabulary& vocabulary, std::span<const EntityId> subjects,
                  std::span<const RelationId> relations, EntityId num_entities, bool binarize) {
  if (subjects.size() != relations.size())
    throw std::invalid_argument("count_rows: subject/relation length mismatch");
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(subjects.size()), num_entities);
  for (std::size_t i = 0; i < subjects.size(); ++i)
    if (const auto* objects = vocabulary.objects(subjects[i], relations[i]))
      for (const auto& [o, c] : *objects)
        out(static_cast<Eigen::Index>(i), o) = binarize ? 1.0 : static_cast<double>(c);
  return out;
}

}  // namespace hip::scoring
