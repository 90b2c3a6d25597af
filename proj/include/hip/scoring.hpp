// SPDX-License-Identifier: Apache-2.0
//
// The temporal, structural and repetitive-history scores.

#pragma once

#include "hip/diffcore.hpp"
#include "hip/tkg_store.hpp"

namespace hip::scoring {

using ad::Matrix;
using ad::Var;

/// Rows W_t [z_s; z_so; z_o]; W_t is stored as 3d x p.
Var temporal_logits(Var subject, Var pair, Var object, Var weight);
/// Softmax over the p = 2|R| relation types, one row per pair.
Var temporal_distribution(Var subject, Var pair, Var object, Var weight);

/// Tri-linear product <x_s, x_r, x_o> per row (B x 1).
Var trilinear(Var subject, Var relation, Var object);
/// sigmoid(<x_s, x_r, x_o>) per row, in (0, 1).
Var structural_score(Var subject, Var relation, Var object);
/// (x_s ⊙ x_r) E^T: tri-linear logits against every entity (B x |E|).
Var structural_logits(Var subject, Var relation, Var entities);

/// W_h [e_s; e_r] + V per row; W_h stored as 2d x |E|, V is B x |E|.
Var repetitive_logits(Var subject_pref, Var relation_pref, Var weight, const Matrix& counts);
Var repetitive_distribution(Var subject_pref, Var relation_pref, Var weight,
                            const Matrix& counts);

/// I_s + I_h for every candidate object of one query: structural scores
/// (length |E|) and the repetitive distribution row are summed.
Eigen::VectorXd combined_score(const Eigen::VectorXd& structural,
                               const Eigen::VectorXd& repetitive);

/// Dense B x |E| count rows for the given (subject, relation) queries.
Matrix count_rows(const HistoryVocabulary& vocabulary, std::span<const EntityId> subjects,
                  std::span<const RelationId> relations, EntityId num_entities,
                  bool binarize = false);

}  // namespace hip::scoring
