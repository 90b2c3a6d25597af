// SPDX-License-Identifier: Apache-2.0
//
// End-to-end training and evaluation over a dataset bundle.

#pragma once

#include "hip/evaluator.hpp"
#include "hip/model.hpp"
#include "hip/reasoner.hpp"
#include "hip/trainer.hpp"

#include <functional>
#include <optional>
#include <vector>

namespace hip {

enum class Split { Valid, Test };

struct FitResult {
  std::vector<EpochMetrics> epochs;
  std::optional<double> best_valid_mrr;
  int best_epoch = 0;
};

/// Runs the trainer until config.epochs. With validate_every > 0 and a
/// validation split, the parameters with the best validation MRR are
/// restored at the end. `on_epoch` sees every epoch as it finishes.
FitResult fit(Trainer& trainer, const DatasetBundle& data,
              const std::function<void(const EpochMetrics&)>& on_epoch = {});

struct Evaluation {
  MetricReport report;
  std::vector<RankedAnswer> answers;
  std::vector<int> ranks;
};

/// History is train (plus valid when scoring test); queries come from the
/// requested split and are filtered against every known fact.
Evaluation evaluate_split(const HipModel& model, const DatasetBundle& data, Split split);

/// The same protocol with frequency_baseline scores.
Evaluation evaluate_frequency(const DatasetBundle& data, Split split, FilterMode filter,
                              bool both_directions);

}  // namespace hip
