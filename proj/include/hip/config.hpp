// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

namespace hip {

enum class Composition { Subtraction, Multiplication, CircularCorrelation };
enum class Normalization { None, Mean };
enum class VocabularyScope { AllHistory, Window };
enum class FilterMode { TimeAware, Static };
enum class FeedbackMode { Predicted, GroundTruth, None };
/// Which scores answer the final queries.
enum class ScoreMode { Full, Combined, Vocabulary, Structural };

struct LossTerms {
  bool temporal = true;
  bool structural = true;
  bool repetitive = true;

  bool any() const { return temporal || structural || repetitive; }
  friend bool operator==(const LossTerms&, const LossTerms&) = default;
};

/// Every hyperparameter of training and reasoning. Defaults follow the
/// published configuration where it exists.
struct TrainConfig {
  double learning_rate = 0.001;
  int batch_size = 1024;
  int window = 10;
  int channels = 4;
  int layers = 2;
  int dim = 200;
  int epochs = 30;
  double dropout = 0.5;
  Composition composition = Composition::Multiplication;
  Normalization normalization = Normalization::None;
  bool layer_activation = true;
  bool retain_absent = true;
  bool normalize_embeddings = true;
  std::uint64_t seed = 42;
  LossTerms loss_terms;
  VocabularyScope vocabulary_scope = VocabularyScope::AllHistory;
  bool binarize_vocabulary = false;
  int topk = 10;
  FilterMode filter_mode = FilterMode::TimeAware;
  FeedbackMode feedback_mode = FeedbackMode::Predicted;
  ScoreMode score_mode = ScoreMode::Full;
  bool both_directions = true;
  int validate_every = 0;

  /// Throws std::invalid_argument naming the first offending field.
  void validate() const;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Applies one `key=value` assignment; keys use snake_case or kebab-case.
void apply_setting(TrainConfig& config, const std::string& key, const std::string& value);

/// Flat key=value text; '#' starts a comment.
TrainConfig read_config(const std::filesystem::path& file, TrainConfig base = {});
std::string to_config_text(const TrainConfig& config);
TrainConfig parse_config_text(const std::string& text, TrainConfig base = {});

std::string to_string(Composition value);
std::string to_string(FeedbackMode value);
std::string to_string(ScoreMode value);
std::string to_string(FilterMode value);
Composition parse_composition(const std::string& text);

}  // namespace hip
