// SPDX-License-Identifier: Apache-2.0

#include "hip/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace hip {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(const std::string& key, const std::string& text) {
  T value{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw std::invalid_argument("config: '" + key + "' expects a number, got '" + text + "'");
  }
  return value;
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "1" || text == "true" || text == "yes" || text == "on") return true;
  if (text == "0" || text == "false" || text == "no" || text == "off") return false;
  throw std::invalid_argument("config: '" + key + "' expects a boolean, got '" + text + "'");
}

template <typename Enum>
Enum parse_enum(const std::string& key, const std::string& text,
                std::initializer_list<std::pair<const char*, Enum>> choices) {
  for (const auto& [name, value] : choices)
    if (text == name) return value;
  std::string allowed;
  for (const auto& [name, value] : choices) allowed += std::string(allowed.empty() ? "" : "|") + name;
  throw std::invalid_argument("config: '" + key + "' must be one of " + allowed + ", got '" +
                              text + "'");
}

LossTerms parse_loss_terms(const std::string& text) {
  LossTerms terms{false, false, false};
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item == "temporal") terms.temporal = true;
    else if (item == "structural") terms.structural = true;
    else if (item == "repetitive") terms.repetitive = true;
    else if (item == "all") terms = {};
    else if (!item.empty())
      throw std::invalid_argument("config: unknown loss term '" + item + "'");
  }
  return terms;
}

std::string loss_terms_text(const LossTerms& terms) {
  std::vector<std::string> parts;
  if (terms.temporal) parts.emplace_back("temporal");
  if (terms.structural) parts.emplace_back("structural");
  if (terms.repetitive) parts.emplace_back("repetitive");
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : ",") + p;
  return out;
}

}  // namespace

Composition parse_composition(const std::string& text) {
  return parse_enum<Composition>("composition", text,
                                 {{"sub", Composition::Subtraction},
                                  {"subtraction", Composition::Subtraction},
                                  {"mult", Composition::Multiplication},
                                  {"multiplication", Composition::Multiplication},
                                  {"corr", Composition::CircularCorrelation},
                                  {"circular-correlation", Composition::CircularCorrelation}});
}

std::string to_string(Composition value) {
  switch (value) {
    case Composition::Subtraction: return "subtraction";
    case Composition::Multiplication: return "multiplication";
    case Composition::CircularCorrelation: return "circular-correlation";
  }
  return "?";
}

std::string to_string(FeedbackMode value) {
  switch (value) {
    case FeedbackMode::Predicted: return "predicted";
    case FeedbackMode::GroundTruth: return "ground-truth";
    case FeedbackMode::None: return "none";
  }
  return "?";
}

std::string to_string(ScoreMode value) {
  switch (value) {
    case ScoreMode::Full: return "full";
    case ScoreMode::Combined: return "combined";
    case ScoreMode::Vocabulary: return "vocabulary";
    case ScoreMode::Structural: return "structural";
  }
  return "?";
}

std::string to_string(FilterMode value) {
  return value == FilterMode::TimeAware ? "time-aware" : "static";
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw std::invalid_argument("config: " + msg); };
  if (!(learning_rate >= 0.0)) fail("learning_rate must be >= 0");
  if (batch_size <= 0) fail("batch_size must be positive");
  if (window <= 0) fail("window must be positive");
  if (channels <= 0) fail("channels must be positive");
  if (layers <= 0) fail("layers must be >= 1");
  if (dim <= 0) fail("dim must be positive");
  if (dim % channels != 0) fail("channels must divide dim");
  if (epochs < 0) fail("epochs must be >= 0");
  if (!(dropout >= 0.0 && dropout < 1.0)) fail("dropout must be in [0, 1)");
  if (topk <= 0) fail("topk must be positive");
  if (validate_every < 0) fail("validate_every must be >= 0");
  if (!loss_terms.any()) fail("at least one loss term must be enabled");
}

void apply_setting(TrainConfig& c, const std::string& raw_key, const std::string& raw_value) {
  std::string key = trim(raw_key);
  std::replace(key.begin(), key.end(), '-', '_');
  const std::string value = trim(raw_value);
  if (key == "learning_rate" || key == "lr") c.learning_rate = parse_number<double>(key, value);
  else if (key == "batch_size") c.batch_size = parse_number<int>(key, value);
  else if (key == "window") c.window = parse_number<int>(key, value);
  else if (key == "channels") c.channels = parse_number<int>(key, value);
  else if (key == "layers") c.layers = parse_number<int>(key, value);
  else if (key == "dim") c.dim = parse_number<int>(key, value);
  else if (key == "epochs") c.epochs = parse_number<int>(key, value);
  else if (key == "dropout") c.dropout = parse_number<double>(key, value);
  else if (key == "composition") c.composition = parse_composition(value);
  else if (key == "normalization")
    c.normalization = parse_enum<Normalization>(key, value, {{"none", Normalization::None},
                                                             {"mean", Normalization::Mean}});
  else if (key == "layer_activation") c.layer_activation = parse_bool(key, value);
  else if (key == "retain_absent") c.retain_absent = parse_bool(key, value);
  else if (key == "normalize_embeddings") c.normalize_embeddings = parse_bool(key, value);
  else if (key == "seed") c.seed = parse_number<std::uint64_t>(key, value);
  else if (key == "loss_terms") c.loss_terms = parse_loss_terms(value);
  else if (key == "vocabulary_scope")
    c.vocabulary_scope = parse_enum<VocabularyScope>(
        key, value, {{"all", VocabularyScope::AllHistory}, {"window", VocabularyScope::Window}});
  else if (key == "binarize_vocabulary") c.binarize_vocabulary = parse_bool(key, value);
  else if (key == "topk") c.topk = parse_number<int>(key, value);
  else if (key == "filter_mode")
    c.filter_mode = parse_enum<FilterMode>(
        key, value, {{"time-aware", FilterMode::TimeAware}, {"static", FilterMode::Static}});
  else if (key == "feedback_mode")
    c.feedback_mode = parse_enum<FeedbackMode>(key, value,
                                               {{"predicted", FeedbackMode::Predicted},
                                                {"ground-truth", FeedbackMode::GroundTruth},
                                                {"none", FeedbackMode::None}});
  else if (key == "score_mode")
    c.score_mode = parse_enum<ScoreMode>(key, value,
                                         {{"full", ScoreMode::Full},
                                          {"combined", ScoreMode::Combined},
                                          {"vocabulary", ScoreMode::Vocabulary},
                                          {"structural", ScoreMode::Structural}});
  else if (key == "both_directions") c.both_directions = parse_bool(key, value);
  else if (key == "validate_every") c.validate_every = parse_number<int>(key, value);
  else throw std::invalid_argument("config: unknown key '" + raw_key + "'");
}

TrainConfig parse_config_text(const std::string& text, TrainConfig base) {
  std::stringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument("config line " + std::to_string(line_no) +
                                  ": expected key=value");
    }
    apply_setting(base, line.substr(0, eq), line.substr(eq + 1));
  }
  return base;
}

TrainConfig read_config(const std::filesystem::path& file, TrainConfig base) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("cannot open config " + file.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), base);
}

std::string to_config_text(const TrainConfig& c) {
  std::ostringstream out;
  out.precision(17);
  out << "learning_rate=" << c.learning_rate << '\n'
      << "batch_size=" << c.batch_size << '\n'
      << "window=" << c.window << '\n'
      << "channels=" << c.channels << '\n'
      << "layers=" << c.layers << '\n'
      << "dim=" << c.dim << '\n'
      << "epochs=" << c.epochs << '\n'
      << "dropout=" << c.dropout << '\n'
      << "composition=" << to_string(c.composition) << '\n'
      << "normalization=" << (c.normalization == Normalization::Mean ? "mean" : "none") << '\n'
      << "layer_activation=" << (c.layer_activation ? "true" : "false") << '\n'
      << "retain_absent=" << (c.retain_absent ? "true" : "false") << '\n'
      << "normalize_embeddings=" << (c.normalize_embeddings ? "true" : "false") << '\n'
      << "seed=" << c.seed << '\n'
      << "loss_terms=" << loss_terms_text(c.loss_terms) << '\n'
      << "vocabulary_scope=" << (c.vocabulary_scope == VocabularyScope::Window ? "window" : "all")
      << '\n'
      << "binarize_vocabulary=" << (c.binarize_vocabulary ? "true" : "false") << '\n'
      << "topk=" << c.topk << '\n'
      << "filter_mode=" << to_string(c.filter_mode) << '\n'
      << "feedback_mode=" << to_string(c.feedback_mode) << '\n'
      << "score_mode=" << to_string(c.score_mode) << '\n'
      << "both_directions=" << (c.both_directions ? "true" : "false") << '\n'
      << "validate_every=" << c.validate_every << '\n';
  return out.str();
}

}  // namespace hip
