// SPDX-License-Identifier: Apache-2.0

#include "hip/model.hpp"

#include <cmath>
#include <stdexcept>

namespace hip {

using ad::Index;
using ad::Matrix;

HipModel::HipModel(TrainConfig config, EntityId num_entities, RelationId num_relations)
    : config_(std::move(config)), num_entities_(num_entities), num_relations_(num_relations) {
  config_.validate();
  if (num_entities <= 0 || num_relations <= 0)
    throw std::invalid_argument("model needs at least one entity and one relation");
}

void HipModel::initialize(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const Index d = config_.dim;
  const Index n = num_entities_;
  const Index p = 2 * num_relations_;
  auto uniform = [&](Index rows, Index cols, double bound) {
    std::uniform_real_distribution<double> dist(-bound, bound);
    return Matrix(Matrix::NullaryExpr(rows, cols, [&] { return dist(rng); }));
  };
  auto xavier = [&](Index rows, Index cols) {
    return uniform(rows, cols, std::sqrt(6.0 / static_cast<double>(rows + cols)));
  };

  params_ = {};
  const double embed_bound = 1.0 / std::sqrt(static_cast<double>(d));
  params_.add("entity.base", uniform(n, d, embed_bound));
  params_.add("relation.base", uniform(p + 1, d, embed_bound));

  const Index width = d / config_.channels;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string prefix = "sip." + std::to_string(l) + ".";
    params_.add(prefix + "project_entity", xavier(d, d));
    params_.add(prefix + "project_message", xavier(d, d));
    params_.add(prefix + "attention", xavier(1, 2 * width));
    params_.add(prefix + "w_original", xavier(d, d));
    params_.add(prefix + "w_inverse", xavier(d, d));
    params_.add(prefix + "w_self_loop", xavier(d, d));
    params_.add(prefix + "w_relation", Matrix::Identity(d, d));
  }

  params_.add("tip.query", xavier(d, d));
  params_.add("tip.key", xavier(d, d));
  params_.add("tip.value", xavier(d, d));
  for (const char* gate : {"update", "reset", "candidate"}) {
    params_.add(std::string("gru.w_") + gate, xavier(d, d));
    params_.add(std::string("gru.u_") + gate, xavier(d, d));
    params_.add(std::string("gru.b_") + gate, Matrix::Zero(1, d));
  }

  params_.add("score.temporal", xavier(3 * d, p));
  params_.add("score.repetitive", xavier(2 * d, n));
  params_.add("pref.entity", xavier(n, d));
  params_.add("pref.relation", xavier(p, d));
}

sip::SipConfig HipModel::sip_config() const {
  sip::SipConfig sc = sip::SipConfig::uniform(config_.dim, config_.channels, config_.layers);
  sc.composition = config_.composition;
  sc.normalization = config_.normalization;
  sc.activation = config_.layer_activation;
  sc.retain_absent = config_.retain_absent;
  sc.normalize = config_.normalize_embeddings;
  sc.dropout = config_.dropout;
  return sc;
}

std::vector<sip::LayerParams> HipModel::sip_layers(ad::ParameterBinding& bind) const {
  std::vector<sip::LayerParams> layers;
  for (int l = 0; l < config_.layers; ++l) {
    const std::string prefix = "sip." + std::to_string(l) + ".";
    layers.push_back({bind(prefix + "project_entity"), bind(prefix + "project_message"),
                      bind(prefix + "attention"), bind(prefix + "w_original"),
                      bind(prefix + "w_inverse"), bind(prefix + "w_self_loop"),
                      bind(prefix + "w_relation")});
  }
  return layers;
}

tip::AttentionParams HipModel::attention(ad::ParameterBinding& bind) const {
  return {bind("tip.query"), bind("tip.key"), bind("tip.value")};
}

tip::GruParams HipModel::gru(ad::ParameterBinding& bind) const {
  return {bind("gru.w_update"), bind("gru.u_update"), bind("gru.b_update"),
          bind("gru.w_reset"), bind("gru.u_reset"), bind("gru.b_reset"),
          bind("gru.w_candidate"), bind("gru.u_candidate"), bind("gru.b_candidate")};
}

WindowEncoding HipModel::encode(ad::ParameterBinding& bind,
                                std::span<const SnapshotGraph* const> window, ad::Mode mode,
                                std::mt19937_64* rng) const {
  WindowEncoding enc;
  enc.window.assign(window.begin(), window.end());
  const sip::SipConfig sc = sip_config();
  const auto layers = sip_layers(bind);

  sip::StructuralState state{bind("entity.base"), bind("relation.base")};
  enc.relation_steps.push_back(state.relations);
  for (const SnapshotGraph* g : window) {
    state = sip::sip_forward(*g, state, layers, sc, mode, rng);
    enc.entity_steps.push_back(state.entities);
    enc.relation_steps.push_back(state.relations);
  }
  if (window.empty()) enc.entity_steps.push_back(state.entities);
  enc.current = state;

  const auto steps = static_cast<Index>(enc.entity_steps.size());
  enc.validity = Matrix::Ones(num_entities_, steps);
  for (Index j = 0; j + 1 < steps; ++j)
    for (Index s = 0; s < num_entities_; ++s)
      if (!window[static_cast<std::size_t>(j)]->contains_entity(static_cast<EntityId>(s)))
        enc.validity(s, j) = 0.0;
  enc.temporal_entities = tip::latest_attention(enc.entity_steps, enc.validity, attention(bind));

  if (window.empty()) {
    enc.relation_history = enc.relation_steps.front();
  } else {
    std::vector<ad::Var> before(enc.relation_steps.begin(), enc.relation_steps.end() - 1);
    enc.relation_history = ad::concat_rows(before);
  }
  return enc;
}

ad::Var HipModel::pair_embeddings(ad::ParameterBinding& bind, const WindowEncoding& encoding,
                                  std::span<const tip::PairSequence> sequences) const {
  return tip::encode_pairs(sequences, encoding.relation_history, relation_rows(), gru(bind));
}

}  // namespace hip
