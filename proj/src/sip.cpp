// SPDX-License-Identifier: Apache-2.0

#include "hip/sip.hpp"

#include <array>
#include <stdexcept>

namespace hip::sip {

using ad::Index;

SipConfig SipConfig::uniform(int dim, int channels, int layers) {
  SipConfig config;
  config.channels = channels;
  config.layers = layers;
  config.dims.assign(static_cast<std::size_t>(layers) + 1, dim);
  return config;
}

void SipConfig::validate() const {
  if (layers < 1) throw std::invalid_argument("sip: layers must be >= 1");
  if (channels < 1) throw std::invalid_argument("sip: channels must be >= 1");
  if (dims.size() != static_cast<std::size_t>(layers) + 1)
    throw std::invalid_argument("sip: need layers + 1 dimensions");
  for (int d : dims)
    if (d <= 0 || d % channels != 0)
      throw std::invalid_argument("sip: channel count " + std::to_string(channels) +
                                  " must divide every layer width (got " + std::to_string(d) +
                                  ")");
  if (retain_absent && dims.front() != dims.back())
    throw std::invalid_argument("sip: retain_absent needs equal input and output widths");
}

Matrix block_diagonal_mask(Index rows, Index cols, int channels) {
  if (rows % channels != 0 || cols % channels != 0)
    throw std::invalid_argument("block_diagonal_mask: channels must divide both dimensions");
  Matrix mask = Matrix::Zero(rows, cols);
  const Index br = rows / channels, bc = cols / channels;
  for (int k = 0; k < channels; ++k) mask.block(k * br, k * bc, br, bc).setOnes();
  return mask;
}

Matrix channel_expansion(int channels, Index width) {
  return block_diagonal_mask(channels, width, channels);
}

Var project_channels(Var x, Var projection, int channels) {
  if (x.cols() % channels != 0)
    throw std::invalid_argument("project_channels: width " + std::to_string(x.cols()) +
                                " not divisible by " + std::to_string(channels) + " channels");
  if (projection.rows() != x.cols() || projection.cols() != x.cols())
    throw std::invalid_argument("project_channels: projection " +
                                ad::shape_string(projection.value()) + " does not match width " +
                                std::to_string(x.cols()));
  return ad::matmul(x, projection);
}

Var compose(Var x_relation, Var x_object, Composition op) {
  switch (op) {
    case Composition::Subtraction: return ad::sub(x_object, x_relation);
    case Composition::Multiplication: return ad::mul(x_object, x_relation);
    case Composition::CircularCorrelation: return ad::circular_correlation(x_relation, x_object);
  }
  throw std::invalid_argument("compose: unknown composition operator");
}

Var compose_message(Var x_relation, Var x_object, Composition op, Var projection, int channels) {
  return project_channels(compose(x_relation, x_object, op), projection, channels);
}

Var channel_attention(Var messages, Var subject_channels, Var attention, int channels) {
  const Index width = messages.cols() / channels;
  if (attention.rows() != 1 || attention.cols() != 2 * width)
    throw std::invalid_argument("channel_attention: weight " + ad::shape_string(attention.value()) +
                                " expected [1x" + std::to_string(2 * width) + "]");
  Var w_message = ad::slice_cols(attention, 0, width);
  Var w_entity = ad::slice_cols(attention, width, width);
  Var logits = ad::add(ad::channel_dot(messages, w_message, channels),
                       ad::channel_dot(subject_channels, w_entity, channels));
  return ad::softmax(ad::relu(logits), ad::Axis::Cols);
}

Var aggregate_layer(const SnapshotGraph& snapshot, Var entities, Var relations,
                    const LayerParams& params, const SipConfig& config) {
  ad::Tape& tape = entities.tape();
  const Index n = entities.rows();
  const RelationId num_relations = snapshot.num_relations();
  const RelationId self_loop = 2 * num_relations;
  if (relations.rows() != 2 * num_relations + 1)
    throw std::invalid_argument("aggregate_layer: relation table has " +
                                std::to_string(relations.rows()) + " rows, expected " +
                                std::to_string(2 * num_relations + 1));
  const int K = config.channels;

  // Edge rows grouped by weight family: original, inverse, self-loop.
  std::array<std::vector<Index>, 3> subjects, rels, objects;
  for (const Edge& e : snapshot.edges()) {
    if (e.subject < 0 || e.subject >= n || e.object < 0 || e.object >= n)
      throw std::out_of_range("aggregate_layer: edge entity outside the entity table");
    const int family = e.relation < num_relations ? 0 : 1;
    subjects[family].push_back(e.subject);
    rels[family].push_back(e.relation);
    objects[family].push_back(e.object);
  }
  for (Index s = 0; s < n; ++s) {
    subjects[2].push_back(s);
    rels[2].push_back(self_loop);
    objects[2].push_back(s);
  }
  std::vector<Index> all_subjects, all_relations, all_objects;
  for (int f = 0; f < 3; ++f) {
    all_subjects.insert(all_subjects.end(), subjects[f].begin(), subjects[f].end());
    all_relations.insert(all_relations.end(), rels[f].begin(), rels[f].end());
    all_objects.insert(all_objects.end(), objects[f].begin(), objects[f].end());
  }

  Var x_rel = ad::gather_rows(relations, all_relations);
  Var x_obj = ad::gather_rows(entities, all_objects);
  Var messages = compose_message(x_rel, x_obj, config.composition, params.project_message, K);
  Var entity_channels = project_channels(entities, params.project_entity, K);
  Var alpha = channel_attention(messages, ad::gather_rows(entity_channels, all_subjects),
                                params.attention, K);

  const std::array<Var, 3> family_weights{params.w_original, params.w_inverse, params.w_self_loop};
  const Index d_in = entities.cols();
  const Index d_out = family_weights[0].cols();
  Var mask = tape.constant(block_diagonal_mask(d_in, d_out, K));
  Var expansion = tape.constant(channel_expansion(K, d_out));

  Var out;
  Index offset = 0;
  for (int f = 0; f < 3; ++f) {
    const auto count = static_cast<Index>(subjects[f].size());
    if (count == 0) continue;
    Var c = ad::slice_rows(messages, offset, count);
    Var a = ad::slice_rows(alpha, offset, count);
    offset += count;
    Var transformed = ad::matmul(c, ad::mul(family_weights[f], mask));
    Var weighted = ad::mul(transformed, ad::matmul(a, expansion));
    Var summed = ad::scatter_add_rows(weighted, subjects[f], n);
    out = out.valid() ? ad::add(out, summed) : summed;
  }

  if (config.normalization == Normalization::Mean) {
    Matrix inv_degree = Matrix::Ones(n, 1);
    for (int f = 0; f < 2; ++f)
      for (Index s : subjects[f]) inv_degree(s, 0) += 1.0;
    inv_degree = inv_degree.cwiseInverse();
    out = ad::mul_colwise(out, tape.constant(inv_degree));
  }
  if (config.activation) out = ad::tanh(out);
  return out;
}

StructuralState sip_forward(const SnapshotGraph& snapshot, const StructuralState& previous,
                            std::span<const LayerParams> layers, const SipConfig& config,
                            ad::Mode mode, std::mt19937_64* rng) {
  if (layers.size() != static_cast<std::size_t>(config.layers))
    throw std::invalid_argument("sip_forward: expected " + std::to_string(config.layers) +
                                " layers, got " + std::to_string(layers.size()));
  StructuralState state = previous;
  for (const LayerParams& layer : layers) {
    Var next = aggregate_layer(snapshot, state.entities, state.relations, layer, config);
    if (mode == ad::Mode::Train && rng && config.dropout > 0.0)
      next = ad::dropout(next, config.dropout, mode, *rng);
    state.relations = ad::matmul(state.relations, layer.w_relation);
    state.entities = next;
  }
  if (config.retain_absent) {
    ad::Tape& tape = previous.entities.tape();
    const Index n = previous.entities.rows();
    Matrix present = Matrix::Zero(n, 1);
    for (Index s = 0; s < n; ++s)
      if (snapshot.contains_entity(static_cast<EntityId>(s))) present(s, 0) = 1.0;
    if (present.sum() < static_cast<double>(n)) {
      state.entities =
          ad::add(ad::mul_colwise(state.entities, tape.constant(present)),
                  ad::mul_colwise(previous.entities, tape.constant(Matrix::Ones(n, 1) - present)));
    }
  }
  if (config.normalize) {
    state.entities = ad::normalize_rows(state.entities);
    state.relations = ad::normalize_rows(state.relations);
  }
  return state;
}

}  // namespace hip::sip
