// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "hip/sip.hpp"
#include "oracles.hpp"

#include <algorithm>

using namespace hip;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

struct Layer {
  oracle::SipWeights w;
  sip::LayerParams on(Tape& tape) const {
    return {tape.leaf(w.U), tape.leaf(w.V), tape.leaf(w.W), tape.leaf(w.w_original),
            tape.leaf(w.w_inverse), tape.leaf(w.w_self), tape.leaf(w.w_relation)};
  }
};

Layer random_layer(int d, int K, std::mt19937_64& rng) {
  Matrix mask = sip::block_diagonal_mask(d, d, K);
  return {{oracle::random_matrix(d, d, rng, 0.5), oracle::random_matrix(d, d, rng, 0.5),
           oracle::random_matrix(1, 2 * d / K, rng), oracle::random_matrix(d, d, rng, 0.5).cwiseProduct(mask),
           oracle::random_matrix(d, d, rng, 0.5).cwiseProduct(mask),
           oracle::random_matrix(d, d, rng, 0.5).cwiseProduct(mask),
           oracle::random_matrix(d, d, rng, 0.5)}};
}

SnapshotGraph four_entity_graph() {
  SnapshotGraph g(0, 2);
  g.add_event(0, 0, 1);
  g.add_event(1, 1, 2);
  g.add_event(2, 0, 0);
  g.add_event(0, 1, 2);
  return g;
}

sip::SipConfig config(int d, int K, Composition op, bool mean = false) {
  sip::SipConfig c = sip::SipConfig::uniform(d, K, 1);
  c.composition = op;
  c.normalization = mean ? Normalization::Mean : Normalization::None;
  return c;
}

}  // namespace

TEST_CASE("project_channels: identity and coordinate selection") {
  Tape tape;
  Matrix x(1, 4);
  x << 1, 2, 3, 4;
  Var y = sip::project_channels(tape.constant(x), tape.constant(Matrix::Identity(4, 4)), 1);
  CHECK(y.value() == x);
  Var z = sip::project_channels(tape.constant(x), tape.constant(Matrix::Identity(4, 4)), 2);
  CHECK(z.value().leftCols(2) == x.leftCols(2));
  CHECK(z.value().rightCols(2) == x.rightCols(2));
  CHECK_THROWS(sip::project_channels(tape.constant(Matrix::Ones(1, 3)),
                                     tape.constant(Matrix::Identity(3, 3)), 2));
}

TEST_CASE("project_channels matches a block-product loop") {
  std::mt19937_64 rng(1);
  Tape tape;
  Matrix x = oracle::random_matrix(3, 6, rng), U = oracle::random_matrix(6, 6, rng);
  Var y = sip::project_channels(tape.constant(x), tape.constant(U), 3);
  const Matrix ref = oracle::matmul(x, U);
  CHECK((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("compositions") {
  std::mt19937_64 rng(2);
  Tape tape;
  Matrix o = oracle::random_matrix(1, 3, rng), r = oracle::random_matrix(1, 3, rng);
  CHECK(sip::compose(tape.constant(Matrix::Ones(1, 3)), tape.constant(o),
                     Composition::Multiplication).value() == o);
  CHECK(sip::compose(tape.constant(o), tape.constant(o), Composition::Subtraction).value() ==
        Matrix::Zero(1, 3));
  Var cc = sip::compose(tape.constant(r), tape.constant(o), Composition::CircularCorrelation);
  const auto ref = oracle::circular_correlation(oracle::row(r, 0), oracle::row(o, 0));
  for (int i = 0; i < 3; ++i) CHECK(cc.value()(0, i) == doctest::Approx(ref[std::size_t(i)]));
}

TEST_CASE("channel attention") {
  std::mt19937_64 rng(3);
  Tape tape;
  SUBCASE("identical channels share weight evenly") {
    Matrix block = oracle::random_matrix(1, 2, rng);
    Matrix c(1, 8), h(1, 8);
    c << block, block, block, block;
    h << block, block, block, block;
    Var a = sip::channel_attention(tape.constant(c), tape.constant(h),
                                   tape.constant(oracle::random_matrix(1, 4, rng)), 4);
    for (int k = 0; k < 4; ++k) CHECK(a.value()(0, k) == doctest::Approx(0.25));
  }
  SUBCASE("one channel gets everything") {
    Var a = sip::channel_attention(tape.constant(oracle::random_matrix(5, 3, rng)),
                                   tape.constant(oracle::random_matrix(5, 3, rng)),
                                   tape.constant(oracle::random_matrix(1, 6, rng)), 1);
    CHECK(a.value() == Matrix::Ones(5, 1));
  }
  SUBCASE("random weights match a loop softmax and sum to one") {
    for (int trial = 0; trial < 20; ++trial) {
      const int K = 1 + trial % 4, width = 2;
      Matrix c = oracle::random_matrix(6, K * width, rng, 2.0);
      Matrix h = oracle::random_matrix(6, K * width, rng, 2.0);
      Matrix w = oracle::random_matrix(1, 2 * width, rng);
      Var a = sip::channel_attention(tape.constant(c), tape.constant(h), tape.constant(w), K);
      for (int i = 0; i < 6; ++i) {
        std::vector<double> logits;
        for (int k = 0; k < K; ++k) {
          double e = 0.0;
          for (int j = 0; j < width; ++j) e += w(0, j) * c(i, k * width + j) + w(0, width + j) * h(i, k * width + j);
          logits.push_back(std::max(0.0, e));
        }
        const auto ref = oracle::softmax(logits);
        for (int k = 0; k < K; ++k) CHECK(a.value()(i, k) == doctest::Approx(ref[std::size_t(k)]));
        CHECK(a.value().row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("isolated entity receives only its self-loop message") {
  std::mt19937_64 rng(4);
  Layer layer = random_layer(4, 2, rng);
  Tape tape;
  SnapshotGraph empty(0, 1);
  Matrix e = oracle::random_matrix(1, 4, rng), r = oracle::random_matrix(3, 4, rng);
  sip::SipConfig c = config(4, 2, Composition::Multiplication);
  c.activation = false;
  Var out = sip::aggregate_layer(empty, tape.constant(e), tape.constant(r), layer.on(tape), c);
  // composition with the self-loop relation, projected, then w_self per channel
  const Matrix comp = e.cwiseProduct(r.row(2));
  const Matrix msg = comp * layer.w.V;
  const Matrix expect = msg * layer.w.w_self;
  Var alpha = sip::channel_attention(tape.constant(msg), tape.constant(e * layer.w.U),
                                     tape.constant(layer.w.W), 2);
  Matrix scaled = expect;
  scaled.leftCols(2) *= alpha.value()(0, 0);
  scaled.rightCols(2) *= alpha.value()(0, 1);
  CHECK((out.value() - scaled).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("two-entity graph by hand") {
  // K = 1, identity weights, no normalization, no activation:
  // out_s = phi(x_self, x_s) + phi(x_r, x_o).
  Tape tape;
  SnapshotGraph g(0, 1);
  g.add_event(0, 0, 1);
  Matrix e(2, 2), r(3, 2);
  e << 1, 2, 3, 4;
  r << 0.5, -1, 2, 1, 1, 1;
  const Matrix I = Matrix::Identity(2, 2);
  sip::LayerParams p{tape.constant(I), tape.constant(I), tape.constant(Matrix::Zero(1, 4)),
                     tape.constant(I), tape.constant(I), tape.constant(I), tape.constant(I)};
  sip::SipConfig c = config(2, 1, Composition::Multiplication);
  c.activation = false;
  Var out = sip::aggregate_layer(g, tape.constant(e), tape.constant(r), p, c);
  Matrix expect(2, 2);
  expect << 1 + 3 * 0.5, 2 + 4 * -1,  // self (1,2)*(1,1) + (3,4)*(0.5,-1)
      3 + 1 * 2, 4 + 2 * 1;           // self (3,4)*(1,1) + inverse (1,2)*(2,1)
  CHECK(out.value() == expect);
}

TEST_CASE("aggregate_layer matches the message loop on a 4-entity graph") {
  std::mt19937_64 rng(5);
  const SnapshotGraph g = four_entity_graph();
  for (Composition op : {Composition::Subtraction, Composition::Multiplication,
                         Composition::CircularCorrelation})
    for (bool mean : {false, true})
      for (int K : {1, 2, 4}) {
        Layer layer = random_layer(4, K, rng);
        Tape tape;
        Matrix e = oracle::random_matrix(4, 4, rng), r = oracle::random_matrix(5, 4, rng);
        Var out = sip::aggregate_layer(g, tape.constant(e), tape.constant(r), layer.on(tape),
                                       config(4, K, op, mean));
        const Matrix ref = oracle::sip_layer(g, e, r, layer.w, K, op, mean, true);
        CHECK((out.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
      }
}

TEST_CASE("one channel equals an undisentangled CompGCN layer") {
  std::mt19937_64 rng(6);
  const SnapshotGraph g = four_entity_graph();
  Layer layer = random_layer(4, 1, rng);
  layer.w.V = Matrix::Identity(4, 4);
  layer.w.U = Matrix::Identity(4, 4);
  Tape tape;
  Matrix e = oracle::random_matrix(4, 4, rng), r = oracle::random_matrix(5, 4, rng);
  sip::SipConfig c = config(4, 1, Composition::Subtraction);
  c.activation = false;
  Var out = sip::aggregate_layer(g, tape.constant(e), tape.constant(r), layer.on(tape), c);
  Matrix ref = Matrix::Zero(4, 4);
  for (const Edge& edge : g.edges()) {
    const Matrix& w = edge.relation < 2 ? layer.w.w_original : layer.w.w_inverse;
    ref.row(edge.subject) += (e.row(edge.object) - r.row(edge.relation)) * w;
  }
  for (int s = 0; s < 4; ++s) ref.row(s) += (e.row(s) - r.row(4)) * layer.w.w_self;
  CHECK((out.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sip_forward: one layer, one channel against the loop reference") {
  std::mt19937_64 rng(7);
  const SnapshotGraph g = four_entity_graph();
  Layer layer = random_layer(4, 1, rng);
  Tape tape;
  Matrix e = oracle::random_matrix(4, 4, rng), r = oracle::random_matrix(5, 4, rng);
  sip::SipConfig c = config(4, 1, Composition::Multiplication);
  const std::vector<sip::LayerParams> layers{layer.on(tape)};
  auto state = sip::sip_forward(g, {tape.constant(e), tape.constant(r)}, layers, c,
                                ad::Mode::Eval, nullptr);
  Matrix layer_out = oracle::sip_layer(g, e, r, layer.w, 1, Composition::Multiplication, false, true);
  layer_out.row(3) = e.row(3);  // entity 3 has no edge and keeps its row
  const Matrix ents = oracle::normalize_rows(layer_out);
  const Matrix rels = oracle::normalize_rows(oracle::matmul(r, layer.w.w_relation));
  CHECK((state.entities.value() - ents).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((state.relations.value() - rels).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("sip_forward: absent entities keep their rows") {
  std::mt19937_64 rng(8);
  SnapshotGraph g(0, 1);
  g.add_event(0, 0, 1);
  Layer l0 = random_layer(4, 2, rng), l1 = random_layer(4, 2, rng);
  Tape tape;
  Matrix e = oracle::normalize_rows(oracle::random_matrix(4, 4, rng));
  Matrix r = oracle::random_matrix(3, 4, rng);
  sip::SipConfig c = sip::SipConfig::uniform(4, 2, 2);
  const std::vector<sip::LayerParams> layers{l0.on(tape), l1.on(tape)};
  auto state = sip::sip_forward(g, {tape.constant(e), tape.constant(r)}, layers, c,
                                ad::Mode::Eval, nullptr);
  for (int s : {2, 3}) CHECK((state.entities.value().row(s) - e.row(s)).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((state.entities.value().row(0) - e.row(0)).norm() > 1e-6);

  c.retain_absent = false;
  auto fresh = sip::sip_forward(g, {tape.constant(e), tape.constant(r)}, layers, c,
                                ad::Mode::Eval, nullptr);
  CHECK((fresh.entities.value().row(2) - e.row(2)).norm() > 1e-6);
}

TEST_CASE("sip_forward is invariant to edge order within a snapshot") {
  std::mt19937_64 rng(9);
  auto quads = oracle::random_quadruples(6, 2, 1, 9, rng);
  Layer l0 = random_layer(4, 2, rng), l1 = random_layer(4, 2, rng);
  Matrix e = oracle::random_matrix(6, 4, rng), r = oracle::random_matrix(5, 4, rng);
  auto run = [&](const std::vector<Quadruple>& qs) {
    SnapshotGraph g = build_snapshots(qs, 2).front();
    Tape tape;
    const std::vector<sip::LayerParams> layers{l0.on(tape), l1.on(tape)};
    return Matrix(sip::sip_forward(g, {tape.constant(e), tape.constant(r)}, layers,
                                   sip::SipConfig::uniform(4, 2, 2), ad::Mode::Eval, nullptr)
                      .entities.value());
  };
  const Matrix base = run(quads);
  for (int trial = 0; trial < 5; ++trial) {
    std::shuffle(quads.begin(), quads.end(), rng);
    CHECK((run(quads) - base).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("sip_forward rows are unit length") {
  std::mt19937_64 rng(10);
  Layer l0 = random_layer(8, 4, rng);
  Tape tape;
  const std::vector<sip::LayerParams> layers{l0.on(tape)};
  auto state = sip::sip_forward(four_entity_graph(),
                                {tape.constant(oracle::random_matrix(4, 8, rng)),
                                 tape.constant(oracle::random_matrix(5, 8, rng))},
                                layers, sip::SipConfig::uniform(8, 4, 1), ad::Mode::Eval, nullptr);
  for (int i = 0; i < 4; ++i) CHECK(state.entities.value().row(i).norm() == doctest::Approx(1.0));
  for (int i = 0; i < 5; ++i) CHECK(state.relations.value().row(i).norm() == doctest::Approx(1.0));
}

TEST_CASE("sip config rejects channel counts that do not divide the width") {
  sip::SipConfig c = sip::SipConfig::uniform(6, 4, 2);
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
