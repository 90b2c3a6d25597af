// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "hip/tip.hpp"
#include "oracles.hpp"

#include <array>

using namespace hip;
using ad::Matrix;
using ad::Tape;
using ad::Var;

namespace {

struct Weights {
  Matrix q, k, v;
  tip::AttentionParams on(Tape& t) const { return {t.leaf(q), t.leaf(k), t.leaf(v)}; }
};

Weights random_attention(int d, std::mt19937_64& rng) {
  return {oracle::random_matrix(d, d, rng), oracle::random_matrix(d, d, rng),
          oracle::random_matrix(d, d, rng)};
}

oracle::GruWeights random_gru(int d, std::mt19937_64& rng) {
  auto m = [&] { return oracle::random_matrix(d, d, rng, 0.7); };
  auto b = [&] { return oracle::random_matrix(1, d, rng, 0.7); };
  return {m(), m(), b(), m(), m(), b(), m(), m(), b()};
}

tip::GruParams on_tape(const oracle::GruWeights& g, Tape& t) {
  return {t.leaf(g.wz), t.leaf(g.uz), t.leaf(g.bz), t.leaf(g.wr), t.leaf(g.ur),
          t.leaf(g.br), t.leaf(g.wc), t.leaf(g.uc), t.leaf(g.bc)};
}

std::vector<std::vector<double>> rows(const Matrix& m) {
  std::vector<std::vector<double>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) out.push_back(oracle::row(m, i));
  return out;
}

}  // namespace

TEST_CASE("single-row timeline returns x Wv") {
  std::mt19937_64 rng(1);
  Weights w = random_attention(3, rng);
  Tape tape;
  Matrix x = oracle::random_matrix(1, 3, rng);
  const std::array<bool, 1> valid{true};
  Var z = tip::temporal_self_attention(tape.constant(x), valid, w.on(tape));
  CHECK((z.value() - x * w.v).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention matches the loop oracle and is causal") {
  std::mt19937_64 rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    constexpr int d = 4, m = 4;
    Weights w = random_attention(d, rng);
    Matrix x = oracle::random_matrix(m, d, rng);
    std::array<bool, m> valid{true, true, true, true};
    if (trial % 3 == 1) valid[1] = false;
    if (trial % 3 == 2) valid[0] = false;
    auto [ref, beta] = oracle::attention(x, std::vector<bool>(valid.begin(), valid.end()), w.q, w.k, w.v);
    Tape tape;
    Var z = tip::temporal_self_attention(tape.constant(x), valid, w.on(tape));
    CHECK((z.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
    for (int i = 0; i < m; ++i) {
      for (int j = i + 1; j < m; ++j) CHECK(beta(i, j) == 0.0);
      if (beta.row(i).sum() > 0) CHECK(std::abs(beta.row(i).sum() - 1.0) < 1e-12);
    }
  }
}

TEST_CASE("first position attends only to itself") {
  const std::array<bool, 3> valid{true, true, true};
  Matrix mask = tip::causal_mask(valid);
  CHECK(mask(0, 0) == 0.0);
  CHECK(mask(0, 1) == ad::kMaskedLogit);
  CHECK(mask(0, 2) == ad::kMaskedLogit);
}

TEST_CASE("causality: perturbing later rows leaves earlier outputs bit-identical") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    constexpr int d = 4, m = 5;
    Weights w = random_attention(d, rng);
    Matrix x = oracle::random_matrix(m, d, rng);
    std::array<bool, m> valid;
    valid.fill(true);
    Tape tape;
    const Matrix base = tip::temporal_self_attention(tape.constant(x), valid, w.on(tape)).value();
    const int cut = 1 + trial % (m - 1);
    Matrix y = x;
    y.bottomRows(m - cut) = oracle::random_matrix(m - cut, d, rng, 50.0);
    const Matrix moved = tip::temporal_self_attention(tape.constant(y), valid, w.on(tape)).value();
    CHECK(moved.topRows(cut) == base.topRows(cut));
  }
}

TEST_CASE("no valid row is rejected") {
  Tape tape;
  std::mt19937_64 rng(4);
  Weights w = random_attention(2, rng);
  const std::array<bool, 2> valid{false, false};
  CHECK_THROWS_AS(tip::temporal_self_attention(tape.constant(Matrix::Ones(2, 2)), valid,
                                               w.on(tape)),
                  std::invalid_argument);
}

TEST_CASE("latest_attention equals the last row of per-entity attention") {
  std::mt19937_64 rng(5);
  const int d = 4, n = 3, steps = 4;
  Weights w = random_attention(d, rng);
  std::vector<Matrix> tables;
  for (int j = 0; j < steps; ++j) tables.push_back(oracle::random_matrix(n, d, rng));
  Matrix valid = Matrix::Ones(n, steps);
  valid(1, 0) = 0.0;
  valid(2, 1) = valid(2, 2) = 0.0;
  Tape tape;
  std::vector<Var> vars;
  for (const Matrix& t : tables) vars.push_back(tape.constant(t));
  Var z = tip::latest_attention(vars, valid, w.on(tape));
  for (int s = 0; s < n; ++s) {
    Matrix x(steps, d);
    std::vector<bool> v;
    for (int j = 0; j < steps; ++j) {
      x.row(j) = tables[std::size_t(j)].row(s);
      v.push_back(valid(s, j) != 0.0);
    }
    auto [ref, beta] = oracle::attention(x, v, w.q, w.k, w.v);
    CHECK((z.value().row(s) - ref.row(steps - 1)).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("pair sequences") {
  std::vector<SnapshotGraph> snaps;
  for (Timestamp t = 0; t < 4; ++t) snaps.emplace_back(t, 3);
  snaps[1].add_event(0, 2, 1);
  snaps[3].add_event(0, 1, 1);
  snaps[3].add_event(1, 0, 0);
  snaps[3].add_event(0, 0, 1);
  std::vector<const SnapshotGraph*> window;
  for (const auto& g : snaps) window.push_back(&g);
  const std::vector<std::pair<EntityId, EntityId>> pairs{{0, 1}, {2, 0}};
  auto seqs = tip::extract_pair_sequences(window, pairs, 10);
  REQUIRE(seqs.size() == 1);
  const std::vector<tip::PairEvent> expect{{2, 1}, {1, 3}, {3, 3}, {0, 3}};
  CHECK(seqs[0].events == expect);
  auto short_seqs = tip::extract_pair_sequences(window, pairs, 2);
  CHECK(short_seqs[0].events == std::vector<tip::PairEvent>{{3, 3}, {0, 3}});
}

TEST_CASE("pair sequences keep the most recent events, brute force") {
  std::mt19937_64 rng(6);
  auto snaps = build_snapshots(oracle::random_quadruples(4, 2, 12, 6, rng), 2);
  std::vector<const SnapshotGraph*> window;
  for (const auto& g : snaps) window.push_back(&g);
  std::vector<std::pair<EntityId, EntityId>> pairs;
  for (EntityId s = 0; s < 4; ++s)
    for (EntityId o = 0; o < 4; ++o) pairs.emplace_back(s, o);
  auto seqs = tip::extract_pair_sequences(window, pairs, 10);
  std::size_t next = 0;
  for (const auto& [s, o] : pairs) {
    std::vector<tip::PairEvent> all;
    for (std::size_t j = 0; j < window.size(); ++j)
      for (const Edge& e : window[j]->edges())
        if (e.subject == s && e.object == o) all.push_back({e.relation, static_cast<int>(j)});
    if (all.empty()) continue;
    if (all.size() > 10) all.erase(all.begin(), all.end() - 10);
    REQUIRE(next < seqs.size());
    CHECK(seqs[next].subject == s);
    CHECK(seqs[next].object == o);
    CHECK(seqs[next].events == all);
    ++next;
  }
  CHECK(next == seqs.size());
}

TEST_CASE("GRU matches repeated single-step oracle") {
  std::mt19937_64 rng(7);
  const int d = 3;
  auto g = random_gru(d, rng);
  for (int n = 1; n <= 5; ++n) {
    Matrix x = oracle::random_matrix(n, d, rng);
    Tape tape;
    Var h = tip::gru_relation_encoding(tape.constant(x), on_tape(g, tape));
    const auto ref = oracle::gru(rows(x), g);
    for (int i = 0; i < d; ++i) CHECK(h.value()(0, i) == doctest::Approx(ref[std::size_t(i)]).epsilon(1e-12));
  }
}

TEST_CASE("GRU step with zero input and state") {
  std::mt19937_64 rng(8);
  const int d = 3;
  auto g = random_gru(d, rng);
  Tape tape;
  Var h = tip::gru_relation_encoding(tape.constant(Matrix::Zero(1, d)), on_tape(g, tape));
  for (int i = 0; i < d; ++i)
    CHECK(h.value()(0, i) == doctest::Approx(oracle::sigmoid(g.bz(0, i)) * std::tanh(g.bc(0, i))));
  CHECK_THROWS(tip::gru_relation_encoding(tape.constant(Matrix::Zero(0, d)), on_tape(g, tape)));
}

TEST_CASE("GRU is order sensitive") {
  std::mt19937_64 rng(9);
  auto g = random_gru(3, rng);
  Matrix x = oracle::random_matrix(3, 3, rng);
  Matrix y(3, 3);
  y << x.row(2), x.row(0), x.row(1);
  Tape tape;
  Var a = tip::gru_relation_encoding(tape.constant(x), on_tape(g, tape));
  Var b = tip::gru_relation_encoding(tape.constant(y), on_tape(g, tape));
  CHECK((a.value() - b.value()).norm() > 1e-6);
}

TEST_CASE("batched pair encoding matches per-sequence GRU") {
  std::mt19937_64 rng(10);
  const int d = 3, rows_per_step = 5, steps = 4;
  auto g = random_gru(d, rng);
  Matrix history = oracle::random_matrix(rows_per_step * steps, d, rng);
  std::vector<tip::PairSequence> seqs{
      {0, 1, {{2, 0}, {1, 3}}}, {1, 2, {{4, 1}}}, {2, 0, {{0, 0}, {3, 2}, {1, 3}}}};
  Tape tape;
  Var z = tip::encode_pairs(seqs, tape.constant(history), rows_per_step, on_tape(g, tape));
  for (std::size_t p = 0; p < seqs.size(); ++p) {
    std::vector<std::vector<double>> inputs;
    for (const auto& e : seqs[p].events) inputs.push_back(oracle::row(history, e.step * rows_per_step + e.relation));
    const auto ref = oracle::gru(inputs, g);
    for (int i = 0; i < d; ++i)
      CHECK(z.value()(Eigen::Index(p), i) == doctest::Approx(ref[std::size_t(i)]).epsilon(1e-12));
  }
}
