// SPDX-License-Identifier: Apache-2.0

#include "hip/checks.hpp"

#include "hip/model.hpp"
#include "hip/scoring.hpp"
#include "hip/sip.hpp"
#include "hip/tip.hpp"
#include "hip/trainer.hpp"

#include <array>
#include <random>

namespace hip::checks {

using ad::Index;
using ad::Matrix;
using ad::Tape;
using ad::Var;
using Inputs = std::span<const Var>;

namespace {

Matrix random_matrix(Index rows, Index cols, std::uint64_t seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-scale, scale);
  return Matrix::NullaryExpr(rows, cols, [&] { return dist(rng); });
}

/// Entries with magnitude in [0.1, 1.1], so kinks stay out of reach of the
/// finite-difference step.
Matrix away_from_zero(Index rows, Index cols, std::uint64_t seed) {
  Matrix m = random_matrix(rows, cols, seed);
  return m.unaryExpr([](double x) { return x < 0 ? x - 0.1 : x + 0.1; });
}

ad::GradcheckReport check(const std::string& name, const ad::Closure& f, std::vector<Matrix> in) {
  return ad::gradcheck(f, std::move(in), name);
}

}  // namespace

std::vector<SnapshotGraph> micro_snapshots() {
  std::vector<SnapshotGraph> out;
  out.emplace_back(0, 2);
  out.back().add_event(0, 0, 1);
  out.back().add_event(1, 1, 2);
  out.emplace_back(1, 2);
  out.back().add_event(2, 0, 0);
  out.back().add_event(0, 1, 1);
  out.back().add_event(0, 0, 1);
  out.emplace_back(2, 2);
  out.back().add_event(0, 0, 1);
  out.back().add_event(1, 1, 2);
  out.back().add_event(2, 1, 0);
  return out;
}

TrainConfig micro_config() {
  TrainConfig c;
  c.dim = 4;
  c.channels = 2;
  c.layers = 2;
  c.window = 2;
  c.dropout = 0.0;
  c.batch_size = 16;
  return c;
}

std::vector<ad::GradcheckReport> primitive_suites() {
  std::vector<ad::GradcheckReport> r;
  const Matrix a = random_matrix(3, 4, 1), b = random_matrix(3, 4, 2), c = random_matrix(4, 2, 3);
  r.push_back(check("matmul", [](Tape&, Inputs x) { return ad::matmul(x[0], x[1]); }, {a, c}));
  r.push_back(check("transpose", [](Tape&, Inputs x) { return ad::transpose(x[0]); }, {a}));
  r.push_back(check("add", [](Tape&, Inputs x) { return ad::add(x[0], x[1]); }, {a, b}));
  r.push_back(check("sub", [](Tape&, Inputs x) { return ad::sub(x[0], x[1]); }, {a, b}));
  r.push_back(check("mul", [](Tape&, Inputs x) { return ad::mul(x[0], x[1]); }, {a, b}));
  r.push_back(check("add_rowwise", [](Tape&, Inputs x) { return ad::add_rowwise(x[0], x[1]); },
                    {a, random_matrix(1, 4, 4)}));
  r.push_back(check("mul_colwise", [](Tape&, Inputs x) { return ad::mul_colwise(x[0], x[1]); },
                    {a, random_matrix(3, 1, 5)}));
  r.push_back(check("scale", [](Tape&, Inputs x) { return ad::scale(x[0], -2.5); }, {a}));
  r.push_back(check("concat_cols", [](Tape&, Inputs x) { return ad::concat_cols(x); },
                    {a, random_matrix(3, 2, 6)}));
  r.push_back(check("concat_rows", [](Tape&, Inputs x) { return ad::concat_rows(x); },
                    {a, random_matrix(2, 4, 7)}));
  r.push_back(check("slice_cols", [](Tape&, Inputs x) { return ad::slice_cols(x[0], 1, 2); }, {a}));
  r.push_back(check("slice_rows", [](Tape&, Inputs x) { return ad::slice_rows(x[0], 1, 2); }, {a}));
  r.push_back(check("relu", [](Tape&, Inputs x) { return ad::relu(x[0]); },
                    {away_from_zero(3, 4, 8)}));
  r.push_back(check("sigmoid", [](Tape&, Inputs x) { return ad::sigmoid(x[0]); },
                    {random_matrix(3, 4, 9, 4.0)}));
  r.push_back(check("tanh", [](Tape&, Inputs x) { return ad::tanh(x[0]); }, {a}));
  r.push_back(check("softmax_cols", [](Tape&, Inputs x) { return ad::softmax(x[0], ad::Axis::Cols); },
                    {random_matrix(3, 5, 10, 3.0)}));
  r.push_back(check("softmax_rows", [](Tape&, Inputs x) { return ad::softmax(x[0], ad::Axis::Rows); },
                    {random_matrix(4, 3, 11, 3.0)}));
  {
    Matrix mask = Matrix::Zero(3, 4);
    mask(0, 1) = mask(1, 3) = mask(2, 0) = mask(2, 2) = ad::kMaskedLogit;
    r.push_back(check("softmax_masked",
                      [mask](Tape&, Inputs x) { return ad::softmax(x[0], ad::Axis::Cols, &mask); },
                      {a}));
  }
  r.push_back(check("circular_correlation",
                    [](Tape&, Inputs x) { return ad::circular_correlation(x[0], x[1]); }, {a, b}));
  r.push_back(check("gather_rows",
                    [](Tape&, Inputs x) {
                      const std::array<Index, 5> rows{2, 0, 2, 1, 2};
                      return ad::gather_rows(x[0], rows);
                    },
                    {a}));
  r.push_back(check("scatter_add_rows",
                    [](Tape&, Inputs x) {
                      const std::array<Index, 3> index{1, 3, 1};
                      return ad::scatter_add_rows(x[0], index, 4);
                    },
                    {a}));
  r.push_back(check("sum", [](Tape&, Inputs x) { return ad::sum(x[0]); }, {a}));
  r.push_back(check("mean", [](Tape&, Inputs x) { return ad::mean(x[0]); }, {a}));
  r.push_back(check("row_sum", [](Tape&, Inputs x) { return ad::row_sum(x[0]); }, {a}));
  r.push_back(check("normalize_rows", [](Tape&, Inputs x) { return ad::normalize_rows(x[0]); },
                    {a}));
  r.push_back(check("channel_dot", [](Tape&, Inputs x) { return ad::channel_dot(x[0], x[1], 2); },
                    {a, random_matrix(1, 2, 12)}));
  r.push_back(check("neg_log_at",
                    [](Tape&, Inputs x) {
                      const std::array<Index, 3> t{1, 0, 3};
                      return ad::neg_log_at(ad::softmax(x[0], ad::Axis::Cols), t);
                    },
                    {a}));
  r.push_back(check("neg_log_softmax_at",
                    [](Tape&, Inputs x) {
                      const std::array<Index, 3> t{2, 3, 0};
                      return ad::neg_log_softmax_at(x[0], t);
                    },
                    {random_matrix(3, 4, 13, 5.0)}));
  r.push_back(check("dropout",
                    [](Tape&, Inputs x) {
                      std::mt19937_64 rng(99);
                      return ad::dropout(x[0], 0.4, ad::Mode::Train, rng);
                    },
                    {a}));
  return r;
}

std::vector<ad::GradcheckReport> model_suites() {
  std::vector<ad::GradcheckReport> r;
  const auto snapshots = micro_snapshots();
  const SnapshotGraph& g = snapshots[1];
  const Index n = 3, p = 5, d = 4;
  const int K = 2;

  for (Composition op : {Composition::Subtraction, Composition::Multiplication,
                         Composition::CircularCorrelation}) {
    for (Normalization norm : {Normalization::None, Normalization::Mean}) {
      sip::SipConfig cfg = sip::SipConfig::uniform(d, K, 1);
      cfg.composition = op;
      cfg.normalization = norm;
      std::vector<Matrix> in{random_matrix(n, d, 20), random_matrix(p, d, 21),
                             random_matrix(d, d, 22), random_matrix(d, d, 23),
                             random_matrix(1, d, 24), random_matrix(d, d, 25),
                             random_matrix(d, d, 26), random_matrix(d, d, 27),
                             random_matrix(d, d, 28)};
      auto f = [&g, cfg](Tape&, Inputs x) {
        sip::LayerParams lp{x[2], x[3], x[4], x[5], x[6], x[7], x[8]};
        return sip::aggregate_layer(g, x[0], x[1], lp, cfg);
      };
      r.push_back(check("sip_layer/" + to_string(op) +
                            (norm == Normalization::Mean ? "/mean" : "/sum"),
                        f, in));
    }
  }
  {
    sip::SipConfig cfg = sip::SipConfig::uniform(d, K, 2);
    std::vector<Matrix> in{random_matrix(n, d, 30), random_matrix(p, d, 31)};
    for (int l = 0; l < 2; ++l)
      for (int k = 0; k < 7; ++k)
        in.push_back(random_matrix(k == 2 ? 1 : d, d, 32 + 10 * l + k));
    auto f = [&g, cfg](Tape&, Inputs x) {
      std::vector<sip::LayerParams> layers;
      for (std::size_t l = 0; l < 2; ++l) {
        const std::size_t o = 2 + 7 * l;
        layers.push_back({x[o], x[o + 1], x[o + 2], x[o + 3], x[o + 4], x[o + 5], x[o + 6]});
      }
      sip::StructuralState s =
          sip::sip_forward(g, {x[0], x[1]}, layers, cfg, ad::Mode::Eval, nullptr);
      const std::array<Var, 2> parts{ad::transpose(s.entities), ad::transpose(s.relations)};
      return ad::concat_cols(parts);
    };
    r.push_back(check("sip_forward/2_layers", f, in));
  }
  {
    auto f = [](Tape&, Inputs x) {
      const std::array<bool, 4> valid{true, false, true, true};
      return tip::temporal_self_attention(x[0], valid, {x[1], x[2], x[3]});
    };
    r.push_back(check("temporal_self_attention", f,
                      {random_matrix(4, d, 40), random_matrix(d, d, 41), random_matrix(d, d, 42),
                       random_matrix(d, d, 43)}));
  }
  {
    Matrix valid = Matrix::Ones(n, 3);
    valid(0, 0) = 0.0;
    valid(2, 1) = 0.0;
    auto f = [valid](Tape&, Inputs x) {
      const std::array<Var, 3> steps{x[0], x[1], x[2]};
      return tip::latest_attention(steps, valid, {x[3], x[4], x[5]});
    };
    r.push_back(check("latest_attention", f,
                      {random_matrix(n, d, 50), random_matrix(n, d, 51), random_matrix(n, d, 52),
                       random_matrix(d, d, 53), random_matrix(d, d, 54),
                       random_matrix(d, d, 55)}));
  }
  std::vector<Matrix> gru_in;
  for (int k = 0; k < 9; ++k) gru_in.push_back(random_matrix(k % 3 == 2 ? 1 : d, d, 60 + k));
  auto gru_of = [](Inputs x, std::size_t o) {
    return tip::GruParams{x[o],     x[o + 1], x[o + 2], x[o + 3], x[o + 4],
                          x[o + 5], x[o + 6], x[o + 7], x[o + 8]};
  };
  {
    std::vector<Matrix> in{random_matrix(3, d, 70)};
    in.insert(in.end(), gru_in.begin(), gru_in.end());
    r.push_back(check("gru_relation_encoding",
                      [gru_of](Tape&, Inputs x) {
                        return tip::gru_relation_encoding(x[0], gru_of(x, 1));
                      },
                      in));
  }
  {
    std::vector<tip::PairSequence> seqs{{0, 1, {{0, 0}, {2, 1}}}, {1, 2, {{4, 1}}},
                                        {2, 0, {{1, 0}, {3, 0}, {0, 1}}}};
    std::vector<Matrix> in{random_matrix(2 * p, d, 71)};
    in.insert(in.end(), gru_in.begin(), gru_in.end());
    r.push_back(check("encode_pairs",
                      [seqs, gru_of, p](Tape&, Inputs x) {
                        return tip::encode_pairs(seqs, x[0], p, gru_of(x, 1));
                      },
                      in));
  }
  r.push_back(check("temporal_logits",
                    [](Tape&, Inputs x) {
                      return scoring::temporal_distribution(x[0], x[1], x[2], x[3]);
                    },
                    {random_matrix(3, d, 80), random_matrix(3, d, 81), random_matrix(3, d, 82),
                     random_matrix(3 * d, 4, 83)}));
  r.push_back(check("structural_score",
                    [](Tape&, Inputs x) { return scoring::structural_score(x[0], x[1], x[2]); },
                    {random_matrix(3, d, 84), random_matrix(3, d, 85), random_matrix(3, d, 86)}));
  r.push_back(check("structural_logits",
                    [](Tape&, Inputs x) { return scoring::structural_logits(x[0], x[1], x[2]); },
                    {random_matrix(2, d, 87), random_matrix(2, d, 88), random_matrix(n, d, 89)}));
  {
    Matrix counts(2, n);
    counts << 0, 2, 1, 3, 0, 0;
    r.push_back(check("repetitive_distribution",
                      [counts](Tape&, Inputs x) {
                        return scoring::repetitive_distribution(x[0], x[1], x[2], counts);
                      },
                      {random_matrix(2, d, 90), random_matrix(2, d, 91),
                       random_matrix(2 * d, n, 92)}));
  }
  return r;
}

std::vector<ad::GradcheckReport> loss_suites() {
  const auto snapshots = micro_snapshots();
  const SnapshotGraph& target = snapshots[2];
  TemporalGraphStore history(3, 2);
  history.append(snapshots[0]);
  history.append(snapshots[1]);

  struct Setting {
    std::string name;
    LossTerms terms;
    Composition op;
  };
  const std::vector<Setting> settings{
      {"full_loss", {true, true, true}, Composition::Multiplication},
      {"full_loss/sub", {true, true, true}, Composition::Subtraction},
      {"full_loss/corr", {true, true, true}, Composition::CircularCorrelation},
      {"temporal_term", {true, false, false}, Composition::Multiplication},
      {"structural_term", {false, true, false}, Composition::Multiplication},
      {"repetitive_term", {false, false, true}, Composition::Multiplication},
  };

  std::vector<ad::GradcheckReport> r;
  for (const Setting& s : settings) {
    TrainConfig config = micro_config();
    config.loss_terms = s.terms;
    config.composition = s.op;
    HipModel model(config, 3, 2);
    model.initialize(5);
    std::vector<std::string> names;
    std::vector<Matrix> in;
    for (const auto& [name, value] : model.parameters()) {
      names.push_back(name);
      in.push_back(value);
    }
    const auto window = history.window(target.time(), config.window);
    const std::vector<Edge> edges = target.edges();
    const Matrix counts =
        batch_counts(config, history.vocabulary(), window, edges, model.num_entities());
    auto f = [&](Tape& tape, Inputs x) {
      ad::ParameterBinding bind(tape, model.parameters());
      for (std::size_t i = 0; i < names.size(); ++i) bind.bind(names[i], x[i]);
      WindowEncoding enc = model.encode(bind, window, ad::Mode::Eval, nullptr);
      return compute_loss(bind, model, enc, edges, counts).total;
    };
    r.push_back(check(s.name, f, in));
  }
  return r;
}

std::vector<ad::GradcheckReport> all_suites() {
  auto r = primitive_suites();
  for (auto* suite : {&model_suites, &loss_suites}) {
    auto more = (*suite)();
    r.insert(r.end(), more.begin(), more.end());
  }
  return r;
}

}  // namespace hip::checks
