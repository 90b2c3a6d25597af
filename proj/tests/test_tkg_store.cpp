// SPDX-License-Identifier: Apache-2.0

#include "doctest.h"
#include "hip/tkg_store.hpp"
#include "oracles.hpp"

#include <filesystem>
#include <fstream>
#include <set>

using namespace hip;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  fs::path dir = fs::temp_directory_path() / ("hip_test_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream(file) << text;
}

}  // namespace

TEST_CASE("snapshot holds every event with its inverse") {
  auto snaps = build_snapshots(std::vector<Quadruple>{{0, 0, 1, 0}}, 2);
  REQUIRE(snaps.size() == 1);
  CHECK(snaps[0].edges() == std::vector<Edge>{{0, 0, 1}, {1, 2, 0}});
}

TEST_CASE("snapshots are strictly ordered and twice the raw size") {
  std::mt19937_64 rng(4);
  auto quads = oracle::random_quadruples(12, 3, 9, 7, rng);
  std::shuffle(quads.begin(), quads.end(), rng);
  auto snaps = build_snapshots(quads, 3);
  std::set<Timestamp> times;
  for (const auto& q : quads) times.insert(q.time);
  CHECK(snaps.size() == times.size());
  for (std::size_t i = 0; i < snaps.size(); ++i) {
    if (i) CHECK(snaps[i - 1].time() < snaps[i].time());
    CHECK(snaps[i].edges().size() == 2 * snaps[i].raw_count());
    std::size_t raw = 0;
    for (const auto& q : quads) raw += q.time == snaps[i].time();
    CHECK(snaps[i].raw_count() == raw);
  }
}

TEST_CASE("file order is kept inside a timestamp") {
  std::vector<Quadruple> quads{{3, 1, 2, 5}, {0, 0, 1, 5}, {2, 1, 4, 5}};
  auto snaps = build_snapshots(quads, 2);
  REQUIRE(snaps.size() == 1);
  const auto& e = snaps[0].edges();
  CHECK(e[0] == Edge{3, 1, 2});
  CHECK(e[2] == Edge{0, 0, 1});
  CHECK(e[4] == Edge{2, 1, 4});
}

TEST_CASE("vocabulary counts repeated events") {
  HistoryVocabulary vocab;
  CHECK(vocab.size() == 0);
  for (Timestamp t = 0; t < 3; ++t) {
    SnapshotGraph g(t, 2);
    g.add_event(0, 1, 2);
    vocab.update(g);
  }
  CHECK(vocab.count(0, 1, 2) == 3);
  CHECK(vocab.count(2, 3, 0) == 3);
  CHECK(vocab.count_vector(1, 0, 4) == Eigen::VectorXd::Zero(4));
  SnapshotGraph stale(1, 2);
  CHECK_THROWS_AS(vocab.update(stale), std::invalid_argument);
}

TEST_CASE("vocabulary replay equals a brute-force scan at every time") {
  std::mt19937_64 rng(21);
  const EntityId n = 15;
  const RelationId R = 3;
  auto snaps = build_snapshots(oracle::random_quadruples(n, R, 12, 10, rng), R);
  HistoryVocabulary vocab;
  std::vector<const SnapshotGraph*> seen;
  for (const auto& g : snaps) {
    const auto counts = oracle::scan_counts(seen);
    for (EntityId s = 0; s < n; ++s)
      for (RelationId r = 0; r < 2 * R; ++r) {
        Eigen::VectorXd expect = Eigen::VectorXd::Zero(n);
        for (const auto& [key, c] : counts)
          if (std::get<0>(key) == s && std::get<1>(key) == r) expect(std::get<2>(key)) = c;
        REQUIRE(vocab.count_vector(s, r, n) == expect);
      }
    vocab.update(g);
    seen.push_back(&g);
  }
}

TEST_CASE("window returns at most m snapshots and none from the future") {
  TemporalGraphStore store(5, 1);
  for (Timestamp t : {0, 1, 3, 4, 7}) {
    SnapshotGraph g(t, 1);
    g.add_event(0, 0, 1);
    store.append(g);
  }
  for (Timestamp before = 0; before <= 9; ++before)
    for (int m = 1; m <= 6; ++m) {
      auto w = store.window(before, m);
      CHECK(static_cast<int>(w.size()) <= m);
      for (std::size_t i = 0; i < w.size(); ++i) {
        CHECK(w[i]->time() < before);
        if (i) CHECK(w[i - 1]->time() < w[i]->time());
      }
      std::size_t older = 0;
      for (const auto& g : store.snapshots()) older += g.time() < before;
      CHECK(w.size() == std::min<std::size_t>(older, static_cast<std::size_t>(m)));
    }
  SnapshotGraph late(6, 1);
  CHECK_THROWS(store.append(late));
}

TEST_CASE("candidate entities of a subject") {
  TemporalGraphStore store(6, 2);
  CHECK(store.candidate_entities(0, 5).empty());
  SnapshotGraph g(0, 2);
  g.add_event(0, 0, 1);
  g.add_event(2, 1, 0);
  store.append(g);
  CHECK(store.candidate_entities(0, 5) == std::vector<EntityId>{1, 2});
  CHECK(store.candidate_entities(0, 0).empty());
}

TEST_CASE("candidate entities equal a brute-force scan") {
  std::mt19937_64 rng(8);
  const EntityId n = 50;
  auto snaps = build_snapshots(oracle::random_quadruples(n, 4, 10, 30, rng), 4);
  TemporalGraphStore store(n, 4);
  for (auto& g : snaps) store.append(g);
  for (Timestamp up_to : {1, 4, 10}) {
    for (EntityId s = 0; s < n; ++s) {
      std::set<EntityId> expect;
      for (const auto& g : store.snapshots())
        if (g.time() < up_to)
          for (const Edge& e : g.edges())
            if (e.subject == s) expect.insert(e.object);
      const auto got = store.candidate_entities(s, up_to);
      CHECK(std::vector<EntityId>(expect.begin(), expect.end()) == got);
    }
  }
}

TEST_CASE("load_dataset normalizes time and validates input") {
  const fs::path dir = scratch_dir("load");
  write_text(dir / "stat.txt", "4\t2\n");
  write_text(dir / "train.txt", "0\t0\t1\t24\n1\t1\t2\t48\n");
  write_text(dir / "test.txt", "2\t0\t3\t72\n");
  auto bundle = load_dataset(dir);
  CHECK(bundle.num_entities == 4);
  CHECK(bundle.num_relations == 2);
  CHECK_FALSE(bundle.has_valid);
  CHECK(bundle.time_gap == 24);
  CHECK(bundle.time_origin == 24);
  CHECK(bundle.train[1].time == 1);
  CHECK(bundle.test[0].time == 2);
  CHECK(bundle.to_raw(2) == 72);

  write_text(dir / "test.txt", "2\t0\t9\t72\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("out of range"), std::runtime_error);
  write_text(dir / "test.txt", "2\tx\t3\t72\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains(":1:"), std::runtime_error);
  write_text(dir / "test.txt", "2\t0\t3\t24\n");
  CHECK_THROWS_WITH_AS(load_dataset(dir), doctest::Contains("split ordering"), std::runtime_error);
  write_text(dir / "test.txt", "");
  CHECK(load_dataset(dir).test.empty());
  fs::remove_all(dir);
}

TEST_CASE("write then load round-trips a dataset") {
  std::mt19937_64 rng(2);
  DatasetBundle b;
  b.num_entities = 9;
  b.num_relations = 2;
  for (auto q : oracle::random_quadruples(9, 2, 6, 4, rng)) (q.time < 5 ? b.train : b.test).push_back(q);
  const fs::path dir = scratch_dir("roundtrip");
  write_dataset(dir, b);
  auto back = load_dataset(dir, 1);
  CHECK(back.train == b.train);
  CHECK(back.test == b.test);
  fs::remove_all(dir);
}

TEST_CASE("subsample keeps active entities and splits by span") {
  DatasetBundle b;
  b.num_entities = 4;
  b.num_relations = 1;
  for (Timestamp t = 0; t < 6; ++t) b.train.push_back({0, 0, 2, t});
  b.train.push_back({1, 0, 3, 0});
  auto sub = subsample_by_activity(b, 2, 4, 2);
  CHECK(sub.num_entities == 2);
  CHECK(sub.train.size() == 4);
  CHECK(sub.test.size() == 2);
  for (const auto& q : sub.test) CHECK(q.time >= 4);
}
