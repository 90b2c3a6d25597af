// SPDX-License-Identifier: Apache-2.0

#include "hip/synth.hpp"

#include <algorithm>
#include <numeric>
#include <random>
#include <set>
#include <stdexcept>
#include <tuple>

namespace hip {

namespace {

void assign_splits(DatasetBundle& bundle, std::vector<Quadruple> all, Timestamp first_test) {
  std::stable_sort(all.begin(), all.end(),
                   [](const Quadruple& a, const Quadruple& b) { return a.time < b.time; });
  for (const Quadruple& q : all) (q.time < first_test ? bundle.train : bundle.test).push_back(q);
}

}  // namespace

DatasetBundle cyclic_chain_tkg(std::uint64_t seed) {
  constexpr EntityId kCycle = 10;
  constexpr Timestamp kSteps = 30;
  constexpr Timestamp kSwitch = 15;
  std::mt19937_64 rng(seed);
  // Two partner maps over 10..19 with first[a] != a, second[a] != a and
  // first[a] != second[a].
  std::vector<EntityId> first(kCycle), second(kCycle);
  std::iota(first.begin(), first.end(), kCycle);
  auto valid = [&] {
    for (EntityId i = 0; i < kCycle; ++i) {
      const auto a = static_cast<std::size_t>(i);
      second[a] = first[static_cast<std::size_t>((i + 1) % kCycle)];
      if (first[a] == kCycle + i || second[a] == kCycle + i) return false;
    }
    return true;
  };
  do {
    std::shuffle(first.begin(), first.end(), rng);
  } while (!valid());

  std::vector<Quadruple> all;
  for (Timestamp t = 0; t < kSteps; ++t) {
    for (EntityId i = 0; i < kCycle; ++i) all.push_back({i, 0, (i + 1) % kCycle, t});
    const EntityId a = kCycle + static_cast<EntityId>(t % kCycle);
    const auto slot = static_cast<std::size_t>(a - kCycle);
    const EntityId b = t < kSwitch ? first[slot] : second[slot];
    for (RelationId step = 0; step < 3 && t + step < kSteps; ++step)
      all.push_back({a, 1 + step, b, t + step});
  }

  DatasetBundle bundle;
  bundle.name = "cyclic-chain";
  bundle.num_entities = 2 * kCycle;
  bundle.num_relations = 4;
  assign_splits(bundle, std::move(all), 27);
  return bundle;
}

DatasetBundle random_tkg(EntityId entities, RelationId relations, Timestamp timestamps,
                         int events, Timestamp test_steps, std::uint64_t seed) {
  if (entities < 2 || relations < 1 || timestamps < 1 || events < 1 || test_steps < 0 ||
      test_steps >= timestamps)
    throw std::invalid_argument("random_tkg: invalid shape");
  const long long possible = static_cast<long long>(entities) * (entities - 1) * relations;
  if (events > possible) throw std::invalid_argument("random_tkg: too many events per timestamp");
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<EntityId> entity(0, entities - 1);
  std::uniform_int_distribution<RelationId> relation(0, relations - 1);

  std::vector<Quadruple> all;
  for (Timestamp t = 0; t < timestamps; ++t) {
    std::set<std::tuple<EntityId, RelationId, EntityId>> seen;
    while (static_cast<int>(seen.size()) < events) {
      const EntityId s = entity(rng);
      const RelationId r = relation(rng);
      const EntityId o = entity(rng);
      if (s == o || !seen.emplace(s, r, o).second) continue;
      all.push_back({s, r, o, t});
    }
  }
  DatasetBundle bundle;
  bundle.name = "random";
  bundle.num_entities = entities;
  bundle.num_relations = relations;
  assign_splits(bundle, std::move(all), timestamps - test_steps);
  return bundle;
}

}  // namespace hip
