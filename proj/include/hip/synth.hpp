// SPDX-License-Identifier: Apache-2.0
//
// Seeded synthetic temporal knowledge graphs.

#pragma once

#include "hip/tkg_store.hpp"

#include <cstdint>

namespace hip {

/// 20 entities, 4 relations, timestamps 0..29 (train 0..26, test 27..29).
///
/// Entities 0..9 form a directed cycle repeated at every timestamp:
/// (i, 0, (i + 1) mod 10, t). Entities 10..19 run evolution chains: at time
/// t the entity a = 10 + (t mod 10) emits (a, 1, b, t), then (a, 2, b, t + 1)
/// and (a, 3, b, t + 2). Each a has two partners drawn from `seed`: chains
/// starting before t = 15 use the first, later ones the second. Counts over
/// the whole history therefore tie or favour the stale partner, while the
/// recent window names the current one. Chains whose steps fall past
/// t = 29 are cut.
DatasetBundle cyclic_chain_tkg(std::uint64_t seed = 7);

/// Uniformly random events: `events` distinct (s, r, o) per timestamp with
/// s != o, timestamps 0..timestamps-1, the last `test_steps` held out.
DatasetBundle random_tkg(EntityId entities, RelationId relations, Timestamp timestamps,
                         int events, Timestamp test_steps, std::uint64_t seed);

}  // namespace hip
