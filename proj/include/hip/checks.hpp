// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference suites over every primitive and the composed models,
// shared by the command line and the test suite.

#pragma once

#include "hip/config.hpp"
#include "hip/diffcore.hpp"
#include "hip/tkg_store.hpp"

#include <string>
#include <vector>

namespace hip::checks {

/// 3 entities, 2 relations, snapshots at t = 0, 1, 2 (t = 2 is the target).
std::vector<SnapshotGraph> micro_snapshots();

/// Small model settings used by the composed suites.
TrainConfig micro_config();

std::vector<ad::GradcheckReport> primitive_suites();
std::vector<ad::GradcheckReport> model_suites();
/// Gradient of compute_loss w.r.t. every parameter of a micro model
/// (window 2), one report per loss-term setting.
std::vector<ad::GradcheckReport> loss_suites();

std::vector<ad::GradcheckReport> all_suites();

}  // namespace hip::checks
