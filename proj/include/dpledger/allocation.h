//
// Copyright 2026 The dpledger Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef DPLEDGER_ALLOCATION_H_
#define DPLEDGER_ALLOCATION_H_

#include <cstddef>
#include <span>
#include <vector>

#include "absl/status/statusor.h"
#include "dpledger/vector_model.h"

namespace dpledger {

// Strategies for spreading one target noise multiplier z over G groups and
// for splitting one clip budget over groups. None of them look at data.

enum class AllocationStrategy {
  kProportional,            // sigma_g = z * sqrt(G) * S_g
  kDimensionalityAdjusted,  // sigma_g = z * sqrt(D / d_g) * S_g
};

struct GroupBound {
  double clip_S = 0.0;
  std::size_t dim = 0;
};

struct AllocationRequest {
  double target_z = 0.0;
  std::vector<GroupBound> groups;
  AllocationStrategy strategy = AllocationStrategy::kProportional;
};

// z = 1 / S* of a round's privacy tuples.
absl::StatusOr<double> EffectiveZ(std::span<const PrivacyTuple> tuples);

// Same quantity from per-average noise scales sigma_g:
// q * n * (sum_g (S_g / sigma_g)^2)^(-1/2).
absl::StatusOr<double> EffectiveZFromAverages(
    double q, double n, std::span<const double> clip_S,
    std::span<const double> noise_sigma);

// Both return the sum-level noise sigma_g for each group, in order. The
// tuples (S_g, sigma_g) always compose back to z = target_z.
absl::StatusOr<std::vector<double>> ProportionalAllocation(
    const AllocationRequest& request);
absl::StatusOr<std::vector<double>> DimAdjustedAllocation(
    const AllocationRequest& request);

// Dispatches on request.strategy.
absl::StatusOr<std::vector<double>> Allocate(const AllocationRequest& request);

enum class ClipSplit {
  kFlat,         // one group with the whole budget
  kPerLayer,     // S / sqrt(m) for each of m groups
  kDimFraction,  // S * sqrt(d_g / D); squared budgets sum to S^2
  // S / sqrt(d_g / D), as printed in the original write-up of the scheme.
  // Gives small groups larger budgets and does not conserve S^2; only
  // available when asked for by name.
  kDimFractionLiteral,
};

// Per-group clip bounds S_g from a total budget. kFlat ignores the dims
// except for requiring them nonempty and returns a single bound.
absl::StatusOr<std::vector<double>> SplitClipBudget(
    double total_S, std::span<const std::size_t> group_dims, ClipSplit split);

}  // namespace dpledger

#endif  // DPLEDGER_ALLOCATION_H_
