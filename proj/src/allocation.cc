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

#include "dpledger/allocation.h"

#include <cmath>

#include "absl/strings/str_cat.h"
#include "dpledger/mechanisms.h"
#include "dpledger/status_macros.h"

namespace dpledger {
namespace {

absl::Status CheckRequest(const AllocationRequest& request,
                          AllocationStrategy expected) {
  if (request.strategy != expected) {
    return absl::InvalidArgumentError("allocation strategy mismatch");
  }
  if (!(request.target_z > 0.0) || !std::isfinite(request.target_z)) {
    return absl::InvalidArgumentError(
        absl::StrCat("target z must be positive, got ", request.target_z));
  }
  if (request.groups.empty()) {
    return absl::InvalidArgumentError("allocation needs at least one group");
  }
  for (std::size_t g = 0; g < request.groups.size(); ++g) {
    const GroupBound& b = request.groups[g];
    if (!(b.clip_S > 0.0) || !std::isfinite(b.clip_S)) {
      return absl::InvalidArgumentError(
          absl::StrCat("group ", g, ": clip bound must be positive"));
    }
    if (b.dim < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("group ", g, ": dimension must be >= 1"));
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<double> EffectiveZ(std::span<const PrivacyTuple> tuples) {
  DPL_ASSIGN_OR_RETURN(EffectiveQuery query, RoundCompose(tuples));
  return query.z_effective;
}

absl::StatusOr<double> EffectiveZFromAverages(
    double q, double n, std::span<const double> clip_S,
    std::span<const double> noise_sigma) {
  if (clip_S.size() != noise_sigma.size() || clip_S.empty()) {
    return absl::InvalidArgumentError(
        "need matching, nonempty clip and sigma lists");
  }
  double sum_sq = 0.0;
  for (std::size_t g = 0; g < clip_S.size(); ++g) {
    if (!(clip_S[g] > 0.0) || !(noise_sigma[g] > 0.0)) {
      return absl::InvalidArgumentError(
          "clip bounds and sigmas must be positive");
    }
    const double r = clip_S[g] / noise_sigma[g];
    sum_sq += r * r;
  }
  return q * n / std::sqrt(sum_sq);
}

absl::StatusOr<std::vector<double>> ProportionalAllocation(
    const AllocationRequest& request) {
  DPL_RETURN_IF_ERROR(
      CheckRequest(request, AllocationStrategy::kProportional));
  const double scale =
      request.target_z *
      std::sqrt(static_cast<double>(request.groups.size()));
  std::vector<double> sigmas;
  sigmas.reserve(request.groups.size());
  for (const GroupBound& b : request.groups) sigmas.push_back(scale * b.clip_S);
  return sigmas;
}

absl::StatusOr<std::vector<double>> DimAdjustedAllocation(
    const AllocationRequest& request) {
  DPL_RETURN_IF_ERROR(
      CheckRequest(request, AllocationStrategy::kDimensionalityAdjusted));
  double total_dim = 0.0;
  for (const GroupBound& b : request.groups) total_dim += b.dim;
  std::vector<double> sigmas;
  sigmas.reserve(request.groups.size());
  for (const GroupBound& b : request.groups) {
    sigmas.push_back(request.target_z *
                     std::sqrt(total_dim / static_cast<double>(b.dim)) *
                     b.clip_S);
  }
  return sigmas;
}

absl::StatusOr<std::vector<double>> Allocate(const AllocationRequest& request) {
  if (request.strategy == AllocationStrategy::kDimensionalityAdjusted) {
    return DimAdjustedAllocation(request);
  }
  return ProportionalAllocation(request);
}

absl::StatusOr<std::vector<double>> SplitClipBudget(
    double total_S, std::span<const std::size_t> group_dims, ClipSplit split) {
  if (!(total_S > 0.0) || !std::isfinite(total_S)) {
    return absl::InvalidArgumentError(
        absl::StrCat("total clip budget must be positive, got ", total_S));
  }
  if (group_dims.empty()) {
    return absl::InvalidArgumentError("no groups to split the clip budget over");
  }
  double total_dim = 0.0;
  for (std::size_t d : group_dims) {
    if (d < 1) return absl::InvalidArgumentError("group dimension must be >= 1");
    total_dim += static_cast<double>(d);
  }
  std::vector<double> out;
  switch (split) {
    case ClipSplit::kFlat:
      out.push_back(total_S);
      break;
    case ClipSplit::kPerLayer: {
      const double each =
          total_S / std::sqrt(static_cast<double>(group_dims.size()));
      out.assign(group_dims.size(), each);
      break;
    }
    case ClipSplit::kDimFraction:
      for (std::size_t d : group_dims) {
        out.push_back(total_S * std::sqrt(static_cast<double>(d) / total_dim));
      }
      break;
    case ClipSplit::kDimFractionLiteral:
      for (std::size_t d : group_dims) {
        out.push_back(total_S / std::sqrt(static_cast<double>(d) / total_dim));
      }
      break;
  }
  return out;
}

}  // namespace dpledger
