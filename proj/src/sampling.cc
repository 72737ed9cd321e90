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

#include "dpledger/sampling.h"

#include <algorithm>
#include <numeric>
#include <set>

#include "absl/strings/str_cat.h"
#include "dpledger/status_macros.h"

namespace dpledger {
namespace {

absl::Status RequirePolicy(const SamplerConfig& cfg, SamplingPolicy want) {
  if (cfg.policy != want) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampler configured for '", PolicyTag(cfg.policy),
                     "', not '", PolicyTag(want), "'"));
  }
  return ValidateSamplerConfig(cfg);
}

}  // namespace

absl::string_view PolicyTag(SamplingPolicy policy) {
  switch (policy) {
    case SamplingPolicy::kPoissonIID:
      return "poisson";
    case SamplingPolicy::kFixedSizeWOR:
      return "fixed_size";
    case SamplingPolicy::kDisjointPartition:
      return "disjoint";
  }
  return "unknown";
}

absl::StatusOr<SamplingPolicy> PolicyFromTag(absl::string_view tag) {
  for (SamplingPolicy p :
       {SamplingPolicy::kPoissonIID, SamplingPolicy::kFixedSizeWOR,
        SamplingPolicy::kDisjointPartition}) {
    if (tag == PolicyTag(p)) return p;
  }
  return absl::InvalidArgumentError(
      absl::StrCat("unknown sampling policy '", tag, "'"));
}

absl::Status ValidateSamplerConfig(const SamplerConfig& cfg) {
  if (cfg.n == 0) {
    return absl::InvalidArgumentError("sampler: n must be positive");
  }
  if (cfg.policy == SamplingPolicy::kPoissonIID) {
    if (!(cfg.q > 0.0 && cfg.q <= 1.0)) {
      return absl::InvalidArgumentError(
          absl::StrCat("sampler: q must be in (0, 1], got ", cfg.q));
    }
    return absl::OkStatus();
  }
  if (cfg.batch_size < 1 || cfg.batch_size > cfg.n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "sampler: batch size ", cfg.batch_size, " not in [1, ", cfg.n, "]"));
  }
  return absl::OkStatus();
}

double EquivalentRate(const SamplerConfig& cfg) {
  if (cfg.policy == SamplingPolicy::kPoissonIID) return cfg.q;
  return static_cast<double>(cfg.batch_size) / static_cast<double>(cfg.n);
}

absl::StatusOr<Sample> PoissonSample(const SamplerConfig& cfg,
                                     std::uint64_t round_id) {
  DPL_RETURN_IF_ERROR(RequirePolicy(cfg, SamplingPolicy::kPoissonIID));
  SecureStream rng(cfg.seed, "sample/poisson", round_id);
  Sample sample;
  for (std::uint64_t i = 0; i < cfg.n; ++i) {
    if (rng.NextUniform() < cfg.q) sample.indices.push_back(i);
  }
  return sample;
}

absl::StatusOr<Sample> FixedSizeSample(const SamplerConfig& cfg,
                                       std::uint64_t round_id) {
  DPL_RETURN_IF_ERROR(RequirePolicy(cfg, SamplingPolicy::kFixedSizeWOR));
  SecureStream rng(cfg.seed, "sample/fixed_size", round_id);
  // Floyd's algorithm: uniform over all b-subsets using b draws.
  std::set<std::uint64_t> chosen;
  for (std::uint64_t j = cfg.n - cfg.batch_size; j < cfg.n; ++j) {
    const std::uint64_t t = rng.NextBelow(j + 1);
    if (!chosen.insert(t).second) chosen.insert(j);
  }
  return Sample{std::vector<std::uint64_t>(chosen.begin(), chosen.end())};
}

absl::StatusOr<std::vector<Sample>> PartitionEpoch(const SamplerConfig& cfg,
                                                   std::uint64_t epoch_id) {
  DPL_RETURN_IF_ERROR(RequirePolicy(cfg, SamplingPolicy::kDisjointPartition));
  SecureStream rng(cfg.seed, "sample/partition", epoch_id);
  std::vector<std::uint64_t> perm(cfg.n);
  std::iota(perm.begin(), perm.end(), std::uint64_t{0});
  for (std::uint64_t i = cfg.n - 1; i > 0; --i) {
    std::swap(perm[i], perm[rng.NextBelow(i + 1)]);
  }
  const std::uint64_t batches = cfg.n / cfg.batch_size;
  std::vector<Sample> out(batches);
  for (std::uint64_t b = 0; b < batches; ++b) {
    auto first = perm.begin() + b * cfg.batch_size;
    out[b].indices.assign(first, first + cfg.batch_size);
    std::sort(out[b].indices.begin(), out[b].indices.end());
  }
  return out;
}

absl::StatusOr<Sample> SampleRound(const SamplerConfig& cfg,
                                   std::uint64_t round_id) {
  switch (cfg.policy) {
    case SamplingPolicy::kPoissonIID:
      return PoissonSample(cfg, round_id);
    case SamplingPolicy::kFixedSizeWOR:
      return FixedSizeSample(cfg, round_id);
    case SamplingPolicy::kDisjointPartition: {
      DPL_RETURN_IF_ERROR(ValidateSamplerConfig(cfg));
      const std::uint64_t per_epoch = cfg.n / cfg.batch_size;
      DPL_ASSIGN_OR_RETURN(std::vector<Sample> epoch,
                           PartitionEpoch(cfg, round_id / per_epoch));
      return std::move(epoch[round_id % per_epoch]);
    }
  }
  return absl::InvalidArgumentError("unknown sampling policy");
}

AccountingSupport AccountingSupportFor(SamplingPolicy policy, double q) {
  switch (policy) {
    case SamplingPolicy::kPoissonIID:
      return {true, q, false, ""};
    case SamplingPolicy::kFixedSizeWOR:
      return {true, q, true,
              "fixed-size sampling accounted as Poisson sampling at q = b/n"};
    case SamplingPolicy::kDisjointPartition:
      return {false, 0.0, false,
              "tight analysis not known for disjoint-partition sampling"};
  }
  return {false, 0.0, false, "unknown sampling policy"};
}

AccountingSupport AccountingSupportFor(const SamplerConfig& cfg) {
  return AccountingSupportFor(cfg.policy, EquivalentRate(cfg));
}

}  // namespace dpledger
