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

#ifndef DPLEDGER_SAMPLING_H_
#define DPLEDGER_SAMPLING_H_

#include <cstdint>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpledger/secure_random.h"

namespace dpledger {

enum class SamplingPolicy {
  kPoissonIID,         // each record independently with probability q
  kFixedSizeWOR,       // uniform b-subset, independent across rounds
  kDisjointPartition,  // shuffle once per epoch, cut into disjoint batches
};

// Stable identifiers used in ledger files: "poisson", "fixed_size",
// "disjoint".
absl::string_view PolicyTag(SamplingPolicy policy);
absl::StatusOr<SamplingPolicy> PolicyFromTag(absl::string_view tag);

struct SamplerConfig {
  SamplingPolicy policy = SamplingPolicy::kPoissonIID;
  std::uint64_t n = 0;
  double q = 0.0;                // kPoissonIID only
  std::uint64_t batch_size = 0;  // the other policies
  Seed seed{};
};

absl::Status ValidateSamplerConfig(const SamplerConfig& cfg);

// The rate the accountant would use: q for Poisson, b / n otherwise.
double EquivalentRate(const SamplerConfig& cfg);

// Sorted record indices drawn for one round. Under Poisson sampling the size
// of `indices` depends on the data only through the coin flips but is still
// confidential: the accountant assumes it is never released, so do not log
// it.
struct Sample {
  std::vector<std::uint64_t> indices;
};

absl::StatusOr<Sample> PoissonSample(const SamplerConfig& cfg,
                                     std::uint64_t round_id);

absl::StatusOr<Sample> FixedSizeSample(const SamplerConfig& cfg,
                                       std::uint64_t round_id);

// floor(n / b) disjoint batches from a fresh permutation; the n mod b
// leftover indices sit out this epoch.
absl::StatusOr<std::vector<Sample>> PartitionEpoch(const SamplerConfig& cfg,
                                                   std::uint64_t epoch_id);

// Draws the sample for `round_id` under whichever policy `cfg` names. For
// kDisjointPartition round r uses batch r mod B of epoch r / B.
absl::StatusOr<Sample> SampleRound(const SamplerConfig& cfg,
                                   std::uint64_t round_id);

struct AccountingSupport {
  bool supported = false;
  double q_equivalent = 0.0;
  // Set for fixed-size sampling, which the accountant treats with the
  // Poisson (sampled Gaussian) analysis at q = b / n.
  bool fixed_size_caveat = false;
  std::string reason;
};

AccountingSupport AccountingSupportFor(SamplingPolicy policy, double q);
AccountingSupport AccountingSupportFor(const SamplerConfig& cfg);

}  // namespace dpledger

#endif  // DPLEDGER_SAMPLING_H_
