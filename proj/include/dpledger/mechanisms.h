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

#ifndef DPLEDGER_MECHANISMS_H_
#define DPLEDGER_MECHANISMS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dpledger/secure_random.h"
#include "dpledger/vector_model.h"

namespace dpledger {

// Parameters shared by every query in one sampling round.
struct RoundContext {
  double q = 1.0;        // sampling probability, in (0, 1]
  std::uint64_t n = 1;   // database size in records
  std::uint64_t round_id = 0;

  // Fixed expected denominator q * n. The realized sample size is never used.
  double ExpectedCount() const { return q * static_cast<double>(n); }
};

absl::Status ValidateRoundContext(const RoundContext& ctx);

struct MechanismOptions {
  // Permits sigma = 0. Output produced this way is not private and every
  // ledger round that records it is flagged insecure.
  bool insecure_test_mode = false;
};

// Output of one group mechanism: the estimated averages of each member vector
// and the privacy tuple (S_g, q * n * sigma_g) of the underlying sum query.
struct GroupEstimate {
  std::string group_name;
  std::vector<Vector> estimates;
  PrivacyTuple emitted_tuple;
};

// Sum of `vs` plus N(0, sigma_sum^2 I). Every element of `vs` must have
// dimension `dim`; an empty `vs` yields pure noise.
absl::StatusOr<Vector> GaussianSum(const std::vector<Vector>& vs,
                                   std::size_t dim, double sigma_sum,
                                   NoiseSource& noise,
                                   const MechanismOptions& options = {});

// Pulls the member vectors of `spec` out of a record, in member order.
absl::StatusOr<std::vector<Vector>> ExtractGroup(const RecordVectors& record,
                                                 const GroupSpec& spec);

// Separate clipping: each sampled record's members are treated as one
// concatenated vector, clipped to S_g, summed, noised with q * n * sigma_g and
// divided by q * n. `records[i]` holds record i's member vectors and
// `member_dims` their dimensions (needed when the sample is empty).
absl::StatusOr<GroupEstimate> SeparateGroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options = {});

// Joint clipping: members are divided by their scales alpha_j, the scaled
// concatenation is clipped to S_g, and after summing, noising and dividing by
// q * n, member j is multiplied back by alpha_j. The effective per-coordinate
// noise on member j is alpha_j * sigma_g.
absl::StatusOr<GroupEstimate> JointGroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options = {});

// Dispatches on spec.mechanism.
absl::StatusOr<GroupEstimate> GroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options = {});

// A round's group queries viewed as one Gaussian sum query with noise
// sigma = 1 on the concatenation (w_1 / sigma_1, ..., w_G / sigma_G).
struct EffectiveQuery {
  double s_star = 0.0;
  double sigma = 1.0;
  double z_effective = 0.0;  // 1 / s_star

  friend bool operator==(const EffectiveQuery&,
                         const EffectiveQuery&) = default;
};

// S* = sqrt(sum_g (S_g / sigma_g)^2). Fails on an empty list, on a
// nonpositive or non-finite bound, and with FailedPrecondition on a zero
// sigma (unbounded sensitivity).
absl::StatusOr<EffectiveQuery> RoundCompose(
    std::span<const PrivacyTuple> tuples);

enum class RemainderPolicy { kDrop, kPadWithMean, kError };

// Averages consecutive runs of `microbatch_size` examples into single records.
// All examples must carry the same names and shapes. A trailing partial run is
// dropped (kDrop), averaged on its own (kPadWithMean, which is the same as
// padding it with its own mean), or rejected (kError).
absl::StatusOr<std::vector<RecordVectors>> MicrobatchReduce(
    const std::vector<RecordVectors>& examples, std::size_t microbatch_size,
    RemainderPolicy remainder = RemainderPolicy::kDrop);

}  // namespace dpledger

#endif  // DPLEDGER_MECHANISMS_H_
