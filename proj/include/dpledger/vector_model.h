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

#ifndef DPLEDGER_VECTOR_MODEL_H_
#define DPLEDGER_VECTOR_MODEL_H_

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace dpledger {

// Dense double-precision vector. All vectors handled by the library are
// contiguous and finite-valued.
using Vector = std::vector<double>;

// Euclidean norm. Rejects empty and non-finite input.
absl::StatusOr<double> L2Norm(std::span<const double> v);

// Projects `v` onto the L2 ball of radius `clip`: v * min(1, clip / |v|).
// The zero vector is a fixed point. Vectors whose norm exceeds `clip` by no
// more than a few ulps are returned unchanged, which makes clipping
// idempotent bit-for-bit.
absl::StatusOr<Vector> ClipToNorm(std::span<const double> v, double clip);

// Divides vs[j] by alphas[j] element-wise.
absl::StatusOr<std::vector<Vector>> ScaleGroup(const std::vector<Vector>& vs,
                                               std::span<const double> alphas);

// Inverse of ScaleGroup: multiplies vs[j] by alphas[j].
absl::StatusOr<std::vector<Vector>> UnscaleGroup(
    const std::vector<Vector>& vs, std::span<const double> alphas);

// Norm of the concatenation (v_1, ..., v_k).
absl::StatusOr<double> ConcatNorm(const std::vector<Vector>& vs);

// Concatenates vectors in order.
Vector Concat(const std::vector<Vector>& vs);

// Splits `flat` into consecutive pieces with the given dimensions.
std::vector<Vector> SplitByDims(std::span<const double> flat,
                                std::span<const std::size_t> dims);

// One record's named collection of vectors, the unit of privacy. Names are
// unique, vectors are nonempty and finite, and insertion order is preserved.
class RecordVectors {
 public:
  using Entry = std::pair<std::string, Vector>;

  static absl::StatusOr<RecordVectors> Create(std::vector<Entry> entries);

  std::size_t size() const { return entries_.size(); }
  const std::vector<Entry>& entries() const { return entries_; }
  const std::string& name(std::size_t i) const { return entries_[i].first; }
  const Vector& vector(std::size_t i) const { return entries_[i].second; }

  // Returns nullptr if no vector has this name.
  const Vector* Find(const std::string& name) const;

  std::size_t TotalDim() const;

 private:
  explicit RecordVectors(std::vector<Entry> entries)
      : entries_(std::move(entries)) {}

  std::vector<Entry> entries_;
};

enum class GroupMechanism { kSeparate, kJoint };

// Mechanism configuration for one group of vectors.
struct GroupSpec {
  std::string name;
  std::vector<std::string> member_names;
  GroupMechanism mechanism = GroupMechanism::kSeparate;
  // L2 clip bound S_g applied to the (scaled) concatenation of the members.
  double clip_S = 1.0;
  // Per-average noise scale sigma_g; the noise on the sum is q * n * sigma_g.
  double noise_sigma = 0.0;
  // alpha_1..alpha_k, required for kJoint only.
  std::vector<double> joint_scales;
};

// Checks a single spec's internal consistency (nonempty members, positive
// clip, Joint arity and S_g <= sqrt(k)).
absl::Status ValidateGroupSpec(const GroupSpec& spec);

struct GroupPartition {
  std::vector<GroupSpec> groups;
  // D, the sum of member dimensionalities.
  std::size_t total_dim = 0;
};

// Lists every way in which `partition` fails to describe `record`: names
// assigned twice or not at all, unknown names, a wrong total dimension, and
// invalid group specs. An empty result means the partition is valid.
std::vector<std::string> ValidatePartition(const GroupPartition& partition,
                                           const RecordVectors& record);

// Privacy cost of one Gaussian sum query: the L2 bound on each summand and the
// standard deviation of the noise added to the sum. A zero sigma_sum is only
// produced in insecure test mode and carries no privacy.
struct PrivacyTuple {
  double clip_S = 0.0;
  double sigma_sum = 0.0;

  bool IsPrivate() const { return sigma_sum > 0.0; }
  friend bool operator==(const PrivacyTuple&, const PrivacyTuple&) = default;
};

}  // namespace dpledger

#endif  // DPLEDGER_VECTOR_MODEL_H_
