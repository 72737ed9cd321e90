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

#include "dpledger/vector_model.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"

namespace dpledger {
namespace {

// Norms within this relative distance of the clip bound count as inside it.
// Rescaling can land a few ulps above the bound; without the slack a second
// clip would perturb the low bits.
constexpr double kClipSlack = 1e-13;

bool AllFinite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(),
                     [](double x) { return std::isfinite(x); });
}

}  // namespace

absl::StatusOr<double> L2Norm(std::span<const double> v) {
  if (v.empty()) {
    return absl::InvalidArgumentError("L2Norm: empty vector");
  }
  if (!AllFinite(v)) {
    return absl::InvalidArgumentError("L2Norm: non-finite entry");
  }
  double sum = 0.0;
  double max_abs = 0.0;
  for (double x : v) {
    sum += x * x;
    max_abs = std::max(max_abs, std::abs(x));
  }
  if (max_abs == 0.0) return 0.0;
  if (std::isfinite(sum) && sum >= std::numeric_limits<double>::min()) {
    return std::sqrt(sum);
  }
  // Rescaled path for overflow / underflow.
  double scaled = 0.0;
  for (double x : v) {
    const double r = x / max_abs;
    scaled += r * r;
  }
  return max_abs * std::sqrt(scaled);
}

absl::StatusOr<Vector> ClipToNorm(std::span<const double> v, double clip) {
  if (!(clip > 0.0) || !std::isfinite(clip)) {
    return absl::InvalidArgumentError(
        absl::StrCat("ClipToNorm: clip bound must be positive, got ", clip));
  }
  auto norm = L2Norm(v);
  if (!norm.ok()) return norm.status();
  Vector out(v.begin(), v.end());
  if (*norm <= clip * (1.0 + kClipSlack)) return out;
  const double factor = clip / *norm;
  for (double& x : out) x *= factor;
  return out;
}

absl::StatusOr<std::vector<Vector>> ScaleGroup(const std::vector<Vector>& vs,
                                               std::span<const double> alphas) {
  if (vs.size() != alphas.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "ScaleGroup: ", vs.size(), " vectors but ", alphas.size(), " scales"));
  }
  std::vector<Vector> out = vs;
  for (std::size_t j = 0; j < vs.size(); ++j) {
    if (!(alphas[j] > 0.0) || !std::isfinite(alphas[j])) {
      return absl::InvalidArgumentError(
          absl::StrCat("ScaleGroup: scale ", j, " must be positive"));
    }
    for (double& x : out[j]) x /= alphas[j];
  }
  return out;
}

absl::StatusOr<std::vector<Vector>> UnscaleGroup(
    const std::vector<Vector>& vs, std::span<const double> alphas) {
  if (vs.size() != alphas.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "UnscaleGroup: ", vs.size(), " vectors but ", alphas.size(),
        " scales"));
  }
  std::vector<Vector> out = vs;
  for (std::size_t j = 0; j < vs.size(); ++j) {
    if (!(alphas[j] > 0.0) || !std::isfinite(alphas[j])) {
      return absl::InvalidArgumentError(
          absl::StrCat("UnscaleGroup: scale ", j, " must be positive"));
    }
    for (double& x : out[j]) x *= alphas[j];
  }
  return out;
}

Vector Concat(const std::vector<Vector>& vs) {
  Vector flat;
  for (const Vector& v : vs) flat.insert(flat.end(), v.begin(), v.end());
  return flat;
}

std::vector<Vector> SplitByDims(std::span<const double> flat,
                                std::span<const std::size_t> dims) {
  std::vector<Vector> out;
  out.reserve(dims.size());
  std::size_t offset = 0;
  for (std::size_t d : dims) {
    out.emplace_back(flat.begin() + offset, flat.begin() + offset + d);
    offset += d;
  }
  return out;
}

absl::StatusOr<double> ConcatNorm(const std::vector<Vector>& vs) {
  if (vs.empty()) {
    return absl::InvalidArgumentError("ConcatNorm: empty vector list");
  }
  return L2Norm(Concat(vs));
}

absl::StatusOr<RecordVectors> RecordVectors::Create(
    std::vector<Entry> entries) {
  std::set<std::string> seen;
  for (const auto& [name, v] : entries) {
    if (name.empty()) {
      return absl::InvalidArgumentError("RecordVectors: empty vector name");
    }
    if (!seen.insert(name).second) {
      return absl::InvalidArgumentError(
          absl::StrCat("RecordVectors: duplicate name '", name, "'"));
    }
    if (v.empty()) {
      return absl::InvalidArgumentError(
          absl::StrCat("RecordVectors: vector '", name, "' is empty"));
    }
    if (!AllFinite(v)) {
      return absl::InvalidArgumentError(
          absl::StrCat("RecordVectors: vector '", name, "' is not finite"));
    }
  }
  return RecordVectors(std::move(entries));
}

const Vector* RecordVectors::Find(const std::string& name) const {
  for (const auto& entry : entries_) {
    if (entry.first == name) return &entry.second;
  }
  return nullptr;
}

std::size_t RecordVectors::TotalDim() const {
  std::size_t d = 0;
  for (const auto& entry : entries_) d += entry.second.size();
  return d;
}

absl::Status ValidateGroupSpec(const GroupSpec& spec) {
  if (spec.member_names.empty()) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "': no member vectors"));
  }
  if (!(spec.clip_S > 0.0) || !std::isfinite(spec.clip_S)) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "': clip bound must be positive"));
  }
  if (!(spec.noise_sigma >= 0.0) || !std::isfinite(spec.noise_sigma)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "group '", spec.name, "': noise sigma must be finite and >= 0"));
  }
  if (spec.mechanism == GroupMechanism::kSeparate) {
    if (!spec.joint_scales.empty()) {
      return absl::InvalidArgumentError(absl::StrCat(
          "group '", spec.name, "': scales given for a separate mechanism"));
    }
    return absl::OkStatus();
  }
  const std::size_t k = spec.member_names.size();
  if (spec.joint_scales.size() != k) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "': joint arity mismatch, ", k,
                     " members but ", spec.joint_scales.size(), " scales"));
  }
  for (double a : spec.joint_scales) {
    if (!(a > 0.0) || !std::isfinite(a)) {
      return absl::InvalidArgumentError(absl::StrCat(
          "group '", spec.name, "': joint scales must be positive"));
    }
  }
  if (spec.clip_S > std::sqrt(static_cast<double>(k))) {
    return absl::InvalidArgumentError(absl::StrCat(
        "group '", spec.name, "': joint clip bound ", spec.clip_S,
        " exceeds sqrt(k) for k=", k));
  }
  return absl::OkStatus();
}

std::vector<std::string> ValidatePartition(const GroupPartition& partition,
                                           const RecordVectors& record) {
  std::vector<std::string> violations;
  std::set<std::string> assigned;
  std::size_t dim = 0;
  for (const GroupSpec& spec : partition.groups) {
    if (absl::Status s = ValidateGroupSpec(spec); !s.ok()) {
      violations.emplace_back(s.message());
    }
    for (const std::string& name : spec.member_names) {
      if (!assigned.insert(name).second) {
        violations.push_back(absl::StrCat("vector '", name,
                                          "' assigned to more than one group"));
      }
      const Vector* v = record.Find(name);
      if (v == nullptr) {
        violations.push_back(
            absl::StrCat("group '", spec.name, "' names unknown vector '",
                         name, "'"));
      } else {
        dim += v->size();
      }
    }
  }
  for (const auto& [name, v] : record.entries()) {
    if (!assigned.contains(name)) {
      violations.push_back(absl::StrCat("unassigned vector '", name, "'"));
    }
  }
  if (dim != partition.total_dim) {
    violations.push_back(absl::StrCat("total dimension is ", dim,
                                      " but partition declares ",
                                      partition.total_dim));
  }
  return violations;
}

}  // namespace dpledger
