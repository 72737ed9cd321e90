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

#include "dpledger/mechanisms.h"

#include <cmath>
#include <numeric>

#include "absl/strings/str_cat.h"
#include "dpledger/status_macros.h"

namespace dpledger {
namespace {

absl::Status CheckShapes(const std::vector<std::vector<Vector>>& records,
                         std::span<const std::size_t> member_dims,
                         const std::string& group) {
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].size() != member_dims.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("group '", group, "': record ", i, " has ",
                       records[i].size(), " members, expected ",
                       member_dims.size()));
    }
    for (std::size_t j = 0; j < member_dims.size(); ++j) {
      if (records[i][j].size() != member_dims[j]) {
        return absl::InvalidArgumentError(
            absl::StrCat("group '", group, "': record ", i, " member ", j,
                         " has dimension ", records[i][j].size(),
                         ", expected ", member_dims[j]));
      }
    }
  }
  return absl::OkStatus();
}

absl::Status CheckCommon(const std::vector<std::vector<Vector>>& records,
                         std::span<const std::size_t> member_dims,
                         const GroupSpec& spec, const RoundContext& ctx,
                         const MechanismOptions& options) {
  DPL_RETURN_IF_ERROR(ValidateGroupSpec(spec));
  DPL_RETURN_IF_ERROR(ValidateRoundContext(ctx));
  if (member_dims.size() != spec.member_names.size()) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "': ", member_dims.size(),
                     " member dims for ", spec.member_names.size(),
                     " members"));
  }
  for (std::size_t d : member_dims) {
    if (d == 0) {
      return absl::InvalidArgumentError(
          absl::StrCat("group '", spec.name, "': zero-dimensional member"));
    }
  }
  if (spec.noise_sigma == 0.0 && !options.insecure_test_mode) {
    return absl::FailedPreconditionError(absl::StrCat(
        "group '", spec.name,
        "': noise sigma is 0 outside insecure test mode"));
  }
  return CheckShapes(records, member_dims, spec.name);
}

// Clips each record's (already scaled) concatenation, sums, adds noise and
// divides by the expected count. Returns the flat estimate.
absl::StatusOr<Vector> ClipSumNoiseAverage(
    const std::vector<std::vector<Vector>>& records, std::size_t dim,
    double clip, double sigma_sum, const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options) {
  std::vector<Vector> clipped;
  clipped.reserve(records.size());
  for (const auto& members : records) {
    DPL_ASSIGN_OR_RETURN(Vector c, ClipToNorm(Concat(members), clip));
    clipped.push_back(std::move(c));
  }
  DPL_ASSIGN_OR_RETURN(Vector sum,
                       GaussianSum(clipped, dim, sigma_sum, noise, options));
  const double denom = ctx.ExpectedCount();
  for (double& x : sum) x /= denom;
  return sum;
}

}  // namespace

absl::Status ValidateRoundContext(const RoundContext& ctx) {
  if (!(ctx.q > 0.0 && ctx.q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampling probability must be in (0, 1], got ", ctx.q));
  }
  if (ctx.n == 0) {
    return absl::InvalidArgumentError("database size must be positive");
  }
  return absl::OkStatus();
}

absl::StatusOr<Vector> GaussianSum(const std::vector<Vector>& vs,
                                   std::size_t dim, double sigma_sum,
                                   NoiseSource& noise,
                                   const MechanismOptions& options) {
  if (!(sigma_sum >= 0.0) || !std::isfinite(sigma_sum)) {
    return absl::InvalidArgumentError(
        absl::StrCat("noise sigma must be finite and >= 0, got ", sigma_sum));
  }
  if (sigma_sum == 0.0 && !options.insecure_test_mode) {
    return absl::FailedPreconditionError(
        "noise sigma is 0 outside insecure test mode");
  }
  Vector sum(dim, 0.0);
  for (std::size_t i = 0; i < vs.size(); ++i) {
    if (vs[i].size() != dim) {
      return absl::InvalidArgumentError(
          absl::StrCat("GaussianSum: summand ", i, " has dimension ",
                       vs[i].size(), ", expected ", dim));
    }
    for (std::size_t c = 0; c < dim; ++c) {
      if (!std::isfinite(vs[i][c])) {
        return absl::InvalidArgumentError(
            absl::StrCat("GaussianSum: summand ", i, " is not finite"));
      }
      sum[c] += vs[i][c];
    }
  }
  if (sigma_sum > 0.0) {
    for (double& x : sum) x += sigma_sum * noise.NextStandardNormal();
  }
  return sum;
}

absl::StatusOr<std::vector<Vector>> ExtractGroup(const RecordVectors& record,
                                                 const GroupSpec& spec) {
  std::vector<Vector> members;
  members.reserve(spec.member_names.size());
  for (const std::string& name : spec.member_names) {
    const Vector* v = record.Find(name);
    if (v == nullptr) {
      return absl::InvalidArgumentError(absl::StrCat(
          "group '", spec.name, "': record has no vector '", name, "'"));
    }
    members.push_back(*v);
  }
  return members;
}

absl::StatusOr<GroupEstimate> SeparateGroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options) {
  if (spec.mechanism != GroupMechanism::kSeparate) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "' is not a separate mechanism"));
  }
  DPL_RETURN_IF_ERROR(CheckCommon(records, member_dims, spec, ctx, options));
  const std::size_t dim =
      std::accumulate(member_dims.begin(), member_dims.end(), std::size_t{0});
  const double sigma_sum = ctx.ExpectedCount() * spec.noise_sigma;
  DPL_ASSIGN_OR_RETURN(Vector flat,
                       ClipSumNoiseAverage(records, dim, spec.clip_S, sigma_sum,
                                           ctx, noise, options));
  return GroupEstimate{spec.name, SplitByDims(flat, member_dims),
                       PrivacyTuple{spec.clip_S, sigma_sum}};
}

absl::StatusOr<GroupEstimate> JointGroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options) {
  if (spec.mechanism != GroupMechanism::kJoint) {
    return absl::InvalidArgumentError(
        absl::StrCat("group '", spec.name, "' is not a joint mechanism"));
  }
  DPL_RETURN_IF_ERROR(CheckCommon(records, member_dims, spec, ctx, options));
  std::vector<std::vector<Vector>> scaled;
  scaled.reserve(records.size());
  for (const auto& members : records) {
    DPL_ASSIGN_OR_RETURN(auto s, ScaleGroup(members, spec.joint_scales));
    scaled.push_back(std::move(s));
  }
  const std::size_t dim =
      std::accumulate(member_dims.begin(), member_dims.end(), std::size_t{0});
  const double sigma_sum = ctx.ExpectedCount() * spec.noise_sigma;
  DPL_ASSIGN_OR_RETURN(Vector flat,
                       ClipSumNoiseAverage(scaled, dim, spec.clip_S, sigma_sum,
                                           ctx, noise, options));
  DPL_ASSIGN_OR_RETURN(
      std::vector<Vector> estimates,
      UnscaleGroup(SplitByDims(flat, member_dims), spec.joint_scales));
  return GroupEstimate{spec.name, std::move(estimates),
                       PrivacyTuple{spec.clip_S, sigma_sum}};
}

absl::StatusOr<GroupEstimate> GroupQuery(
    const std::vector<std::vector<Vector>>& records,
    std::span<const std::size_t> member_dims, const GroupSpec& spec,
    const RoundContext& ctx, NoiseSource& noise,
    const MechanismOptions& options) {
  if (spec.mechanism == GroupMechanism::kJoint) {
    return JointGroupQuery(records, member_dims, spec, ctx, noise, options);
  }
  return SeparateGroupQuery(records, member_dims, spec, ctx, noise, options);
}

absl::StatusOr<EffectiveQuery> RoundCompose(
    std::span<const PrivacyTuple> tuples) {
  if (tuples.empty()) {
    return absl::InvalidArgumentError("RoundCompose: no privacy tuples");
  }
  double sum_sq = 0.0;
  for (const PrivacyTuple& t : tuples) {
    if (!(t.clip_S > 0.0) || !std::isfinite(t.clip_S)) {
      return absl::InvalidArgumentError(
          absl::StrCat("RoundCompose: clip bound must be positive, got ",
                       t.clip_S));
    }
    if (!(t.sigma_sum >= 0.0) || !std::isfinite(t.sigma_sum)) {
      return absl::InvalidArgumentError(
          absl::StrCat("RoundCompose: invalid noise sigma ", t.sigma_sum));
    }
    if (t.sigma_sum == 0.0) {
      return absl::FailedPreconditionError(
          "RoundCompose: zero noise gives infinite sensitivity (no privacy)");
    }
    const double r = t.clip_S / t.sigma_sum;
    sum_sq += r * r;
  }
  const double s_star = std::sqrt(sum_sq);
  return EffectiveQuery{s_star, 1.0, 1.0 / s_star};
}

absl::StatusOr<std::vector<RecordVectors>> MicrobatchReduce(
    const std::vector<RecordVectors>& examples, std::size_t microbatch_size,
    RemainderPolicy remainder) {
  if (microbatch_size < 1) {
    return absl::InvalidArgumentError("microbatch size must be >= 1");
  }
  const std::size_t full = examples.size() / microbatch_size;
  const std::size_t rest = examples.size() % microbatch_size;
  if (rest != 0 && remainder == RemainderPolicy::kError) {
    return absl::InvalidArgumentError(
        absl::StrCat(examples.size(), " examples do not divide into ",
                     "microbatches of ", microbatch_size));
  }
  auto average = [&](std::size_t begin,
                     std::size_t count) -> absl::StatusOr<RecordVectors> {
    const RecordVectors& first = examples[begin];
    std::vector<RecordVectors::Entry> entries = first.entries();
    for (std::size_t i = begin + 1; i < begin + count; ++i) {
      const RecordVectors& ex = examples[i];
      if (ex.size() != first.size()) {
        return absl::InvalidArgumentError(
            absl::StrCat("example ", i, " has a different vector count"));
      }
      for (std::size_t j = 0; j < ex.size(); ++j) {
        if (ex.name(j) != first.name(j) ||
            ex.vector(j).size() != first.vector(j).size()) {
          return absl::InvalidArgumentError(absl::StrCat(
              "example ", i, " vector '", ex.name(j), "' does not match"));
        }
        for (std::size_t c = 0; c < ex.vector(j).size(); ++c) {
          entries[j].second[c] += ex.vector(j)[c];
        }
      }
    }
    for (auto& entry : entries) {
      for (double& x : entry.second) x /= static_cast<double>(count);
    }
    return RecordVectors::Create(std::move(entries));
  };

  std::vector<RecordVectors> out;
  out.reserve(full + 1);
  for (std::size_t b = 0; b < full; ++b) {
    DPL_ASSIGN_OR_RETURN(RecordVectors r,
                         average(b * microbatch_size, microbatch_size));
    out.push_back(std::move(r));
  }
  if (rest != 0 && remainder == RemainderPolicy::kPadWithMean) {
    DPL_ASSIGN_OR_RETURN(RecordVectors r,
                         average(full * microbatch_size, rest));
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace dpledger
