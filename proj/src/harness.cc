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

#include "dpledger/harness.h"

#include <cmath>

#include "absl/strings/str_cat.h"
#include "dpledger/status_macros.h"
#include "json.hpp"

namespace dpledger {
namespace {

constexpr char kWeights[] = "weights";
constexpr char kBias[] = "bias";
constexpr char kCorrect[] = "correct";
constexpr char kAccuracyGroup[] = "accuracy";

double Sigmoid(double m) {
  if (m >= 0) return 1.0 / (1.0 + std::exp(-m));
  const double e = std::exp(m);
  return e / (1.0 + e);
}

double Softplus(double m) {
  return m > 0 ? m + std::log1p(std::exp(-m)) : std::log1p(std::exp(m));
}

bool IsCorrect(const LogisticModel& model, std::span<const double> x,
               int label) {
  return (LogisticMargin(model, x) > 0.0) == (label == 1);
}

absl::Status ValidateTrainConfig(const TrainConfig& cfg) {
  if (cfg.n < 2 || cfg.dim < 1) {
    return absl::InvalidArgumentError("need n >= 2 and dim >= 1");
  }
  if (cfg.holdout_n < 2) {
    return absl::InvalidArgumentError("holdout needs at least 2 examples");
  }
  if (cfg.rounds < 1) return absl::InvalidArgumentError("rounds must be >= 1");
  if (cfg.microbatch_size < 1 || cfg.microbatch_size > cfg.n) {
    return absl::InvalidArgumentError("microbatch size must be in [1, n]");
  }
  if (!std::isfinite(cfg.learning_rate) || cfg.learning_rate <= 0.0) {
    return absl::InvalidArgumentError("learning rate must be positive");
  }
  if (!(cfg.noise_multiplier >= 0.0) || !std::isfinite(cfg.noise_multiplier)) {
    return absl::InvalidArgumentError("noise multiplier must be >= 0");
  }
  if (cfg.noise_multiplier == 0.0 && !cfg.insecure_test_mode) {
    return absl::FailedPreconditionError(
        "noise multiplier 0 requires insecure test mode");
  }
  return absl::OkStatus();
}

struct GroupPlan {
  GroupPartition partition;
  std::vector<std::vector<std::size_t>> member_dims;
};

absl::StatusOr<GroupPlan> PlanGroups(const TrainConfig& cfg,
                                     double expected_count) {
  GroupPlan plan;
  std::vector<GroupSpec>& groups = plan.partition.groups;
  if (cfg.joint_gradients) {
    groups.push_back(GroupSpec{"gradient",
                               {kWeights, kBias},
                               GroupMechanism::kJoint,
                               cfg.joint_clip,
                               0.0,
                               {cfg.joint_weight_scale, cfg.joint_bias_scale}});
    plan.member_dims.push_back({cfg.dim, 1});
  } else if (cfg.clip_split == ClipSplit::kFlat) {
    groups.push_back(GroupSpec{"gradient", {kWeights, kBias},
                               GroupMechanism::kSeparate, cfg.clip_total, 0.0,
                               {}});
    plan.member_dims.push_back({cfg.dim, 1});
  } else {
    const std::vector<std::size_t> dims = {cfg.dim, 1};
    DPL_ASSIGN_OR_RETURN(std::vector<double> clips,
                         SplitClipBudget(cfg.clip_total, dims, cfg.clip_split));
    groups.push_back(GroupSpec{kWeights, {kWeights}, GroupMechanism::kSeparate,
                               clips[0], 0.0, {}});
    groups.push_back(GroupSpec{kBias, {kBias}, GroupMechanism::kSeparate,
                               clips[1], 0.0, {}});
    plan.member_dims.push_back({cfg.dim});
    plan.member_dims.push_back({1});
  }
  // The correctness indicator lies in [0, 1], so 1 bounds its norm a priori.
  groups.push_back(GroupSpec{kAccuracyGroup, {kCorrect},
                             GroupMechanism::kSeparate, 1.0, 0.0, {}});
  plan.member_dims.push_back({1});
  plan.partition.total_dim = cfg.dim + 2;

  if (cfg.noise_multiplier > 0.0) {
    AllocationRequest request{cfg.noise_multiplier, {}, cfg.allocation};
    for (std::size_t g = 0; g < groups.size(); ++g) {
      std::size_t d = 0;
      for (std::size_t md : plan.member_dims[g]) d += md;
      request.groups.push_back(GroupBound{groups[g].clip_S, d});
    }
    DPL_ASSIGN_OR_RETURN(std::vector<double> sigma_sums, Allocate(request));
    for (std::size_t g = 0; g < groups.size(); ++g) {
      groups[g].noise_sigma = sigma_sums[g] / expected_count;
    }
  }
  return plan;
}

absl::StatusOr<RecordVectors> ExampleRecord(const LogisticModel& model,
                                            const SyntheticDataset& data,
                                            std::size_t i) {
  LogisticGradient g =
      LogisticLossGradient(model, data.features[i], data.labels[i]);
  const double correct = IsCorrect(model, data.features[i], data.labels[i]);
  return RecordVectors::Create({{kWeights, std::move(g.weights)},
                                {kBias, {g.bias}},
                                {kCorrect, {correct}}});
}

}  // namespace

absl::StatusOr<SyntheticDataset> GenerateSynthetic(std::size_t n,
                                                   std::size_t dim,
                                                   double separation,
                                                   const Seed& seed,
                                                   absl::string_view split) {
  if (n < 2 || dim < 1) {
    return absl::InvalidArgumentError(
        absl::StrCat("synthetic data needs n >= 2 and dim >= 1, got n=", n,
                     ", dim=", dim));
  }
  if (!(separation >= 0.0) || !std::isfinite(separation)) {
    return absl::InvalidArgumentError("separation must be finite and >= 0");
  }
  SecureStream rng(seed, absl::StrCat("data/", split), 0);
  const double offset = 0.5 * separation / std::sqrt(static_cast<double>(dim));
  SyntheticDataset data;
  data.dim = dim;
  data.features.reserve(n);
  data.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int label = static_cast<int>(i % 2);
    const double sign = label == 1 ? 1.0 : -1.0;
    Vector x(dim);
    for (double& c : x) c = sign * offset + rng.NextStandardNormal();
    data.features.push_back(std::move(x));
    data.labels.push_back(label);
  }
  return data;
}

double LogisticMargin(const LogisticModel& model, std::span<const double> x) {
  double m = model.bias;
  for (std::size_t c = 0; c < x.size(); ++c) m += model.weights[c] * x[c];
  return m;
}

double LogisticLoss(const LogisticModel& model, std::span<const double> x,
                    int label) {
  const double m = LogisticMargin(model, x);
  return Softplus(m) - (label == 1 ? m : 0.0);
}

LogisticGradient LogisticLossGradient(const LogisticModel& model,
                                      std::span<const double> x, int label) {
  const double residual = Sigmoid(LogisticMargin(model, x)) - label;
  LogisticGradient g;
  g.weights.resize(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) g.weights[c] = residual * x[c];
  g.bias = residual;
  return g;
}

double Accuracy(const LogisticModel& model, const SyntheticDataset& data) {
  if (data.features.empty()) return 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < data.features.size(); ++i) {
    correct += IsCorrect(model, data.features[i], data.labels[i]);
  }
  return static_cast<double>(correct) / data.features.size();
}

absl::StatusOr<TrainReport> DpSgdTrain(
    const TrainConfig& cfg, const std::function<void(const RoundTrace&)>& trace) {
  DPL_RETURN_IF_ERROR(ValidateTrainConfig(cfg));
  DPL_ASSIGN_OR_RETURN(
      SyntheticDataset train,
      GenerateSynthetic(cfg.n, cfg.dim, cfg.separation, cfg.seed, "train"));
  DPL_ASSIGN_OR_RETURN(SyntheticDataset holdout,
                       GenerateSynthetic(cfg.holdout_n, cfg.dim, cfg.separation,
                                         cfg.seed, "holdout"));

  // Records are fixed, consecutive microbatches; a trailing partial one is
  // dropped.
  const std::size_t mb = cfg.microbatch_size;
  const std::uint64_t record_count = cfg.n / mb;
  SamplerConfig sampler{cfg.policy, record_count, cfg.q, cfg.batch_size,
                        cfg.seed};
  DPL_RETURN_IF_ERROR(ValidateSamplerConfig(sampler));
  const double q = EquivalentRate(sampler);
  const RoundContext base_ctx{q, record_count, 0};
  DPL_RETURN_IF_ERROR(ValidateRoundContext(base_ctx));

  DPL_ASSIGN_OR_RETURN(GroupPlan plan, PlanGroups(cfg, base_ctx.ExpectedCount()));
  {
    LogisticModel zero{Vector(cfg.dim, 0.0), 0.0};
    DPL_ASSIGN_OR_RETURN(RecordVectors probe, ExampleRecord(zero, train, 0));
    std::vector<std::string> violations =
        ValidatePartition(plan.partition, probe);
    if (!violations.empty()) {
      return absl::InternalError(
          absl::StrCat("bad group partition: ", violations.front()));
    }
  }
  const MechanismOptions options{cfg.insecure_test_mode};

  TrainReport report;
  report.model = LogisticModel{Vector(cfg.dim, 0.0), 0.0};
  LogisticModel& model = report.model;
  report.private_accuracy.reserve(cfg.rounds);

  for (std::uint64_t t = 0; t < cfg.rounds; ++t) {
    DPL_ASSIGN_OR_RETURN(Sample sample, SampleRound(sampler, t));
    DPL_ASSIGN_OR_RETURN(Ledger::RoundHandle round,
                         report.ledger.RecordSample(q, record_count, cfg.policy));
    RoundContext ctx = base_ctx;
    ctx.round_id = t;

    std::vector<RecordVectors> records;
    records.reserve(sample.indices.size());
    for (std::uint64_t r : sample.indices) {
      std::vector<RecordVectors> examples;
      examples.reserve(mb);
      for (std::size_t e = r * mb; e < (r + 1) * mb; ++e) {
        DPL_ASSIGN_OR_RETURN(RecordVectors ex, ExampleRecord(model, train, e));
        examples.push_back(std::move(ex));
      }
      DPL_ASSIGN_OR_RETURN(std::vector<RecordVectors> reduced,
                           MicrobatchReduce(examples, mb));
      records.push_back(std::move(reduced.front()));
    }

    LogisticGradient step{Vector(cfg.dim, 0.0), 0.0};
    double private_accuracy = 0.0;
    for (std::size_t g = 0; g < plan.partition.groups.size(); ++g) {
      const GroupSpec& spec = plan.partition.groups[g];
      std::vector<std::vector<Vector>> members;
      members.reserve(records.size());
      for (const RecordVectors& rec : records) {
        DPL_ASSIGN_OR_RETURN(std::vector<Vector> m, ExtractGroup(rec, spec));
        members.push_back(std::move(m));
      }
      SecureStream noise(cfg.seed, absl::StrCat("noise/", spec.name), t);
      DPL_ASSIGN_OR_RETURN(GroupEstimate est,
                           GroupQuery(members, plan.member_dims[g], spec, ctx,
                                      noise, options));
      DPL_RETURN_IF_ERROR(report.ledger.RecordSumQuery(
          round, est.emitted_tuple.clip_S, est.emitted_tuple.sigma_sum,
          spec.name));
      if (t == 0) report.group_tuples.emplace_back(spec.name, est.emitted_tuple);
      for (std::size_t j = 0; j < spec.member_names.size(); ++j) {
        const std::string& name = spec.member_names[j];
        if (name == kWeights) {
          step.weights = est.estimates[j];
        } else if (name == kBias) {
          step.bias = est.estimates[j][0];
        } else if (name == kCorrect) {
          private_accuracy = est.estimates[j][0];
        }
      }
    }
    DPL_RETURN_IF_ERROR(report.ledger.CloseRound(round));
    report.private_accuracy.push_back(private_accuracy);

    if (trace) {
      double true_accuracy = 0.0;
      for (std::size_t e = 0; e < record_count * mb; ++e) {
        true_accuracy += IsCorrect(model, train.features[e], train.labels[e]);
      }
      trace(RoundTrace{t, true_accuracy / static_cast<double>(record_count * mb),
                       private_accuracy});
    }

    for (std::size_t c = 0; c < cfg.dim; ++c) {
      model.weights[c] -= cfg.learning_rate * step.weights[c];
    }
    model.bias -= cfg.learning_rate * step.bias;
  }

  report.holdout_accuracy_nonprivate = Accuracy(model, holdout);
  report.insecure = !report.ledger.insecure_rounds().empty();
  absl::StatusOr<PrivacyGuarantee> guarantee =
      AccountLedger(report.ledger, cfg.delta, cfg.grid, cfg.accounting);
  if (guarantee.ok()) {
    report.guarantee = *std::move(guarantee);
  } else {
    report.accounting_refusal = std::string(guarantee.status().message());
  }
  return report;
}

std::string ReportToJson(const TrainReport& report,
                         const std::string& ledger_path) {
  using nlohmann::json;
  json j;
  j["model"] = {{"weights", report.model.weights}, {"bias", report.model.bias}};
  j["holdout_accuracy_nonprivate"] = report.holdout_accuracy_nonprivate;
  j["private_accuracy"] = report.private_accuracy;
  json groups = json::array();
  for (const auto& [name, tuple] : report.group_tuples) {
    groups.push_back(
        {{"name", name}, {"clip_S", tuple.clip_S}, {"sigma_sum", tuple.sigma_sum}});
  }
  j["groups"] = groups;
  j["ledger_path"] = ledger_path;
  j["insecure"] = report.insecure;
  if (report.guarantee) {
    const PrivacyGuarantee& g = *report.guarantee;
    j["guarantee"] = {{"epsilon", g.epsilon},
                      {"delta", g.delta},
                      {"achieving_order", g.achieving_order},
                      {"caveats", g.caveats}};
  } else {
    j["guarantee"] = nullptr;
    j["accounting_refusal"] = report.accounting_refusal;
  }
  return j.dump(2) + "\n";
}

}  // namespace dpledger
