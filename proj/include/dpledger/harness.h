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

#ifndef DPLEDGER_HARNESS_H_
#define DPLEDGER_HARNESS_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpledger/accountant.h"
#include "dpledger/allocation.h"
#include "dpledger/ledger.h"
#include "dpledger/mechanisms.h"
#include "dpledger/sampling.h"
#include "dpledger/secure_random.h"

namespace dpledger {

// Two Gaussian clusters at +/- separation/2 along the all-ones direction with
// unit-variance isotropic noise. Labels alternate 0, 1, 0, 1, ...
struct SyntheticDataset {
  std::size_t dim = 0;
  std::vector<Vector> features;
  std::vector<int> labels;
};

// `split` selects an independent stream, so "train" and "holdout" drawn from
// one seed do not overlap.
absl::StatusOr<SyntheticDataset> GenerateSynthetic(std::size_t n,
                                                   std::size_t dim,
                                                   double separation,
                                                   const Seed& seed,
                                                   absl::string_view split =
                                                       "train");

struct LogisticModel {
  Vector weights;
  double bias = 0.0;
};

double LogisticMargin(const LogisticModel& model, std::span<const double> x);

// Cross-entropy of a {0, 1} label under sigmoid(margin).
double LogisticLoss(const LogisticModel& model, std::span<const double> x,
                    int label);

struct LogisticGradient {
  Vector weights;
  double bias = 0.0;
};

LogisticGradient LogisticLossGradient(const LogisticModel& model,
                                      std::span<const double> x, int label);

double Accuracy(const LogisticModel& model, const SyntheticDataset& data);

struct TrainConfig {
  // Data.
  std::size_t n = 10000;  // training examples
  std::size_t dim = 2;
  double separation = 4.0;
  std::size_t holdout_n = 2000;

  // Sampling over records; a record is one microbatch of consecutive
  // examples. q applies to Poisson sampling, batch_size to the others.
  std::uint64_t rounds = 1000;
  SamplingPolicy policy = SamplingPolicy::kPoissonIID;
  double q = 0.01;
  std::uint64_t batch_size = 100;
  std::size_t microbatch_size = 1;

  // Gradient groups. kFlat clips (weights, bias) as one vector; the other
  // splits give one group per parameter tensor. With joint_gradients the
  // pair forms one Joint group with scales (joint_weight_scale,
  // joint_bias_scale) and clip bound joint_clip.
  double clip_total = 1.0;
  ClipSplit clip_split = ClipSplit::kPerLayer;
  bool joint_gradients = false;
  double joint_weight_scale = 1.0;
  double joint_bias_scale = 1.0;
  double joint_clip = 1.0;

  // Target z for the whole round, spread over the gradient groups and the
  // accuracy-metric group.
  double noise_multiplier = 1.1;
  AllocationStrategy allocation = AllocationStrategy::kProportional;

  double learning_rate = 0.5;
  Seed seed{};
  double delta = 1e-5;
  OrderGrid grid = OrderGrid::Default();
  AccountingOptions accounting;

  // Required for noise_multiplier == 0.
  bool insecure_test_mode = false;
};

// Per-round values that are NOT private. Only handed to the optional trace
// callback (tests and debugging); never stored in the report.
struct RoundTrace {
  std::uint64_t round_id = 0;
  double true_accuracy = 0.0;
  double private_accuracy = 0.0;
};

struct TrainReport {
  LogisticModel model;
  // Measured on a separate synthetic split. A test-harness measurement, not a
  // private release.
  double holdout_accuracy_nonprivate = 0.0;
  // Privatized per-round training accuracy.
  std::vector<double> private_accuracy;
  Ledger ledger;
  // Per-group noise on the sum, as recorded.
  std::vector<std::pair<std::string, PrivacyTuple>> group_tuples;
  std::optional<PrivacyGuarantee> guarantee;
  // Why no guarantee was produced, if it was not.
  std::string accounting_refusal;
  bool insecure = false;
};

absl::StatusOr<TrainReport> DpSgdTrain(
    const TrainConfig& cfg,
    const std::function<void(const RoundTrace&)>& trace = nullptr);

// JSON rendering of the report (model, metrics, guarantee). The ledger is
// written separately.
std::string ReportToJson(const TrainReport& report,
                         const std::string& ledger_path);

}  // namespace dpledger

#endif  // DPLEDGER_HARNESS_H_
