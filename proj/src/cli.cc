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

#include "dpledger/cli.h"

#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/numbers.h"
#include "absl/strings/str_format.h"
#include "dpledger/accountant.h"
#include "dpledger/harness.h"
#include "dpledger/ledger.h"

namespace dpledger {
namespace {

absl::StatusOr<OrderGrid> GridFromFlag(const std::vector<double>& orders) {
  if (orders.empty()) return OrderGrid::Default();
  return OrderGrid::Create(orders);
}

absl::StatusOr<Seed> ParseSeed(const std::string& text) {
  if (text.size() == 2 * sizeof(Seed)) return SeedFromHex(text);
  std::uint64_t value = 0;
  if (absl::SimpleAtoi(text, &value)) return SeedFromInteger(value);
  return absl::InvalidArgumentError(
      "seed must be 32 hex digits or a decimal integer");
}

void PrintGuarantee(const PrivacyGuarantee& g, std::ostream& out) {
  out << absl::StrFormat("epsilon: %.17g\n", g.epsilon);
  out << absl::StrFormat("delta: %.17g\n", g.delta);
  out << absl::StrFormat("achieving_order: %g\n", g.achieving_order);
  for (const std::string& c : g.caveats) out << "caveat: " << c << "\n";
}

int ExitFor(const absl::Status& status) {
  if (absl::IsFailedPrecondition(status)) return kExitRefused;
  if (absl::IsOutOfRange(status)) return kExitInfeasible;
  return kExitError;
}

struct AccountFlags {
  std::string ledger;
  double delta = 0.0;
  std::vector<double> orders;
  bool allow_insecure = false;
  bool no_fixed_size = false;
};

int RunAccount(const AccountFlags& f, std::ostream& out, std::ostream& err) {
  absl::StatusOr<OrderGrid> grid = GridFromFlag(f.orders);
  if (!grid.ok()) {
    err << "error: " << grid.status().message() << "\n";
    return kExitUsage;
  }
  absl::StatusOr<Ledger> ledger = ReadLedgerFile(f.ledger);
  if (!ledger.ok()) {
    err << "error: " << ledger.status().message() << "\n";
    return kExitError;
  }
  AccountingOptions options;
  options.allow_insecure = f.allow_insecure;
  options.allow_fixed_size = !f.no_fixed_size;
  absl::StatusOr<PrivacyGuarantee> g =
      AccountLedger(*ledger, f.delta, *grid, options);
  if (!g.ok()) {
    err << (absl::IsFailedPrecondition(g.status()) ? "refused: " : "error: ")
        << g.status().message() << "\n";
    return ExitFor(g.status());
  }
  PrintGuarantee(*g, out);
  return kExitOk;
}

struct CalibrateFlags {
  double target_epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t rounds = 0;
  std::string knob = "z";
  double q = 0.0;
  double z = 0.0;
  std::optional<double> lower;
  std::optional<double> upper;
  double tolerance = 1e-4;
  std::vector<double> orders;
  bool private_tuning = false;
};

int RunCalibrate(const CalibrateFlags& f, std::ostream& out,
                 std::ostream& err) {
  CalibrationRequest req;
  req.target_epsilon = f.target_epsilon;
  req.delta = f.delta;
  req.rounds = f.rounds;
  req.tolerance = f.tolerance;
  req.utility_from_private_data = f.private_tuning;
  absl::StatusOr<OrderGrid> grid = GridFromFlag(f.orders);
  if (!grid.ok()) {
    err << "error: " << grid.status().message() << "\n";
    return kExitUsage;
  }
  req.grid = *grid;
  if (f.knob == "z") {
    if (!(f.q > 0.0)) {
      err << "error: --q is required when calibrating z\n";
      return kExitUsage;
    }
    req.knob = CalibrationKnob::kNoiseMultiplier;
    req.fixed_q = f.q;
    req.lower = f.lower.value_or(0.3);
    req.upper = f.upper.value_or(50.0);
  } else {
    if (!(f.z > 0.0)) {
      err << "error: --z is required when calibrating q\n";
      return kExitUsage;
    }
    req.knob = CalibrationKnob::kSamplingRate;
    req.fixed_z = f.z;
    req.lower = f.lower.value_or(1e-6);
    req.upper = f.upper.value_or(1.0);
  }
  absl::StatusOr<CalibrationResult> r = Calibrate(req);
  if (!r.ok()) {
    err << (absl::IsOutOfRange(r.status()) ? "infeasible: " : "error: ")
        << r.status().message() << "\n";
    return absl::IsOutOfRange(r.status()) ? kExitInfeasible : kExitError;
  }
  for (const std::string& w : r->warnings) err << "warning: " << w << "\n";
  out << absl::StrFormat("%s: %.17g\n",
                         f.knob == "z" ? "noise_multiplier" : "sampling_rate",
                         r->value);
  out << absl::StrFormat("epsilon: %.17g\n", r->epsilon);
  out << absl::StrFormat("probes: %d\n", r->probes);
  return kExitOk;
}

struct TrainFlags {
  TrainConfig cfg;
  std::string policy = "poisson";
  std::string clip_split = "per_layer";
  std::string allocation = "proportional";
  std::string seed;
  std::vector<double> orders;
  std::string ledger_out;
  std::string report_out;
  bool allow_insecure = false;
  bool no_fixed_size = false;
};

int RunTrain(TrainFlags f, std::ostream& out, std::ostream& err) {
  TrainConfig& cfg = f.cfg;
  static const std::map<std::string, ClipSplit> kSplits = {
      {"flat", ClipSplit::kFlat},
      {"per_layer", ClipSplit::kPerLayer},
      {"dim_fraction", ClipSplit::kDimFraction},
      {"dim_fraction_literal", ClipSplit::kDimFractionLiteral}};
  absl::StatusOr<SamplingPolicy> policy = PolicyFromTag(f.policy);
  if (!policy.ok()) {
    err << "error: " << policy.status().message() << "\n";
    return kExitUsage;
  }
  cfg.policy = *policy;
  cfg.clip_split = kSplits.at(f.clip_split);
  cfg.allocation = f.allocation == "dim_adjusted"
                       ? AllocationStrategy::kDimensionalityAdjusted
                       : AllocationStrategy::kProportional;
  if (f.seed.empty()) {
    cfg.seed = SeedFromOsEntropy();
  } else {
    absl::StatusOr<Seed> seed = ParseSeed(f.seed);
    if (!seed.ok()) {
      err << "error: " << seed.status().message() << "\n";
      return kExitUsage;
    }
    cfg.seed = *seed;
  }
  absl::StatusOr<OrderGrid> grid = GridFromFlag(f.orders);
  if (!grid.ok()) {
    err << "error: " << grid.status().message() << "\n";
    return kExitUsage;
  }
  cfg.grid = *grid;
  cfg.accounting.allow_insecure = f.allow_insecure;
  cfg.accounting.allow_fixed_size = !f.no_fixed_size;

  absl::StatusOr<TrainReport> report = DpSgdTrain(cfg);
  if (!report.ok()) {
    err << "error: " << report.status().message() << "\n";
    return ExitFor(report.status()) == kExitRefused ? kExitUsage : kExitError;
  }
  if (absl::Status s = WriteLedgerFile(report->ledger, f.ledger_out); !s.ok()) {
    err << "error: " << s.message() << "\n";
    return kExitError;
  }
  {
    std::ofstream rep(f.report_out, std::ios::binary | std::ios::trunc);
    rep << ReportToJson(*report, f.ledger_out);
    if (!rep.flush()) {
      err << "error: cannot write " << f.report_out << "\n";
      return kExitError;
    }
  }
  out << absl::StrFormat("rounds: %d\n", cfg.rounds);
  out << absl::StrFormat("holdout_accuracy_nonprivate: %.6f\n",
                         report->holdout_accuracy_nonprivate);
  if (!report->private_accuracy.empty()) {
    out << absl::StrFormat("final_private_accuracy: %.6f\n",
                           report->private_accuracy.back());
  }
  out << "ledger: " << f.ledger_out << "\n";
  out << "report: " << f.report_out << "\n";
  if (report->guarantee) {
    PrintGuarantee(*report->guarantee, out);
    return kExitOk;
  }
  err << "refused: " << report->accounting_refusal << "\n";
  return kExitRefused;
}

struct BaselineFlags {
  double epsilon = 0.0;
  double delta = 0.0;
  std::optional<double> q;
};

int RunBaseline(const BaselineFlags& f, std::ostream& out, std::ostream& err) {
  absl::StatusOr<double> z = BaselineNoiseMultiplier(f.epsilon, f.delta);
  if (!z.ok()) {
    err << "error: " << z.status().message() << "\n";
    return kExitUsage;
  }
  out << absl::StrFormat("noise_multiplier: %.17g\n", *z);
  if (f.q) {
    auto g = BaselineGuarantee(*f.q, f.epsilon, f.delta);
    if (!g.ok()) {
      err << "error: " << g.status().message() << "\n";
      return kExitUsage;
    }
    out << absl::StrFormat("subsampled_epsilon: %.17g\n", g->first);
    out << absl::StrFormat("subsampled_delta: %.17g\n", g->second);
  }
  return kExitOk;
}

}  // namespace

int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"dpledger: ledger-based DP accounting and a DP-SGD harness"};
  app.require_subcommand(1);

  AccountFlags account;
  CLI::App* account_cmd =
      app.add_subcommand("account", "Compute (epsilon, delta) from a ledger");
  account_cmd->add_option("--ledger", account.ledger, "Ledger file")
      ->required();
  account_cmd->add_option("--delta", account.delta, "Target delta")->required();
  account_cmd->add_option("--orders", account.orders, "Comma-separated orders")
      ->delimiter(',');
  account_cmd
      ->add_flag("--allow-insecure", account.allow_insecure,
                 "Account zero-noise rounds (result is infinite)")
      ->envname("DPLEDGER_ALLOW_INSECURE");
  account_cmd->add_flag("--no-fixed-size", account.no_fixed_size,
                        "Refuse fixed-size sampling rounds");

  CalibrateFlags calibrate;
  CLI::App* calibrate_cmd = app.add_subcommand(
      "calibrate", "Binary-search z or q to hit a target epsilon");
  calibrate_cmd->add_option("--target-epsilon", calibrate.target_epsilon)
      ->required();
  calibrate_cmd->add_option("--delta", calibrate.delta)->required();
  calibrate_cmd->add_option("--rounds", calibrate.rounds)->required();
  calibrate_cmd->add_option("--knob", calibrate.knob, "z or q")
      ->check(CLI::IsMember({"z", "q"}));
  calibrate_cmd->add_option("--q", calibrate.q, "Fixed sampling rate");
  calibrate_cmd->add_option("--z", calibrate.z, "Fixed noise multiplier");
  calibrate_cmd->add_option("--lower", calibrate.lower, "Lower bound");
  calibrate_cmd->add_option("--upper", calibrate.upper, "Upper bound");
  calibrate_cmd->add_option("--tolerance", calibrate.tolerance,
                            "Allowed |epsilon - target|");
  calibrate_cmd->add_option("--orders", calibrate.orders)->delimiter(',');
  calibrate_cmd->add_flag("--utility-from-private-data",
                          calibrate.private_tuning,
                          "Fixed parameters were tuned on private data");

  BaselineFlags baseline;
  CLI::App* baseline_cmd = app.add_subcommand(
      "baseline", "Single-shot Gaussian noise multiplier for (epsilon, delta)");
  baseline_cmd->add_option("--epsilon", baseline.epsilon)->required();
  baseline_cmd->add_option("--delta", baseline.delta)->required();
  baseline_cmd->add_option("--q", baseline.q, "Sampling rate");

  TrainFlags train;
  TrainConfig& cfg = train.cfg;
  CLI::App* train_cmd =
      app.add_subcommand("train", "DP-SGD on synthetic logistic regression");
  train_cmd->add_option("--n", cfg.n, "Training examples")->capture_default_str();
  train_cmd->add_option("--dim", cfg.dim, "Feature dimension")->capture_default_str();
  train_cmd->add_option("--separation", cfg.separation, "Cluster distance")->capture_default_str();
  train_cmd->add_option("--holdout-n", cfg.holdout_n, "Held-out examples")->capture_default_str();
  train_cmd->add_option("--rounds", cfg.rounds, "Training rounds")->capture_default_str();
  train_cmd->add_option("--policy", train.policy, "poisson|fixed_size|disjoint")->capture_default_str()
      ->check(CLI::IsMember({"poisson", "fixed_size", "disjoint"}));
  train_cmd->add_option("--q", cfg.q, "Poisson sampling rate")->capture_default_str();
  train_cmd->add_option("--batch-size", cfg.batch_size,
                        "Records per batch (fixed_size, disjoint)")->capture_default_str();
  train_cmd->add_option("--microbatch-size", cfg.microbatch_size,
                        "Examples per record")->capture_default_str();
  train_cmd->add_option("--clip", cfg.clip_total, "Total gradient clip bound")->capture_default_str();
  train_cmd->add_option("--clip-split", train.clip_split, "")->capture_default_str()
      ->check(CLI::IsMember(
          {"flat", "per_layer", "dim_fraction", "dim_fraction_literal"}));
  train_cmd->add_flag("--joint-gradients", cfg.joint_gradients,
                      "Joint clipping of (weights, bias)");
  train_cmd->add_option("--joint-weight-scale", cfg.joint_weight_scale, "")->capture_default_str();
  train_cmd->add_option("--joint-bias-scale", cfg.joint_bias_scale, "")->capture_default_str();
  train_cmd->add_option("--joint-clip", cfg.joint_clip, "")->capture_default_str();
  train_cmd->add_option("--noise-multiplier", cfg.noise_multiplier,
                        "Target z per round")->capture_default_str();
  train_cmd->add_option("--allocation", train.allocation, "")->capture_default_str()
      ->check(CLI::IsMember({"proportional", "dim_adjusted"}));
  train_cmd->add_option("--learning-rate", cfg.learning_rate, "")->capture_default_str();
  train_cmd->add_option("--seed", train.seed,
                        "32 hex digits or an integer; default: OS entropy");
  train_cmd->add_option("--delta", cfg.delta, "Target delta")->required();
  train_cmd->add_option("--orders", train.orders)->delimiter(',');
  train_cmd->add_option("--ledger-out", train.ledger_out)->required();
  train_cmd->add_option("--report-out", train.report_out)->required();
  train_cmd->add_flag("--insecure-test-mode", cfg.insecure_test_mode,
                      "Permit zero noise (output is not private)");
  train_cmd
      ->add_flag("--allow-insecure", train.allow_insecure,
                 "Account zero-noise rounds (result is infinite)")
      ->envname("DPLEDGER_ALLOW_INSECURE");
  train_cmd->add_flag("--no-fixed-size", train.no_fixed_size,
                      "Refuse to account fixed-size sampling");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  }

  if (*account_cmd) return RunAccount(account, out, err);
  if (*calibrate_cmd) return RunCalibrate(calibrate, out, err);
  if (*baseline_cmd) return RunBaseline(baseline, out, err);
  return RunTrain(train, out, err);
}

}  // namespace dpledger
