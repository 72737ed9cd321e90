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

#ifndef DPLEDGER_ACCOUNTANT_H_
#define DPLEDGER_ACCOUNTANT_H_

#include <cstdint>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "dpledger/ledger.h"

namespace dpledger {

// Ascending Renyi orders, all > 1.
class OrderGrid {
 public:
  static absl::StatusOr<OrderGrid> Create(std::vector<double> orders);

  // Integers 2..64 followed by 80, 96, 128, 256, 512.
  static OrderGrid Default();

  const std::vector<double>& orders() const { return orders_; }
  std::size_t size() const { return orders_.size(); }

  friend bool operator==(const OrderGrid&, const OrderGrid&) = default;

 private:
  explicit OrderGrid(std::vector<double> orders) : orders_(std::move(orders)) {}

  std::vector<double> orders_;
};

// RDP values aligned with `grid`. +infinity marks an order whose moment
// overflowed; such orders are skipped when converting to (epsilon, delta).
struct RdpProfile {
  OrderGrid grid;
  std::vector<double> values;
};

// Renyi DP of one step of the sampled Gaussian mechanism with sampling rate q
// and noise multiplier z, at a single order. Integer orders use the exact
// binomial expansion of E_{x~mu0}[(mu(x)/mu0(x))^order] with
// mu0 = N(0, z^2) and mu = (1-q) N(0, z^2) + q N(1, z^2), summed in log
// space; other orders integrate the same expectation numerically.
absl::StatusOr<double> SampledGaussianRdp(double q, double z, double order);

// SampledGaussianRdp at every order of the grid.
absl::StatusOr<RdpProfile> RdpStep(double q, double z, const OrderGrid& grid);

// Element-wise sum. An empty list gives the zero profile on `grid`; every
// profile must be on `grid`.
absl::StatusOr<RdpProfile> ComposeRdp(std::span<const RdpProfile> steps,
                                      const OrderGrid& grid);

struct PrivacyGuarantee {
  double epsilon = 0.0;  // +infinity if no order has a finite RDP
  double delta = 0.0;
  double achieving_order = 0.0;
  std::vector<std::string> caveats;
};

// epsilon = min over orders of RDP(order) + log(1/delta) / (order - 1).
// Attaches a caveat when the minimizer sits at either end of the grid.
absl::StatusOr<PrivacyGuarantee> EpsilonAtDelta(const RdpProfile& profile,
                                                double delta);

struct AccountingOptions {
  // Accept rounds with zero noise; the result is then +infinity.
  bool allow_insecure = false;
  // Account fixed-size sampling as Poisson sampling at q = b / n.
  bool allow_fixed_size = true;
};

// Post-hoc accounting: reduces the ledger to one (q, S*) query per round,
// composes rdp_step(q, 1 / S*) over rounds and converts at `delta`. Refuses
// (FailedPrecondition) on insecure rounds unless allowed and on rounds whose
// sampling policy has no supported analysis.
absl::StatusOr<PrivacyGuarantee> AccountLedger(
    const Ledger& ledger, double delta, const OrderGrid& grid,
    const AccountingOptions& options = {});

// Same as AccountLedger, starting from an already reduced ledger.
absl::StatusOr<PrivacyGuarantee> AccountFormalLedger(
    const FormalLedger& formal, double delta, const OrderGrid& grid,
    const AccountingOptions& options = {});

// epsilon after `rounds` identical steps: the step profile scaled by rounds.
absl::StatusOr<PrivacyGuarantee> EpsilonForSchedule(double q, double z,
                                                    std::uint64_t rounds,
                                                    double delta,
                                                    const OrderGrid& grid);

// Classical single-release Gaussian calibration:
// z = sqrt(2 ln(1.25 / delta)) / epsilon.
absl::StatusOr<double> BaselineNoiseMultiplier(double epsilon, double delta);

// With sampling rate q the baseline mechanism is (q * epsilon, q * delta)-DP.
absl::StatusOr<std::pair<double, double>> BaselineGuarantee(double q,
                                                            double epsilon,
                                                            double delta);

enum class CalibrationKnob { kSamplingRate, kNoiseMultiplier };

struct CalibrationRequest {
  double target_epsilon = 0.0;
  double delta = 0.0;
  std::uint64_t rounds = 0;
  CalibrationKnob knob = CalibrationKnob::kNoiseMultiplier;
  double fixed_q = 0.0;  // used when calibrating z
  double fixed_z = 0.0;  // used when calibrating q
  double lower = 0.0;
  double upper = 0.0;
  double tolerance = 1e-4;  // on epsilon
  OrderGrid grid = OrderGrid::Default();
  // The caller tuned parameters on private data. Only produces a warning; the
  // tuning itself is not charged.
  bool utility_from_private_data = false;
};

struct CalibrationResult {
  double value = 0.0;
  double epsilon = 0.0;
  int probes = 0;
  std::vector<std::string> warnings;
};

// Bisection on the knob (at most 60 steps). epsilon increases with q and
// decreases with z. Fails with OutOfRange, quoting epsilon at both bounds,
// when the target is not bracketed.
absl::StatusOr<CalibrationResult> Calibrate(const CalibrationRequest& request);

}  // namespace dpledger

#endif  // DPLEDGER_ACCOUNTANT_H_
