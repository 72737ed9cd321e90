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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero if any criterion fails.

#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "dpledger/accountant.h"
#include "dpledger/allocation.h"
#include "dpledger/harness.h"
#include "dpledger/ledger.h"
#include "dpledger/mechanisms.h"
#include "dpledger/secure_random.h"
#include "dpledger/vector_model.h"
#include "rdp_oracle.h"
#include "test_support.h"

namespace dpledger {
namespace {

using testing_support::CompositionEquivalenceError;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double RelErr(double a, double b) { return std::abs(a - b) / std::abs(b); }

std::string TempPath(const std::string& name) {
  const char* dir = std::getenv("TMPDIR");
  return absl::StrCat(dir != nullptr ? dir : "/tmp", "/dpledger_acceptance_",
                      name);
}

Outcome CompositionEquivalence() {
  double worst = 0;
  for (std::size_t groups : {1, 2, 5}) {
    for (std::size_t k : {1, 3}) {
      for (std::uint64_t trial = 0; trial < 50; ++trial) {
        worst = std::max(worst, CompositionEquivalenceError(trial, groups, k));
      }
    }
  }
  return {worst <= 1e-9, absl::StrFormat("max rel err %.3g", worst)};
}

Outcome JointClipNoiseScales() {
  GroupSpec spec{"g", {"w", "b"}, GroupMechanism::kJoint, 1, 0.01, {1, 100}};
  SecureStream noise(SeedFromInteger(4), "noise/joint", 0);
  const RoundContext ctx{0.01, 10000, 0};
  const std::size_t dims[] = {1000, 1000};
  double ss1 = 0, ss2 = 0;
  int count = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto est = JointGroupQuery({}, dims, spec, ctx, noise);
    if (!est.ok()) return {false, std::string(est.status().message())};
    for (double x : est->estimates[0]) ss1 += x * x;
    for (double x : est->estimates[1]) ss2 += x * x;
    count += 1000;
  }
  const double sd1 = std::sqrt(ss1 / count), sd2 = std::sqrt(ss2 / count);
  return {RelErr(sd1, 0.01) <= 0.02 && RelErr(sd2, 1.0) <= 0.02,
          absl::StrFormat("std %.5f and %.5f over %d draws each", sd1, sd2,
                          count)};
}

Outcome FlatAndPerLayerRecovery() {
  std::mt19937_64 gen(3);
  std::normal_distribution<double> normal(0, 3);
  const std::vector<std::size_t> dims = {3, 1, 4};
  const double clip = 1.7, sigma = 0.3;
  const RoundContext ctx{0.25, 40, 0};
  const double m = ctx.ExpectedCount();
  std::vector<std::vector<Vector>> records(9);
  for (auto& members : records) {
    for (std::size_t d : dims) {
      Vector v(d);
      for (double& x : v) x = normal(gen);
      members.push_back(v);
    }
  }

  GroupSpec flat_spec{"flat", {"a", "b", "c"}, GroupMechanism::kSeparate,
                      clip, sigma, {}};
  SecureStream flat_noise(SeedFromInteger(9), "noise/flat", 0);
  SecureStream flat_ref(SeedFromInteger(9), "noise/flat", 0);
  auto flat =
      SeparateGroupQuery(records, dims, flat_spec, ctx, flat_noise);
  if (!flat.ok()) return {false, std::string(flat.status().message())};
  Vector expected(8, 0.0);
  for (const auto& r : records) {
    const Vector c = *ClipToNorm(Concat(r), clip);
    for (std::size_t i = 0; i < 8; ++i) expected[i] += c[i];
  }
  for (double& x : expected) x = (x + m * sigma * flat_ref.NextStandardNormal()) / m;
  bool exact = Concat(flat->estimates) == expected;

  const double layer_clip = clip / std::sqrt(3.0);
  SecureStream layer_noise(SeedFromInteger(9), "noise/layer", 0);
  SecureStream layer_ref(SeedFromInteger(9), "noise/layer", 0);
  for (std::size_t j = 0; j < dims.size(); ++j) {
    GroupSpec spec{"layer", {"v"}, GroupMechanism::kSeparate, layer_clip,
                   sigma, {}};
    std::vector<std::vector<Vector>> single;
    for (const auto& r : records) single.push_back({r[j]});
    const std::size_t d[] = {dims[j]};
    auto est = SeparateGroupQuery(single, d, spec, ctx, layer_noise);
    if (!est.ok()) return {false, std::string(est.status().message())};
    Vector want(dims[j], 0.0);
    for (const auto& r : records) {
      const Vector c = *ClipToNorm(r[j], layer_clip);
      for (std::size_t i = 0; i < dims[j]; ++i) want[i] += c[i];
    }
    for (double& x : want) x = (x + m * sigma * layer_ref.NextStandardNormal()) / m;
    exact = exact && est->estimates[0] == want;
  }
  return {exact, exact ? "bit-identical" : "outputs differ"};
}

Outcome FullBatchExactness() {
  double worst = 0;
  for (double z : {0.5, 1.0, 2.0}) {
    for (int order = 2; order <= 64; ++order) {
      auto rdp = SampledGaussianRdp(1, z, order);
      if (!rdp.ok()) return {false, std::string(rdp.status().message())};
      worst = std::max(worst, RelErr(*rdp, order / (2 * z * z)));
    }
  }
  return {worst <= 1e-12, absl::StrFormat("max rel err %.3g", worst)};
}

Outcome OracleEquivalence() {
  double worst = 0;
  for (double q : {0.01, 0.1}) {
    for (double z : {0.8, 1.0, 2.0}) {
      for (int order = 2; order <= 64; ++order) {
        auto rdp = SampledGaussianRdp(q, z, order);
        if (!rdp.ok()) return {false, std::string(rdp.status().message())};
        worst = std::max(worst,
                         RelErr(*rdp, oracle::QuadratureRdp(q, z, order)));
      }
    }
  }
  return {worst <= 1e-6, absl::StrFormat("max rel err %.3g", worst)};
}

Outcome EndToEndDeterminism() {
  const OrderGrid grid = OrderGrid::Default();
  Ledger ledger;
  for (int t = 0; t < 1000; ++t) {
    auto h = ledger.RecordSample(0.01, 10000, SamplingPolicy::kPoissonIID);
    if (!h.ok() || !ledger.RecordSumQuery(*h, 1, 1.1, "g").ok() ||
        !ledger.CloseRound(*h).ok()) {
      return {false, "could not build ledger"};
    }
  }
  const std::string path = TempPath("e2e.ledger");
  if (!WriteLedgerFile(ledger, path).ok()) return {false, "write failed"};
  auto first = AccountLedger(ledger, 1e-5, grid);
  auto second = AccountLedger(ledger, 1e-5, grid);
  auto reread_ledger = ReadLedgerFile(path);
  if (!first.ok() || !second.ok() || !reread_ledger.ok()) {
    return {false, "accounting failed"};
  }
  auto reread = AccountLedger(*reread_ledger, 1e-5, grid);
  if (!reread.ok()) return {false, std::string(reread.status().message())};
  const double oracle =
      oracle::QuadratureEpsilon(0.01, 1.1, 1000, 1e-5, grid.orders());
  const double err = RelErr(first->epsilon, oracle);
  const bool same = first->epsilon == second->epsilon &&
                    first->epsilon == reread->epsilon;
  return {err <= 1e-4 && same,
          absl::StrFormat("eps %.10g, oracle %.10g, rel err %.3g, %s",
                          first->epsilon, oracle, err,
                          same ? "bit-identical" : "not reproducible")};
}

Outcome CalibrationSelfConsistency() {
  const OrderGrid grid = OrderGrid::Default();
  CalibrationRequest zreq;
  zreq.target_epsilon = 2;
  zreq.delta = 1e-5;
  zreq.rounds = 1000;
  zreq.knob = CalibrationKnob::kNoiseMultiplier;
  zreq.fixed_q = 0.01;
  zreq.lower = 0.3;
  zreq.upper = 50;
  CalibrationRequest qreq = zreq;
  qreq.knob = CalibrationKnob::kSamplingRate;
  qreq.fixed_z = 1.1;
  qreq.lower = 1e-6;
  qreq.upper = 1;
  auto z = Calibrate(zreq);
  auto q = Calibrate(qreq);
  if (!z.ok() || !q.ok()) return {false, "calibration failed"};
  const double ez = EpsilonForSchedule(0.01, z->value, 1000, 1e-5, grid)->epsilon;
  const double eq = EpsilonForSchedule(q->value, 1.1, 1000, 1e-5, grid)->epsilon;

  bool monotone = true;
  double prev = INFINITY;
  for (double zz = 0.4; zz <= 20; zz *= 1.3) {
    const double e = EpsilonForSchedule(0.01, zz, 1000, 1e-5, grid)->epsilon;
    monotone = monotone && e <= prev;
    prev = e;
  }
  prev = 0;
  for (double qq = 1e-4; qq <= 1; qq *= 1.5) {
    const double e = EpsilonForSchedule(qq, 1.1, 1000, 1e-5, grid)->epsilon;
    monotone = monotone && e >= prev;
    prev = e;
  }
  const bool hit = std::abs(ez - 2) <= 1e-3 && std::abs(eq - 2) <= 1e-3;
  return {hit && monotone,
          absl::StrFormat("z=%.6g gives eps %.6g; q=%.6g gives eps %.6g; %s",
                          z->value, ez, q->value, eq,
                          monotone ? "monotone" : "not monotone")};
}

Outcome AllocationConservation() {
  std::mt19937_64 gen(41);
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  double worst = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    std::vector<GroupBound> groups(1 + gen() % 10);
    for (auto& g : groups) {
      g.clip_S = std::exp(8 * unif(gen) - 4);
      g.dim = 1 + gen() % 100000;
    }
    const double target = std::exp(6 * unif(gen) - 3);
    for (auto strategy : {AllocationStrategy::kProportional,
                          AllocationStrategy::kDimensionalityAdjusted}) {
      auto sigmas = Allocate(AllocationRequest{target, groups, strategy});
      if (!sigmas.ok()) return {false, std::string(sigmas.status().message())};
      std::vector<PrivacyTuple> tuples;
      for (std::size_t g = 0; g < groups.size(); ++g) {
        tuples.push_back({groups[g].clip_S, (*sigmas)[g]});
      }
      worst = std::max(worst, RelErr(*EffectiveZ(tuples), target));
    }
  }
  return {worst <= 1e-12, absl::StrFormat("max rel err %.3g", worst)};
}

Outcome SamplerStatistics() {
  const auto mean = testing_support::PoissonMeanSize(10000, 0.01, 1000, 2);
  int bad = 0, total = 0;
  for (const auto& c : testing_support::FixedSizeSubsetFrequencies(3, 1, 30000, 6)) {
    bad += !c.ok();
    ++total;
  }
  for (const auto& c : testing_support::FixedSizeSubsetFrequencies(4, 2, 60000, 7)) {
    bad += !c.ok();
    ++total;
  }
  const bool disjoint = testing_support::PartitionBatchesDisjoint(10, 3, 500, 1) &&
                        testing_support::PartitionBatchesDisjoint(64, 8, 200, 2);
  return {mean.ok() && bad == 0 && disjoint,
          absl::StrFormat("mean size %.3f vs %.0f; %d/%d subset frequencies "
                          "outside 3 SE; partitions %s",
                          mean.observed, mean.expected, bad, total,
                          disjoint ? "disjoint" : "overlap")};
}

Outcome HarnessSanity() {
  TrainConfig test_mode;
  test_mode.separation = 8;
  test_mode.rounds = 200;
  test_mode.q = 1;
  test_mode.noise_multiplier = 0;
  test_mode.insecure_test_mode = true;
  test_mode.seed = SeedFromInteger(2);
  auto plain = DpSgdTrain(test_mode);
  if (!plain.ok()) return {false, std::string(plain.status().message())};

  TrainConfig cfg;
  cfg.seed = SeedFromInteger(6);
  auto run = DpSgdTrain(cfg);
  if (!run.ok()) return {false, std::string(run.status().message())};
  if (!run->guarantee.has_value()) return {false, run->accounting_refusal};
  const std::string path = TempPath("harness.ledger");
  if (!WriteLedgerFile(run->ledger, path).ok()) return {false, "write failed"};
  auto reread = ReadLedgerFile(path);
  if (!reread.ok()) return {false, std::string(reread.status().message())};
  auto recomputed = AccountLedger(*reread, cfg.delta, cfg.grid);
  if (!recomputed.ok()) return {false, std::string(recomputed.status().message())};
  const double eps = run->guarantee->epsilon;
  return {plain->holdout_accuracy_nonprivate >= 0.99 && std::isfinite(eps) &&
              recomputed->epsilon == eps,
          absl::StrFormat("test-mode accuracy %.4f; private eps %.10g, "
                          "ledger eps %.10g",
                          plain->holdout_accuracy_nonprivate, eps,
                          recomputed->epsilon)};
}

int RunCliBinary(const std::string& args) {
  const int status = std::system(
      absl::StrCat(DPLEDGER_CLI_PATH, " ", args, " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Outcome SeparationOfConcerns() {
  TrainConfig cfg;
  cfg.n = 2000;
  cfg.holdout_n = 1000;
  cfg.rounds = 100;
  cfg.q = 0.05;
  cfg.dim = 5;
  cfg.seed = SeedFromInteger(10);
  auto prop = DpSgdTrain(cfg);
  cfg.allocation = AllocationStrategy::kDimensionalityAdjusted;
  auto dim = DpSgdTrain(cfg);
  if (!prop.ok() || !dim.ok()) return {false, "training failed"};

  bool through_ledger = true;
  for (const TrainReport* r : {&*prop, &*dim}) {
    Ledger rebuilt;
    const auto& sample = std::get<SampleEvent>(r->ledger.entries().front());
    for (std::uint64_t t = 0; t < r->ledger.round_count(); ++t) {
      auto h = rebuilt.RecordSample(sample.q, sample.n, sample.policy);
      if (!h.ok()) return {false, "rebuild failed"};
      for (const auto& [name, tuple] : r->group_tuples) {
        if (!rebuilt.RecordSumQuery(*h, tuple.clip_S, tuple.sigma_sum, name).ok()) {
          return {false, "rebuild failed"};
        }
      }
      if (!rebuilt.CloseRound(*h).ok()) return {false, "rebuild failed"};
    }
    through_ledger = through_ledger &&
                     *SerializeLedger(rebuilt) == *SerializeLedger(r->ledger) &&
                     AccountLedger(rebuilt, cfg.delta, cfg.grid)->epsilon ==
                         r->guarantee->epsilon;
  }
  const bool tuples_differ = prop->group_tuples[0].second.sigma_sum !=
                             dim->group_tuples[0].second.sigma_sum;

  Ledger insecure;
  auto h = insecure.RecordSample(0.01, 10000, SamplingPolicy::kPoissonIID);
  if (!h.ok() || !insecure.RecordSumQuery(*h, 1, 0, "g").ok() ||
      !insecure.CloseRound(*h).ok()) {
    return {false, "could not build insecure ledger"};
  }
  const std::string path = TempPath("insecure.ledger");
  if (!WriteLedgerFile(insecure, path).ok()) return {false, "write failed"};
  const int code = RunCliBinary(absl::StrCat("account --delta 1e-5 --ledger ", path));
  return {through_ledger && tuples_differ && code != 0,
          absl::StrFormat("guarantee %s recorded tuples; insecure ledger "
                          "exit code %d",
                          through_ledger ? "determined by" : "NOT determined by",
                          code)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;  // 0 means no runtime bound
  std::function<Outcome()> run;
};

int Main() {
  const std::vector<Criterion> criteria = {
      {1, "composition equivalence", 5, CompositionEquivalence},
      {2, "joint clipping noise scales", 10, JointClipNoiseScales},
      {3, "flat and per-layer recovery", 0, FlatAndPerLayerRecovery},
      {4, "full-batch exactness", 0, FullBatchExactness},
      {5, "quadrature oracle equivalence", 60, OracleEquivalence},
      {6, "end-to-end accounting determinism", 0, EndToEndDeterminism},
      {7, "calibration self-consistency", 0, CalibrationSelfConsistency},
      {8, "allocation conservation", 0, AllocationConservation},
      {9, "sampler statistics", 0, SamplerStatistics},
      {10, "harness sanity", 60, HarnessSanity},
      {11, "separation of concerns", 0, SeparationOfConcerns},
  };
  int failures = 0;
  for (const Criterion& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    Outcome out = c.run();
    const double secs = std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - start)
                            .count();
    if (c.budget_seconds > 0 && secs >= c.budget_seconds) {
      out.pass = false;
      out.detail += absl::StrFormat("; over the %.0f s budget", c.budget_seconds);
    }
    failures += !out.pass;
    std::printf("criterion %2d %s: %s (%s) [%.2f s]\n", c.id, c.name,
                out.pass ? "PASS" : "FAIL", out.detail.c_str(), secs);
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n",
              static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}

}  // namespace
}  // namespace dpledger

int main() { return dpledger::Main(); }
