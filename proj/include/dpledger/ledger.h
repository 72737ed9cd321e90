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

#ifndef DPLEDGER_LEDGER_H_
#define DPLEDGER_LEDGER_H_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"
#include "dpledger/mechanisms.h"
#include "dpledger/sampling.h"

namespace dpledger {

// A sample R was drawn from n records at rate q. Opens a round.
struct SampleEvent {
  std::uint64_t round_id = 0;
  SamplingPolicy policy = SamplingPolicy::kPoissonIID;
  double q = 0.0;
  std::uint64_t n = 0;

  friend bool operator==(const SampleEvent&, const SampleEvent&) = default;
};

// A Gaussian sum query with privacy tuple (clip_S, sigma_sum) ran on the
// current round's sample.
struct SumQueryEvent {
  std::uint64_t round_id = 0;
  std::string group_name;
  double clip_S = 0.0;
  double sigma_sum = 0.0;

  friend bool operator==(const SumQueryEvent&, const SumQueryEvent&) = default;
};

using LedgerEntry = std::variant<SampleEvent, SumQueryEvent>;

// Append-only record of privacy-relevant events. Entries are never modified
// or reordered once appended. Single writer; copy the ledger to snapshot it.
class Ledger {
 public:
  struct RoundHandle {
    std::uint64_t round_id = 0;
  };

  // Opens round 0, 1, 2, ... in order. Fails if a round is still open.
  absl::StatusOr<RoundHandle> RecordSample(double q, std::uint64_t n,
                                           SamplingPolicy policy);

  // A zero sigma_sum is recorded but marks the round insecure.
  absl::Status RecordSumQuery(RoundHandle round, double clip_S,
                              double sigma_sum, absl::string_view group_name);

  absl::Status CloseRound(RoundHandle round);

  bool has_open_round() const { return open_round_.has_value(); }
  std::uint64_t round_count() const { return next_round_; }
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  // Rounds containing a zero-noise query.
  const std::set<std::uint64_t>& insecure_rounds() const {
    return insecure_rounds_;
  }

 private:
  friend absl::StatusOr<Ledger> DeserializeLedger(absl::string_view text);

  std::vector<LedgerEntry> entries_;
  std::set<std::uint64_t> insecure_rounds_;
  std::optional<std::uint64_t> open_round_;
  std::uint64_t next_round_ = 0;
};

// Line format, one event per line, every line newline-terminated:
//
//   dpledger-ledger v1
//   sample <round_id> <policy_tag> <q as hex float> <n>
//   query <round_id> <clip_S as hex float> <sigma_sum as hex float> <group>
//
// A sample line implicitly closes the previous round. Hex floats make the
// round trip exact. Serializing a ledger with an open round fails.
absl::StatusOr<std::string> SerializeLedger(const Ledger& ledger);

// Parses the format above. Errors name the line and byte offset; no partial
// ledger is returned.
absl::StatusOr<Ledger> DeserializeLedger(absl::string_view text);

absl::Status WriteLedgerFile(const Ledger& ledger, const std::string& path);
absl::StatusOr<Ledger> ReadLedgerFile(const std::string& path);

// One round reduced to a single Gaussian sum query with noise sigma = 1.
struct FormalRound {
  std::uint64_t round_id = 0;
  SamplingPolicy policy = SamplingPolicy::kPoissonIID;
  double q = 0.0;
  std::uint64_t n = 0;
  // For an insecure round (only with allow_insecure) s_star is +inf and
  // z_effective is 0.
  EffectiveQuery query;
  bool insecure = false;
  AccountingSupport support;
};

struct FormalLedger {
  std::vector<FormalRound> rounds;
  std::vector<std::string> warnings;
  // True if any insecure round was let through.
  bool non_private = false;
};

// Reduces each round's sum-query events to (q, S*, sigma = 1). Rounds without
// sum queries are dropped with a warning. Insecure rounds are refused unless
// `allow_insecure` is set.
absl::StatusOr<FormalLedger> ToFormalLedger(const Ledger& ledger,
                                            bool allow_insecure = false);

}  // namespace dpledger

#endif  // DPLEDGER_LEDGER_H_
