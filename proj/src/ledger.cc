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

#include "dpledger/ledger.h"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "dpledger/status_macros.h"

namespace dpledger {
namespace {

constexpr absl::string_view kHeader = "dpledger-ledger v1";

std::string HexFloat(double x) { return absl::StrFormat("%a", x); }

bool ValidGroupName(absl::string_view name) {
  if (name.empty()) return false;
  for (char c : name) {
    if (c <= ' ' || c == 0x7f) return false;
  }
  return true;
}

absl::Status ValidateSample(double q, std::uint64_t n) {
  if (!(q > 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampling probability must be in (0, 1], got ", q));
  }
  if (n == 0) return absl::InvalidArgumentError("database size must be > 0");
  return absl::OkStatus();
}

absl::Status ValidateQuery(double clip_S, double sigma_sum,
                           absl::string_view group_name) {
  if (!(clip_S > 0.0) || !std::isfinite(clip_S)) {
    return absl::InvalidArgumentError(
        absl::StrCat("clip bound must be positive and finite, got ", clip_S));
  }
  if (!(sigma_sum >= 0.0) || !std::isfinite(sigma_sum)) {
    return absl::InvalidArgumentError(
        absl::StrCat("noise sigma must be finite and >= 0, got ", sigma_sum));
  }
  if (!ValidGroupName(group_name)) {
    return absl::InvalidArgumentError(absl::StrCat(
        "group name '", group_name, "' is empty or contains whitespace"));
  }
  return absl::OkStatus();
}

// Parsers accept only the canonical spelling the serializer produces, so a
// successful parse always re-serializes to the same bytes.
absl::StatusOr<double> ParseHexFloat(absl::string_view token) {
  std::string s(token);
  char* end = nullptr;
  const double x = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size() || HexFloat(x) != s) {
    return absl::InvalidArgumentError(
        absl::StrCat("'", token, "' is not a canonical hex float"));
  }
  return x;
}

absl::StatusOr<std::uint64_t> ParseUint(absl::string_view token) {
  std::uint64_t v = 0;
  if (!absl::SimpleAtoi(token, &v) || absl::StrCat(v) != token) {
    return absl::InvalidArgumentError(
        absl::StrCat("'", token, "' is not a canonical unsigned integer"));
  }
  return v;
}

}  // namespace

absl::StatusOr<Ledger::RoundHandle> Ledger::RecordSample(
    double q, std::uint64_t n, SamplingPolicy policy) {
  if (open_round_.has_value()) {
    return absl::FailedPreconditionError(absl::StrCat(
        "RecordSample: round ", *open_round_, " is still open"));
  }
  DPL_RETURN_IF_ERROR(ValidateSample(q, n));
  const std::uint64_t id = next_round_++;
  entries_.emplace_back(SampleEvent{id, policy, q, n});
  open_round_ = id;
  return RoundHandle{id};
}

absl::Status Ledger::RecordSumQuery(RoundHandle round, double clip_S,
                                    double sigma_sum,
                                    absl::string_view group_name) {
  if (!open_round_.has_value() || *open_round_ != round.round_id) {
    return absl::FailedPreconditionError(absl::StrCat(
        "RecordSumQuery: round ", round.round_id, " is not open"));
  }
  DPL_RETURN_IF_ERROR(ValidateQuery(clip_S, sigma_sum, group_name));
  entries_.emplace_back(SumQueryEvent{round.round_id, std::string(group_name),
                                      clip_S, sigma_sum});
  if (sigma_sum == 0.0) insecure_rounds_.insert(round.round_id);
  return absl::OkStatus();
}

absl::Status Ledger::CloseRound(RoundHandle round) {
  if (!open_round_.has_value() || *open_round_ != round.round_id) {
    return absl::FailedPreconditionError(
        absl::StrCat("CloseRound: round ", round.round_id, " is not open"));
  }
  open_round_.reset();
  return absl::OkStatus();
}

absl::StatusOr<std::string> SerializeLedger(const Ledger& ledger) {
  if (ledger.has_open_round()) {
    return absl::FailedPreconditionError(
        "cannot serialize a ledger with an open round");
  }
  std::string out = absl::StrCat(kHeader, "\n");
  for (const LedgerEntry& entry : ledger.entries()) {
    if (const auto* s = std::get_if<SampleEvent>(&entry)) {
      absl::StrAppend(&out, "sample ", s->round_id, " ", PolicyTag(s->policy),
                      " ", HexFloat(s->q), " ", s->n, "\n");
    } else {
      const auto& e = std::get<SumQueryEvent>(entry);
      absl::StrAppend(&out, "query ", e.round_id, " ", HexFloat(e.clip_S), " ",
                      HexFloat(e.sigma_sum), " ", e.group_name, "\n");
    }
  }
  return out;
}

absl::StatusOr<Ledger> DeserializeLedger(absl::string_view text) {
  Ledger ledger;
  std::size_t offset = 0;
  std::size_t line_no = 0;
  auto fail = [&](absl::string_view what) {
    return absl::InvalidArgumentError(absl::StrCat(
        "ledger parse error at line ", line_no, ", byte offset ", offset, ": ",
        what));
  };
  while (offset < text.size()) {
    ++line_no;
    const std::size_t nl = text.find('\n', offset);
    if (nl == absl::string_view::npos) {
      return fail("unterminated line (truncated file?)");
    }
    const absl::string_view line = text.substr(offset, nl - offset);
    std::vector<absl::string_view> fields = absl::StrSplit(line, ' ');
    if (line_no == 1) {
      if (line != kHeader) return fail("missing or unknown header");
      offset = nl + 1;
      continue;
    }
    if (fields[0] == "sample") {
      if (fields.size() != 5) return fail("sample line needs 4 fields");
      auto id = ParseUint(fields[1]);
      auto policy = PolicyFromTag(fields[2]);
      auto q = ParseHexFloat(fields[3]);
      auto n = ParseUint(fields[4]);
      for (const absl::Status& s :
           {id.status(), policy.status(), q.status(), n.status()}) {
        if (!s.ok()) return fail(s.message());
      }
      if (*id != ledger.next_round_) {
        return fail(absl::StrCat("expected round ", ledger.next_round_,
                                 ", found ", *id));
      }
      if (ledger.open_round_) ledger.open_round_.reset();
      auto handle = ledger.RecordSample(*q, *n, *policy);
      if (!handle.ok()) return fail(handle.status().message());
    } else if (fields[0] == "query") {
      if (fields.size() != 5) return fail("query line needs 4 fields");
      auto id = ParseUint(fields[1]);
      auto clip = ParseHexFloat(fields[2]);
      auto sigma = ParseHexFloat(fields[3]);
      for (const absl::Status& s : {id.status(), clip.status(), sigma.status()}) {
        if (!s.ok()) return fail(s.message());
      }
      if (!ledger.open_round_ || *ledger.open_round_ != *id) {
        return fail(absl::StrCat("query for round ", *id,
                                 " outside that round"));
      }
      absl::Status s = ledger.RecordSumQuery(Ledger::RoundHandle{*id}, *clip,
                                             *sigma, fields[4]);
      if (!s.ok()) return fail(s.message());
    } else {
      return fail(absl::StrCat("unknown event type '", fields[0], "'"));
    }
    offset = nl + 1;
  }
  if (line_no == 0) {
    ++line_no;
    return fail("empty input, missing header");
  }
  ledger.open_round_.reset();
  return ledger;
}

absl::Status WriteLedgerFile(const Ledger& ledger, const std::string& path) {
  DPL_ASSIGN_OR_RETURN(std::string text, SerializeLedger(ledger));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot open ", path));
  out << text;
  if (!out.flush()) {
    return absl::UnavailableError(absl::StrCat("write failed: ", path));
  }
  return absl::OkStatus();
}

absl::StatusOr<Ledger> ReadLedgerFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot open ", path));
  std::ostringstream buf;
  buf << in.rdbuf();
  return DeserializeLedger(buf.str());
}

absl::StatusOr<FormalLedger> ToFormalLedger(const Ledger& ledger,
                                            bool allow_insecure) {
  if (ledger.has_open_round()) {
    return absl::FailedPreconditionError("ledger has an open round");
  }
  if (!ledger.insecure_rounds().empty() && !allow_insecure) {
    return absl::FailedPreconditionError(absl::StrCat(
        "ledger contains ", ledger.insecure_rounds().size(),
        " insecure (zero-noise) round(s), first is round ",
        *ledger.insecure_rounds().begin(), "; refusing to account"));
  }
  FormalLedger formal;
  const auto& entries = ledger.entries();
  std::size_t i = 0;
  while (i < entries.size()) {
    const auto& sample = std::get<SampleEvent>(entries[i]);
    ++i;
    std::vector<PrivacyTuple> tuples;
    while (i < entries.size() &&
           std::holds_alternative<SumQueryEvent>(entries[i])) {
      const auto& e = std::get<SumQueryEvent>(entries[i]);
      tuples.push_back(PrivacyTuple{e.clip_S, e.sigma_sum});
      ++i;
    }
    if (tuples.empty()) {
      formal.warnings.push_back(absl::StrCat(
          "round ", sample.round_id, " has no sum queries and was dropped"));
      continue;
    }
    FormalRound round;
    round.round_id = sample.round_id;
    round.policy = sample.policy;
    round.q = sample.q;
    round.n = sample.n;
    round.support = AccountingSupportFor(sample.policy, sample.q);
    round.insecure = ledger.insecure_rounds().contains(sample.round_id);
    if (round.insecure) {
      round.query = EffectiveQuery{INFINITY, 1.0, 0.0};
      formal.non_private = true;
    } else {
      DPL_ASSIGN_OR_RETURN(round.query, RoundCompose(tuples));
    }
    formal.rounds.push_back(round);
  }
  return formal;
}

}  // namespace dpledger
