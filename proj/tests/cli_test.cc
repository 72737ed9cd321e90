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

#include <sys/wait.h>

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "gmock/gmock.h"
#include "gtest/gtest.h"
#include "absl/strings/numbers.h"
#include "absl/strings/str_split.h"
#include "dpledger/accountant.h"
#include "dpledger/ledger.h"
#include "json.hpp"

namespace dpledger {
namespace {

using ::testing::HasSubstr;

constexpr char kGoldenPath[] = DPLEDGER_TEST_DATA_DIR "/golden.ledger";

struct CliResult {
  int code = 0;
  std::string out;
  std::string err;
  // "key: value" lines of stdout; repeated keys keep the last value.
  std::map<std::string, std::string> fields;
};

CliResult RunCmd(std::vector<std::string> args) {
  args.insert(args.begin(), "dpledger");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  CliResult r;
  r.code = RunCli(static_cast<int>(argv.size()), argv.data(), out, err);
  r.out = out.str();
  r.err = err.str();
  for (absl::string_view line : absl::StrSplit(r.out, '\n')) {
    const auto colon = line.find(": ");
    if (colon == absl::string_view::npos) continue;
    r.fields[std::string(line.substr(0, colon))] =
        std::string(line.substr(colon + 2));
  }
  return r;
}

double Number(const CliResult& r, const std::string& key) {
  double v = NAN;
  auto it = r.fields.find(key);
  if (it != r.fields.end()) EXPECT_TRUE(absl::SimpleAtod(it->second, &v));
  return v;
}

std::string ReadAll(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string Temp(const std::string& name) {
  return ::testing::TempDir() + "/cli_test_" + name;
}

std::string WriteInsecureLedger() {
  Ledger ledger;
  auto h = *ledger.RecordSample(0.01, 100, SamplingPolicy::kPoissonIID);
  EXPECT_TRUE(ledger.RecordSumQuery(h, 1, 0, "g").ok());
  EXPECT_TRUE(ledger.CloseRound(h).ok());
  const std::string path = Temp("insecure.ledger");
  EXPECT_TRUE(WriteLedgerFile(ledger, path).ok());
  return path;
}

TEST(CliAccountTest, GoldenLedger) {
  auto r = RunCmd({"account", "--ledger", kGoldenPath, "--delta", "1e-5"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_THAT(r.out, HasSubstr("epsilon: 1.286299058547524\n"));
  EXPECT_EQ(r.fields["achieving_order"], "10");
  EXPECT_THAT(r.out, HasSubstr("caveat: round 3 has no sum queries"));
}

TEST(CliAccountTest, DeltaIsRequired) {
  auto r = RunCmd({"account", "--ledger", kGoldenPath});
  EXPECT_EQ(r.code, kExitUsage);
  EXPECT_THAT(r.err, HasSubstr("--delta"));
}

TEST(CliAccountTest, CustomOrders) {
  auto r = RunCmd({"account", "--ledger", kGoldenPath, "--delta", "1e-5",
                "--orders", "2,4,8,16"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const OrderGrid grid = *OrderGrid::Create({2, 4, 8, 16});
  EXPECT_EQ(Number(r, "epsilon"),
            AccountLedger(*ReadLedgerFile(kGoldenPath), 1e-5, grid)->epsilon);
  EXPECT_EQ(RunCmd({"account", "--ledger", kGoldenPath, "--delta", "1e-5",
                 "--orders", "4,2"})
                .code,
            kExitUsage);
}

TEST(CliAccountTest, InsecureLedgerIsRefused) {
  const std::string path = WriteInsecureLedger();
  auto r = RunCmd({"account", "--ledger", path, "--delta", "1e-5"});
  EXPECT_EQ(r.code, kExitRefused);
  EXPECT_THAT(r.err, HasSubstr("refused"));
  auto forced =
      RunCmd({"account", "--ledger", path, "--delta", "1e-5", "--allow-insecure"});
  EXPECT_EQ(forced.code, kExitOk);
  EXPECT_EQ(forced.fields["epsilon"], "inf");
}

TEST(CliAccountTest, DisjointLedgerIsRefused) {
  Ledger ledger;
  auto h = *ledger.RecordSample(0.01, 100, SamplingPolicy::kDisjointPartition);
  ASSERT_TRUE(ledger.RecordSumQuery(h, 1, 1, "g").ok());
  ASSERT_TRUE(ledger.CloseRound(h).ok());
  const std::string path = Temp("disjoint.ledger");
  ASSERT_TRUE(WriteLedgerFile(ledger, path).ok());
  auto r = RunCmd({"account", "--ledger", path, "--delta", "1e-5"});
  EXPECT_EQ(r.code, kExitRefused);
  EXPECT_THAT(r.err, HasSubstr("Unsupported"));
}

TEST(CliAccountTest, FixedSizeCanBeDisabled) {
  Ledger ledger;
  auto h = *ledger.RecordSample(0.01, 100, SamplingPolicy::kFixedSizeWOR);
  ASSERT_TRUE(ledger.RecordSumQuery(h, 1, 1, "g").ok());
  ASSERT_TRUE(ledger.CloseRound(h).ok());
  const std::string path = Temp("fixed.ledger");
  ASSERT_TRUE(WriteLedgerFile(ledger, path).ok());
  auto r = RunCmd({"account", "--ledger", path, "--delta", "1e-5"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_THAT(r.out, HasSubstr("caveat: fixed-size"));
  EXPECT_EQ(
      RunCmd({"account", "--ledger", path, "--delta", "1e-5", "--no-fixed-size"})
          .code,
      kExitRefused);
}

TEST(CliAccountTest, MalformedLedger) {
  const std::string path = Temp("bad.ledger");
  std::ofstream(path) << "dpledger-ledger v1\nsample 0 poisson 0x1p-1";
  auto r = RunCmd({"account", "--ledger", path, "--delta", "1e-5"});
  EXPECT_EQ(r.code, kExitError);
  EXPECT_THAT(r.err, HasSubstr("line 2, byte offset 19"));
  EXPECT_EQ(RunCmd({"account", "--ledger", path + ".missing", "--delta", "1e-5"})
                .code,
            kExitError);
}

TEST(CliCalibrateTest, NoiseMultiplier) {
  auto r = RunCmd({"calibrate", "--target-epsilon", "2", "--delta", "1e-5",
                "--rounds", "1000", "--knob", "z", "--q", "0.01"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const double z = Number(r, "noise_multiplier");
  const double eps =
      EpsilonForSchedule(0.01, z, 1000, 1e-5, OrderGrid::Default())->epsilon;
  EXPECT_LE(std::abs(eps - 2), 1e-3);
  EXPECT_EQ(Number(r, "epsilon"), eps);
}

TEST(CliCalibrateTest, SamplingRate) {
  auto r = RunCmd({"calibrate", "--target-epsilon", "2", "--delta", "1e-5",
                "--rounds", "1000", "--knob", "q", "--z", "1.1"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  const double q = Number(r, "sampling_rate");
  const double eps =
      EpsilonForSchedule(q, 1.1, 1000, 1e-5, OrderGrid::Default())->epsilon;
  EXPECT_LE(std::abs(eps - 2), 1e-3);
}

TEST(CliCalibrateTest, InfeasibleTarget) {
  auto r = RunCmd({"calibrate", "--target-epsilon", "1e-6", "--delta", "1e-5",
                "--rounds", "1000", "--knob", "z", "--q", "0.01"});
  EXPECT_EQ(r.code, kExitInfeasible);
  EXPECT_THAT(r.err, HasSubstr("infeasible"));
  EXPECT_THAT(r.err, HasSubstr("eps(lower="));
  EXPECT_THAT(r.err, HasSubstr("eps(upper="));
}

TEST(CliCalibrateTest, MissingFixedParameter) {
  auto r = RunCmd({"calibrate", "--target-epsilon", "2", "--delta", "1e-5",
                "--rounds", "1000", "--knob", "z"});
  EXPECT_NE(r.code, kExitOk);
  EXPECT_THAT(r.err, HasSubstr("--q"));
}

TEST(CliCalibrateTest, PrivateDataWarning) {
  auto r = RunCmd({"calibrate", "--target-epsilon", "2", "--delta", "1e-5",
                "--rounds", "1000", "--knob", "z", "--q", "0.01",
                "--utility-from-private-data"});
  EXPECT_EQ(r.code, kExitOk);
  EXPECT_THAT(r.err, HasSubstr("warning:"));
}

TEST(CliBaselineTest, ClosedForm) {
  auto r = RunCmd({"baseline", "--epsilon", "1", "--delta", "1e-5", "--q", "0.01"});
  ASSERT_EQ(r.code, kExitOk) << r.err;
  EXPECT_NEAR(Number(r, "noise_multiplier"), std::sqrt(2 * std::log(1.25e5)),
              1e-12);
  EXPECT_DOUBLE_EQ(Number(r, "subsampled_epsilon"), 0.01);
  EXPECT_DOUBLE_EQ(Number(r, "subsampled_delta"), 1e-7);
}

TEST(CliTrainTest, DeterministicAndAccountable) {
  const std::vector<std::string> common = {
      "train", "--seed", "17", "--delta", "1e-5", "--n", "2000",
      "--rounds", "200", "--q", "0.05"};
  auto args_a = common;
  args_a.insert(args_a.end(), {"--ledger-out", Temp("a.ledger"),
                               "--report-out", Temp("a.json")});
  auto args_b = common;
  args_b.insert(args_b.end(), {"--ledger-out", Temp("b.ledger"),
                               "--report-out", Temp("b.json")});
  auto a = RunCmd(args_a);
  auto b = RunCmd(args_b);
  ASSERT_EQ(a.code, kExitOk) << a.err;
  ASSERT_EQ(b.code, kExitOk) << b.err;
  EXPECT_EQ(ReadAll(Temp("a.ledger")), ReadAll(Temp("b.ledger")));
  auto ja = nlohmann::json::parse(ReadAll(Temp("a.json")));
  auto jb = nlohmann::json::parse(ReadAll(Temp("b.json")));
  ja.erase("ledger_path");
  jb.erase("ledger_path");
  EXPECT_EQ(ja, jb);

  auto account =
      RunCmd({"account", "--ledger", Temp("a.ledger"), "--delta", "1e-5"});
  ASSERT_EQ(account.code, kExitOk);
  EXPECT_EQ(account.fields["epsilon"], a.fields["epsilon"]);
  EXPECT_EQ(Number(account, "epsilon"), ja["guarantee"]["epsilon"].get<double>());
}

TEST(CliTrainTest, DisjointPolicyTrainsButIsRefused) {
  auto r = RunCmd({"train", "--seed", "3", "--delta", "1e-5", "--n", "1000",
                "--rounds", "20", "--policy", "disjoint", "--batch-size", "50",
                "--ledger-out", Temp("d.ledger"), "--report-out",
                Temp("d.json")});
  EXPECT_EQ(r.code, kExitRefused);
  EXPECT_THAT(r.err, HasSubstr("Unsupported"));
  EXPECT_EQ(ReadLedgerFile(Temp("d.ledger"))->round_count(), 20u);
}

TEST(CliTrainTest, ZeroNoiseNeedsTestMode) {
  const std::vector<std::string> base = {
      "train", "--seed", "3", "--delta", "1e-5", "--n", "200", "--rounds",
      "5", "--noise-multiplier", "0", "--ledger-out", Temp("z.ledger"),
      "--report-out", Temp("z.json")};
  EXPECT_EQ(RunCmd(base).code, kExitUsage);
  auto args = base;
  args.push_back("--insecure-test-mode");
  auto r = RunCmd(args);
  EXPECT_EQ(r.code, kExitRefused);
  EXPECT_EQ(RunCmd({"account", "--ledger", Temp("z.ledger"), "--delta", "1e-5"})
                .code,
            kExitRefused);
}

TEST(CliTest, UsageErrors) {
  EXPECT_EQ(RunCmd({}).code, kExitUsage);
  EXPECT_EQ(RunCmd({"frobnicate"}).code, kExitUsage);
  EXPECT_EQ(RunCmd({"account", "--delta", "x", "--ledger", kGoldenPath}).code,
            kExitUsage);
  EXPECT_EQ(RunCmd({"--help"}).code, kExitOk);
}

// The installed binary, run as a separate process.
int RunBinary(const std::string& args, std::string* out = nullptr) {
  const std::string cmd = std::string(DPLEDGER_CLI_PATH) + " " + args;
  std::FILE* pipe = ::popen(cmd.c_str(), "r");
  if (pipe == nullptr) return -1;
  std::string text;
  char buf[512];
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) text += buf;
  const int status = ::pclose(pipe);
  if (out != nullptr) *out = text;
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(CliBinaryTest, ExitCodes) {
  std::string out;
  EXPECT_EQ(RunBinary(std::string("account --delta 1e-5 --ledger ") + kGoldenPath,
                      &out),
            0);
  EXPECT_THAT(out, HasSubstr("epsilon: 1.286299058547524"));
  const std::string insecure = WriteInsecureLedger();
  EXPECT_EQ(RunBinary("account --delta 1e-5 --ledger " + insecure + " 2>/dev/null"),
            kExitRefused);
  EXPECT_EQ(RunBinary("account --ledger " + insecure + " 2>/dev/null"),
            kExitUsage);
}

TEST(CliBinaryTest, AllowInsecureFromEnvironment) {
  const std::string insecure = WriteInsecureLedger();
  std::string out;
  const std::string cmd = "account --delta 1e-5 --ledger " + insecure;
  ::setenv("DPLEDGER_ALLOW_INSECURE", "1", 1);
  const int code = RunBinary(cmd, &out);
  ::unsetenv("DPLEDGER_ALLOW_INSECURE");
  EXPECT_EQ(code, 0);
  EXPECT_THAT(out, HasSubstr("epsilon: inf"));
}

}  // namespace
}  // namespace dpledger
