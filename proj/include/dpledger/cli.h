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

#ifndef DPLEDGER_CLI_H_
#define DPLEDGER_CLI_H_

#include <ostream>

namespace dpledger {

// Exit codes of the command-line tool.
enum CliExit : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitRefused = 2,     // accountant refused (insecure round, unsupported policy)
  kExitInfeasible = 3,  // calibration target not bracketed
  kExitError = 4,       // I/O, parse and other failures
};

// Entry point shared by the `dpledger` binary and the tests. Subcommands:
// account, calibrate, baseline, train.
int RunCli(int argc, const char* const* argv, std::ostream& out,
           std::ostream& err);

}  // namespace dpledger

#endif  // DPLEDGER_CLI_H_
