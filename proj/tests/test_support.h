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

#ifndef DPLEDGER_TESTS_TEST_SUPPORT_H_
#define DPLEDGER_TESTS_TEST_SUPPORT_H_

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "dpledger/secure_random.h"

namespace dpledger::testing_support {

// Records every draw from an underlying stream so a second consumer can see
// the identical sequence after Rewind().
class ReplayNoise final : public NoiseSource {
 public:
  ReplayNoise(const Seed& seed, std::uint64_t index)
      : stream_(seed, "noise/replay", index) {}

  double NextStandardNormal() override {
    if (pos_ == draws_.size()) draws_.push_back(stream_.NextStandardNormal());
    return draws_[pos_++];
  }
  void Rewind() { pos_ = 0; }
  std::size_t consumed() const { return pos_; }

 private:
  SecureStream stream_;
  std::vector<double> draws_;
  std::size_t pos_ = 0;
};

// Runs G random group queries (each group has k members, a random mix of
// separate and joint mechanisms) against a replayed stream, then recomputes
// every output from one sigma = 1 Gaussian sum over the concatenation of the
// per-group clipped vectors divided by their noise scale. Returns the largest
// norm-relative discrepancy over all member estimates.
double CompositionEquivalenceError(std::uint64_t trial, std::size_t groups,
                                   std::size_t k);

struct StatCheck {
  double observed = 0.0;
  double expected = 0.0;
  double tolerance = 0.0;
  bool ok() const { return std::abs(observed - expected) <= tolerance; }
};

// Mean Poisson sample size over `trials` rounds against n * q, with a
// tolerance of 3 standard errors.
StatCheck PoissonMeanSize(std::uint64_t n, double q, int trials,
                          std::uint64_t seed);

// Frequency of every b-subset of [0, n) over `trials` fixed-size samples,
// each against 1 / C(n, b) at 3 standard errors. Subsets are enumerated in
// lexicographic order.
std::vector<StatCheck> FixedSizeSubsetFrequencies(std::uint64_t n,
                                                  std::uint64_t b, int trials,
                                                  std::uint64_t seed);

// True if every epoch's batches are pairwise disjoint, have size b and
// together hold b * floor(n / b) distinct indices.
bool PartitionBatchesDisjoint(std::uint64_t n, std::uint64_t b, int epochs,
                              std::uint64_t seed);

}  // namespace dpledger::testing_support

#endif  // DPLEDGER_TESTS_TEST_SUPPORT_H_
