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

#ifndef DPLEDGER_SECURE_RANDOM_H_
#define DPLEDGER_SECURE_RANDOM_H_

#include <array>
#include <cstdint>
#include <string>

#include "absl/status/statusor.h"
#include "absl/strings/string_view.h"

namespace dpledger {

// 128-bit seed for the keyed generator.
using Seed = std::array<std::uint8_t, 16>;

// Fresh seed from the operating system's secure entropy source.
Seed SeedFromOsEntropy();

// Expands a small integer into a seed. Meant for reproducible experiments;
// the resulting stream is only as secret as the integer.
Seed SeedFromInteger(std::uint64_t value);

// 32 lowercase hex digits.
std::string SeedToHex(const Seed& seed);
absl::StatusOr<Seed> SeedFromHex(absl::string_view hex);

// Source of i.i.d. standard normal draws. Mechanisms consume noise through
// this interface so tests can replay one stream through different mechanism
// arrangements.
class NoiseSource {
 public:
  virtual ~NoiseSource() = default;
  virtual double NextStandardNormal() = 0;
};

// ChaCha20 keystream keyed by BLAKE2b(seed; purpose, index). Distinct
// (purpose, index) pairs give independent streams; the same triple gives the
// same stream on every platform. Not thread-safe; use one instance per
// consumer.
class SecureStream final : public NoiseSource {
 public:
  SecureStream(const Seed& seed, absl::string_view purpose, std::uint64_t index);

  SecureStream(const SecureStream&) = delete;
  SecureStream& operator=(const SecureStream&) = delete;
  ~SecureStream() override;

  std::uint64_t NextU64();

  // Uniform on [0, 1) with 53 random bits.
  double NextUniform();

  // Uniform integer in [0, bound) by rejection; bound must be positive.
  std::uint64_t NextBelow(std::uint64_t bound);

  // Box-Muller; the second variate of each pair is cached.
  double NextStandardNormal() override;

 private:
  void Refill();

  static constexpr std::size_t kBufferBytes = 4096;

  std::array<std::uint8_t, 32> key_{};
  std::uint64_t block_counter_ = 0;
  std::array<std::uint8_t, kBufferBytes> buffer_{};
  std::size_t buffer_pos_ = kBufferBytes;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace dpledger

#endif  // DPLEDGER_SECURE_RANDOM_H_
