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

#include "dpledger/secure_random.h"

#include <sodium.h>

#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>

#include "absl/strings/str_cat.h"

namespace dpledger {
namespace {

void EnsureSodium() {
  static const bool initialized = [] {
    if (sodium_init() < 0) {
      throw std::runtime_error("libsodium initialization failed");
    }
    return true;
  }();
  (void)initialized;
}

int HexValue(char c) {
  if (c >= '0' && c <= '9') return c - '0';
  if (c >= 'a' && c <= 'f') return c - 'a' + 10;
  if (c >= 'A' && c <= 'F') return c - 'A' + 10;
  return -1;
}

}  // namespace

Seed SeedFromOsEntropy() {
  EnsureSodium();
  Seed seed;
  randombytes_buf(seed.data(), seed.size());
  return seed;
}

Seed SeedFromInteger(std::uint64_t value) {
  Seed seed{};
  for (int i = 0; i < 8; ++i) {
    seed[i] = static_cast<std::uint8_t>(value >> (8 * i));
  }
  return seed;
}

std::string SeedToHex(const Seed& seed) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string out;
  for (std::uint8_t b : seed) {
    out.push_back(kDigits[b >> 4]);
    out.push_back(kDigits[b & 0xf]);
  }
  return out;
}

absl::StatusOr<Seed> SeedFromHex(absl::string_view hex) {
  if (hex.size() != 2 * sizeof(Seed)) {
    return absl::InvalidArgumentError(
        absl::StrCat("seed must be 32 hex digits, got ", hex.size()));
  }
  Seed seed;
  for (std::size_t i = 0; i < seed.size(); ++i) {
    const int hi = HexValue(hex[2 * i]);
    const int lo = HexValue(hex[2 * i + 1]);
    if (hi < 0 || lo < 0) {
      return absl::InvalidArgumentError("seed contains a non-hex digit");
    }
    seed[i] = static_cast<std::uint8_t>(hi * 16 + lo);
  }
  return seed;
}

SecureStream::SecureStream(const Seed& seed, absl::string_view purpose,
                           std::uint64_t index) {
  EnsureSodium();
  crypto_generichash_state state;
  crypto_generichash_init(&state, seed.data(), seed.size(), key_.size());
  crypto_generichash_update(
      &state, reinterpret_cast<const unsigned char*>(purpose.data()),
      purpose.size());
  std::uint8_t tail[9];
  tail[0] = 0;  // separator; purpose labels never contain NUL
  for (int i = 0; i < 8; ++i) {
    tail[1 + i] = static_cast<std::uint8_t>(index >> (8 * i));
  }
  crypto_generichash_update(&state, tail, sizeof(tail));
  crypto_generichash_final(&state, key_.data(), key_.size());
}

SecureStream::~SecureStream() {
  sodium_memzero(key_.data(), key_.size());
  sodium_memzero(buffer_.data(), buffer_.size());
}

void SecureStream::Refill() {
  static constexpr std::uint8_t kNonce[crypto_stream_chacha20_NONCEBYTES] = {};
  std::memset(buffer_.data(), 0, buffer_.size());
  crypto_stream_chacha20_xor_ic(buffer_.data(), buffer_.data(), buffer_.size(),
                                kNonce, block_counter_, key_.data());
  block_counter_ += kBufferBytes / 64;
  buffer_pos_ = 0;
}

std::uint64_t SecureStream::NextU64() {
  if (buffer_pos_ + 8 > kBufferBytes) Refill();
  std::uint64_t value = 0;
  for (int i = 0; i < 8; ++i) {
    value |= static_cast<std::uint64_t>(buffer_[buffer_pos_ + i]) << (8 * i);
  }
  buffer_pos_ += 8;
  return value;
}

double SecureStream::NextUniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

std::uint64_t SecureStream::NextBelow(std::uint64_t bound) {
  if (bound == 0) throw std::invalid_argument("NextBelow: bound must be > 0");
  // Reject the incomplete top segment so every residue is equally likely.
  const std::uint64_t limit = -bound % bound;  // 2^64 mod bound
  while (true) {
    const std::uint64_t r = NextU64();
    if (r >= limit) return r % bound;
  }
}

double SecureStream::NextStandardNormal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  const double u1 = 1.0 - NextUniform();  // (0, 1]
  const double u2 = NextUniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_normal_ = radius * std::sin(angle);
  has_spare_normal_ = true;
  return radius * std::cos(angle);
}

}  // namespace dpledger
