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

#include "dpledger/accountant.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <map>
#include <numbers>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "boost/math/quadrature/gauss_kronrod.hpp"
#include "dpledger/status_macros.h"

namespace dpledger {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr int kMaxBisections = 60;

bool IsIntegerOrder(double order) {
  return order == std::floor(order) && order <= 1e6;
}

double LogAddExp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double LogBinomial(double n, double k) {
  return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
}

// log A for integer order: log sum_k C(order,k) (1-q)^(order-k) q^k
// exp(k(k-1) / (2 z^2)).
double LogMomentBinomial(double q, double z, int order) {
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  const double inv_2z2 = 1.0 / (2.0 * z * z);
  std::vector<double> terms;
  terms.reserve(order + 1);
  double max_term = -kInf;
  for (int k = 0; k <= order; ++k) {
    double t = LogBinomial(order, k);
    if (k > 0) t += k * log_q;
    if (order - k > 0) t += (order - k) * log_1mq;
    t += static_cast<double>(k) * (k - 1) * inv_2z2;
    terms.push_back(t);
    if (!std::isnan(t)) max_term = std::max(max_term, t);
  }
  if (!std::isfinite(max_term)) return max_term;
  double sum = 0.0;
  for (double t : terms) sum += std::exp(t - max_term);
  return max_term + std::log(sum);
}

// log A for an arbitrary order by integrating exp(f(x) - f_max), where f is
// the log of mu0(x) (mu(x)/mu0(x))^order.
double LogMomentQuadrature(double q, double z, double order) {
  const double z2 = z * z;
  const double log_norm = std::log(z * std::sqrt(2.0 * std::numbers::pi));
  const double log_q = std::log(q);
  const double log_1mq = std::log1p(-q);
  auto log_integrand = [&](double x) {
    const double log_ratio = LogAddExp(log_1mq, log_q + (2.0 * x - 1.0) / (2.0 * z2));
    return -x * x / (2.0 * z2) - log_norm + order * log_ratio;
  };
  // Mass concentrates near 0 and near x = order, each with width ~ z.
  const double lo = -20.0 * z - 1.0;
  const double hi = order + 20.0 * z + 1.0;
  const double step = z / 8.0;
  double f_max = -kInf;
  for (double x = lo; x <= hi; x += step) f_max = std::max(f_max, log_integrand(x));
  if (!std::isfinite(f_max)) return f_max;

  // Trim to where the integrand is within e^-80 of its peak.
  double a = lo;
  while (a < hi && log_integrand(a) < f_max - 80.0) a += step;
  double b = hi;
  while (b > a && log_integrand(b) < f_max - 80.0) b -= step;
  a -= step;
  b += step;

  auto integrand = [&](double x) { return std::exp(log_integrand(x) - f_max); };
  const double piece = std::max(z, 1e-3);
  double total = 0.0;
  for (double left = a; left < b; left += piece) {
    const double right = std::min(b, left + piece);
    total += boost::math::quadrature::gauss_kronrod<double, 31>::integrate(
        integrand, left, right, 15, 1e-13);
  }
  return f_max + std::log(total);
}

absl::Status CheckDelta(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("delta must be in (0, 1), got ", delta));
  }
  return absl::OkStatus();
}

struct BitKey {
  std::uint64_t q;
  std::uint64_t z;
  auto operator<=>(const BitKey&) const = default;
};

std::uint64_t Bits(double x) {
  std::uint64_t b;
  std::memcpy(&b, &x, sizeof(b));
  return b;
}

}  // namespace

absl::StatusOr<OrderGrid> OrderGrid::Create(std::vector<double> orders) {
  if (orders.empty()) {
    return absl::InvalidArgumentError("order grid is empty");
  }
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!(orders[i] > 1.0) || !std::isfinite(orders[i])) {
      return absl::InvalidArgumentError(
          absl::StrCat("orders must be finite and > 1, got ", orders[i]));
    }
    if (i > 0 && !(orders[i] > orders[i - 1])) {
      return absl::InvalidArgumentError("orders must be strictly ascending");
    }
  }
  return OrderGrid(std::move(orders));
}

OrderGrid OrderGrid::Default() {
  std::vector<double> orders;
  for (int i = 2; i <= 64; ++i) orders.push_back(i);
  for (double extra : {80.0, 96.0, 128.0, 256.0, 512.0}) orders.push_back(extra);
  return OrderGrid(std::move(orders));
}

absl::StatusOr<double> SampledGaussianRdp(double q, double z, double order) {
  if (!(q >= 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampling rate must be in [0, 1], got ", q));
  }
  if (!(z > 0.0) || std::isnan(z)) {
    return absl::InvalidArgumentError(
        absl::StrCat("noise multiplier must be positive, got ", z));
  }
  if (!(order > 1.0) || !std::isfinite(order)) {
    return absl::InvalidArgumentError(
        absl::StrCat("order must be finite and > 1, got ", order));
  }
  if (q == 0.0) return 0.0;
  double log_moment;
  if (IsIntegerOrder(order)) {
    log_moment = LogMomentBinomial(q, z, static_cast<int>(order));
  } else if (q == 1.0) {
    // Unsubsampled Gaussian: closed form at every order.
    log_moment = order * (order - 1.0) / (2.0 * z * z);
  } else {
    log_moment = LogMomentQuadrature(q, z, order);
  }
  const double rdp = log_moment / (order - 1.0);
  if (!std::isfinite(rdp)) return kInf;
  return std::max(rdp, 0.0);
}

absl::StatusOr<RdpProfile> RdpStep(double q, double z, const OrderGrid& grid) {
  RdpProfile profile{grid, {}};
  profile.values.reserve(grid.size());
  for (double order : grid.orders()) {
    DPL_ASSIGN_OR_RETURN(double v, SampledGaussianRdp(q, z, order));
    profile.values.push_back(v);
  }
  return profile;
}

absl::StatusOr<RdpProfile> ComposeRdp(std::span<const RdpProfile> steps,
                                      const OrderGrid& grid) {
  RdpProfile total{grid, std::vector<double>(grid.size(), 0.0)};
  for (std::size_t s = 0; s < steps.size(); ++s) {
    if (!(steps[s].grid == grid) || steps[s].values.size() != grid.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("ComposeRdp: step ", s, " uses a different order grid"));
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      total.values[i] += steps[s].values[i];
    }
  }
  return total;
}

absl::StatusOr<PrivacyGuarantee> EpsilonAtDelta(const RdpProfile& profile,
                                                double delta) {
  DPL_RETURN_IF_ERROR(CheckDelta(delta));
  const auto& orders = profile.grid.orders();
  if (profile.values.empty() || profile.values.size() != orders.size()) {
    return absl::InvalidArgumentError(
        "EpsilonAtDelta: profile is empty or misaligned with its grid");
  }
  const double log_inv_delta = -std::log(delta);
  PrivacyGuarantee g;
  g.delta = delta;
  g.epsilon = kInf;
  std::size_t best = orders.size();
  for (std::size_t i = 0; i < orders.size(); ++i) {
    if (!std::isfinite(profile.values[i])) continue;
    const double eps = profile.values[i] + log_inv_delta / (orders[i] - 1.0);
    if (eps < g.epsilon) {
      g.epsilon = eps;
      best = i;
    }
  }
  if (best == orders.size()) {
    g.achieving_order = std::numeric_limits<double>::quiet_NaN();
    g.caveats.push_back("RDP is infinite at every order");
    return g;
  }
  g.achieving_order = orders[best];
  if (best == 0 || best + 1 == orders.size()) {
    g.caveats.push_back(absl::StrFormat(
        "optimal order %g is at the edge of the grid; the grid may be too "
        "narrow",
        orders[best]));
  }
  return g;
}

absl::StatusOr<PrivacyGuarantee> AccountFormalLedger(
    const FormalLedger& formal, double delta, const OrderGrid& grid,
    const AccountingOptions& options) {
  DPL_RETURN_IF_ERROR(CheckDelta(delta));
  std::vector<std::string> caveats = formal.warnings;
  bool fixed_size_noted = false;
  std::map<BitKey, RdpProfile> cache;
  std::vector<RdpProfile> steps;
  steps.reserve(formal.rounds.size());
  for (const FormalRound& round : formal.rounds) {
    if (!round.support.supported) {
      return absl::FailedPreconditionError(
          absl::StrCat("round ", round.round_id, " used '",
                       PolicyTag(round.policy),
                       "' sampling: Unsupported (", round.support.reason, ")"));
    }
    if (round.support.fixed_size_caveat) {
      if (!options.allow_fixed_size) {
        return absl::FailedPreconditionError(absl::StrCat(
            "round ", round.round_id,
            " used fixed-size sampling and fixed-size accounting is disabled"));
      }
      if (!fixed_size_noted) {
        caveats.push_back(round.support.reason);
        fixed_size_noted = true;
      }
    }
    if (round.insecure) {
      if (!options.allow_insecure) {
        return absl::FailedPreconditionError(absl::StrCat(
            "round ", round.round_id, " is insecure (zero noise)"));
      }
      steps.push_back(RdpProfile{grid, std::vector<double>(grid.size(), kInf)});
      continue;
    }
    const BitKey key{Bits(round.support.q_equivalent),
                     Bits(round.query.z_effective)};
    auto it = cache.find(key);
    if (it == cache.end()) {
      DPL_ASSIGN_OR_RETURN(
          RdpProfile p,
          RdpStep(round.support.q_equivalent, round.query.z_effective, grid));
      it = cache.emplace(key, std::move(p)).first;
    }
    steps.push_back(it->second);
  }
  if (formal.non_private) {
    caveats.push_back("ledger contains insecure rounds; result is not private");
  }
  DPL_ASSIGN_OR_RETURN(RdpProfile total, ComposeRdp(steps, grid));
  DPL_ASSIGN_OR_RETURN(PrivacyGuarantee g, EpsilonAtDelta(total, delta));
  caveats.insert(caveats.end(), g.caveats.begin(), g.caveats.end());
  g.caveats = std::move(caveats);
  return g;
}

absl::StatusOr<PrivacyGuarantee> AccountLedger(
    const Ledger& ledger, double delta, const OrderGrid& grid,
    const AccountingOptions& options) {
  DPL_RETURN_IF_ERROR(CheckDelta(delta));
  DPL_ASSIGN_OR_RETURN(FormalLedger formal,
                       ToFormalLedger(ledger, options.allow_insecure));
  return AccountFormalLedger(formal, delta, grid, options);
}

absl::StatusOr<PrivacyGuarantee> EpsilonForSchedule(double q, double z,
                                                    std::uint64_t rounds,
                                                    double delta,
                                                    const OrderGrid& grid) {
  DPL_ASSIGN_OR_RETURN(RdpProfile step, RdpStep(q, z, grid));
  for (double& v : step.values) v *= static_cast<double>(rounds);
  return EpsilonAtDelta(step, delta);
}

absl::StatusOr<double> BaselineNoiseMultiplier(double epsilon, double delta) {
  if (!(epsilon > 0.0) || !std::isfinite(epsilon)) {
    return absl::InvalidArgumentError(
        absl::StrCat("epsilon must be positive, got ", epsilon));
  }
  DPL_RETURN_IF_ERROR(CheckDelta(delta));
  return std::sqrt(2.0 * std::log(1.25 / delta)) / epsilon;
}

absl::StatusOr<std::pair<double, double>> BaselineGuarantee(double q,
                                                            double epsilon,
                                                            double delta) {
  if (!(q > 0.0 && q <= 1.0)) {
    return absl::InvalidArgumentError(
        absl::StrCat("sampling rate must be in (0, 1], got ", q));
  }
  DPL_ASSIGN_OR_RETURN(double z, BaselineNoiseMultiplier(epsilon, delta));
  (void)z;
  return std::make_pair(q * epsilon, q * delta);
}

absl::StatusOr<CalibrationResult> Calibrate(const CalibrationRequest& request) {
  DPL_RETURN_IF_ERROR(CheckDelta(request.delta));
  if (!(request.target_epsilon > 0.0) || !std::isfinite(request.target_epsilon)) {
    return absl::InvalidArgumentError("target epsilon must be positive");
  }
  if (request.rounds == 0) {
    return absl::InvalidArgumentError("rounds must be positive");
  }
  if (!(request.tolerance > 0.0)) {
    return absl::InvalidArgumentError("tolerance must be positive");
  }
  if (!(request.lower > 0.0) || !(request.upper > request.lower)) {
    return absl::InvalidArgumentError(
        absl::StrCat("bounds must satisfy 0 < lower < upper, got [",
                     request.lower, ", ", request.upper, "]"));
  }
  const bool knob_is_q = request.knob == CalibrationKnob::kSamplingRate;
  if (knob_is_q && request.upper > 1.0) {
    return absl::InvalidArgumentError("sampling rate upper bound exceeds 1");
  }

  CalibrationResult result;
  if (request.utility_from_private_data) {
    result.warnings.push_back(
        "parameters were tuned on private data; that tuning is not included "
        "in this guarantee");
  }
  auto epsilon_at = [&](double value) -> absl::StatusOr<double> {
    ++result.probes;
    const double q = knob_is_q ? value : request.fixed_q;
    const double z = knob_is_q ? request.fixed_z : value;
    DPL_ASSIGN_OR_RETURN(PrivacyGuarantee g,
                         EpsilonForSchedule(q, z, request.rounds,
                                            request.delta, request.grid));
    return g.epsilon;
  };

  DPL_ASSIGN_OR_RETURN(double eps_lower, epsilon_at(request.lower));
  DPL_ASSIGN_OR_RETURN(double eps_upper, epsilon_at(request.upper));
  // Epsilon rises with q and falls with z.
  const bool increasing = knob_is_q;
  if (increasing ? eps_lower > eps_upper : eps_lower < eps_upper) {
    return absl::FailedPreconditionError(absl::StrFormat(
        "epsilon is not monotone over the bounds: eps(%g) = %.6g, "
        "eps(%g) = %.6g",
        request.lower, eps_lower, request.upper, eps_upper));
  }
  const double target = request.target_epsilon;
  if (std::abs(eps_lower - target) <= request.tolerance) {
    result.value = request.lower;
    result.epsilon = eps_lower;
    return result;
  }
  if (std::abs(eps_upper - target) <= request.tolerance) {
    result.value = request.upper;
    result.epsilon = eps_upper;
    return result;
  }
  const double eps_min = std::min(eps_lower, eps_upper);
  const double eps_max = std::max(eps_lower, eps_upper);
  if (target < eps_min || target > eps_max) {
    return absl::OutOfRangeError(absl::StrFormat(
        "target epsilon %.6g is not bracketed: eps(lower=%g) = %.6g, "
        "eps(upper=%g) = %.6g",
        target, request.lower, eps_lower, request.upper, eps_upper));
  }

  double lo = request.lower;
  double hi = request.upper;
  for (int i = 0; i < kMaxBisections; ++i) {
    const double mid = 0.5 * (lo + hi);
    DPL_ASSIGN_OR_RETURN(double eps_mid, epsilon_at(mid));
    if (std::abs(eps_mid - target) <= request.tolerance) {
      result.value = mid;
      result.epsilon = eps_mid;
      return result;
    }
    // Move the end that lies on the same side of the target as mid.
    if ((eps_mid < target) == increasing) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return absl::InternalError(absl::StrFormat(
      "calibration did not reach tolerance %g within %d bisections "
      "(bracket [%g, %g])",
      request.tolerance, kMaxBisections, lo, hi));
}

}  // namespace dpledger
