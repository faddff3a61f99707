// Copyright 2026 The Caliper Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef CALIPER_COMMON_HPP_
#define CALIPER_COMMON_HPP_

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace caliper {

// Error taxonomy. Everything user-facing funnels through Error so the CLI
// can map domain failures to exit code 1 and usage problems to exit code 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Remote transport failed after exhausting retries.
class TransportError : public Error {
 public:
  TransportError(const std::string& what, int last_status)
      : Error(what), last_status_(last_status) {}
  int last_status() const { return last_status_; }

 private:
  int last_status_;
};

// Non-retryable request rejection (4xx other than 429).
class RequestError : public Error {
 public:
  RequestError(const std::string& what, int status)
      : Error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public Error {
 public:
  using Error::Error;
};

class TemplateError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class PreconditionError : public Error {
 public:
  using Error::Error;
};

// A metric asked for on input that cannot support it (too few tokens,
// degenerate marginals).
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

// FNV-1a, 64-bit. The seed-derivation scheme for campaign work units is
// pinned to this exact function so independent implementations can
// reproduce per-session seeds.
constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

inline std::uint64_t fnv1a64(std::string_view bytes,
                             std::uint64_t state = kFnvOffset) {
  for (unsigned char c : bytes) {
    state ^= c;
    state *= kFnvPrime;
  }
  return state;
}

// splitmix64 finalizer; used to decorrelate derived seeds.
inline std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix64(std::uint64_t a, std::uint64_t b) {
  return mix64(a ^ mix64(b));
}

// Minimal deterministic generator (xorshift-star family). We avoid std
// distributions on hot deterministic paths; the raw stream is identical on
// every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(mix64(seed ^ 0xda3e39cb94b95bdbULL)) {}

  std::uint64_t next_u64() {
    state_ = mix64(state_);
    return state_;
  }

  // Uniform in [0, 1).
  double next_double() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n).
  std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

  // Uniform in [lo, hi).
  double next_in(double lo, double hi) {
    return lo + (hi - lo) * next_double();
  }

 private:
  std::uint64_t state_;
};

// Injected clock so retry, rate-limit, and timestamp logic is testable and
// replayable without wall time.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::uint64_t now_ms() = 0;
  virtual void sleep_ms(std::uint64_t ms) = 0;
};

class SystemClock : public Clock {
 public:
  std::uint64_t now_ms() override;
  void sleep_ms(std::uint64_t ms) override;
};

// Simulated clock: sleeping advances time instantly. now_ms starts at the
// given epoch, so pipelines driven by a SimClock emit reproducible
// timestamps.
class SimClock : public Clock {
 public:
  explicit SimClock(std::uint64_t epoch_ms = 0) : now_(epoch_ms) {}
  std::uint64_t now_ms() override { return now_; }
  void sleep_ms(std::uint64_t ms) override { now_ += ms; }

 private:
  std::uint64_t now_;
};

std::shared_ptr<Clock> system_clock();

// "1970-01-01T00:00:00Z"-style rendering of a millisecond epoch.
std::string iso8601_utc(std::uint64_t epoch_ms);

// Whitespace tokenization; consecutive separators collapse.
std::vector<std::string> split_ws(std::string_view text);

std::string join(const std::vector<std::string>& parts,
                 std::string_view sep);

bool starts_with(std::string_view s, std::string_view prefix);

}  // namespace caliper

#endif  // CALIPER_COMMON_HPP_
