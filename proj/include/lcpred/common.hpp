// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace lcpred {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller broke a documented precondition (bad tau, empty input, ...).
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// Input data or a persisted document failed validation. The CLI maps this to
/// exit code 2.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A persisted document carries a version this build does not understand.
class VersionError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A regressor could not be fitted.
class FitError : public Error {
 public:
  using Error::Error;
};

/// Raised by the SVR solver when the update budget runs out; carries the
/// KKT residual reached at that point.
class SolverLimitError : public FitError {
 public:
  SolverLimitError(const std::string& what, double residual)
      : FitError(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// Derives an independent 64-bit seed from a base seed and a stream path, so
/// that e.g. candidate 17 of the CV search at tau 5 gets its own generator no
/// matter which thread evaluates it.
inline std::uint64_t derive_seed(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::vector<std::uint32_t> words;
  words.reserve(2 + 2 * path.size());
  words.push_back(static_cast<std::uint32_t>(seed));
  words.push_back(static_cast<std::uint32_t>(seed >> 32));
  for (std::uint64_t p : path) {
    words.push_back(static_cast<std::uint32_t>(p));
    words.push_back(static_cast<std::uint32_t>(p >> 32));
  }
  std::seed_seq seq(words.begin(), words.end());
  std::array<std::uint32_t, 2> out{};
  seq.generate(out.begin(), out.end());
  return (static_cast<std::uint64_t>(out[1]) << 32) | out[0];
}

inline std::mt19937_64 make_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path = {}) {
  return std::mt19937_64(derive_seed(seed, path));
}

/// FNV-1a, used for dataset checksums and for turning ids into seed streams.
inline std::uint64_t fnv1a(std::string_view bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace lcpred
