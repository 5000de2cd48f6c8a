#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstring>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace csilab {

using VecR = Eigen::VectorXd;
using MatR = Eigen::MatrixXd;
using VecC = Eigen::VectorXcd;
using MatC = Eigen::MatrixXcd;
using Vec2 = Eigen::Vector2d;
using cplx = std::complex<double>;

inline constexpr double kPi = std::numbers::pi;

/// Raised when a channel path collapses to zero length (co-located endpoints).
struct DegenerateGeometryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised for inputs that make an operation ill-defined (e.g. quantizing h = 0).
struct DegenerateInputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Raised when a linear-algebra step cannot proceed (rank deficiency with no ridge).
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Configuration rejected; carries every issue found, not just the first.
struct ConfigError : std::runtime_error {
  std::vector<std::string> issues;
  explicit ConfigError(std::vector<std::string> problems)
      : std::runtime_error(join(problems)), issues(std::move(problems)) {}
  explicit ConfigError(const std::string& one)
      : ConfigError(std::vector<std::string>{one}) {}

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "config error:";
    for (const auto& p : v) s += "\n  - " + p;
    return s;
  }
};

/// Persistence failure: corrupt file, version mismatch, missing field.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Optimization left the finite regime; the trace up to the failure is attached.
struct TrainingDivergedError : std::runtime_error {
  std::vector<double> loss_trace;
  TrainingDivergedError(const std::string& msg, std::vector<double> trace)
      : std::runtime_error(msg), loss_trace(std::move(trace)) {}
};

/// Wraps an angle into [-pi, pi).
inline double wrap_angle(double a) {
  double w = std::fmod(a + kPi, 2.0 * kPi);
  if (w < 0) w += 2.0 * kPi;
  return w - kPi;
}

/// Bearing of `to` as seen from `from`, in world coordinates.
inline double bearing(const Vec2& from, const Vec2& to) {
  return std::atan2(to.y() - from.y(), to.x() - from.x());
}

/// FNV-1a over raw bytes; used for record and config hashes.
inline std::uint64_t fnv1a(const void* data, std::size_t len,
                           std::uint64_t h = 0xcbf29ce484222325ULL) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t fnv1a(const std::string& s, std::uint64_t h = 0xcbf29ce484222325ULL) {
  return fnv1a(s.data(), s.size(), h);
}

inline std::uint64_t hash_doubles(const double* xs, std::size_t n,
                                  std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (std::size_t i = 0; i < n; ++i) {
    std::uint64_t bits;
    static_assert(sizeof(bits) == sizeof(double));
    std::memcpy(&bits, &xs[i], sizeof(bits));
    h = fnv1a(&bits, sizeof(bits), h);
  }
  return h;
}

/// Runs fn(i) for i in [0, n) across up to `threads` workers. Each index is
/// independent; callers that accumulate must write to index-addressed slots and
/// reduce afterwards in a fixed order so results do not depend on `threads`.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const unsigned workers = std::min<std::size_t>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace csilab
