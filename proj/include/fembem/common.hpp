#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <mutex>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace fembem {

using Vec2 = Eigen::Vector2d;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

/// Thrown when a sampled outer boundary comes too close to the inner disk.
class DegenerateBoundaryError : public std::runtime_error {
 public:
  explicit DegenerateBoundaryError(const std::string& what) : std::runtime_error(what) {}
};

/// Thrown when a coupled system cannot be solved reliably.
class SingularSystemError : public std::runtime_error {
 public:
  explicit SingularSystemError(const std::string& what) : std::runtime_error(what) {}
};

namespace detail {
inline int& thread_cap() {
  static int cap = 0;  // 0 = use hardware concurrency
  return cap;
}
}  // namespace detail

inline void set_thread_count(int n) { detail::thread_cap() = n; }

inline int thread_count() {
  int cap = detail::thread_cap();
  if (cap > 0) return cap;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(i) for i in [0, n). Each index must write only to its own slots;
/// the partition into chunks is fixed, so results never depend on the worker
/// count.
inline void parallel_for(std::ptrdiff_t n, const std::function<void(std::ptrdiff_t)>& fn) {
  if (n <= 0) return;
  const int workers = std::min<std::ptrdiff_t>(thread_count(), n);
  if (workers <= 1) {
    for (std::ptrdiff_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::ptrdiff_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace fembem
