#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace treeprox {

using idx = std::int64_t;

/// Invalid configuration or incompatible inputs (maps to CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Malformed input file. Carries a 1-based line number when known (0 otherwise).
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, std::size_t line = 0)
      : std::runtime_error(line ? msg + " (line " + std::to_string(line) + ")" : msg),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

/// Persisted document with an unsupported or missing schema version.
class SchemaError : public std::runtime_error {
 public:
  explicit SchemaError(const std::string& msg) : std::runtime_error(msg) {}
};

inline void check(bool cond, const std::string& msg) {
  if (!cond) throw std::invalid_argument(msg);
}

/// Resolve a thread-count request: 0 means "use hardware concurrency".
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/// Run fn(lo, hi) over contiguous chunks of [begin, end), possibly on
/// multiple threads. Output must depend only on the chunk, not the schedule.
template <typename Fn>
void parallel_for(idx begin, idx end, int threads, Fn&& fn) {
  const idx n = end - begin;
  if (n <= 0) return;
  threads = resolve_threads(threads);
  if (threads <= 1 || n < 2) {
    fn(begin, end);
    return;
  }
  const idx chunks = std::min<idx>(threads, n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(chunks));
  const idx step = (n + chunks - 1) / chunks;
  for (idx c = 0; c < chunks; ++c) {
    const idx lo = begin + c * step;
    const idx hi = std::min(end, lo + step);
    if (lo >= hi) break;
    pool.emplace_back([&fn, lo, hi] { fn(lo, hi); });
  }
  for (auto& t : pool) t.join();
}

}  // namespace treeprox
