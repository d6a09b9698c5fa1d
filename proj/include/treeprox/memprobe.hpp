#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <new>
#include <string>

namespace treeprox {

namespace memdetail {

/// Live-byte counter behind the optional operator new/delete replacement.
/// Header-only inline statics so every TU sees one instance.
struct AllocStats {
  static inline std::atomic<std::int64_t> current{0};
  static inline std::atomic<std::int64_t> peak{0};
  static inline std::atomic<bool> active{false};

  static void note_alloc(std::int64_t bytes) {
    const std::int64_t now = current.fetch_add(bytes, std::memory_order_relaxed) + bytes;
    std::int64_t prev = peak.load(std::memory_order_relaxed);
    while (now > prev && !peak.compare_exchange_weak(prev, now, std::memory_order_relaxed)) {
    }
  }

  static void note_free(std::int64_t bytes) {
    current.fetch_sub(bytes, std::memory_order_relaxed);
  }

  static void reset_peak() {
    peak.store(current.load(std::memory_order_relaxed), std::memory_order_relaxed);
  }
};

inline constexpr std::size_t kHeader = 16;  // keeps malloc's 16-byte alignment

inline void* tracked_alloc(std::size_t n) {
  void* raw = std::malloc(n + kHeader);
  if (!raw) return nullptr;
  *static_cast<std::size_t*>(raw) = n;
  AllocStats::note_alloc(static_cast<std::int64_t>(n + kHeader));
  return static_cast<char*>(raw) + kHeader;
}

inline void tracked_free(void* p) noexcept {
  if (!p) return;
  void* raw = static_cast<char*>(p) - kHeader;
  const std::size_t n = *static_cast<std::size_t*>(raw);
  AllocStats::note_free(static_cast<std::int64_t>(n + kHeader));
  std::free(raw);
}

inline std::int64_t read_vm_hwm_bytes() {
  std::ifstream is("/proc/self/status");
  std::string key;
  while (is >> key) {
    if (key == "VmHWM:") {
      std::int64_t kb = 0;
      is >> kb;
      return kb * 1024;
    }
    is.ignore(4096, '\n');
  }
  return 0;
}

/// Resetting the kernel's RSS high-water mark needs a write to
/// /proc/self/clear_refs; when that is not permitted the watermark stays
/// monotone over the process lifetime.
inline bool reset_vm_hwm() {
  std::ofstream os("/proc/self/clear_refs");
  if (!os.good()) return false;
  os << "5";
  os.flush();
  return os.good();
}

}  // namespace memdetail

/// Peak-memory meter for benchmark runs. Prefers the allocator high-water
/// tracker when the binary opted in via TREEPROX_DEFINE_ALLOC_TRACKER();
/// otherwise samples the process resident-set high-water mark. The metric
/// identity travels with every measurement so reports never mix the two.
class MemoryProbe {
 public:
  MemoryProbe() : allocator_(memdetail::AllocStats::active.load()) {}

  void reset() {
    if (allocator_)
      memdetail::AllocStats::reset_peak();
    else
      memdetail::reset_vm_hwm();
  }

  std::int64_t peak_bytes() const {
    return allocator_ ? memdetail::AllocStats::peak.load(std::memory_order_relaxed)
                      : memdetail::read_vm_hwm_bytes();
  }

  const char* metric_name() const {
    return allocator_ ? "allocator-high-water" : "resident-set-high-water";
  }

 private:
  bool allocator_;
};

}  // namespace treeprox

/// Drops program-wide replacements of the plain (un-aligned) operator
/// new/delete family into exactly one translation unit of a binary.
/// Over-aligned allocations keep the default operators: the replacement
/// header would break their alignment, and nothing hot in this codebase is
/// over-aligned.
#define TREEPROX_DEFINE_ALLOC_TRACKER()                                                   \
  void* operator new(std::size_t n) {                                                    \
    void* p = ::treeprox::memdetail::tracked_alloc(n);                                   \
    if (!p) throw std::bad_alloc();                                                      \
    return p;                                                                            \
  }                                                                                      \
  void* operator new[](std::size_t n) {                                                  \
    void* p = ::treeprox::memdetail::tracked_alloc(n);                                   \
    if (!p) throw std::bad_alloc();                                                      \
    return p;                                                                            \
  }                                                                                      \
  void* operator new(std::size_t n, const std::nothrow_t&) noexcept {                    \
    return ::treeprox::memdetail::tracked_alloc(n);                                      \
  }                                                                                      \
  void* operator new[](std::size_t n, const std::nothrow_t&) noexcept {                  \
    return ::treeprox::memdetail::tracked_alloc(n);                                      \
  }                                                                                      \
  void operator delete(void* p) noexcept { ::treeprox::memdetail::tracked_free(p); }     \
  void operator delete[](void* p) noexcept { ::treeprox::memdetail::tracked_free(p); }   \
  void operator delete(void* p, std::size_t) noexcept {                                  \
    ::treeprox::memdetail::tracked_free(p);                                              \
  }                                                                                      \
  void operator delete[](void* p, std::size_t) noexcept {                                \
    ::treeprox::memdetail::tracked_free(p);                                              \
  }                                                                                      \
  void operator delete(void* p, const std::nothrow_t&) noexcept {                        \
    ::treeprox::memdetail::tracked_free(p);                                              \
  }                                                                                      \
  void operator delete[](void* p, const std::nothrow_t&) noexcept {                      \
    ::treeprox::memdetail::tracked_free(p);                                              \
  }                                                                                      \
  namespace treeprox::memdetail {                                                        \
  struct AllocTrackerActivator {                                                         \
    AllocTrackerActivator() { AllocStats::active.store(true); }                          \
  };                                                                                     \
  inline AllocTrackerActivator alloc_tracker_activator_instance;                         \
  }                                                                                      \
  static_assert(true, "")
