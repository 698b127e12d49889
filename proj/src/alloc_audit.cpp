#include "eigengp/harness.hpp"

#include <atomic>
#include <cstddef>
#include <cstdlib>

#if defined(__GLIBC__)
#include <malloc.h>

extern "C" {
void *__libc_malloc(std::size_t);
void *__libc_calloc(std::size_t, std::size_t);
void *__libc_realloc(void *, std::size_t);
void *__libc_memalign(std::size_t, std::size_t);
}

namespace {
std::atomic<bool> g_active{false};
std::atomic<std::size_t> g_max{0};

inline void note(std::size_t n) {
  if (!g_active.load(std::memory_order_relaxed))
    return;
  std::size_t cur = g_max.load(std::memory_order_relaxed);
  while (n > cur && !g_max.compare_exchange_weak(cur, n, std::memory_order_relaxed)) {
  }
}
} // namespace

extern "C" {

void *malloc(std::size_t n) {
  note(n);
  return __libc_malloc(n);
}

void *calloc(std::size_t a, std::size_t b) {
  note(a * b);
  return __libc_calloc(a, b);
}

void *realloc(void *p, std::size_t n) {
  note(n);
  return __libc_realloc(p, n);
}

void *memalign(std::size_t align, std::size_t n) {
  note(n);
  return __libc_memalign(align, n);
}

void *aligned_alloc(std::size_t align, std::size_t n) {
  note(n);
  return __libc_memalign(align, n);
}

int posix_memalign(void **out, std::size_t align, std::size_t n) {
  note(n);
  void *p = __libc_memalign(align, n);
  if (!p)
    return 12; // ENOMEM
  *out = p;
  return 0;
}

} // extern "C"

namespace eigengp::alloc_audit {
bool available() { return true; }
void begin() {
  g_max.store(0);
  g_active.store(true);
}
std::size_t end() {
  g_active.store(false);
  return g_max.load();
}
} // namespace eigengp::alloc_audit

#else

namespace eigengp::alloc_audit {
bool available() { return false; }
void begin() {}
std::size_t end() { return 0; }
} // namespace eigengp::alloc_audit

#endif
