// Interposes the libc open family to record file opens made during jit_entry.

#include "fs_guard.hpp"

#include <atomic>
#include <cstdarg>
#include <cstdio>
#include <dlfcn.h>
#include <fcntl.h>

#include "mtjit/runtime/runtime.hpp"

namespace {

std::atomic<std::size_t> total{0};
std::atomic<std::size_t> during_jit{0};

void note() {
  ++total;
  if (mtjit::rt::in_jit_entry())
    ++during_jit;
}

template <typename Fn> Fn next(const char *name) { return reinterpret_cast<Fn>(dlsym(RTLD_NEXT, name)); }

mode_t mode_arg(int flags, va_list ap) {
  if (flags & (O_CREAT | O_TMPFILE))
    return static_cast<mode_t>(va_arg(ap, int));
  return 0;
}

} // namespace

namespace mtjit::testing {
std::size_t opens_total() { return total; }
std::size_t opens_during_jit() { return during_jit; }
} // namespace mtjit::testing

extern "C" {

int open(const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  auto mode = mode_arg(flags, ap);
  va_end(ap);
  note();
  static auto real = next<int (*)(const char *, int, ...)>("open");
  return real(path, flags, mode);
}

int open64(const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  auto mode = mode_arg(flags, ap);
  va_end(ap);
  note();
  static auto real = next<int (*)(const char *, int, ...)>("open64");
  return real(path, flags, mode);
}

int openat(int dir, const char *path, int flags, ...) {
  va_list ap;
  va_start(ap, flags);
  auto mode = mode_arg(flags, ap);
  va_end(ap);
  note();
  static auto real = next<int (*)(int, const char *, int, ...)>("openat");
  return real(dir, path, flags, mode);
}

FILE *fopen(const char *path, const char *mode) {
  note();
  static auto real = next<FILE *(*)(const char *, const char *)>("fopen");
  return real(path, mode);
}

FILE *fopen64(const char *path, const char *mode) {
  note();
  static auto real = next<FILE *(*)(const char *, const char *)>("fopen64");
  return real(path, mode);
}

}
