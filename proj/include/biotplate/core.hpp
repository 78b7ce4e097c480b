#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace biotplate {

/*! Error categories used across the toolkit. The CLI maps them to exit codes:
 *  input_error -> 3, solver_error -> 4, check_error -> 2. */
struct input_error : std::runtime_error {
  explicit input_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct solver_error : std::runtime_error {
  explicit solver_error(const std::string& msg) : std::runtime_error(msg) {}
};
struct check_error : std::runtime_error {
  explicit check_error(const std::string& msg) : std::runtime_error(msg) {}
};

inline void require_input(bool ok, const std::string& msg) {
  if (!ok) throw input_error(msg);
}
inline void require_solver(bool ok, const std::string& msg) {
  if (!ok) throw solver_error(msg);
}

/*! FNV-1a over a byte string; used to key caches and to fingerprint outputs.
 *  Stable across runs and platforms by construction. */
inline std::uint64_t fnv1a(const std::string& bytes) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i) {
    s[static_cast<size_t>(i)] = digits[v & 0xf];
    v >>= 4;
  }
  return s;
}

}  // namespace biotplate
