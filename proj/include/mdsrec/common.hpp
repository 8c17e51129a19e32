#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mdsrec {

inline constexpr std::string_view kVersion = "0.1.0";

namespace detail {
inline void append_all(std::ostringstream&) {}
template <typename T, typename... Rest>
void append_all(std::ostringstream& oss, T&& v, Rest&&... rest) {
  oss << std::forward<T>(v);
  append_all(oss, std::forward<Rest>(rest)...);
}
}  // namespace detail

template <typename... Args>
std::string strcat_all(Args&&... args) {
  std::ostringstream oss;
  detail::append_all(oss, std::forward<Args>(args)...);
  return oss.str();
}

template <typename... Args>
[[noreturn]] void fail(Args&&... args) {
  throw std::runtime_error(strcat_all(std::forward<Args>(args)...));
}

template <typename... Args>
void require(bool cond, Args&&... args) {
  if (!cond) fail(std::forward<Args>(args)...);
}

// Error classes map to process exit codes: usage 2, data 3, numeric 4.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& m) : std::runtime_error(m) {}
};
struct DataError : std::runtime_error {
  explicit DataError(const std::string& m) : std::runtime_error(m) {}
};
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& m) : std::runtime_error(m) {}
};

template <typename E, typename... Args>
[[noreturn]] void fail_as(Args&&... args) {
  throw E(strcat_all(std::forward<Args>(args)...));
}

// 64-bit FNV-1a, used for input digests and named seed sub-streams.
inline std::uint64_t fnv1a64(std::string_view s, std::uint64_t h = 0xcbf29ce484222325ull) {
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

}  // namespace mdsrec
