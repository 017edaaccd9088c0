#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>

namespace straw {

class ContractError : public std::runtime_error {
 public:
  explicit ContractError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
[[noreturn]] inline void fail_check(const char* expr, const char* file, int line,
                                    const std::string& msg) {
  std::ostringstream os;
  os << file << ":" << line << ": check failed (" << expr << ")";
  if (!msg.empty()) os << ": " << msg;
  throw ContractError(os.str());
}
}  // namespace detail

#define STRAW_CHECK(cond, msg)                                             \
  do {                                                                     \
    if (!(cond)) ::straw::detail::fail_check(#cond, __FILE__, __LINE__, (msg)); \
  } while (0)

template <class T>
inline bool is_finite(T v) {
  return std::isfinite(static_cast<double>(v));
}

}  // namespace straw
