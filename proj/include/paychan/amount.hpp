#pragma once

#include <compare>
#include <cstdint>
#include <ostream>
#include <string>

namespace paychan {

using ProcessId = std::uint32_t;
using OpId = std::uint64_t;

// Fixed-point money. One unit is the smallest transferable quantity; the
// ledger never uses floating point so that conservation checks are exact.
class Amount {
 public:
  constexpr Amount() = default;
  constexpr explicit Amount(std::int64_t units) : units_(units) {}

  constexpr std::int64_t units() const { return units_; }
  constexpr bool is_negative() const { return units_ < 0; }

  friend constexpr auto operator<=>(Amount, Amount) = default;

  constexpr Amount& operator+=(Amount o) {
    units_ += o.units_;
    return *this;
  }
  constexpr Amount& operator-=(Amount o) {
    units_ -= o.units_;
    return *this;
  }
  friend constexpr Amount operator+(Amount a, Amount b) { return a += b; }
  friend constexpr Amount operator-(Amount a, Amount b) { return a -= b; }

  std::string to_string() const { return std::to_string(units_); }

 private:
  std::int64_t units_ = 0;
};

inline std::ostream& operator<<(std::ostream& os, Amount a) { return os << a.units(); }

}  // namespace paychan
