#include "mtjit/support/numeric.hpp"

#include <bit>
#include <cmath>
#include <limits>

namespace mtjit::num {

namespace {

std::uint64_t wrap(Scalar s, std::uint64_t raw) {
  if (s == Scalar::I32)
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(raw)));
  return raw;
}

template <class T> std::int64_t saturate(double v) {
  if (std::isnan(v))
    return 0;
  if (v <= static_cast<double>(std::numeric_limits<T>::min()))
    return std::numeric_limits<T>::min();
  if (v >= static_cast<double>(std::numeric_limits<T>::max()))
    return std::numeric_limits<T>::max();
  return static_cast<std::int64_t>(v);
}

} // namespace

std::uint64_t from_int(Scalar s, std::int64_t v) {
  switch (s) {
  case Scalar::Bool:
    return v != 0;
  case Scalar::F32:
  case Scalar::F64:
    return from_double(s, static_cast<double>(v));
  default:
    return wrap(s, static_cast<std::uint64_t>(v));
  }
}

std::uint64_t from_double(Scalar s, double v) {
  if (s == Scalar::F32)
    return std::bit_cast<std::uint32_t>(static_cast<float>(v));
  if (s == Scalar::F64)
    return std::bit_cast<std::uint64_t>(v);
  return from_int(s, static_cast<std::int64_t>(v));
}

std::int64_t to_int(Scalar s, std::uint64_t bits) {
  if (is_float(s))
    return static_cast<std::int64_t>(to_double(s, bits));
  return static_cast<std::int64_t>(wrap(s, bits));
}

double to_double(Scalar s, std::uint64_t bits) {
  if (s == Scalar::F32)
    return std::bit_cast<float>(static_cast<std::uint32_t>(bits));
  if (s == Scalar::F64)
    return std::bit_cast<double>(bits);
  return static_cast<double>(to_int(s, bits));
}

std::optional<std::uint64_t> arith(Arith op, Scalar s, std::uint64_t a, std::uint64_t b) {
  if (s == Scalar::F32) {
    float x = std::bit_cast<float>(static_cast<std::uint32_t>(a));
    float y = std::bit_cast<float>(static_cast<std::uint32_t>(b));
    float r = 0;
    switch (op) {
    case Arith::Add: r = x + y; break;
    case Arith::Sub: r = x - y; break;
    case Arith::Mul: r = x * y; break;
    case Arith::Div: r = x / y; break;
    case Arith::Rem: r = std::fmod(x, y); break;
    }
    return std::bit_cast<std::uint32_t>(r);
  }
  if (s == Scalar::F64) {
    double x = std::bit_cast<double>(a), y = std::bit_cast<double>(b), r = 0;
    switch (op) {
    case Arith::Add: r = x + y; break;
    case Arith::Sub: r = x - y; break;
    case Arith::Mul: r = x * y; break;
    case Arith::Div: r = x / y; break;
    case Arith::Rem: r = std::fmod(x, y); break;
    }
    return std::bit_cast<std::uint64_t>(r);
  }
  std::int64_t x = to_int(s, a), y = to_int(s, b);
  switch (op) {
  case Arith::Add: return wrap(s, a + b);
  case Arith::Sub: return wrap(s, a - b);
  case Arith::Mul: return wrap(s, a * b);
  case Arith::Div:
  case Arith::Rem: {
    if (y == 0)
      return std::nullopt;
    std::int64_t min = s == Scalar::I32 ? std::numeric_limits<std::int32_t>::min()
                                        : std::numeric_limits<std::int64_t>::min();
    if (x == min && y == -1)
      return op == Arith::Div ? wrap(s, static_cast<std::uint64_t>(min)) : 0;
    return wrap(s, static_cast<std::uint64_t>(op == Arith::Div ? x / y : x % y));
  }
  }
  return std::nullopt;
}

bool compare(Compare op, Scalar s, std::uint64_t a, std::uint64_t b) {
  if (is_float(s)) {
    double x = to_double(s, a), y = to_double(s, b);
    switch (op) {
    case Compare::Eq: return x == y;
    case Compare::Ne: return x != y;
    case Compare::Lt: return x < y;
    case Compare::Le: return x <= y;
    case Compare::Gt: return x > y;
    case Compare::Ge: return x >= y;
    }
  }
  std::int64_t x = to_int(s, a), y = to_int(s, b);
  switch (op) {
  case Compare::Eq: return x == y;
  case Compare::Ne: return x != y;
  case Compare::Lt: return x < y;
  case Compare::Le: return x <= y;
  case Compare::Gt: return x > y;
  case Compare::Ge: return x >= y;
  }
  return false;
}

std::uint64_t negate(Scalar s, std::uint64_t a) {
  if (s == Scalar::F32)
    return std::bit_cast<std::uint32_t>(-std::bit_cast<float>(static_cast<std::uint32_t>(a)));
  if (s == Scalar::F64)
    return std::bit_cast<std::uint64_t>(-std::bit_cast<double>(a));
  if (s == Scalar::Bool)
    return a ? 0 : 1;
  return wrap(s, 0 - a);
}

std::uint64_t convert(Scalar from, Scalar to, std::uint64_t bits) {
  if (from == to)
    return bits;
  if (!is_float(from)) {
    std::int64_t v = from == Scalar::Bool ? static_cast<std::int64_t>(bits != 0) : to_int(from, bits);
    return from_int(to, v);
  }
  double v = to_double(from, bits);
  switch (to) {
  case Scalar::F32:
  case Scalar::F64:
    return from_double(to, v);
  case Scalar::I32:
    return from_int(to, saturate<std::int32_t>(v));
  case Scalar::I64:
    return from_int(to, saturate<std::int64_t>(v));
  case Scalar::Bool:
    return v != 0.0;
  }
  return 0;
}

} // namespace mtjit::num
