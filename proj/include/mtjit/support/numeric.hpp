#pragma once

#include <cstdint>
#include <optional>

namespace mtjit::num {

/// Scalar value kinds as 64-bit bit patterns: i32 sign-extended, f32 as the
/// float's bits in the low half, f64 as its bits, bool as 0/1.
enum class Scalar : std::uint8_t { I32, I64, F32, F64, Bool };

enum class Arith : std::uint8_t { Add, Sub, Mul, Div, Rem };
enum class Compare : std::uint8_t { Eq, Ne, Lt, Le, Gt, Ge };

inline bool is_float(Scalar s) { return s == Scalar::F32 || s == Scalar::F64; }

std::uint64_t from_int(Scalar s, std::int64_t v);
std::uint64_t from_double(Scalar s, double v);
std::int64_t to_int(Scalar s, std::uint64_t bits);
double to_double(Scalar s, std::uint64_t bits);

/// Integer ops wrap; integer division or remainder by zero yields nullopt.
/// INT_MIN / -1 wraps to INT_MIN and INT_MIN % -1 is 0.
std::optional<std::uint64_t> arith(Arith op, Scalar s, std::uint64_t a, std::uint64_t b);
bool compare(Compare op, Scalar s, std::uint64_t a, std::uint64_t b);
std::uint64_t negate(Scalar s, std::uint64_t a);

/// Float to integer saturates and maps NaN to 0.
std::uint64_t convert(Scalar from, Scalar to, std::uint64_t bits);

} // namespace mtjit::num
