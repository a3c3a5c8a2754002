#pragma once

#include <cstdint>
#include <optional>

#include "mtjit/ir/ir.hpp"
#include "mtjit/support/numeric.hpp"

namespace mtjit::ir {

/// Numeric view of a value type; non-numeric types compare as i64 bits.
num::Scalar scalar_of(Type t);

/// Bytes a value of this type occupies in memory.
std::uint64_t type_size(Type t);

/// Result bits of a Bin, Un, Cmp or Cast on operand bits. nullopt when the
/// instruction would trap (integer division by zero).
std::optional<std::uint64_t> eval_pure(const Inst &in, std::uint64_t a, std::uint64_t b = 0);

} // namespace mtjit::ir
