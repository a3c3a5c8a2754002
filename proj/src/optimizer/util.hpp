#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "mtjit/ir/ir.hpp"

namespace mtjit::opt::detail {

/// Follows replacement chains to the final register.
ir::Reg resolve(const std::unordered_map<ir::Reg, ir::Reg> &map, ir::Reg r);

/// Rewrites every operand through the replacement map.
void replace_uses(ir::Function &f, const std::unordered_map<ir::Reg, ir::Reg> &map);

/// Number of operand uses of each register, indexed by register.
std::vector<std::uint32_t> use_counts(const ir::Function &f);

/// Removes blocks unreachable from the entry and renumbers the rest.
bool remove_unreachable_blocks(ir::Function &f);

/// Symbols named by call and global-address instructions of a function.
void referenced_symbols(const ir::Function &f, std::set<std::string> &out);

/// True when removing the instruction cannot change behavior if its result is unused.
bool removable_if_unused(const ir::Inst &in);

} // namespace mtjit::opt::detail
