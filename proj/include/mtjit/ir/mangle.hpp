#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mtjit/sema/sema.hpp"

namespace mtjit::irgen {

/// `name<a,b>`: concrete ints in decimal, types by canonical name, global
/// references as `@name`, and runtime-supplied positions as `?k` where k is
/// the wildcard ordinal.
std::string mangle(std::string_view name, const std::vector<sema::TemplateArg> &args,
                   const sema::TypeTable &types);

} // namespace mtjit::irgen
