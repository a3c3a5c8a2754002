#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mtjit/ir/ir.hpp"
#include "mtjit/ir/mangle.hpp"
#include "mtjit/sema/sema.hpp"

namespace mtjit::irgen {

ir::Type lower_type(const sema::TypeTable &types, sema::TypeId t);

/// Lowers one checked function. Locals live in zero-filled frame slots;
/// for-range loops become preheader/header/body/latch with the upper bound
/// evaluated once in the preheader.
ir::Function lower_function(const sema::TypedFunction &f, const sema::SemaModule &sema);

/// Global definition (or declaration) for a checked global.
ir::Global lower_global(const sema::GlobalInfo &g, const sema::SemaModule &sema);

/// Every checked function and global of the module, in check order.
ir::Module emit_module(const sema::SemaModule &sema);

/// One wildcard value as packed for the runtime entry point.
enum class PackedTag : std::uint8_t { Int32, Int64, TypeString, GlobalRef };

/// Tags of the runtime values a site passes, in wildcard order.
std::vector<PackedTag> packed_tags(const sema::JitSite &site);

/// Local-linkage globals then local-linkage functions, numbered in module order.
using LocalSymbols = std::map<std::string, std::uint32_t>;
LocalSymbols collect_local_symbols(const ir::Module &m);

} // namespace mtjit::irgen
