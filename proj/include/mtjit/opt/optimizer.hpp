#pragma once

#include <cstdint>
#include <functional>
#include <string>

#include "mtjit/ir/ir.hpp"

namespace mtjit::opt {

struct PassConfig {
  int opt_level = 2;                     // 0 none; 1 fold, cfg cleanup, dce; 2 adds inlining and unrolling
  std::uint32_t unroll_limit = 64;       // max trip count for full unrolling
  std::uint32_t inline_budget = 128;     // max callee instruction count
  std::uint32_t pipeline_iterations = 4; // max rounds
  /// Keep local symbols nobody references; code compiled later may look them up by name.
  bool retain_locals = false;
  bool operator==(const PassConfig &) const = default;

  /// Throws mtjit::Error when a field is out of range.
  void validate() const;
};

/// Largest number of instructions one loop may expand to when unrolled.
inline constexpr std::size_t kUnrollSizeBudget = 8192;
/// Unrolling stops once a function would grow past this many instructions.
inline constexpr std::size_t kFunctionSizeCap = 32768;

// Each pass transforms in place and reports whether anything changed.

/// Replaces direct calls to small non-recursive defined callees by their
/// bodies, then drops available-for-inlining bodies (kept as declarations
/// while still referenced).
bool inline_pass(ir::Module &m, const PassConfig &cfg);

/// Folds constant operations and branches, turns constant element indices
/// into fixed offsets, forwards stores to loads within a block, and removes
/// repeated pure computations.
bool constprop_fold(ir::Module &m);

/// Fully unrolls for-range loops with constant bounds and a small trip count.
bool unroll_loops(ir::Module &m, const PassConfig &cfg);

/// Drops unreachable blocks, threads jumps through empty blocks and merges
/// straight-line chains.
bool simplify_cfg(ir::Module &m);

/// Removes unused pure instructions, stores to locals that are never read,
/// unreachable blocks and unreferenced local symbols.
bool dce(ir::Module &m, const PassConfig &cfg);

/// Called after every pass with the pass name and the module.
using PassObserver = std::function<void(const std::string &, const ir::Module &)>;

/// Rounds of inline, fold, unroll, cfg cleanup and dce until nothing changes
/// or the round limit is reached. Level 0 returns the input unchanged.
ir::Module run_pipeline(ir::Module m, const PassConfig &cfg, const PassObserver &observe = {});

} // namespace mtjit::opt
