#pragma once

#include "mtjit/opt/optimizer.hpp"

namespace mtjit::opt {

/// Inlining without dropping available-for-inlining bodies.
bool inline_calls(ir::Module &m, const PassConfig &cfg);
/// Available-for-inlining bodies become declarations, or vanish when unreferenced.
bool strip_available(ir::Module &m);
/// Drops available-for-inlining bodies no ordinary definition can reach.
bool prune_available(ir::Module &m);

} // namespace mtjit::opt
