#include "pipeline.hpp"

#include "mtjit/support/error.hpp"

namespace mtjit::opt {

void PassConfig::validate() const {
  if (opt_level < 0 || opt_level > 2)
    throw Error("optimization level must be 0, 1 or 2");
  if (unroll_limit == 0 || inline_budget == 0 || pipeline_iterations == 0)
    throw Error("optimizer limits must be positive");
}

ir::Module run_pipeline(ir::Module m, const PassConfig &cfg, const PassObserver &observe) {
  cfg.validate();
  if (cfg.opt_level == 0)
    return m;
  auto step = [&](const char *name, bool changed) {
    if (observe)
      observe(name, m);
    return changed;
  };
  prune_available(m);
  for (std::uint32_t round = 0; round < cfg.pipeline_iterations; ++round) {
    bool changed = false;
    if (cfg.opt_level >= 2)
      changed = step("inline", inline_calls(m, cfg)) || changed;
    changed = step("constprop_fold", constprop_fold(m)) || changed;
    if (cfg.opt_level >= 2)
      changed = step("unroll_loops", unroll_loops(m, cfg)) || changed;
    changed = step("simplify_cfg", simplify_cfg(m)) || changed;
    changed = step("dce", dce(m, cfg)) || changed;
    if (!changed)
      break;
  }
  if (strip_available(m))
    step("dce", dce(m, cfg));
  return m;
}

} // namespace mtjit::opt
