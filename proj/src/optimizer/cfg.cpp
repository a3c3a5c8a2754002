#include <map>
#include <set>

#include "mtjit/opt/optimizer.hpp"
#include "util.hpp"

namespace mtjit::opt {

namespace {

using ir::Inst;
using ir::Op;
using ir::Reg;

bool thread_jumps(ir::Function &f) {
  bool changed = false;
  auto forward = [&](std::uint32_t b) -> std::uint32_t {
    // Follow chains of blocks that only jump, stopping on cycles.
    std::set<std::uint32_t> seen;
    while (b != 0 && f.blocks[b].insts.size() == 1 && f.blocks[b].insts[0].op == Op::Br && seen.insert(b).second) {
      auto next = f.blocks[b].insts[0].targets[0];
      if (next == b)
        break;
      b = next;
    }
    return b;
  };
  for (auto &blk : f.blocks) {
    if (blk.insts.empty())
      continue;
    auto &t = blk.insts.back();
    for (auto &target : t.targets) {
      auto to = forward(target);
      if (to != target) {
        target = to;
        changed = true;
      }
    }
    if (t.op == Op::CondBr && t.targets[0] == t.targets[1]) {
      t.op = Op::Br;
      t.args.clear();
      t.targets.resize(1);
      changed = true;
    }
  }
  return changed;
}

bool merge_chains(ir::Function &f) {
  auto preds = ir::predecessors(f);
  bool changed = false;
  auto reachable = ir::reachable_blocks(f);
  std::vector<bool> live(f.blocks.size(), false);
  for (auto b : reachable)
    live[b] = true;
  for (auto b : reachable) {
    if (!live[b])
      continue;
    while (true) {
      auto &insts = f.blocks[b].insts;
      const auto &t = insts.back();
      if (t.op != Op::Br)
        break;
      auto s = t.targets[0];
      if (s == b || s == 0 || preds[s].size() != 1)
        break;
      insts.pop_back();
      auto &succ = f.blocks[s].insts;
      insts.insert(insts.end(), std::make_move_iterator(succ.begin()), std::make_move_iterator(succ.end()));
      succ.clear();
      live[s] = false;
      for (auto n : insts.back().targets)
        for (auto &p : preds[n])
          if (p == s)
            p = b;
      changed = true;
    }
  }
  if (changed) {
    // Merged-away blocks are now empty; make them unreachable husks before removal.
    for (auto &blk : f.blocks)
      if (blk.insts.empty()) {
        Inst u;
        u.op = Op::Unreachable;
        blk.insts.push_back(u);
      }
    detail::remove_unreachable_blocks(f);
  }
  return changed;
}

/// Stores into a local slot that nothing ever reads.
bool dead_local_stores(ir::Function &f) {
  std::unordered_map<Reg, Reg> root;  // pointer derived from an alloca → that alloca
  for (const auto &b : f.blocks)
    for (const auto &in : b.insts) {
      if (in.op == Op::Alloca)
        root[in.dst] = in.dst;
      else if ((in.op == Op::Field || in.op == Op::Elem) && root.count(in.args[0]))
        root[in.dst] = root.at(in.args[0]);
    }
  if (root.empty())
    return false;
  std::set<Reg> read;
  for (const auto &b : f.blocks)
    for (const auto &in : b.insts)
      for (std::size_t a = 0; a < in.args.size(); ++a) {
        auto it = root.find(in.args[a]);
        if (it == root.end())
          continue;
        bool address_only = (in.op == Op::Store && a == 0) || in.op == Op::Field || in.op == Op::Elem;
        if (!address_only)
          read.insert(it->second);
      }
  bool changed = false;
  for (auto &b : f.blocks) {
    auto &insts = b.insts;
    auto before = insts.size();
    std::erase_if(insts, [&](const Inst &in) {
      if (in.op != Op::Store)
        return false;
      auto it = root.find(in.args[0]);
      return it != root.end() && !read.count(it->second);
    });
    changed = changed || insts.size() != before;
  }
  return changed;
}

bool dead_code(ir::Function &f) {
  bool changed = false;
  while (true) {
    auto uses = detail::use_counts(f);
    bool removed = false;
    for (auto &b : f.blocks) {
      auto before = b.insts.size();
      for (auto it = b.insts.rbegin(); it != b.insts.rend(); ++it)
        if (it->dst && uses[it->dst] == 0 && detail::removable_if_unused(*it))
          for (auto a : it->args)
            --uses[a];
      std::erase_if(b.insts, [&](const Inst &in) {
        return in.dst && uses[in.dst] == 0 && detail::removable_if_unused(in);
      });
      removed = removed || b.insts.size() != before;
    }
    if (!removed)
      break;
    changed = true;
  }
  return changed;
}

/// Drops local definitions and declarations nothing reachable refers to.
bool dead_symbols(ir::Module &m, const PassConfig &cfg) {
  std::map<std::string, const ir::Function *> fns;
  for (const auto &f : m.functions)
    fns.emplace(f.name, &f);
  std::set<std::string> live;
  std::vector<const ir::Function *> work;
  auto mark = [&](const std::string &name) {
    if (!live.insert(name).second)
      return;
    if (auto it = fns.find(name); it != fns.end())
      work.push_back(it->second);
  };
  for (const auto &f : m.functions)
    if (f.linkage == ir::Linkage::Exported || f.linkage == ir::Linkage::AvailableForInlining ||
        (cfg.retain_locals && f.linkage == ir::Linkage::Local))
      mark(f.name);
  for (const auto &g : m.globals)
    if (g.linkage == ir::Linkage::Exported || (cfg.retain_locals && g.linkage == ir::Linkage::Local))
      live.insert(g.name);
  while (!work.empty()) {
    const auto *f = work.back();
    work.pop_back();
    std::set<std::string> refs;
    detail::referenced_symbols(*f, refs);
    for (const auto &r : refs)
      mark(r);
  }
  auto before = m.functions.size() + m.globals.size();
  std::erase_if(m.functions, [&](const ir::Function &f) { return !live.count(f.name); });
  std::erase_if(m.globals, [&](const ir::Global &g) { return !live.count(g.name); });
  return m.functions.size() + m.globals.size() != before;
}

} // namespace

bool simplify_cfg(ir::Module &m) {
  bool changed = false;
  for (auto &f : m.functions) {
    if (f.is_declaration())
      continue;
    for (int i = 0; i < 16; ++i) {
      bool step = detail::remove_unreachable_blocks(f);
      step = thread_jumps(f) || step;
      step = detail::remove_unreachable_blocks(f) || step;
      step = merge_chains(f) || step;
      if (!step)
        break;
      changed = true;
    }
  }
  return changed;
}

bool dce(ir::Module &m, const PassConfig &cfg) {
  bool changed = false;
  for (auto &f : m.functions) {
    if (f.is_declaration())
      continue;
    changed = detail::remove_unreachable_blocks(f) || changed;
    for (int i = 0; i < 16; ++i) {
      bool step = dead_code(f);
      step = dead_local_stores(f) || step;
      if (!step)
        break;
      changed = true;
    }
  }
  return dead_symbols(m, cfg) || changed;
}

} // namespace mtjit::opt
