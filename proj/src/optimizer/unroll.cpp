#include <algorithm>
#include <map>
#include <optional>
#include <set>

#include "mtjit/ir/eval.hpp"
#include "mtjit/opt/optimizer.hpp"
#include "util.hpp"

namespace mtjit::opt {

namespace {

using ir::Inst;
using ir::Op;
using ir::Reg;

struct Loop {
  std::uint32_t header = 0;
  std::uint32_t latch = 0;
  std::uint32_t preheader = 0;
  std::uint32_t body_entry = 0;
  std::uint32_t exit = 0;
  std::vector<std::uint32_t> blocks;  // header first
  std::size_t size = 0;
  std::int64_t trips = 0;
};

class Unroller {
public:
  Unroller(ir::Function &f, const PassConfig &cfg) : f_(f), cfg_(cfg) {}

  bool run() {
    bool changed = false;
    while (auto loop = next_loop()) {
      expand(*loop);
      changed = true;
    }
    if (changed)
      detail::remove_unreachable_blocks(f_);
    return changed;
  }

private:
  /// Smallest loop that passes every check, so inner loops go first.
  std::optional<Loop> next_loop() {
    auto dom = ir::compute_dominators(f_);
    auto preds = ir::predecessors(f_);
    def_.clear();
    reachable_ = dom.reachable;
    for (std::uint32_t b = 0; b < f_.blocks.size(); ++b)
      if (dom.reachable[b])
        for (std::size_t i = 0; i < f_.blocks[b].insts.size(); ++i)
          if (f_.blocks[b].insts[i].dst)
            def_[f_.blocks[b].insts[i].dst] = {b, i};
    std::map<std::uint32_t, std::vector<std::uint32_t>> backedges;
    for (auto b : dom.rpo)
      for (auto t : f_.blocks[b].insts.back().targets)
        if (dom.dominates(t, b))
          backedges[t].push_back(b);
    std::vector<Loop> candidates;
    for (const auto &[h, latches] : backedges) {
      if (latches.size() != 1 || failed_.count(h))
        continue;
      Loop loop;
      loop.header = h;
      loop.latch = latches[0];
      collect_body(loop, preds);
      if (check(loop, preds))
        candidates.push_back(std::move(loop));
      else
        failed_.insert(h);
    }
    if (candidates.empty())
      return std::nullopt;
    auto it = std::min_element(candidates.begin(), candidates.end(),
                               [](const Loop &a, const Loop &b) { return a.size < b.size; });
    return *it;
  }

  void collect_body(Loop &loop, const std::vector<std::vector<std::uint32_t>> &preds) {
    std::set<std::uint32_t> in{loop.header};
    std::vector<std::uint32_t> work;
    if (in.insert(loop.latch).second)
      work.push_back(loop.latch);
    while (!work.empty()) {
      auto b = work.back();
      work.pop_back();
      for (auto p : preds[b])
        if (in.insert(p).second)
          work.push_back(p);
    }
    loop.blocks.push_back(loop.header);
    for (auto b : in)
      if (b != loop.header)
        loop.blocks.push_back(b);
    for (auto b : loop.blocks)
      loop.size += f_.blocks[b].insts.size();
  }

  const Inst *def(Reg r) const {
    auto it = def_.find(r);
    return it == def_.end() ? nullptr : &f_.blocks[it->second.first].insts[it->second.second];
  }

  std::optional<std::int64_t> int_const(Reg r, ir::Type t) const {
    const auto *d = def(r);
    if (!d || d->op != Op::Const || d->type != t)
      return std::nullopt;
    return num::to_int(ir::scalar_of(t), d->imm);
  }

  bool check(Loop &loop, const std::vector<std::vector<std::uint32_t>> &preds) {
    std::set<std::uint32_t> body(loop.blocks.begin(), loop.blocks.end());
    const auto &hp = preds[loop.header];
    if (hp.size() != 2)
      return false;
    loop.preheader = hp[0] == loop.latch ? hp[1] : hp[0];
    if (body.count(loop.preheader))
      return false;
    const auto &pterm = f_.blocks[loop.preheader].insts.back();
    if (pterm.op != Op::Br)
      return false;

    // Header: side-effect-free code ending in "iv < hi".
    const auto &hinsts = f_.blocks[loop.header].insts;
    for (std::size_t i = 0; i + 1 < hinsts.size(); ++i)
      if (!detail::removable_if_unused(hinsts[i]) || hinsts[i].op == Op::Alloca)
        return false;
    const auto &term = hinsts.back();
    if (term.op != Op::CondBr || !body.count(term.targets[0]) || body.count(term.targets[1]))
      return false;
    loop.body_entry = term.targets[0];
    loop.exit = term.targets[1];
    const auto *cmp = def(term.args[0]);
    if (!cmp || cmp->op != Op::Cmp || cmp->imm != static_cast<std::uint64_t>(num::Compare::Lt) ||
        def_.at(cmp->dst).first != loop.header)
      return false;
    auto ty = cmp->vtype;
    if (ty != ir::Type::I32 && ty != ir::Type::I64)
      return false;
    const auto *cur = def(cmp->args[0]);
    if (!cur || cur->op != Op::Load || def_.at(cur->dst).first != loop.header)
      return false;
    Reg iv = cur->args[0];
    const auto *slot = def(iv);
    if (!slot || slot->op != Op::Alloca)
      return false;
    auto hi = int_const(cmp->args[1], ty);
    if (!hi)
      return false;

    // The induction slot is written once before the loop and once in the latch.
    const Inst *init = nullptr;
    const Inst *step = nullptr;
    for (std::uint32_t b = 0; b < f_.blocks.size(); ++b) {
      if (!reachable_[b])
        continue;
      bool in_loop = body.count(b) > 0;
      bool stored_here = false;
      for (const auto &in : f_.blocks[b].insts) {
        for (std::size_t a = 0; a < in.args.size(); ++a) {
          if (in.args[a] != iv)
            continue;
          if (in.op == Op::Load && a == 0) {
            if (stored_here && in_loop)
              return false;
            continue;
          }
          if (in.op != Op::Store || a != 0)
            return false;
          if (b == loop.preheader) {
            init = &in;
          } else if (b == loop.latch && !step) {
            step = &in;
            stored_here = true;
          } else {
            return false;
          }
        }
      }
    }
    if (!init || !step)
      return false;
    // The initializing store must be the last one before the jump into the header.
    auto lo = int_const(init->args[1], ty);
    if (!lo)
      return false;
    const auto *add = def(step->args[1]);
    if (!add || add->op != Op::Bin || add->imm != static_cast<std::uint64_t>(num::Arith::Add) || add->type != ty)
      return false;
    auto one = int_const(add->args[1], ty);
    const auto *prev = def(add->args[0]);
    if (!one || *one != 1 || !prev || prev->op != Op::Load || prev->args[0] != iv ||
        !body.count(def_.at(prev->dst).first))
      return false;

    // Control stays inside the loop except for returns; only the latch jumps back.
    for (auto b : loop.blocks) {
      if (b == loop.header)
        continue;
      for (auto t : f_.blocks[b].insts.back().targets) {
        if (t == loop.header) {
          if (b != loop.latch)
            return false;
        } else if (!body.count(t)) {
          return false;
        }
      }
    }
    if (f_.blocks[loop.latch].insts.back().op != Op::Br)
      return false;

    loop.trips = std::max<std::int64_t>(0, *hi - *lo);
    if (loop.trips > static_cast<std::int64_t>(cfg_.unroll_limit))
      return false;
    auto grown = static_cast<std::size_t>(loop.trips) * loop.size;
    if (grown > kUnrollSizeBudget || f_.instruction_count() + grown > kFunctionSizeCap)
      return false;
    return true;
  }

  /// Straight-line copies of the body, each preceded by a copy of the header's
  /// side-effect-free code; a final header copy falls through to the exit.
  void expand(const Loop &loop) {
    std::set<std::uint32_t> body(loop.blocks.begin(), loop.blocks.end());
    std::set<Reg> defined;
    for (auto b : loop.blocks)
      for (const auto &in : f_.blocks[b].insts)
        if (in.dst)
          defined.insert(in.dst);
    // Snapshot: copies are appended while we read the originals.
    std::vector<ir::Block> originals;
    for (auto b : loop.blocks)
      originals.push_back(f_.blocks[b]);
    const auto &header = originals[0];

    auto header_copy = [&](std::unordered_map<Reg, Reg> &regs, std::uint32_t next) {
      ir::Block hb;
      for (std::size_t i = 0; i + 1 < header.insts.size(); ++i) {
        Inst c = header.insts[i];
        rename(c, regs, defined);
        hb.insts.push_back(std::move(c));
      }
      Inst br;
      br.op = Op::Br;
      br.targets = {next};
      hb.insts.push_back(std::move(br));
      return hb;
    };

    auto first = static_cast<std::uint32_t>(f_.blocks.size());
    auto per_copy = static_cast<std::uint32_t>(loop.blocks.size());
    for (std::int64_t j = 0; j < loop.trips; ++j) {
      auto start = first + per_copy * static_cast<std::uint32_t>(j);
      std::map<std::uint32_t, std::uint32_t> block_map;
      for (std::uint32_t k = 0; k < per_copy; ++k)
        block_map[loop.blocks[k]] = start + k;
      std::unordered_map<Reg, Reg> regs;
      f_.blocks.push_back(header_copy(regs, block_map.at(loop.body_entry)));
      for (std::uint32_t k = 1; k < per_copy; ++k) {
        ir::Block nb;
        for (const auto &in : originals[k].insts) {
          Inst c = in;
          rename(c, regs, defined);
          for (auto &t : c.targets)
            t = t == loop.header ? start + per_copy : block_map.at(t);
          nb.insts.push_back(std::move(c));
        }
        f_.blocks.push_back(std::move(nb));
      }
    }
    std::unordered_map<Reg, Reg> last;
    f_.blocks.push_back(header_copy(last, loop.exit));

    // Code after the loop sees the values of the last header evaluation.
    for (std::uint32_t b = 0; b < first; ++b) {
      if (body.count(b))
        continue;
      for (auto &in : f_.blocks[b].insts)
        for (auto &a : in.args)
          if (auto it = last.find(a); it != last.end())
            a = it->second;
    }
    auto &pterm = f_.blocks[loop.preheader].insts.back();
    pterm.targets = {first};
  }

  void rename(Inst &c, std::unordered_map<Reg, Reg> &regs, const std::set<Reg> &defined) {
    auto map_reg = [&](Reg r) {
      if (!defined.count(r))
        return r;
      auto [it, fresh] = regs.emplace(r, 0);
      if (fresh)
        it->second = f_.fresh();
      return it->second;
    };
    for (auto &a : c.args)
      a = map_reg(a);
    if (c.dst)
      c.dst = map_reg(c.dst);
  }

  ir::Function &f_;
  const PassConfig &cfg_;
  std::unordered_map<Reg, std::pair<std::uint32_t, std::size_t>> def_;
  std::set<std::uint32_t> failed_;
  std::vector<bool> reachable_;
};

} // namespace

bool unroll_loops(ir::Module &m, const PassConfig &cfg) {
  bool changed = false;
  for (auto &f : m.functions)
    if (!f.is_declaration())
      changed = Unroller(f, cfg).run() || changed;
  return changed;
}

} // namespace mtjit::opt
