#include <algorithm>
#include <functional>
#include <map>

#include "mtjit/ir/eval.hpp"
#include "mtjit/opt/optimizer.hpp"
#include "pipeline.hpp"
#include "util.hpp"

namespace mtjit::opt {

namespace {

using ir::Inst;
using ir::Op;
using ir::Reg;

struct CallGraph {
  std::map<std::string, std::size_t> index;
  std::vector<std::vector<std::size_t>> callees;
  std::vector<bool> recursive;
};

CallGraph build_call_graph(const ir::Module &m) {
  CallGraph g;
  for (std::size_t i = 0; i < m.functions.size(); ++i)
    g.index.emplace(m.functions[i].name, i);
  g.callees.resize(m.functions.size());
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    for (const auto &b : m.functions[i].blocks)
      for (const auto &in : b.insts)
        if (in.op == Op::Call)
          if (auto it = g.index.find(in.sym); it != g.index.end())
            g.callees[i].push_back(it->second);
    auto &c = g.callees[i];
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  // Tarjan's strongly connected components; any cycle marks its members recursive.
  auto n = m.functions.size();
  g.recursive.assign(n, false);
  std::vector<int> order(n, -1), low(n, 0);
  std::vector<bool> on_stack(n, false);
  std::vector<std::size_t> stack;
  int counter = 0;
  std::function<void(std::size_t)> visit = [&](std::size_t v) {
    order[v] = low[v] = counter++;
    stack.push_back(v);
    on_stack[v] = true;
    for (auto w : g.callees[v]) {
      if (order[w] < 0) {
        visit(w);
        low[v] = std::min(low[v], low[w]);
      } else if (on_stack[w]) {
        low[v] = std::min(low[v], order[w]);
      }
    }
    if (low[v] != order[v])
      return;
    std::vector<std::size_t> scc;
    while (true) {
      auto w = stack.back();
      stack.pop_back();
      on_stack[w] = false;
      scc.push_back(w);
      if (w == v)
        break;
    }
    bool self = std::find(g.callees[v].begin(), g.callees[v].end(), v) != g.callees[v].end();
    if (scc.size() > 1 || self)
      for (auto w : scc)
        g.recursive[w] = true;
  };
  for (std::size_t v = 0; v < n; ++v)
    if (order[v] < 0)
      visit(v);
  return g;
}

/// Callees before callers.
std::vector<std::size_t> bottom_up(const CallGraph &g) {
  std::vector<std::size_t> out;
  std::vector<std::uint8_t> state(g.callees.size(), 0);
  for (std::size_t root = 0; root < g.callees.size(); ++root) {
    if (state[root])
      continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    state[root] = 1;
    while (!stack.empty()) {
      auto &[v, k] = stack.back();
      if (k < g.callees[v].size()) {
        auto w = g.callees[v][k++];
        if (!state[w]) {
          state[w] = 1;
          stack.push_back({w, 0});
        }
        continue;
      }
      out.push_back(v);
      stack.pop_back();
    }
  }
  return out;
}

/// Splices a copy of the callee's body in place of the call at blocks[b].insts[k].
void inline_call(ir::Function &f, std::uint32_t b, std::size_t k, const ir::Function &callee,
                 std::unordered_map<Reg, Reg> &alias) {
  Inst call = f.blocks[b].insts[k];
  auto base = static_cast<std::uint32_t>(f.blocks.size());
  auto post = base + static_cast<std::uint32_t>(callee.blocks.size());

  ir::Block tail;
  tail.insts.assign(std::make_move_iterator(f.blocks[b].insts.begin() + static_cast<std::ptrdiff_t>(k) + 1),
                    std::make_move_iterator(f.blocks[b].insts.end()));
  f.blocks[b].insts.resize(k);

  std::unordered_map<Reg, Reg> regs;
  for (std::size_t i = 0; i < callee.params.size(); ++i)
    regs[callee.params[i].reg] = call.args[i];
  auto map_reg = [&](Reg r) {
    auto [it, fresh] = regs.emplace(r, 0);
    if (fresh)
      it->second = f.fresh();
    return it->second;
  };

  std::size_t rets = 0;
  for (const auto &cb : callee.blocks)
    if (cb.insts.back().op == Op::Ret)
      ++rets;
  bool value = call.dst != 0;
  Reg slot = 0;
  if (value && rets > 1) {
    Inst a;
    a.op = Op::Alloca;
    a.type = ir::Type::Ptr;
    a.dst = f.fresh();
    a.imm = ir::type_size(call.type);
    a.imm2 = ir::type_size(call.type);
    slot = a.dst;
    f.blocks[b].insts.push_back(std::move(a));
  }
  Inst enter;
  enter.op = Op::Br;
  enter.targets = {base};
  f.blocks[b].insts.push_back(std::move(enter));

  for (const auto &cb : callee.blocks) {
    ir::Block nb;
    nb.insts.reserve(cb.insts.size() + 1);
    for (const auto &in : cb.insts) {
      Inst c = in;
      for (auto &a : c.args)
        a = map_reg(a);
      if (c.dst)
        c.dst = map_reg(c.dst);
      for (auto &t : c.targets)
        t += base;
      if (c.op == Op::Ret) {
        if (value) {
          Reg v = c.args[0];
          if (slot) {
            Inst st;
            st.op = Op::Store;
            st.vtype = call.type;
            st.args = {slot, v};
            nb.insts.push_back(std::move(st));
          } else {
            alias[call.dst] = v;
          }
        }
        c = Inst{};
        c.op = Op::Br;
        c.targets = {post};
      }
      nb.insts.push_back(std::move(c));
    }
    f.blocks.push_back(std::move(nb));
  }

  if (slot) {
    Inst ld;
    ld.op = Op::Load;
    ld.type = call.type;
    ld.dst = call.dst;
    ld.args = {slot};
    tail.insts.insert(tail.insts.begin(), std::move(ld));
  }
  if (value && rets == 0) {
    // The callee never returns; the result is never observed.
    Inst undef;
    undef.op = Op::Const;
    undef.type = call.type;
    undef.dst = call.dst;
    if (call.type == ir::Type::Str)
      undef.sym = "";
    tail.insts.insert(tail.insts.begin(), std::move(undef));
  }
  f.blocks.push_back(std::move(tail));
}

} // namespace

bool inline_calls(ir::Module &m, const PassConfig &cfg) {
  auto graph = build_call_graph(m);
  bool changed = false;
  for (auto i : bottom_up(graph)) {
    auto &f = m.functions[i];
    if (f.is_declaration())
      continue;
    auto size = f.instruction_count();
    std::unordered_map<Reg, Reg> alias;
    for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
      for (std::size_t k = 0; k < f.blocks[b].insts.size(); ++k) {
        const auto &in = f.blocks[b].insts[k];
        if (in.op != Op::Call)
          continue;
        auto it = graph.index.find(in.sym);
        if (it == graph.index.end() || it->second == i || graph.recursive[it->second])
          continue;
        const auto &callee = m.functions[it->second];
        if (callee.is_declaration())
          continue;
        auto cost = callee.instruction_count();
        if (cost > cfg.inline_budget || size + cost > kFunctionSizeCap)
          continue;
        inline_call(f, b, k, callee, alias);
        size += cost;
        changed = true;
        break;  // the rest of this block moved to a new block
      }
    }
    detail::replace_uses(f, alias);
  }
  return changed;
}

bool strip_available(ir::Module &m) {
  std::set<std::string> used;
  for (const auto &f : m.functions)
    if (f.linkage != ir::Linkage::AvailableForInlining)
      detail::referenced_symbols(f, used);
  bool changed = false;
  std::vector<ir::Function> kept;
  for (auto &f : m.functions) {
    if (f.linkage != ir::Linkage::AvailableForInlining) {
      kept.push_back(std::move(f));
      continue;
    }
    changed = true;
    if (!used.count(f.name))
      continue;
    f.blocks.clear();
    f.linkage = ir::Linkage::ExternalDecl;
    kept.push_back(std::move(f));
  }
  m.functions = std::move(kept);
  return changed;
}

bool prune_available(ir::Module &m) {
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < m.functions.size(); ++i)
    index.emplace(m.functions[i].name, i);
  std::vector<bool> live(m.functions.size(), false);
  std::vector<std::size_t> work;
  for (std::size_t i = 0; i < m.functions.size(); ++i)
    if (m.functions[i].linkage != ir::Linkage::AvailableForInlining) {
      live[i] = true;
      work.push_back(i);
    }
  while (!work.empty()) {
    auto i = work.back();
    work.pop_back();
    std::set<std::string> refs;
    detail::referenced_symbols(m.functions[i], refs);
    for (const auto &r : refs)
      if (auto it = index.find(r); it != index.end() && !live[it->second]) {
        live[it->second] = true;
        work.push_back(it->second);
      }
  }
  bool changed = false;
  std::vector<ir::Function> kept;
  for (std::size_t i = 0; i < m.functions.size(); ++i) {
    if (live[i])
      kept.push_back(std::move(m.functions[i]));
    else
      changed = true;
  }
  m.functions = std::move(kept);
  return changed;
}

bool inline_pass(ir::Module &m, const PassConfig &cfg) {
  bool changed = inline_calls(m, cfg);
  return strip_available(m) || changed;
}

} // namespace mtjit::opt
