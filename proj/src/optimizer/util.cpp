#include "util.hpp"

#include "mtjit/support/numeric.hpp"

namespace mtjit::opt::detail {

ir::Reg resolve(const std::unordered_map<ir::Reg, ir::Reg> &map, ir::Reg r) {
  for (auto it = map.find(r); it != map.end(); it = map.find(r))
    r = it->second;
  return r;
}

void replace_uses(ir::Function &f, const std::unordered_map<ir::Reg, ir::Reg> &map) {
  if (map.empty())
    return;
  for (auto &b : f.blocks)
    for (auto &in : b.insts)
      for (auto &a : in.args)
        a = resolve(map, a);
}

std::vector<std::uint32_t> use_counts(const ir::Function &f) {
  std::vector<std::uint32_t> uses(f.next_reg, 0);
  for (const auto &b : f.blocks)
    for (const auto &in : b.insts)
      for (auto a : in.args)
        if (a < uses.size())
          ++uses[a];
  return uses;
}

bool remove_unreachable_blocks(ir::Function &f) {
  if (f.blocks.empty())
    return false;
  auto order = ir::reachable_blocks(f);
  if (order.size() == f.blocks.size())
    return false;
  std::vector<bool> live(f.blocks.size(), false);
  for (auto b : order)
    live[b] = true;
  std::vector<std::uint32_t> index(f.blocks.size(), 0);
  std::vector<ir::Block> kept;
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
    if (!live[b])
      continue;
    index[b] = static_cast<std::uint32_t>(kept.size());
    kept.push_back(std::move(f.blocks[b]));
  }
  for (auto &b : kept)
    for (auto &t : b.insts.back().targets)
      t = index[t];
  f.blocks = std::move(kept);
  return true;
}

void referenced_symbols(const ir::Function &f, std::set<std::string> &out) {
  for (const auto &b : f.blocks)
    for (const auto &in : b.insts)
      if (in.op == ir::Op::Call || in.op == ir::Op::GlobalAddr)
        out.insert(in.sym);
}

bool removable_if_unused(const ir::Inst &in) {
  if (in.op == ir::Op::Bin) {
    // Integer division and remainder trap on a zero divisor.
    auto op = static_cast<num::Arith>(in.imm);
    bool integer = in.type == ir::Type::I32 || in.type == ir::Type::I64;
    return !(integer && (op == num::Arith::Div || op == num::Arith::Rem));
  }
  return ir::is_pure(in.op);
}

} // namespace mtjit::opt::detail
