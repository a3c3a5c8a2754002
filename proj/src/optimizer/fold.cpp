#include <map>
#include <tuple>

#include "mtjit/ir/eval.hpp"
#include "mtjit/opt/optimizer.hpp"
#include "util.hpp"

namespace mtjit::opt {

namespace {

using ir::Inst;
using ir::Op;
using ir::Reg;
using ir::Type;

struct ConstVal {
  Type type = Type::Void;
  std::uint64_t bits = 0;
  const std::string *text = nullptr;  // Str constants
};

/// Where a pointer points: an object plus, when known, a byte offset into it.
struct PtrInfo {
  int root = -1;  // -1: unknown object
  bool known = false;
  std::uint64_t off = 0;
};

struct Root {
  enum class Kind : std::uint8_t { Alloca, Global, Param } kind;
  bool unique = false;
};

struct Entry {
  Type type;
  Reg value;
};

using CseKey = std::tuple<Op, Type, Type, std::vector<Reg>, std::uint64_t, std::uint64_t, std::string>;

bool cse_candidate(Op op) {
  switch (op) {
  case Op::Const:
  case Op::GlobalAddr:
  case Op::Field:
  case Op::Elem:
  case Op::Bin:
  case Op::Un:
  case Op::Cmp:
  case Op::Cast:
    return true;
  default:
    return false;
  }
}

class Folder {
public:
  explicit Folder(ir::Function &f) : f_(f) {}

  bool run() {
    auto dom = ir::compute_dominators(f_);
    children_.assign(f_.blocks.size(), {});
    for (auto b : dom.rpo)
      if (b != 0)
        children_[dom.idom[b]].push_back(b);
    preds_.assign(f_.blocks.size(), 0);
    pred_.assign(f_.blocks.size(), 0);
    for (std::uint32_t p = 0; p < f_.blocks.size(); ++p)
      for (auto t : f_.blocks[p].insts.back().targets) {
        ++preds_[t];
        pred_[t] = p;
      }
    idom_ = dom.idom;
    end_mem_.assign(f_.blocks.size(), {});
    for (const auto &p : f_.params)
      if (p.type == Type::Ptr)
        ptr_[p.reg] = PtrInfo{new_root(Root::Kind::Param, p.unique_object), true, 0};
    walk();
    detail::replace_uses(f_, alias_);
    return changed_;
  }

private:
  int new_root(Root::Kind k, bool unique = false) {
    roots_.push_back({k, unique});
    return static_cast<int>(roots_.size() - 1);
  }

  void walk() {
    struct Frame {
      std::uint32_t block;
      std::size_t next_child;
      std::vector<CseKey> added;
    };
    std::vector<Frame> stack;
    stack.push_back({0, 0, {}});
    block(0, stack.back().added);
    while (!stack.empty()) {
      auto &top = stack.back();
      if (top.next_child < children_[top.block].size()) {
        auto c = children_[top.block][top.next_child++];
        stack.push_back({c, 0, {}});
        block(c, stack.back().added);
        continue;
      }
      for (const auto &k : top.added)
        cse_.erase(k);
      stack.pop_back();
    }
  }

  Reg res(Reg r) const { return detail::resolve(alias_, r); }

  const ConstVal *constant(Reg r) const {
    auto it = consts_.find(r);
    return it == consts_.end() ? nullptr : &it->second;
  }

  void replace(Reg from, Reg to) {
    alias_[from] = to;
    changed_ = true;
  }

  void make_const(Inst &in, std::uint64_t bits) {
    Type t = in.type;
    Reg d = in.dst;
    in = Inst{};
    in.op = Op::Const;
    in.type = t;
    in.dst = d;
    in.imm = bits;
    changed_ = true;
  }

  /// Folds the instruction in place. Returns false when it became an alias and must be dropped.
  bool fold(Inst &in) {
    switch (in.op) {
    case Op::Bin:
    case Op::Cmp: {
      auto *a = constant(in.args[0]);
      auto *b = constant(in.args[1]);
      if (!a || !b)
        return true;
      if (in.op == Op::Cmp && in.vtype == Type::Str) {
        auto cmp = static_cast<num::Compare>(in.imm);
        if (!a->text || !b->text || (cmp != num::Compare::Eq && cmp != num::Compare::Ne))
          return true;
        bool eq = *a->text == *b->text;
        make_const(in, (cmp == num::Compare::Eq) == eq ? 1 : 0);
        return true;
      }
      if (auto r = ir::eval_pure(in, a->bits, b->bits))
        make_const(in, *r);
      return true;
    }
    case Op::Un:
    case Op::Cast: {
      if (auto *a = constant(in.args[0]))
        if (auto r = ir::eval_pure(in, a->bits))
          make_const(in, *r);
      return true;
    }
    case Op::Elem: {
      auto *idx = constant(in.args[1]);
      if (!idx)
        return true;
      auto i = num::to_int(ir::scalar_of(idx->type), idx->bits);
      if (i < 0 || static_cast<std::uint64_t>(i) >= in.imm2)
        return true;  // keeps the bounds trap
      Reg base = in.args[0];
      std::uint64_t off = static_cast<std::uint64_t>(i) * in.imm;
      Reg d = in.dst;
      in = Inst{};
      in.op = Op::Field;
      in.type = Type::Ptr;
      in.dst = d;
      in.args = {base};
      in.imm = off;
      changed_ = true;
      return fold(in);
    }
    case Op::Field: {
      if (auto it = fields_.find(in.args[0]); it != fields_.end()) {
        in.args[0] = it->second.first;
        in.imm += it->second.second;
        changed_ = true;
      }
      if (in.imm == 0) {
        replace(in.dst, in.args[0]);
        return false;
      }
      return true;
    }
    case Op::CondBr: {
      if (in.targets[0] == in.targets[1]) {
        in.op = Op::Br;
        in.args.clear();
        in.targets.resize(1);
        changed_ = true;
      } else if (auto *c = constant(in.args[0])) {
        auto t = c->bits ? in.targets[0] : in.targets[1];
        in.op = Op::Br;
        in.args.clear();
        in.targets = {t};
        changed_ = true;
      }
      return true;
    }
    default:
      return true;
    }
  }

  // -- memory ---------------------------------------------------------------

  bool may_alias(int a, int b) const {
    if (a == b)
      return true;
    if (a < 0 || b < 0) {
      int other = a < 0 ? b : a;
      return other < 0 || roots_[other].kind != Root::Kind::Alloca;
    }
    const auto &x = roots_[a];
    const auto &y = roots_[b];
    if (x.kind == Root::Kind::Alloca || y.kind == Root::Kind::Alloca)
      return false;
    if (x.kind == Root::Kind::Global && y.kind == Root::Kind::Global)
      return false;
    if (x.kind == Root::Kind::Param && y.kind == Root::Kind::Param)
      return !(x.unique && y.unique);
    return true;
  }

  void kill_root(int r) { mem_.erase(r); }

  void kill_aliases_of(int r) {
    for (auto it = mem_.begin(); it != mem_.end();) {
      if (it->first != r && may_alias(it->first, r))
        it = mem_.erase(it);
      else
        ++it;
    }
  }

  void kill_non_local() {
    for (auto it = mem_.begin(); it != mem_.end();) {
      if (roots_[it->first].kind != Root::Kind::Alloca)
        it = mem_.erase(it);
      else
        ++it;
    }
  }

  PtrInfo info(Reg p) const {
    auto it = ptr_.find(p);
    return it == ptr_.end() ? PtrInfo{} : it->second;
  }

  /// Returns false when the load was forwarded and must be dropped.
  bool memory(Inst &in) {
    switch (in.op) {
    case Op::Alloca:
      // Each execution zero-fills the slot.
      kill_root(static_cast<int>(ptr_.at(in.dst).root));
      return true;
    case Op::Load: {
      auto p = info(in.args[0]);
      if (p.root < 0 || !p.known)
        return true;
      auto &slots = mem_[p.root];
      auto it = slots.find(p.off);
      if (it != slots.end() && it->second.type == in.type) {
        replace(in.dst, it->second.value);
        return false;
      }
      slots[p.off] = {in.type, in.dst};
      return true;
    }
    case Op::Store: {
      auto p = info(in.args[0]);
      if (p.root < 0) {
        kill_non_local();
        return true;
      }
      kill_aliases_of(p.root);
      auto &slots = mem_[p.root];
      if (!p.known) {
        slots.clear();
        return true;
      }
      auto size = ir::type_size(in.vtype);
      auto lo = slots.lower_bound(p.off >= 8 ? p.off - 7 : 0);
      while (lo != slots.end() && lo->first < p.off + size) {
        if (lo->first + ir::type_size(lo->second.type) > p.off)
          lo = slots.erase(lo);
        else
          ++lo;
      }
      slots[p.off] = {in.vtype, in.args[1]};
      return true;
    }
    case Op::Call:
    case Op::CallIndirect:
    case Op::JitRequest:
      kill_non_local();
      return true;
    default:
      return true;
    }
  }

  void pointer(const Inst &in) {
    switch (in.op) {
    case Op::Alloca:
      ptr_[in.dst] = PtrInfo{new_root(Root::Kind::Alloca), true, 0};
      break;
    case Op::GlobalAddr: {
      auto [it, fresh] = globals_.emplace(in.sym, 0);
      if (fresh)
        it->second = new_root(Root::Kind::Global);
      ptr_[in.dst] = PtrInfo{it->second, true, 0};
      break;
    }
    case Op::Field: {
      auto base = info(in.args[0]);
      base.off += in.imm;
      ptr_[in.dst] = base;
      fields_[in.dst] = {in.args[0], in.imm};
      break;
    }
    case Op::Elem: {
      auto base = info(in.args[0]);
      base.known = false;
      ptr_[in.dst] = base;
      break;
    }
    default:
      break;
    }
  }

  void block(std::uint32_t b, std::vector<CseKey> &added) {
    // A block entered only from its dominator starts with what that block knew.
    if (b != 0 && preds_[b] == 1 && pred_[b] == idom_[b])
      mem_ = end_mem_[idom_[b]];
    else
      mem_.clear();
    auto &insts = f_.blocks[b].insts;
    std::vector<Inst> out;
    out.reserve(insts.size());
    for (auto &in : insts) {
      for (auto &a : in.args)
        a = res(a);
      if (!fold(in)) {
        changed_ = true;
        continue;
      }
      if (cse_candidate(in.op)) {
        CseKey key{in.op, in.type, in.vtype, in.args, in.imm, in.imm2, in.sym};
        auto [it, fresh] = cse_.emplace(key, in.dst);
        if (!fresh) {
          replace(in.dst, it->second);
          continue;
        }
        added.push_back(std::move(key));
      }
      if (in.op == Op::Const)
        consts_[in.dst] = ConstVal{in.type, in.imm, nullptr};
      pointer(in);
      if (!memory(in)) {
        changed_ = true;
        continue;
      }
      out.push_back(std::move(in));
    }
    insts = std::move(out);
    if (!children_[b].empty())
      end_mem_[b] = mem_;
    // String constant texts are referenced only after the block settles.
    for (const auto &in : insts)
      if (in.op == Op::Const && in.type == Type::Str)
        consts_[in.dst].text = &in.sym;
  }

  ir::Function &f_;
  std::vector<std::vector<std::uint32_t>> children_;
  std::vector<std::uint32_t> preds_;
  std::vector<std::uint32_t> pred_;
  std::vector<std::uint32_t> idom_;
  std::vector<std::map<int, std::map<std::uint64_t, Entry>>> end_mem_;
  std::unordered_map<Reg, Reg> alias_;
  std::unordered_map<Reg, ConstVal> consts_;
  std::unordered_map<Reg, PtrInfo> ptr_;
  std::unordered_map<Reg, std::pair<Reg, std::uint64_t>> fields_;
  std::map<std::string, int> globals_;
  std::vector<Root> roots_;
  std::map<int, std::map<std::uint64_t, Entry>> mem_;
  std::map<CseKey, Reg> cse_;
  bool changed_ = false;
};

} // namespace

bool constprop_fold(ir::Module &m) {
  bool changed = false;
  for (auto &f : m.functions) {
    if (f.is_declaration())
      continue;
    for (int i = 0; i < 8; ++i) {
      if (!Folder(f).run())
        break;
      changed = true;
    }
  }
  return changed;
}

} // namespace mtjit::opt
