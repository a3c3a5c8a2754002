#include "mtjit/ir/ir.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>

#include "mtjit/support/numeric.hpp"

namespace mtjit::ir {

const char *type_name(Type t) {
  switch (t) {
  case Type::Void: return "void";
  case Type::Bool: return "bool";
  case Type::I32: return "i32";
  case Type::I64: return "i64";
  case Type::F32: return "f32";
  case Type::F64: return "f64";
  case Type::Str: return "str";
  case Type::Ptr: return "ptr";
  case Type::Handle: return "handle";
  }
  return "?";
}

const char *op_name(Op op) {
  switch (op) {
  case Op::Const: return "const";
  case Op::GlobalAddr: return "globaladdr";
  case Op::Alloca: return "alloca";
  case Op::Load: return "load";
  case Op::Store: return "store";
  case Op::Elem: return "elem";
  case Op::Field: return "field";
  case Op::Bin: return "bin";
  case Op::Un: return "un";
  case Op::Cmp: return "cmp";
  case Op::Cast: return "cast";
  case Op::Call: return "call";
  case Op::CallIndirect: return "call_indirect";
  case Op::JitRequest: return "jit_request";
  case Op::Intrinsic: return "intrinsic";
  case Op::Print: return "print";
  case Op::Br: return "br";
  case Op::CondBr: return "condbr";
  case Op::Ret: return "ret";
  case Op::Unreachable: return "unreachable";
  }
  return "?";
}

bool is_terminator(Op op) {
  return op == Op::Br || op == Op::CondBr || op == Op::Ret || op == Op::Unreachable;
}

bool is_pure(Op op) {
  switch (op) {
  case Op::Const:
  case Op::GlobalAddr:
  case Op::Alloca:
  case Op::Load:
  case Op::Field:
  case Op::Un:
  case Op::Cmp:
  case Op::Cast:
    return true;
  default:
    return false;
  }
}

const char *linkage_name(Linkage l) {
  switch (l) {
  case Linkage::Exported: return "exported";
  case Linkage::Local: return "local";
  case Linkage::ExternalDecl: return "external";
  case Linkage::AvailableForInlining: return "available";
  }
  return "?";
}

std::size_t Function::instruction_count() const {
  std::size_t n = 0;
  for (const auto &b : blocks)
    n += b.insts.size();
  return n;
}

Function *Module::find_function(const std::string &name) {
  for (auto &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

const Function *Module::find_function(const std::string &name) const {
  for (const auto &f : functions)
    if (f.name == name)
      return &f;
  return nullptr;
}

Global *Module::find_global(const std::string &name) {
  for (auto &g : globals)
    if (g.name == name)
      return &g;
  return nullptr;
}

const Global *Module::find_global(const std::string &name) const {
  for (const auto &g : globals)
    if (g.name == name)
      return &g;
  return nullptr;
}

std::size_t Module::instruction_count() const {
  std::size_t n = 0;
  for (const auto &f : functions)
    n += f.instruction_count();
  return n;
}

// ---------------------------------------------------------------------------
// Printing

namespace {

const char *arith_name(std::uint64_t v) {
  static const char *names[] = {"add", "sub", "mul", "div", "rem"};
  return v < 5 ? names[v] : "?";
}

const char *compare_name(std::uint64_t v) {
  static const char *names[] = {"eq", "ne", "lt", "le", "gt", "ge"};
  return v < 6 ? names[v] : "?";
}

std::string const_text(Type t, std::uint64_t bits) {
  char buf[64];
  switch (t) {
  case Type::F32:
  case Type::F64: {
    double v = num::to_double(t == Type::F32 ? num::Scalar::F32 : num::Scalar::F64, bits);
    auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, p);
  }
  case Type::Bool:
    return bits ? "true" : "false";
  case Type::I32:
    return std::to_string(static_cast<std::int32_t>(bits));
  default:
    return std::to_string(static_cast<std::int64_t>(bits));
  }
}

std::string quote(const std::string &s) {
  std::string out = "\"";
  for (unsigned char c : s) {
    if (c == '"' || c == '\\') {
      out += '\\';
      out += static_cast<char>(c);
    } else if (c < 0x20 || c >= 0x7f) {
      char buf[8];
      std::snprintf(buf, sizeof buf, "\\x%02x", c);
      out += buf;
    } else {
      out += static_cast<char>(c);
    }
  }
  return out + "\"";
}

std::string reg(Reg r) { return "%" + std::to_string(r); }

std::string reg_list(const std::vector<Reg> &rs, std::size_t from = 0) {
  std::string out;
  for (std::size_t i = from; i < rs.size(); ++i) {
    if (i > from)
      out += ", ";
    out += reg(rs[i]);
  }
  return out;
}

void print_inst(std::ostringstream &os, const Inst &in) {
  os << "  ";
  if (in.dst)
    os << reg(in.dst) << " = ";
  os << op_name(in.op);
  switch (in.op) {
  case Op::Const:
    os << ' ' << type_name(in.type) << ' ' << (in.type == Type::Str ? quote(in.sym) : const_text(in.type, in.imm));
    break;
  case Op::GlobalAddr:
    os << " @" << in.sym;
    break;
  case Op::Alloca:
    os << " size=" << in.imm << " align=" << in.imm2;
    break;
  case Op::Load:
    os << ' ' << type_name(in.type) << ' ' << reg(in.args[0]);
    break;
  case Op::Store:
    os << ' ' << type_name(in.vtype) << ' ' << reg_list(in.args);
    break;
  case Op::Elem:
    os << ' ' << reg_list(in.args) << " stride=" << in.imm << " count=" << in.imm2;
    break;
  case Op::Field:
    os << ' ' << reg(in.args[0]) << " +" << in.imm;
    break;
  case Op::Bin:
    os << ' ' << arith_name(in.imm) << ' ' << type_name(in.type) << ' ' << reg_list(in.args);
    break;
  case Op::Un:
    os << ' ' << (in.imm == static_cast<std::uint64_t>(UnOp::Neg) ? "neg" : "not") << ' ' << type_name(in.type)
       << ' ' << reg_list(in.args);
    break;
  case Op::Cmp:
    os << ' ' << compare_name(in.imm) << ' ' << type_name(in.vtype) << ' ' << reg_list(in.args);
    break;
  case Op::Cast:
    os << ' ' << type_name(in.vtype) << ' ' << reg(in.args[0]) << " to " << type_name(in.type);
    break;
  case Op::Call:
    os << ' ' << type_name(in.type) << " @" << in.sym << '(' << reg_list(in.args) << ')';
    break;
  case Op::CallIndirect:
    os << ' ' << type_name(in.type) << ' ' << reg(in.args[0]) << '(' << reg_list(in.args, 1) << ')';
    break;
  case Op::JitRequest:
    os << " site=" << in.imm << ' ' << quote(in.sym) << " [";
    for (std::size_t i = 0; i < in.args.size(); ++i)
      os << (i ? ", " : "") << type_name(in.types[i]) << ' ' << reg(in.args[i]);
    os << ']';
    break;
  case Op::Intrinsic:
    os << ' ' << type_name(in.type) << ' ' << in.sym << '(' << reg_list(in.args) << ')';
    break;
  case Op::Print:
    for (std::size_t i = 0; i < in.args.size(); ++i)
      os << (i ? ", " : " ") << type_name(in.types[i]) << ' ' << reg(in.args[i]);
    break;
  case Op::Br:
    os << " bb" << in.targets[0];
    break;
  case Op::CondBr:
    os << ' ' << reg(in.args[0]) << ", bb" << in.targets[0] << ", bb" << in.targets[1];
    break;
  case Op::Ret:
    if (!in.args.empty())
      os << ' ' << type_name(in.vtype) << ' ' << reg(in.args[0]);
    break;
  case Op::Unreachable:
    break;
  }
  os << '\n';
}

} // namespace

std::string print_function(const Function &f) {
  std::ostringstream os;
  os << "fn " << linkage_name(f.linkage) << " @" << f.name << '(';
  for (std::size_t i = 0; i < f.params.size(); ++i) {
    const auto &p = f.params[i];
    os << (i ? ", " : "") << reg(p.reg) << ": " << type_name(p.type) << (p.unique_object ? " unique_object" : "");
  }
  os << ") -> " << type_name(f.ret);
  if (f.is_declaration()) {
    os << "\n";
    return os.str();
  }
  os << " {\n";
  for (std::size_t b = 0; b < f.blocks.size(); ++b) {
    os << "bb" << b << ":\n";
    for (const auto &in : f.blocks[b].insts)
      print_inst(os, in);
  }
  os << "}\n";
  return os.str();
}

std::string print_module(const Module &m) {
  std::ostringstream os;
  os << "module " << quote(m.tu_name) << '\n';
  for (const auto &g : m.globals) {
    os << "global " << linkage_name(g.linkage) << " @" << g.name << ": " << g.type_name << " size=" << g.size
       << " align=" << g.align;
    bool nonzero = std::any_of(g.init.begin(), g.init.end(), [](std::uint8_t b) { return b != 0; });
    if (nonzero) {
      os << " init=";
      char buf[4];
      for (auto b : g.init) {
        std::snprintf(buf, sizeof buf, "%02x", b);
        os << buf;
      }
    }
    os << '\n';
  }
  for (const auto &f : m.functions)
    os << print_function(f);
  return os.str();
}

// ---------------------------------------------------------------------------
// CFG helpers

std::vector<std::uint32_t> reachable_blocks(const Function &f) {
  std::vector<std::uint32_t> order;
  if (f.blocks.empty())
    return order;
  std::vector<bool> seen(f.blocks.size());
  std::vector<std::uint32_t> stack = {0};
  while (!stack.empty()) {
    auto b = stack.back();
    stack.pop_back();
    if (b >= f.blocks.size() || seen[b])
      continue;
    seen[b] = true;
    order.push_back(b);
    if (f.blocks[b].insts.empty())
      continue;
    const auto &t = f.blocks[b].insts.back();
    for (auto it = t.targets.rbegin(); it != t.targets.rend(); ++it)
      stack.push_back(*it);
  }
  return order;
}

std::vector<std::vector<std::uint32_t>> predecessors(const Function &f) {
  std::vector<std::vector<std::uint32_t>> preds(f.blocks.size());
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
    if (f.blocks[b].insts.empty())
      continue;
    for (auto t : f.blocks[b].insts.back().targets)
      if (t < preds.size() && std::find(preds[t].begin(), preds[t].end(), b) == preds[t].end())
        preds[t].push_back(b);
  }
  return preds;
}

// Cooper-Harvey-Kennedy iteration over reverse postorder.
Dominators compute_dominators(const Function &f) {
  Dominators d;
  auto n = f.blocks.size();
  d.reachable.assign(n, false);
  d.idom.assign(n, UINT32_MAX);
  if (n == 0)
    return d;
  static const std::vector<std::uint32_t> no_targets;
  std::vector<std::uint32_t> post;
  std::vector<std::uint8_t> state(n, 0);
  std::vector<std::pair<std::uint32_t, std::size_t>> stack = {{0, 0}};
  state[0] = 1;
  while (!stack.empty()) {
    auto &[b, k] = stack.back();
    const auto &ts = f.blocks[b].insts.empty() ? no_targets : f.blocks[b].insts.back().targets;
    if (k < ts.size()) {
      auto t = ts[k++];
      if (t < n && !state[t]) {
        state[t] = 1;
        stack.push_back({t, 0});
      }
      continue;
    }
    post.push_back(b);
    stack.pop_back();
  }
  d.rpo.assign(post.rbegin(), post.rend());
  std::vector<std::uint32_t> rpo_index(n, UINT32_MAX);
  for (std::uint32_t i = 0; i < d.rpo.size(); ++i) {
    rpo_index[d.rpo[i]] = i;
    d.reachable[d.rpo[i]] = true;
  }
  auto preds = predecessors(f);
  d.idom[0] = 0;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 1; i < d.rpo.size(); ++i) {
      auto b = d.rpo[i];
      std::uint32_t best = UINT32_MAX;
      for (auto p : preds[b]) {
        if (d.idom[p] == UINT32_MAX)
          continue;
        if (best == UINT32_MAX) {
          best = p;
          continue;
        }
        auto x = p, y = best;
        while (x != y) {
          while (rpo_index[x] > rpo_index[y])
            x = d.idom[x];
          while (rpo_index[y] > rpo_index[x])
            y = d.idom[y];
        }
        best = x;
      }
      if (best != d.idom[b]) {
        d.idom[b] = best;
        changed = true;
      }
    }
  }
  return d;
}

bool Dominators::dominates(std::uint32_t a, std::uint32_t b) const {
  while (true) {
    if (a == b)
      return true;
    if (b == 0 || idom[b] == UINT32_MAX)
      return false;
    b = idom[b];
  }
}

// ---------------------------------------------------------------------------
// Verifier

namespace {

bool is_numeric(Type t) { return t == Type::I32 || t == Type::I64 || t == Type::F32 || t == Type::F64; }
bool is_value(Type t) { return t != Type::Void; }

class Verifier {
public:
  explicit Verifier(const Module &m) : m_(m) {}

  std::vector<std::string> run() {
    std::set<std::string> names;
    for (const auto &g : m_.globals) {
      if (!names.insert(g.name).second)
        problem("duplicate symbol @" + g.name);
      bool decl = g.linkage == Linkage::ExternalDecl;
      if (!decl && g.init.size() != g.size)
        problem("global @" + g.name + " initializer has " + std::to_string(g.init.size()) + " bytes, expected " +
                std::to_string(g.size));
      if (decl && !g.init.empty())
        problem("declared global @" + g.name + " has an initializer");
      if (g.align == 0 || (g.align & (g.align - 1)))
        problem("global @" + g.name + " has bad alignment");
    }
    for (const auto &f : m_.functions) {
      if (!names.insert(f.name).second)
        problem("duplicate symbol @" + f.name);
      function(f);
    }
    return std::move(problems_);
  }

private:
  void problem(std::string p) { problems_.push_back(std::move(p)); }

  void function(const Function &f) {
    fn_ = &f;
    bool decl = f.linkage == Linkage::ExternalDecl;
    if (decl != f.is_declaration()) {
      problem("@" + f.name + ": declarations must have external linkage and no body");
      return;
    }
    types_.clear();
    def_block_.clear();
    for (const auto &p : f.params) {
      if (p.reg == 0 || p.reg >= f.next_reg || !types_.emplace(p.reg, p.type).second)
        problem("@" + f.name + ": bad parameter register " + reg(p.reg));
      if (!is_value(p.type))
        problem("@" + f.name + ": void parameter");
      def_block_[p.reg] = {UINT32_MAX, 0};
      if (p.unique_object && p.type != Type::Ptr)
        problem("@" + f.name + ": unique_object on a non-pointer parameter");
    }
    if (decl)
      return;
    // Definitions first so that uses in any block can be typed.
    for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
      const auto &insts = f.blocks[b].insts;
      if (insts.empty()) {
        problem(where(b) + "empty block");
        continue;
      }
      for (std::size_t i = 0; i < insts.size(); ++i) {
        const auto &in = insts[i];
        bool last = i + 1 == insts.size();
        if (is_terminator(in.op) != last)
          problem(where(b) + (last ? "block does not end in a terminator" : "terminator in the middle of a block"));
        if (in.dst) {
          if (in.dst >= f.next_reg || !types_.emplace(in.dst, in.type).second)
            problem(where(b) + "register " + reg(in.dst) + " defined twice or out of range");
          def_block_[in.dst] = {b, static_cast<std::uint32_t>(i)};
        }
        for (auto t : in.targets)
          if (t >= f.blocks.size())
            problem(where(b) + "branch to missing block bb" + std::to_string(t));
      }
    }
    dom_ = compute_dominators(f);
    for (std::uint32_t b = 0; b < f.blocks.size(); ++b)
      for (std::size_t i = 0; i < f.blocks[b].insts.size(); ++i)
        inst(b, static_cast<std::uint32_t>(i), f.blocks[b].insts[i]);
  }

  std::string where(std::uint32_t b) const { return "@" + fn_->name + " bb" + std::to_string(b) + ": "; }

  Type use(std::uint32_t b, std::uint32_t i, Reg r) {
    auto it = types_.find(r);
    if (r == 0 || it == types_.end()) {
      problem(where(b) + "use of undefined register " + reg(r));
      return Type::Void;
    }
    if (dom_.reachable[b]) {
      auto [db, di] = def_block_[r];
      bool ok = db == UINT32_MAX || (db == b ? di < i : (dom_.reachable[db] && dom_.dominates(db, b)));
      if (!ok)
        problem(where(b) + "register " + reg(r) + " does not dominate its use");
    }
    return it->second;
  }

  void expect(std::uint32_t b, bool cond, const Inst &in, const std::string &what) {
    if (!cond)
      problem(where(b) + op_name(in.op) + ": " + what);
  }

  void inst(std::uint32_t b, std::uint32_t i, const Inst &in) {
    std::vector<Type> at;
    for (auto r : in.args)
      at.push_back(use(b, i, r));
    auto argc = [&](std::size_t n) {
      expect(b, in.args.size() == n, in, "expects " + std::to_string(n) + " operands");
      return in.args.size() == n;
    };
    bool needs_dst = in.type != Type::Void;
    expect(b, needs_dst == (in.dst != 0), in, "result register presence disagrees with result type");
    switch (in.op) {
    case Op::Const:
      argc(0);
      expect(b, in.type != Type::Void && in.type != Type::Ptr && in.type != Type::Handle, in, "bad constant type");
      break;
    case Op::GlobalAddr:
      argc(0);
      expect(b, in.type == Type::Ptr && m_.find_global(in.sym), in, "unknown global @" + in.sym);
      break;
    case Op::Alloca:
      argc(0);
      expect(b, in.type == Type::Ptr && in.imm2 != 0 && !(in.imm2 & (in.imm2 - 1)), in, "bad alloca");
      break;
    case Op::Load:
      if (argc(1))
        expect(b, at[0] == Type::Ptr && is_value(in.type) && in.type != Type::Handle, in, "bad load");
      break;
    case Op::Store:
      if (argc(2))
        expect(b, at[0] == Type::Ptr && at[1] == in.vtype && in.type == Type::Void, in, "bad store");
      break;
    case Op::Elem:
      if (argc(2))
        expect(b, at[0] == Type::Ptr && (at[1] == Type::I32 || at[1] == Type::I64) && in.type == Type::Ptr, in,
               "bad element address");
      break;
    case Op::Field:
      if (argc(1))
        expect(b, at[0] == Type::Ptr && in.type == Type::Ptr, in, "bad field address");
      break;
    case Op::Bin:
      if (argc(2))
        expect(b, is_numeric(in.type) && at[0] == in.type && at[1] == in.type && in.imm < 5, in, "bad operands");
      break;
    case Op::Un:
      if (argc(1)) {
        bool neg = in.imm == static_cast<std::uint64_t>(UnOp::Neg);
        expect(b, at[0] == in.type && (neg ? is_numeric(in.type) : in.type == Type::Bool) && in.imm < 2, in,
               "bad operand");
      }
      break;
    case Op::Cmp:
      if (argc(2))
        expect(b, in.type == Type::Bool && at[0] == in.vtype && at[1] == in.vtype && in.imm < 6, in,
               "bad comparison");
      break;
    case Op::Cast:
      if (argc(1))
        expect(b, at[0] == in.vtype && (is_numeric(in.vtype) || in.vtype == Type::Bool) && is_numeric(in.type), in,
               "bad conversion");
      break;
    case Op::Call: {
      const auto *callee = m_.find_function(in.sym);
      if (!callee) {
        expect(b, false, in, "call to unknown @" + in.sym);
        break;
      }
      bool ok = callee->params.size() == at.size() && callee->ret == in.type;
      for (std::size_t k = 0; ok && k < at.size(); ++k)
        ok = callee->params[k].type == at[k];
      expect(b, ok, in, "signature mismatch calling @" + in.sym);
      break;
    }
    case Op::CallIndirect: {
      bool ok = !at.empty() && at[0] == Type::Handle && in.types.size() + 1 == at.size();
      for (std::size_t k = 0; ok && k < in.types.size(); ++k)
        ok = in.types[k] == at[k + 1];
      expect(b, ok, in, "bad indirect call");
      break;
    }
    case Op::JitRequest: {
      bool ok = in.type == Type::Handle && in.types == at;
      for (auto t : at)
        ok = ok && (t == Type::I32 || t == Type::I64 || t == Type::Str || t == Type::Ptr);
      expect(b, ok, in, "bad runtime arguments");
      break;
    }
    case Op::Intrinsic: {
      bool ok = false;
      if (in.sym == "argc")
        ok = at.empty() && in.type == Type::I32;
      else if (in.sym == "argv")
        ok = at == std::vector<Type>{Type::I32} && in.type == Type::Str;
      else if (in.sym == "atoi")
        ok = at == std::vector<Type>{Type::Str} && in.type == Type::I32;
      else if (in.sym == "atol")
        ok = at == std::vector<Type>{Type::Str} && in.type == Type::I64;
      expect(b, ok, in, "bad intrinsic " + in.sym);
      break;
    }
    case Op::Print:
      expect(b, in.types == at && in.type == Type::Void, in, "operand tags disagree");
      break;
    case Op::Br:
      expect(b, at.empty() && in.targets.size() == 1, in, "malformed branch");
      break;
    case Op::CondBr:
      expect(b, at.size() == 1 && at[0] == Type::Bool && in.targets.size() == 2, in, "malformed branch");
      break;
    case Op::Ret:
      if (fn_->ret == Type::Void)
        expect(b, at.empty(), in, "value returned from void function");
      else
        expect(b, at.size() == 1 && at[0] == fn_->ret && in.vtype == fn_->ret, in, "return type mismatch");
      break;
    case Op::Unreachable:
      argc(0);
      break;
    }
    if (!is_terminator(in.op))
      expect(b, in.targets.empty(), in, "non-branch with targets");
  }

  const Module &m_;
  const Function *fn_ = nullptr;
  std::map<Reg, Type> types_;
  std::map<Reg, std::pair<std::uint32_t, std::uint32_t>> def_block_;
  Dominators dom_;
  std::vector<std::string> problems_;
};

} // namespace

std::vector<std::string> verify(const Module &m) { return Verifier(m).run(); }

void verify_or_throw(const Module &m, const std::string &when) {
  auto problems = verify(m);
  if (problems.empty())
    return;
  std::string msg = "IR verification failed " + when + ":";
  for (const auto &p : problems)
    msg += "\n  " + p;
  throw Error(msg);
}

// ---------------------------------------------------------------------------
// Serialization

namespace {

constexpr std::uint16_t kIrVersion = 1;

template <class E> E read_enum(ByteReader &r, E max) {
  auto v = r.u8();
  if (v > static_cast<std::uint8_t>(max))
    r.fail("enumerator out of range");
  return static_cast<E>(v);
}

} // namespace

Bytes serialize(const Module &m) {
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t *>("MTIR"), 4));
  w.u16(kIrVersion);
  w.str(m.tu_name);
  w.u32(static_cast<std::uint32_t>(m.globals.size()));
  for (const auto &g : m.globals) {
    w.str(g.name);
    w.str(g.type_name);
    w.u64(g.size);
    w.u64(g.align);
    w.u8(static_cast<std::uint8_t>(g.linkage));
    w.u32(static_cast<std::uint32_t>(g.init.size()));
    w.raw(g.init);
  }
  w.u32(static_cast<std::uint32_t>(m.functions.size()));
  for (const auto &f : m.functions) {
    w.str(f.name);
    w.u8(static_cast<std::uint8_t>(f.linkage));
    w.u8(static_cast<std::uint8_t>(f.ret));
    w.u32(f.next_reg);
    w.u32(static_cast<std::uint32_t>(f.params.size()));
    for (const auto &p : f.params) {
      w.u32(p.reg);
      w.u8(static_cast<std::uint8_t>(p.type));
      w.u8(p.unique_object);
    }
    w.u32(static_cast<std::uint32_t>(f.blocks.size()));
    for (const auto &b : f.blocks) {
      w.u32(static_cast<std::uint32_t>(b.insts.size()));
      for (const auto &in : b.insts) {
        w.u8(static_cast<std::uint8_t>(in.op));
        w.u8(static_cast<std::uint8_t>(in.type));
        w.u8(static_cast<std::uint8_t>(in.vtype));
        w.u32(in.dst);
        w.u32(static_cast<std::uint32_t>(in.args.size()));
        for (auto a : in.args)
          w.u32(a);
        w.u64(in.imm);
        w.u64(in.imm2);
        w.str(in.sym);
        w.u32(static_cast<std::uint32_t>(in.targets.size()));
        for (auto t : in.targets)
          w.u32(t);
        w.u32(static_cast<std::uint32_t>(in.types.size()));
        for (auto t : in.types)
          w.u8(static_cast<std::uint8_t>(t));
      }
    }
  }
  return w.take();
}

Module deserialize(ByteView bytes) {
  ByteReader r(bytes, "IR");
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "MTIR")
    r.fail("bad magic");
  if (r.u16() != kIrVersion)
    r.fail("unsupported version");
  Module m;
  m.tu_name = r.str();
  auto ng = r.count(30);
  for (std::uint32_t i = 0; i < ng; ++i) {
    Global g;
    g.name = r.str();
    g.type_name = r.str();
    g.size = r.u64();
    g.align = r.u64();
    g.linkage = read_enum(r, Linkage::AvailableForInlining);
    auto n = r.count(1);
    auto raw = r.raw(n);
    g.init.assign(raw.begin(), raw.end());
    m.globals.push_back(std::move(g));
  }
  auto nf = r.count(18);
  for (std::uint32_t i = 0; i < nf; ++i) {
    Function f;
    f.name = r.str();
    f.linkage = read_enum(r, Linkage::AvailableForInlining);
    f.ret = read_enum(r, Type::Handle);
    f.next_reg = r.u32();
    auto np = r.count(6);
    for (std::uint32_t k = 0; k < np; ++k) {
      Param p;
      p.reg = r.u32();
      p.type = read_enum(r, Type::Handle);
      auto u = r.u8();
      if (u > 1)
        r.fail("bad flag");
      p.unique_object = u;
      f.params.push_back(p);
    }
    auto nb = r.count(4);
    for (std::uint32_t k = 0; k < nb; ++k) {
      Block b;
      auto ni = r.count(39);
      for (std::uint32_t j = 0; j < ni; ++j) {
        Inst in;
        in.op = read_enum(r, Op::Unreachable);
        in.type = read_enum(r, Type::Handle);
        in.vtype = read_enum(r, Type::Handle);
        in.dst = r.u32();
        auto na = r.count(4);
        for (std::uint32_t a = 0; a < na; ++a)
          in.args.push_back(r.u32());
        in.imm = r.u64();
        in.imm2 = r.u64();
        in.sym = r.str();
        auto nt = r.count(4);
        for (std::uint32_t a = 0; a < nt; ++a)
          in.targets.push_back(r.u32());
        auto nty = r.count(1);
        for (std::uint32_t a = 0; a < nty; ++a)
          in.types.push_back(read_enum(r, Type::Handle));
        b.insts.push_back(std::move(in));
      }
      f.blocks.push_back(std::move(b));
    }
    m.functions.push_back(std::move(f));
  }
  r.expect_end();
  auto problems = verify(m);
  if (!problems.empty())
    throw FormatError("IR payload is malformed: " + problems.front());
  return m;
}

} // namespace mtjit::ir
