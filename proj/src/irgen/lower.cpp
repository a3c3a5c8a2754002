#include <algorithm>

#include "mtjit/ir/irgen.hpp"
#include "mtjit/support/numeric.hpp"

namespace mtjit::irgen {

using sema::TExpr;
using sema::TStmt;
using sema::TypeId;
using sema::TypeTable;

ir::Type lower_type(const TypeTable &types, TypeId t) {
  switch (types.info(t).kind) {
  case sema::TypeKind::Void: return ir::Type::Void;
  case sema::TypeKind::I32: return ir::Type::I32;
  case sema::TypeKind::I64: return ir::Type::I64;
  case sema::TypeKind::F32: return ir::Type::F32;
  case sema::TypeKind::F64: return ir::Type::F64;
  case sema::TypeKind::Bool: return ir::Type::Bool;
  case sema::TypeKind::Str: return ir::Type::Str;
  case sema::TypeKind::GlobalRef: return ir::Type::Ptr;
  default: return ir::Type::Ptr;
  }
}

namespace {

num::Scalar scalar(ir::Type t) {
  switch (t) {
  case ir::Type::I32: return num::Scalar::I32;
  case ir::Type::I64: return num::Scalar::I64;
  case ir::Type::F32: return num::Scalar::F32;
  case ir::Type::F64: return num::Scalar::F64;
  default: return num::Scalar::Bool;
  }
}

std::uint64_t arith_code(ast::BinaryOp op) {
  switch (op) {
  case ast::BinaryOp::Add: return static_cast<std::uint64_t>(num::Arith::Add);
  case ast::BinaryOp::Sub: return static_cast<std::uint64_t>(num::Arith::Sub);
  case ast::BinaryOp::Mul: return static_cast<std::uint64_t>(num::Arith::Mul);
  case ast::BinaryOp::Div: return static_cast<std::uint64_t>(num::Arith::Div);
  default: return static_cast<std::uint64_t>(num::Arith::Rem);
  }
}

std::uint64_t compare_code(ast::BinaryOp op) {
  switch (op) {
  case ast::BinaryOp::Eq: return static_cast<std::uint64_t>(num::Compare::Eq);
  case ast::BinaryOp::Ne: return static_cast<std::uint64_t>(num::Compare::Ne);
  case ast::BinaryOp::Lt: return static_cast<std::uint64_t>(num::Compare::Lt);
  case ast::BinaryOp::Le: return static_cast<std::uint64_t>(num::Compare::Le);
  case ast::BinaryOp::Gt: return static_cast<std::uint64_t>(num::Compare::Gt);
  default: return static_cast<std::uint64_t>(num::Compare::Ge);
  }
}

class Lowerer {
public:
  Lowerer(const sema::TypedFunction &f, const sema::SemaModule &m) : src_(f), m_(m), t_(m.types) {}

  ir::Function run() {
    out_.name = src_.symbol;
    out_.ret = lower_type(t_, src_.ret);
    if (src_.is_extern)
      out_.linkage = ir::Linkage::ExternalDecl;
    else if (src_.exported)
      out_.linkage = ir::Linkage::Exported;
    else
      out_.linkage = ir::Linkage::Local;
    for (const auto &p : src_.params)
      out_.params.push_back({out_.fresh(), lower_type(t_, p.type), p.unique_object});
    if (src_.is_extern)
      return std::move(out_);
    slots_.assign(src_.locals.size(), 0);
    start_block();
    for (std::size_t i = src_.hidden_params; i < src_.params.size(); ++i) {
      auto local = static_cast<std::uint32_t>(i - src_.hidden_params);
      auto slot = alloca_for(src_.locals[local].type);
      slots_[local] = slot;
      store(slot, out_.params[i].reg, out_.params[i].type);
    }
    block(src_.body);
    if (!terminated()) {
      ir::Inst in;
      in.op = out_.ret == ir::Type::Void ? ir::Op::Ret : ir::Op::Unreachable;
      emit(std::move(in));
    }
    return std::move(out_);
  }

private:
  // -- emission helpers ------------------------------------------------------

  std::uint32_t start_block() {
    out_.blocks.emplace_back();
    cur_ = static_cast<std::uint32_t>(out_.blocks.size() - 1);
    return cur_;
  }

  std::uint32_t new_block() {
    out_.blocks.emplace_back();
    return static_cast<std::uint32_t>(out_.blocks.size() - 1);
  }

  void switch_to(std::uint32_t b) { cur_ = b; }

  bool terminated() const {
    const auto &insts = out_.blocks[cur_].insts;
    return !insts.empty() && ir::is_terminator(insts.back().op);
  }

  ir::Reg emit(ir::Inst in) {
    if (terminated())
      start_block();  // code after a return lands in an unreachable block
    if (in.type != ir::Type::Void)
      in.dst = out_.fresh();
    auto dst = in.dst;
    out_.blocks[cur_].insts.push_back(std::move(in));
    return dst;
  }

  void br(std::uint32_t target) {
    ir::Inst in;
    in.op = ir::Op::Br;
    in.targets = {target};
    emit(std::move(in));
  }

  ir::Reg constant(ir::Type t, std::uint64_t bits) {
    ir::Inst in;
    in.op = ir::Op::Const;
    in.type = t;
    in.imm = bits;
    return emit(std::move(in));
  }

  ir::Reg alloca_for(TypeId t) {
    ir::Inst in;
    in.op = ir::Op::Alloca;
    in.type = ir::Type::Ptr;
    if (t == TypeTable::kStr) {
      in.imm = 8;
      in.imm2 = 8;
    } else {
      auto l = t_.layout(t);
      in.imm = l.size;
      in.imm2 = l.align;
    }
    return emit(std::move(in));
  }

  void store(ir::Reg ptr, ir::Reg value, ir::Type vt) {
    ir::Inst in;
    in.op = ir::Op::Store;
    in.vtype = vt;
    in.args = {ptr, value};
    emit(std::move(in));
  }

  ir::Reg load(ir::Reg ptr, ir::Type t) {
    ir::Inst in;
    in.op = ir::Op::Load;
    in.type = t;
    in.args = {ptr};
    return emit(std::move(in));
  }

  // -- expressions -----------------------------------------------------------

  ir::Reg address(const TExpr &e) {
    switch (e.kind) {
    case TExpr::Kind::Local:
      return slots_.at(e.index);
    case TExpr::Kind::Global: {
      ir::Inst in;
      in.op = ir::Op::GlobalAddr;
      in.type = ir::Type::Ptr;
      in.sym = e.text;
      return emit(std::move(in));
    }
    case TExpr::Kind::Deref:
      return value(e.kids[0]);
    case TExpr::Kind::Index: {
      auto base = address(e.kids[0]);
      auto idx = value(e.kids[1]);
      const auto &arr = t_.info(e.kids[0].type);
      ir::Inst in;
      in.op = ir::Op::Elem;
      in.type = ir::Type::Ptr;
      in.args = {base, idx};
      in.imm = t_.layout(arr.element).size;
      in.imm2 = static_cast<std::uint64_t>(arr.count);
      return emit(std::move(in));
    }
    case TExpr::Kind::Field: {
      auto base = address(e.kids[0]);
      ir::Inst in;
      in.op = ir::Op::Field;
      in.type = ir::Type::Ptr;
      in.args = {base};
      in.imm = t_.layout(e.kids[0].type).offsets.at(e.index);
      return emit(std::move(in));
    }
    default:
      throw Error("lowering: expression is not addressable");
    }
  }

  ir::Reg value(const TExpr &e) {
    auto ty = lower_type(t_, e.type);
    switch (e.kind) {
    case TExpr::Kind::IntConst:
      return constant(ty, num::from_int(scalar(ty), e.ival));
    case TExpr::Kind::FloatConst:
      return constant(ty, num::from_double(scalar(ty), e.fval));
    case TExpr::Kind::BoolConst:
      return constant(ty, e.ival != 0);
    case TExpr::Kind::StrConst: {
      ir::Inst in;
      in.op = ir::Op::Const;
      in.type = ir::Type::Str;
      in.sym = e.text;
      return emit(std::move(in));
    }
    case TExpr::Kind::Local:
    case TExpr::Kind::Global:
    case TExpr::Kind::Deref:
    case TExpr::Kind::Index:
    case TExpr::Kind::Field:
      return load(address(e), ty);
    case TExpr::Kind::RefParam:
      return out_.params.at(e.index).reg;
    case TExpr::Kind::AddrOf: {
      ir::Inst in;
      in.op = ir::Op::GlobalAddr;
      in.type = ir::Type::Ptr;
      in.sym = e.text;
      return emit(std::move(in));
    }
    case TExpr::Kind::Unary: {
      auto a = value(e.kids[0]);
      ir::Inst in;
      in.op = ir::Op::Un;
      in.type = ty;
      in.imm = static_cast<std::uint64_t>(e.unop == ast::UnaryOp::Neg ? ir::UnOp::Neg : ir::UnOp::Not);
      in.args = {a};
      return emit(std::move(in));
    }
    case TExpr::Kind::Binary: {
      auto a = value(e.kids[0]);
      auto b = value(e.kids[1]);
      ir::Inst in;
      in.args = {a, b};
      in.type = ty;
      if (ast::is_comparison(e.binop)) {
        in.op = ir::Op::Cmp;
        in.vtype = lower_type(t_, e.kids[0].type);
        in.imm = compare_code(e.binop);
      } else {
        in.op = ir::Op::Bin;
        in.imm = arith_code(e.binop);
      }
      return emit(std::move(in));
    }
    case TExpr::Kind::Cast: {
      auto a = value(e.kids[0]);
      ir::Inst in;
      in.op = ir::Op::Cast;
      in.type = ty;
      in.vtype = lower_type(t_, e.kids[0].type);
      in.args = {a};
      return emit(std::move(in));
    }
    case TExpr::Kind::Call: {
      ir::Inst in;
      in.op = ir::Op::Call;
      in.type = ty;
      in.sym = e.text;
      for (const auto &k : e.kids)
        in.args.push_back(value(k));
      return emit(std::move(in));
    }
    case TExpr::Kind::JitCall:
      return jit_call(e, ty);
    case TExpr::Kind::Intrinsic: {
      ir::Inst in;
      in.op = ir::Op::Intrinsic;
      in.type = ty;
      in.sym = e.text;
      for (const auto &k : e.kids)
        in.args.push_back(value(k));
      return emit(std::move(in));
    }
    }
    throw Error("lowering: unknown expression");
  }

  /// Evaluates the runtime template arguments, asks the runtime for the
  /// instantiation, then calls it with the ordinary arguments.
  ir::Reg jit_call(const TExpr &e, ir::Type ty) {
    const auto &site = m_.jit_sites.at(e.index);
    ir::Inst req;
    req.op = ir::Op::JitRequest;
    req.type = ir::Type::Handle;
    req.imm = site.site_id;
    req.sym = site.mangled;
    for (std::uint32_t i = 0; i < e.wildcard_count; ++i) {
      req.args.push_back(value(e.kids[i]));
      req.types.push_back(lower_type(t_, e.kids[i].type));
    }
    auto handle = emit(std::move(req));
    ir::Inst call;
    call.op = ir::Op::CallIndirect;
    call.type = ty;
    call.args = {handle};
    for (std::size_t i = e.wildcard_count; i < e.kids.size(); ++i) {
      call.args.push_back(value(e.kids[i]));
      call.types.push_back(lower_type(t_, e.kids[i].type));
    }
    return emit(std::move(call));
  }

  // -- statements -----------------------------------------------------------

  void block(const std::vector<TStmt> &body) {
    for (const auto &s : body)
      stmt(s);
  }

  void stmt(const TStmt &s) {
    switch (s.kind) {
    case TStmt::Kind::Let: {
      auto type = src_.locals.at(s.local).type;
      ir::Reg init = 0;
      if (!s.exprs.empty())
        init = value(s.exprs[0]);
      auto slot = alloca_for(type);
      slots_.at(s.local) = slot;
      if (init)
        store(slot, init, lower_type(t_, type));
      return;
    }
    case TStmt::Kind::Assign: {
      auto ptr = address(s.exprs[0]);
      auto v = value(s.exprs[1]);
      store(ptr, v, lower_type(t_, s.exprs[0].type));
      return;
    }
    case TStmt::Kind::For:
      loop(s);
      return;
    case TStmt::Kind::If: {
      auto cond = value(s.exprs[0]);
      auto then_b = new_block();
      auto else_b = s.else_body.empty() ? 0 : new_block();
      auto join = new_block();
      ir::Inst in;
      in.op = ir::Op::CondBr;
      in.args = {cond};
      in.targets = {then_b, s.else_body.empty() ? join : else_b};
      emit(std::move(in));
      switch_to(then_b);
      block(s.body);
      if (!terminated())
        br(join);
      if (!s.else_body.empty()) {
        switch_to(else_b);
        block(s.else_body);
        if (!terminated())
          br(join);
      }
      switch_to(join);
      return;
    }
    case TStmt::Kind::Return: {
      ir::Inst in;
      in.op = ir::Op::Ret;
      if (!s.exprs.empty()) {
        in.args = {value(s.exprs[0])};
        in.vtype = lower_type(t_, s.exprs[0].type);
      }
      emit(std::move(in));
      return;
    }
    case TStmt::Kind::Expr:
      value(s.exprs[0]);
      return;
    case TStmt::Kind::Print: {
      ir::Inst in;
      in.op = ir::Op::Print;
      for (const auto &a : s.exprs) {
        in.args.push_back(value(a));
        in.types.push_back(lower_type(t_, a.type));
      }
      emit(std::move(in));
      return;
    }
    }
  }

  void loop(const TStmt &s) {
    auto ty = lower_type(t_, s.exprs[0].type);
    auto lo = value(s.exprs[0]);
    auto hi = value(s.exprs[1]);
    auto iv = alloca_for(s.exprs[0].type);
    slots_.at(s.local) = iv;
    store(iv, lo, ty);
    auto header = new_block();
    auto body = new_block();
    auto latch = new_block();
    auto exit = new_block();
    br(header);

    switch_to(header);
    auto cur = load(iv, ty);
    ir::Inst cmp;
    cmp.op = ir::Op::Cmp;
    cmp.type = ir::Type::Bool;
    cmp.vtype = ty;
    cmp.imm = static_cast<std::uint64_t>(num::Compare::Lt);
    cmp.args = {cur, hi};
    auto c = emit(std::move(cmp));
    ir::Inst cbr;
    cbr.op = ir::Op::CondBr;
    cbr.args = {c};
    cbr.targets = {body, exit};
    emit(std::move(cbr));

    switch_to(body);
    block(s.body);
    if (!terminated())
      br(latch);

    switch_to(latch);
    auto again = load(iv, ty);
    auto one = constant(ty, 1);
    ir::Inst add;
    add.op = ir::Op::Bin;
    add.type = ty;
    add.imm = static_cast<std::uint64_t>(num::Arith::Add);
    add.args = {again, one};
    auto next = emit(std::move(add));
    store(iv, next, ty);
    br(header);

    switch_to(exit);
  }

  const sema::TypedFunction &src_;
  const sema::SemaModule &m_;
  const TypeTable &t_;
  ir::Function out_;
  std::vector<ir::Reg> slots_;
  std::uint32_t cur_ = 0;
};

} // namespace

ir::Function lower_function(const sema::TypedFunction &f, const sema::SemaModule &sema) {
  return Lowerer(f, sema).run();
}

ir::Global lower_global(const sema::GlobalInfo &g, const sema::SemaModule &sema) {
  ir::Global out;
  out.name = g.name;
  out.type_name = sema.types.name(g.type);
  auto l = sema.types.layout(g.type);
  out.size = l.size;
  out.align = l.align;
  if (g.is_extern) {
    out.linkage = ir::Linkage::ExternalDecl;
    return out;
  }
  out.linkage = g.exported ? ir::Linkage::Exported : ir::Linkage::Local;
  out.init.assign(l.size, 0);
  if (g.init) {
    auto bytes = sema::constant_bytes(sema.types, *g.init);
    std::copy(bytes.begin(), bytes.end(), out.init.begin());
  }
  return out;
}

ir::Module emit_module(const sema::SemaModule &sema) {
  ir::Module m;
  m.tu_name = sema.ast.tu_name;
  for (const auto &g : sema.globals)
    m.globals.push_back(lower_global(g, sema));
  for (const auto &f : sema.functions)
    m.functions.push_back(lower_function(f, sema));
  return m;
}

std::vector<PackedTag> packed_tags(const sema::JitSite &site) {
  std::vector<PackedTag> out;
  for (const auto &a : site.pattern) {
    switch (a.kind) {
    case sema::TemplateArg::Kind::RuntimeInt:
      out.push_back(a.width == ast::Builtin::I64 ? PackedTag::Int64 : PackedTag::Int32);
      break;
    case sema::TemplateArg::Kind::RuntimeTypeString:
      out.push_back(PackedTag::TypeString);
      break;
    case sema::TemplateArg::Kind::RuntimeGlobalRef:
      out.push_back(PackedTag::GlobalRef);
      break;
    default:
      break;
    }
  }
  return out;
}

LocalSymbols collect_local_symbols(const ir::Module &m) {
  LocalSymbols out;
  std::uint32_t slot = 0;
  for (const auto &g : m.globals)
    if (g.linkage == ir::Linkage::Local)
      out.emplace(g.name, slot++);
  for (const auto &f : m.functions)
    if (f.linkage == ir::Linkage::Local)
      out.emplace(f.name, slot++);
  return out;
}

} // namespace mtjit::irgen
