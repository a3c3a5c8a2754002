#include "mtjit/sema/sema.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <limits>
#include <set>

#include "mtjit/frontend/parser.hpp"
#include "mtjit/ir/mangle.hpp"
#include "mtjit/support/error.hpp"
#include "mtjit/support/numeric.hpp"

namespace mtjit::sema {

using namespace ast;

namespace {

const std::set<std::string, std::less<>> kReserved = {"argc", "argv", "atoi", "atol", "len", "sizeof"};

struct Binding {
  enum class Kind : std::uint8_t { Type, Int, Ref, UnknownType, UnknownInt, UnknownRef };
  Kind kind = Kind::Type;
  TypeId type = 0;          // Type, or Ref pointee
  std::int64_t value = 0;
  Builtin width = Builtin::I32;
  std::string global;       // Ref referent
  std::uint32_t hidden = 0; // Ref hidden parameter index
  bool has_hidden = false;
};
using Env = std::map<std::string, Binding, std::less<>>;

TypeId builtin_type(Builtin b) {
  switch (b) {
  case Builtin::I32: return TypeTable::kI32;
  case Builtin::I64: return TypeTable::kI64;
  case Builtin::F32: return TypeTable::kF32;
  case Builtin::F64: return TypeTable::kF64;
  case Builtin::Bool: return TypeTable::kBool;
  case Builtin::Str: return TypeTable::kStr;
  }
  return TypeTable::kVoid;
}

num::Scalar scalar_of(TypeId t) {
  switch (t) {
  case TypeTable::kI32: return num::Scalar::I32;
  case TypeTable::kI64: return num::Scalar::I64;
  case TypeTable::kF32: return num::Scalar::F32;
  case TypeTable::kF64: return num::Scalar::F64;
  default: return num::Scalar::Bool;
  }
}

std::uint64_t const_bits(const TExpr &e) {
  switch (e.kind) {
  case TExpr::Kind::IntConst: return num::from_int(scalar_of(e.type), e.ival);
  case TExpr::Kind::FloatConst: return num::from_double(scalar_of(e.type), e.fval);
  case TExpr::Kind::BoolConst: return e.ival != 0;
  default: return 0;
  }
}

TExpr make_const(TypeId type, std::uint64_t bits, Span span) {
  TExpr e;
  e.type = type;
  e.span = span;
  if (type == TypeTable::kBool) {
    e.kind = TExpr::Kind::BoolConst;
    e.ival = bits != 0;
  } else if (type == TypeTable::kF32 || type == TypeTable::kF64) {
    e.kind = TExpr::Kind::FloatConst;
    e.fval = num::to_double(scalar_of(type), bits);
  } else {
    e.kind = TExpr::Kind::IntConst;
    e.ival = num::to_int(scalar_of(type), bits);
  }
  return e;
}

num::Arith arith_of(BinaryOp op) {
  switch (op) {
  case BinaryOp::Add: return num::Arith::Add;
  case BinaryOp::Sub: return num::Arith::Sub;
  case BinaryOp::Mul: return num::Arith::Mul;
  case BinaryOp::Div: return num::Arith::Div;
  default: return num::Arith::Rem;
  }
}

num::Compare compare_of(BinaryOp op) {
  switch (op) {
  case BinaryOp::Eq: return num::Compare::Eq;
  case BinaryOp::Ne: return num::Compare::Ne;
  case BinaryOp::Lt: return num::Compare::Lt;
  case BinaryOp::Le: return num::Compare::Le;
  case BinaryOp::Gt: return num::Compare::Gt;
  default: return num::Compare::Ge;
  }
}

bool is_literal(const Expr &e) {
  if (e.kind == Expr::Kind::IntLit || e.kind == Expr::Kind::FloatLit)
    return true;
  return e.kind == Expr::Kind::Unary && e.unop == UnaryOp::Neg && is_literal(e.operands[0]);
}

/// Per-function checking state.
struct FnCtx {
  TypedFunction *fn = nullptr;   // null in constant contexts
  Env env;
  std::vector<std::map<std::string, std::uint32_t, std::less<>>> scopes;
  std::string instance;          // symbol being instantiated, for notes
};

class Checker {
public:
  explicit Checker(SemaModule &m) : m_(m), t_(m.types) {}

  [[noreturn]] void fail(Span s, const std::string &msg) {
    throw SemaError({Diagnostic{m_.ast.tu_name, s.offset, Severity::Error, msg}});
  }

  // -- declarations ---------------------------------------------------------

  const Decl *lookup_decl(std::string_view name) const {
    auto it = m_.decl_index.find(std::string(name));
    return it == m_.decl_index.end() ? nullptr : &m_.ast.decls[it->second];
  }

  // -- types ----------------------------------------------------------------

  TypeId resolve_type(const TypeExpr &t, const Env &env) {
    switch (t.kind) {
    case TypeExpr::Kind::Builtin:
      return builtin_type(t.builtin);
    case TypeExpr::Kind::GlobalRef: {
      auto pointee = resolve_type(*t.element, env);
      if (pointee == TypeTable::kStr)
        fail(t.span, "global references to str are not supported");
      return t_.globalref_to(pointee);
    }
    case TypeExpr::Kind::Array: {
      auto el = resolve_type(*t.element, env);
      if (el == TypeTable::kStr)
        fail(t.span, "arrays of str are not supported");
      auto n = const_int(*t.count, env);
      if (n < 0)
        fail(t.count->span, "array size " + std::to_string(n) + " is negative");
      return t_.array_of(el, n);
    }
    case TypeExpr::Kind::Named:
      return resolve_named(t.name, t.qualified, t.span, env);
    case TypeExpr::Kind::Apply:
      return resolve_apply(t, env);
    }
    fail(t.span, "malformed type");
  }

  TypeId resolve_named(const std::string &name, bool qualified, Span span, const Env &env) {
    if (!qualified) {
      if (auto it = env.find(name); it != env.end()) {
        switch (it->second.kind) {
        case Binding::Kind::Type:
          return it->second.type;
        case Binding::Kind::UnknownType:
          fail(span, "type '" + name + "' is only known at runtime here");
        default:
          fail(span, "'" + name + "' is not a type");
        }
      }
    }
    const Decl *d = lookup_decl(name);
    if (!d)
      fail(span, "unknown type name '" + name + "'");
    if (auto *r = std::get_if<RecordDecl>(d))
      return resolve_record(*r);
    if (auto *a = std::get_if<TypeAliasDecl>(d)) {
      if (std::find(alias_stack_.begin(), alias_stack_.end(), name) != alias_stack_.end())
        fail(span, "type alias '" + name + "' refers to itself");
      alias_stack_.push_back(name);
      auto out = resolve_type(a->target, Env{});
      alias_stack_.pop_back();
      return out;
    }
    if (std::holds_alternative<RecordTemplateDecl>(*d))
      fail(span, "record template '" + name + "' requires template arguments");
    fail(span, "'" + name + "' is not a type");
  }

  TypeId resolve_record(const RecordDecl &r) {
    if (auto id = t_.find(r.name))
      return *id;
    auto id = t_.declare_record(r.name);
    t_.complete_record(id, resolve_fields(r.fields, Env{}));
    return id;
  }

  std::vector<FieldInfo> resolve_fields(const std::vector<FieldDecl> &fields, const Env &env) {
    std::vector<FieldInfo> out;
    std::set<std::string> seen;
    for (const auto &f : fields) {
      if (!seen.insert(f.name).second)
        fail(f.span, "duplicate field '" + f.name + "'");
      auto ft = resolve_type(f.type, env);
      if (ft == TypeTable::kStr)
        fail(f.span, "field '" + f.name + "' has unsized type str");
      out.push_back({f.name, ft});
    }
    return out;
  }

  TypeId resolve_apply(const TypeExpr &t, const Env &env) {
    const Decl *d = lookup_decl(t.name);
    if (!d)
      fail(t.span, "unknown type name '" + t.name + "'");
    auto *rt = std::get_if<RecordTemplateDecl>(d);
    if (!rt)
      fail(t.span, "'" + t.name + "' is not a record template");
    if (rt->tparams.size() != t.args.size())
      fail(t.span, "record template '" + t.name + "' expects " + std::to_string(rt->tparams.size()) +
                       " arguments, got " + std::to_string(t.args.size()));
    std::vector<TemplateArg> args;
    FnCtx ctx;
    ctx.env = env;
    for (std::size_t i = 0; i < t.args.size(); ++i) {
      auto in = classify(rt->tparams[i], t.args[i], ctx);
      args.push_back(match_one(rt->tparams[i], in, false));
    }
    auto canonical = irgen::mangle(rt->name, args, t_);
    if (auto id = t_.find(canonical))
      return *id;
    auto id = t_.declare_record(canonical);
    auto inner = bind(rt->tparams, args, t.span, false);
    t_.complete_record(id, resolve_fields(rt->fields, inner));
    return id;
  }

  std::int64_t const_int(const Expr &e, const Env &env) {
    FnCtx ctx;
    ctx.env = env;
    auto v = check(e, ctx, std::nullopt);
    if (v.kind != TExpr::Kind::IntConst)
      fail(e.span, "expected a constant integer expression");
    return v.ival;
  }

  std::uint64_t sized(TypeId t, Span span) {
    try {
      return t_.layout(t).size;
    } catch (const SemaError &) {
      throw;
    } catch (const Error &e) {
      fail(span, e.what());
    }
  }

  // -- template arguments ---------------------------------------------------

  /// Reads a bare or qualified name as a type if it is not a value.
  std::optional<TypeId> name_as_type(const Expr &e, FnCtx &ctx) {
    if (e.kind != Expr::Kind::Name)
      return std::nullopt;
    if (!e.qualified) {
      if (find_local(ctx, e.text))
        return std::nullopt;
      if (auto it = ctx.env.find(e.text); it != ctx.env.end()) {
        if (it->second.kind == Binding::Kind::Type || it->second.kind == Binding::Kind::UnknownType)
          return resolve_named(e.text, false, e.span, ctx.env);
        return std::nullopt;
      }
    }
    const Decl *d = lookup_decl(e.text);
    if (d && (std::holds_alternative<RecordDecl>(*d) || std::holds_alternative<TypeAliasDecl>(*d) ||
              std::holds_alternative<RecordTemplateDecl>(*d)))
      return resolve_named(e.text, e.qualified, e.span, ctx.env);
    return std::nullopt;
  }

  ArgInput classify(const TemplateParam &p, const TemplateArgExpr &a, FnCtx &ctx) {
    ArgInput in;
    if (a.is_type()) {
      in.span = a.type->span;
      if (p.kind != TemplateParam::Kind::Type)
        fail(in.span, "template parameter '" + p.name + "' expects a value, got a type");
      in.type = resolve_type(*a.type, ctx.env);
      return in;
    }
    in.span = a.expr->span;
    if (p.kind == TemplateParam::Kind::Type) {
      if (auto t = name_as_type(*a.expr, ctx)) {
        in.type = *t;
        return in;
      }
      in.value = check(*a.expr, ctx, std::nullopt);
      return in;
    }
    std::optional<TypeId> expected;
    if (p.kind == TemplateParam::Kind::Int)
      expected = builtin_type(p.width);
    in.value = check(*a.expr, ctx, expected);
    return in;
  }

  TemplateArg match_one(const TemplateParam &p, const ArgInput &in, bool jit_mode) {
    switch (p.kind) {
    case TemplateParam::Kind::Type:
      if (in.type)
        return TemplateArg::concrete_type(*in.type);
      if (in.value->type != TypeTable::kStr)
        fail(in.span, "template parameter '" + p.name + "' expects a type, got a value of type " +
                          t_.name(in.value->type));
      if (!jit_mode)
        fail(in.span, "a runtime type string requires a jit-tagged template");
      return TemplateArg::runtime_type_string();
    case TemplateParam::Kind::Int: {
      if (in.type)
        fail(in.span, "template parameter '" + p.name + "' expects an integer, got a type");
      auto want = builtin_type(p.width);
      if (in.value->type != want)
        fail(in.span, "template parameter '" + p.name + "' expects " + t_.name(want) + ", got " +
                          t_.name(in.value->type));
      if (in.value->kind == TExpr::Kind::IntConst)
        return TemplateArg::const_int(in.value->ival, p.width);
      if (!jit_mode)
        fail(in.span, "template argument for '" + p.name + "' is not a constant");
      return TemplateArg::runtime_int(p.width);
    }
    case TemplateParam::Kind::GlobalRef: {
      if (in.type)
        fail(in.span, "template parameter '" + p.name + "' expects a global reference, got a type");
      const auto &v = *in.value;
      if (!t_.is_globalref(v.type))
        fail(in.span, "template parameter '" + p.name + "' expects a global reference, got " +
                          t_.name(v.type));
      if (v.kind == TExpr::Kind::AddrOf || v.kind == TExpr::Kind::RefParam)
        return TemplateArg::global_ref(v.text);
      if (!jit_mode)
        fail(in.span, "template argument for '" + p.name + "' is not a constant global reference");
      return TemplateArg::runtime_global_ref();
    }
    }
    fail(in.span, "bad template parameter");
  }

  /// Binds template parameters; wildcards become unknown bindings.
  Env bind(const std::vector<TemplateParam> &ps, const std::vector<TemplateArg> &args, Span span,
           bool hidden_refs) {
    Env env;
    std::uint32_t hidden = 0;
    std::map<std::string, std::uint32_t> first_ref;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      const auto &p = ps[i];
      const auto &a = args[i];
      Binding b;
      switch (a.kind) {
      case TemplateArg::Kind::ConcreteType:
        b.kind = Binding::Kind::Type;
        b.type = a.type;
        break;
      case TemplateArg::Kind::ConstInt: {
        b.kind = Binding::Kind::Int;
        b.width = p.width;
        auto ty = builtin_type(p.width);
        b.value = num::to_int(scalar_of(ty), num::from_int(scalar_of(ty), a.value));
        if (b.value != a.value)
          fail(span, "value " + std::to_string(a.value) + " does not fit template parameter '" + p.name +
                         "' of type " + t_.name(ty));
        break;
      }
      case TemplateArg::Kind::GlobalRef: {
        b.kind = Binding::Kind::Ref;
        auto *g = m_.find_global(a.global);
        if (!g)
          fail(span, "global reference to unknown global '" + a.global + "'");
        auto pointee = resolve_type(*p.pointee, env);
        if (g->type != pointee)
          fail(span, "global '" + a.global + "' has type " + t_.name(g->type) + ", parameter '" + p.name +
                         "' expects " + t_.name(pointee));
        b.type = pointee;
        b.global = a.global;
        break;
      }
      case TemplateArg::Kind::RuntimeInt:
        b.kind = Binding::Kind::UnknownInt;
        b.width = p.width;
        break;
      case TemplateArg::Kind::RuntimeTypeString:
        b.kind = Binding::Kind::UnknownType;
        break;
      case TemplateArg::Kind::RuntimeGlobalRef:
        b.kind = Binding::Kind::UnknownRef;
        break;
      }
      if (p.kind == TemplateParam::Kind::GlobalRef && hidden_refs) {
        b.hidden = hidden++;
        b.has_hidden = true;
        // Uses of a repeated referent all go through its first parameter, so
        // distinct unique-object parameters never point at one object.
        if (a.kind == TemplateArg::Kind::GlobalRef) {
          auto [it, fresh] = first_ref.emplace(a.global, b.hidden);
          if (!fresh)
            b.hidden = it->second;
        }
      }
      env[p.name] = b;
    }
    return env;
  }

  // -- signatures -----------------------------------------------------------

  Signature signature_of(const FunctionDecl &f, const Env &env) {
    Signature s;
    for (const auto &p : f.params) {
      auto t = resolve_type(p.type, env);
      if (!t_.is_scalar(t))
        fail(p.span, "parameter '" + p.name + "' has aggregate type " + t_.name(t) +
                         "; aggregates cannot be passed");
      s.params.push_back(t);
    }
    if (f.return_type) {
      s.ret = resolve_type(*f.return_type, env);
      if (!t_.is_scalar(s.ret))
        fail(f.return_type->span, "function '" + f.name + "' returns aggregate type " + t_.name(s.ret));
    }
    return s;
  }

  const Signature &plain_signature(const FunctionDecl &f) {
    auto it = plain_sigs_.find(f.name);
    if (it == plain_sigs_.end())
      it = plain_sigs_.emplace(f.name, signature_of(f, Env{})).first;
    return it->second;
  }

  // -- function bodies -----------------------------------------------------

  TypedFunction check_function(const FunctionDecl &f, const Env &env, std::string symbol,
                               TypedFunction::Origin origin,
                               const std::vector<TemplateParam> *tparams) {
    TypedFunction out;
    out.symbol = std::move(symbol);
    out.source_name = f.name;
    out.origin = origin;
    out.span = f.span;
    out.is_extern = !f.has_body;
    out.exported = origin == TypedFunction::Origin::Plain && (f.exported || f.name == "main");
    if (tparams) {
      for (const auto &p : *tparams) {
        if (p.kind != TemplateParam::Kind::GlobalRef)
          continue;
        const auto &b = env.at(p.name);
        out.params.push_back({p.name, t_.globalref_to(b.type), true});
        ++out.hidden_params;
      }
    }
    auto sig = signature_of(f, env);
    out.ret = sig.ret;
    FnCtx ctx;
    ctx.fn = &out;
    ctx.env = env;
    ctx.scopes.emplace_back();
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      const auto &p = f.params[i];
      out.params.push_back({p.name, sig.params[i], false});
      declare_local(ctx, p.name, sig.params[i], true, p.span);
    }
    if (out.is_extern)
      return out;
    out.body = check_block(f.body, ctx, false);
    if (out.ret != TypeTable::kVoid && !returns(out.body))
      fail(f.span, "function '" + f.name + "' may finish without returning a value of type " +
                       t_.name(out.ret));
    return out;
  }

  static bool returns(const std::vector<TStmt> &body) {
    for (const auto &s : body) {
      if (s.kind == TStmt::Kind::Return)
        return true;
      if (s.kind == TStmt::Kind::If && !s.else_body.empty() && returns(s.body) && returns(s.else_body))
        return true;
    }
    return false;
  }

  std::uint32_t declare_local(FnCtx &ctx, const std::string &name, TypeId type, bool mut, Span span) {
    auto &scope = ctx.scopes.back();
    if (scope.count(name))
      fail(span, "redeclaration of '" + name + "'");
    auto idx = static_cast<std::uint32_t>(ctx.fn->locals.size());
    ctx.fn->locals.push_back({name, type, mut});
    scope[name] = idx;
    return idx;
  }

  std::optional<std::uint32_t> find_local(const FnCtx &ctx, std::string_view name) const {
    for (auto it = ctx.scopes.rbegin(); it != ctx.scopes.rend(); ++it)
      if (auto f = it->find(name); f != it->end())
        return f->second;
    return std::nullopt;
  }

  std::vector<TStmt> check_block(const std::vector<Stmt> &body, FnCtx &ctx, bool new_scope) {
    if (new_scope)
      ctx.scopes.emplace_back();
    std::vector<TStmt> out;
    for (const auto &s : body)
      if (auto ts = check_stmt(s, ctx))
        out.push_back(std::move(*ts));
    if (new_scope)
      ctx.scopes.pop_back();
    return out;
  }

  std::optional<TStmt> check_stmt(const Stmt &s, FnCtx &ctx) {
    TStmt out;
    out.span = s.span;
    switch (s.kind) {
    case Stmt::Kind::Let: {
      out.kind = TStmt::Kind::Let;
      std::optional<TypeId> declared;
      if (s.declared_type)
        declared = resolve_type(*s.declared_type, ctx.env);
      TypeId type;
      if (!s.exprs.empty()) {
        if (declared && t_.is_aggregate(*declared))
          fail(s.span, "aggregate initializers are not supported");
        auto init = check(s.exprs[0], ctx, declared);
        if (init.type == TypeTable::kVoid)
          fail(s.exprs[0].span, "cannot bind a value of type void");
        if (declared && init.type != *declared)
          fail(s.exprs[0].span, "'" + s.name + "' has type " + t_.name(*declared) +
                                    " but its initializer has type " + t_.name(init.type));
        if (t_.is_aggregate(init.type))
          fail(s.exprs[0].span, "aggregate initializers are not supported");
        type = init.type;
        out.exprs.push_back(std::move(init));
      } else {
        if (!declared)
          fail(s.span, "cannot infer the type of '" + s.name + "' without an initializer");
        type = *declared;
        if (t_.is_aggregate(type))
          sized(type, s.span);
      }
      out.local = declare_local(ctx, s.name, type, true, s.span);
      return out;
    }
    case Stmt::Kind::Assign: {
      out.kind = TStmt::Kind::Assign;
      auto target = check(s.exprs[0], ctx, std::nullopt);
      if (!target.is_place())
        fail(s.exprs[0].span, "cannot assign to this expression");
      if (target.kind == TExpr::Kind::Local && !ctx.fn->locals[target.index].mutable_)
        fail(s.exprs[0].span, "cannot assign to loop variable '" + ctx.fn->locals[target.index].name + "'");
      if (t_.is_aggregate(target.type))
        fail(s.exprs[0].span, "aggregate assignment is not supported");
      auto value = check(s.exprs[1], ctx, target.type);
      if (value.type != target.type)
        fail(s.exprs[1].span, "cannot assign a value of type " + t_.name(value.type) + " to a place of type " +
                                  t_.name(target.type));
      out.exprs.push_back(std::move(target));
      out.exprs.push_back(std::move(value));
      return out;
    }
    case Stmt::Kind::For: {
      out.kind = TStmt::Kind::For;
      auto [lo, hi] = check_pair(s.exprs[0], s.exprs[1], ctx, std::nullopt);
      if (lo.type != hi.type)
        fail(s.exprs[1].span, "range bounds have different types " + t_.name(lo.type) + " and " +
                                  t_.name(hi.type));
      if (!t_.is_integer(lo.type))
        fail(s.exprs[0].span, "range bounds must be integers");
      ctx.scopes.emplace_back();
      out.local = declare_local(ctx, s.name, lo.type, false, s.span);
      out.exprs.push_back(std::move(lo));
      out.exprs.push_back(std::move(hi));
      out.body = check_block(s.body, ctx, true);
      ctx.scopes.pop_back();
      return out;
    }
    case Stmt::Kind::If: {
      out.kind = TStmt::Kind::If;
      auto cond = check(s.exprs[0], ctx, TypeTable::kBool);
      if (cond.type != TypeTable::kBool)
        fail(s.exprs[0].span, "condition has type " + t_.name(cond.type) + ", expected bool");
      out.exprs.push_back(std::move(cond));
      out.body = check_block(s.body, ctx, true);
      if (s.has_else)
        out.else_body = check_block(s.else_body, ctx, true);
      return out;
    }
    case Stmt::Kind::Return: {
      out.kind = TStmt::Kind::Return;
      auto ret = ctx.fn->ret;
      if (s.exprs.empty()) {
        if (ret != TypeTable::kVoid)
          fail(s.span, "missing return value of type " + t_.name(ret));
        return out;
      }
      if (ret == TypeTable::kVoid)
        fail(s.exprs[0].span, "function without a return type cannot return a value");
      auto v = check(s.exprs[0], ctx, ret);
      if (v.type != ret)
        fail(s.exprs[0].span, "returning " + t_.name(v.type) + " from a function returning " + t_.name(ret));
      out.exprs.push_back(std::move(v));
      return out;
    }
    case Stmt::Kind::ExprStmt:
      out.kind = TStmt::Kind::Expr;
      out.exprs.push_back(check(s.exprs[0], ctx, std::nullopt));
      return out;
    case Stmt::Kind::Print:
      out.kind = TStmt::Kind::Print;
      for (const auto &a : s.exprs) {
        auto v = check(a, ctx, std::nullopt);
        if (!t_.is_scalar(v.type) || t_.is_globalref(v.type))
          fail(a.span, "cannot print a value of type " + t_.name(v.type));
        out.exprs.push_back(std::move(v));
      }
      return out;
    case Stmt::Kind::AssertConst: {
      auto v = check(s.exprs[0], ctx, TypeTable::kBool);
      if (v.type != TypeTable::kBool)
        fail(s.exprs[0].span, "assert_const expects a bool, got " + t_.name(v.type));
      if (v.kind != TExpr::Kind::BoolConst)
        fail(s.exprs[0].span, "assert_const requires a constant expression");
      if (!v.ival)
        fail(s.exprs[0].span, "static assertion failed: " + frontend::print_expr(s.exprs[0]));
      return std::nullopt;
    }
    }
    return std::nullopt;
  }

  // -- expressions ----------------------------------------------------------

  std::pair<TExpr, TExpr> check_pair(const Expr &a, const Expr &b, FnCtx &ctx, std::optional<TypeId> expected) {
    if (is_literal(a) && !is_literal(b)) {
      auto rb = check(b, ctx, expected);
      auto la = check(a, ctx, rb.type);
      return {std::move(la), std::move(rb)};
    }
    auto la = check(a, ctx, expected);
    auto rb = check(b, ctx, la.type);
    return {std::move(la), std::move(rb)};
  }

  TExpr check(const Expr &e, FnCtx &ctx, std::optional<TypeId> expected) {
    if (++depth_ > 512) {
      depth_ = 0;
      fail(e.span, "expression nesting too deep");
    }
    auto out = check_inner(e, ctx, expected);
    --depth_;
    return out;
  }

  TExpr check_inner(const Expr &e, FnCtx &ctx, std::optional<TypeId> expected) {
    TExpr out;
    out.span = e.span;
    switch (e.kind) {
    case Expr::Kind::IntLit: {
      out.kind = TExpr::Kind::IntConst;
      out.ival = e.int_value;
      bool fits32 = e.int_value <= std::numeric_limits<std::int32_t>::max();
      if (expected == TypeTable::kI64 || (!fits32 && expected != TypeTable::kI32))
        out.type = TypeTable::kI64;
      else if (!fits32)
        fail(e.span, "integer literal " + std::to_string(e.int_value) + " does not fit in i32");
      else
        out.type = TypeTable::kI32;
      return out;
    }
    case Expr::Kind::FloatLit:
      out.kind = TExpr::Kind::FloatConst;
      out.type = expected == TypeTable::kF32 ? TypeTable::kF32 : TypeTable::kF64;
      out.fval = out.type == TypeTable::kF32 ? static_cast<double>(static_cast<float>(e.float_value))
                                             : e.float_value;
      return out;
    case Expr::Kind::BoolLit:
      out.kind = TExpr::Kind::BoolConst;
      out.type = TypeTable::kBool;
      out.ival = e.bool_value;
      return out;
    case Expr::Kind::StrLit:
      out.kind = TExpr::Kind::StrConst;
      out.type = TypeTable::kStr;
      out.text = e.text;
      return out;
    case Expr::Kind::Name:
      return check_name(e, ctx);
    case Expr::Kind::Unary: {
      auto v = check(e.operands[0], ctx, expected);
      if (e.unop == UnaryOp::Neg) {
        if (!t_.is_numeric(v.type))
          fail(e.span, "cannot negate a value of type " + t_.name(v.type));
        if (v.kind == TExpr::Kind::IntConst || v.kind == TExpr::Kind::FloatConst)
          return make_const(v.type, num::negate(scalar_of(v.type), const_bits(v)), e.span);
      } else {
        if (v.type != TypeTable::kBool)
          fail(e.span, "'!' expects bool, got " + t_.name(v.type));
        if (v.kind == TExpr::Kind::BoolConst)
          return make_const(TypeTable::kBool, !v.ival, e.span);
      }
      out.kind = TExpr::Kind::Unary;
      out.unop = e.unop;
      out.type = v.type;
      out.kids.push_back(std::move(v));
      return out;
    }
    case Expr::Kind::Binary:
      return check_binary(e, ctx, expected);
    case Expr::Kind::Cast: {
      auto target = resolve_type(*e.cast_type, ctx.env);
      auto v = check(e.operands[0], ctx, std::nullopt);
      if (v.type == target)
        return v;
      bool from_ok = t_.is_numeric(v.type) || v.type == TypeTable::kBool;
      if (!from_ok || !t_.is_numeric(target))
        fail(e.span, "cannot convert " + t_.name(v.type) + " to " + t_.name(target));
      if (v.kind == TExpr::Kind::IntConst || v.kind == TExpr::Kind::FloatConst ||
          v.kind == TExpr::Kind::BoolConst)
        return make_const(target, num::convert(scalar_of(v.type), scalar_of(target), const_bits(v)), e.span);
      out.kind = TExpr::Kind::Cast;
      out.type = target;
      out.kids.push_back(std::move(v));
      return out;
    }
    case Expr::Kind::Index: {
      auto base = place_base(e.operands[0], ctx);
      const auto &bi = t_.info(base.type);
      if (bi.kind != TypeKind::Array)
        fail(e.operands[0].span, "cannot index a value of type " + t_.name(base.type));
      auto idx = check(e.operands[1], ctx, std::nullopt);
      if (!t_.is_integer(idx.type))
        fail(e.operands[1].span, "array index must be an integer, got " + t_.name(idx.type));
      if (idx.kind == TExpr::Kind::IntConst && (idx.ival < 0 || idx.ival >= bi.count))
        fail(e.operands[1].span, "index " + std::to_string(idx.ival) + " is out of bounds for " +
                                     t_.name(base.type));
      out.kind = TExpr::Kind::Index;
      out.type = bi.element;
      out.kids.push_back(std::move(base));
      out.kids.push_back(std::move(idx));
      return out;
    }
    case Expr::Kind::Field: {
      auto base = place_base(e.operands[0], ctx);
      const auto &bi = t_.info(base.type);
      if (bi.kind != TypeKind::Record)
        fail(e.span, "value of type " + t_.name(base.type) + " has no fields");
      for (std::size_t i = 0; i < bi.fields.size(); ++i) {
        if (bi.fields[i].name == e.text) {
          out.kind = TExpr::Kind::Field;
          out.type = bi.fields[i].type;
          out.index = static_cast<std::uint32_t>(i);
          out.kids.push_back(std::move(base));
          return out;
        }
      }
      fail(e.span, "no field '" + e.text + "' in " + t_.name(base.type));
    }
    case Expr::Kind::Call:
      return check_call(e, ctx);
    case Expr::Kind::TemplateCall:
      return check_template_call(e, ctx);
    case Expr::Kind::AddrOf: {
      auto *g = m_.find_global(e.text);
      if (!g || (!e.qualified && (find_local(ctx, e.text) || ctx.env.count(e.text))))
        fail(e.span, "'&' requires a global variable, '" + e.text + "' is not one");
      out.kind = TExpr::Kind::AddrOf;
      out.type = t_.globalref_to(g->type);
      out.text = g->name;
      return out;
    }
    }
    fail(e.span, "malformed expression");
  }

  /// Checks an indexing/field base, dereferencing global references.
  TExpr place_base(const Expr &e, FnCtx &ctx) {
    auto v = check(e, ctx, std::nullopt);
    if (t_.is_globalref(v.type)) {
      TExpr d;
      d.kind = TExpr::Kind::Deref;
      d.type = t_.info(v.type).element;
      d.span = v.span;
      d.kids.push_back(std::move(v));
      return d;
    }
    return v;
  }

  TExpr check_name(const Expr &e, FnCtx &ctx) {
    TExpr out;
    out.span = e.span;
    if (!e.qualified) {
      if (auto l = find_local(ctx, e.text)) {
        out.kind = TExpr::Kind::Local;
        out.index = *l;
        out.type = ctx.fn->locals[*l].type;
        return out;
      }
      if (auto it = ctx.env.find(e.text); it != ctx.env.end()) {
        const auto &b = it->second;
        switch (b.kind) {
        case Binding::Kind::Int:
          out.kind = TExpr::Kind::IntConst;
          out.type = builtin_type(b.width);
          out.ival = b.value;
          return out;
        case Binding::Kind::Ref:
          if (!b.has_hidden)
            fail(e.span, "global reference '" + e.text + "' cannot be used here");
          out.kind = TExpr::Kind::RefParam;
          out.type = t_.globalref_to(b.type);
          out.index = b.hidden;
          out.text = b.global;
          return out;
        case Binding::Kind::UnknownInt:
        case Binding::Kind::UnknownRef:
          fail(e.span, "'" + e.text + "' is only known at runtime here");
        default:
          fail(e.span, "type '" + e.text + "' used as a value");
        }
      }
    }
    if (auto *g = m_.find_global(e.text)) {
      if (!ctx.fn)
        fail(e.span, "global '" + e.text + "' is not a constant");
      out.kind = TExpr::Kind::Global;
      out.type = g->type;
      out.text = g->name;
      return out;
    }
    if (const Decl *d = lookup_decl(e.text)) {
      if (std::holds_alternative<FunctionDecl>(*d) || std::holds_alternative<FunctionTemplateDecl>(*d))
        fail(e.span, "function '" + e.text + "' used as a value");
      fail(e.span, "type '" + e.text + "' used as a value");
    }
    fail(e.span, "use of undeclared name '" + e.text + "'");
  }

  TExpr check_binary(const Expr &e, FnCtx &ctx, std::optional<TypeId> expected) {
    bool cmp = is_comparison(e.binop);
    auto [l, r] = check_pair(e.operands[0], e.operands[1], ctx, cmp ? std::nullopt : expected);
    if (l.type != r.type)
      fail(e.span, std::string("operands of '") + binary_op_text(e.binop) + "' have different types " +
                       t_.name(l.type) + " and " + t_.name(r.type));
    auto ty = l.type;
    bool eq = e.binop == BinaryOp::Eq || e.binop == BinaryOp::Ne;
    if (cmp) {
      bool ok = t_.is_numeric(ty) || (eq && (ty == TypeTable::kBool || ty == TypeTable::kStr));
      if (!ok)
        fail(e.span, std::string("cannot compare values of type ") + t_.name(ty) + " with '" +
                         binary_op_text(e.binop) + "'");
    } else {
      if (!t_.is_numeric(ty))
        fail(e.span, std::string("operator '") + binary_op_text(e.binop) + "' expects numbers, got " +
                         t_.name(ty));
      if (e.binop == BinaryOp::Rem && t_.is_float(ty))
        fail(e.span, "'%' requires integer operands");
      if ((e.binop == BinaryOp::Div || e.binop == BinaryOp::Rem) && t_.is_integer(ty) &&
          r.kind == TExpr::Kind::IntConst && r.ival == 0)
        fail(e.operands[1].span, "division by zero");
    }
    bool both_const = l.is_const() && r.is_const();
    if (both_const && ty == TypeTable::kStr)
      return make_const(TypeTable::kBool, (l.text == r.text) == (e.binop == BinaryOp::Eq), e.span);
    if (both_const) {
      auto s = scalar_of(ty);
      if (cmp)
        return make_const(TypeTable::kBool, num::compare(compare_of(e.binop), s, const_bits(l), const_bits(r)),
                          e.span);
      return make_const(ty, *num::arith(arith_of(e.binop), s, const_bits(l), const_bits(r)), e.span);
    }
    TExpr out;
    out.kind = TExpr::Kind::Binary;
    out.binop = e.binop;
    out.type = cmp ? TypeTable::kBool : ty;
    out.span = e.span;
    out.kids.push_back(std::move(l));
    out.kids.push_back(std::move(r));
    return out;
  }

  void expect_arity(const Expr &e, std::size_t n) {
    if (e.operands.size() != n)
      fail(e.span, "'" + e.text + "' expects " + std::to_string(n) + " arguments, got " +
                       std::to_string(e.operands.size()));
  }

  std::vector<TExpr> check_args(const Expr &e, const std::vector<TypeId> &params, FnCtx &ctx) {
    expect_arity(e, params.size());
    std::vector<TExpr> out;
    for (std::size_t i = 0; i < params.size(); ++i) {
      auto v = check(e.operands[i], ctx, params[i]);
      if (v.type != params[i])
        fail(e.operands[i].span, "argument " + std::to_string(i + 1) + " of '" + e.text + "' has type " +
                                     t_.name(v.type) + ", expected " + t_.name(params[i]));
      out.push_back(std::move(v));
    }
    return out;
  }

  TExpr check_call(const Expr &e, FnCtx &ctx) {
    TExpr out;
    out.span = e.span;
    if (!e.qualified && kReserved.count(e.text)) {
      if (e.text == "len") {
        expect_arity(e, 1);
        auto base = place_base(e.operands[0], ctx);
        if (t_.info(base.type).kind != TypeKind::Array)
          fail(e.operands[0].span, "len expects an array, got " + t_.name(base.type));
        return make_const(TypeTable::kI32, static_cast<std::uint64_t>(t_.info(base.type).count), e.span);
      }
      if (e.text == "sizeof")
        fail(e.span, "sizeof needs a type argument: sizeof[T]()");
      out.kind = TExpr::Kind::Intrinsic;
      out.text = e.text;
      if (e.text == "argc") {
        out.kids = check_args(e, {}, ctx);
        out.type = TypeTable::kI32;
      } else if (e.text == "argv") {
        out.kids = check_args(e, {TypeTable::kI32}, ctx);
        out.type = TypeTable::kStr;
      } else {
        out.kids = check_args(e, {TypeTable::kStr}, ctx);
        out.type = e.text == "atoi" ? TypeTable::kI32 : TypeTable::kI64;
      }
      if (!ctx.fn)
        fail(e.span, "'" + e.text + "' is not a constant");
      return out;
    }
    const Decl *d = lookup_decl(e.text);
    if (!d)
      fail(e.span, "call to undeclared function '" + e.text + "'");
    if (std::holds_alternative<FunctionTemplateDecl>(*d))
      fail(e.span, "template '" + e.text + "' requires template arguments");
    auto *f = std::get_if<FunctionDecl>(d);
    if (!f)
      fail(e.span, "'" + e.text + "' is not a function");
    if (!ctx.fn)
      fail(e.span, "call to '" + e.text + "' is not a constant");
    const auto sig = plain_signature(*f);
    out.kind = TExpr::Kind::Call;
    out.text = f->name;
    out.type = sig.ret;
    out.kids = check_args(e, sig.params, ctx);
    return out;
  }

  TExpr check_template_call(const Expr &e, FnCtx &ctx) {
    if (!e.qualified && e.text == "sizeof") {
      if (e.targs.size() != 1 || !e.operands.empty())
        fail(e.span, "sizeof takes one type argument and no call arguments");
      TemplateParam tp;
      tp.kind = TemplateParam::Kind::Type;
      tp.name = "T";
      auto in = classify(tp, e.targs[0], ctx);
      if (!in.type)
        fail(in.span, "sizeof expects a type");
      return make_const(TypeTable::kI64, sized(*in.type, in.span), e.span);
    }
    const Decl *d = lookup_decl(e.text);
    if (!d)
      fail(e.span, "call to undeclared template '" + e.text + "'");
    auto *tmpl = std::get_if<FunctionTemplateDecl>(d);
    if (!tmpl)
      fail(e.span, "'" + e.text + "' is not a function template");
    if (tmpl->tparams.size() != e.targs.size())
      fail(e.span, "template '" + e.text + "' expects " + std::to_string(tmpl->tparams.size()) +
                       " template arguments, got " + std::to_string(e.targs.size()));
    if (!ctx.fn)
      fail(e.span, "call to '" + e.text + "' is not a constant");
    std::vector<ArgInput> inputs;
    std::vector<TemplateArg> args;
    for (std::size_t i = 0; i < e.targs.size(); ++i) {
      inputs.push_back(classify(tmpl->tparams[i], e.targs[i], ctx));
      args.push_back(match_one(tmpl->tparams[i], inputs.back(), tmpl->is_jit));
    }
    TExpr out;
    out.span = e.span;
    if (tmpl->is_jit) {
      if (m_.runtime_mode)
        fail(e.span, "jit-tagged template '" + e.text +
                         "' cannot be used from code compiled at runtime (nested jit is unsupported)");
      auto sig = signature_for(*tmpl, args, e.span);
      JitSite site;
      site.site_id = static_cast<std::uint32_t>(m_.jit_sites.size());
      site.template_name = tmpl->name();
      site.pattern = args;
      site.mangled = irgen::mangle(tmpl->name(), args, t_);
      site.param_types = sig.params;
      site.ret = sig.ret;
      site.span = e.span;
      m_.jit_sites.push_back(site);
      out.kind = TExpr::Kind::JitCall;
      out.index = site.site_id;
      out.type = sig.ret;
      for (std::size_t i = 0; i < args.size(); ++i) {
        if (!args[i].is_wildcard())
          continue;
        out.kids.push_back(*inputs[i].value);
        ++out.wildcard_count;
      }
      auto rest = check_args(e, sig.params, ctx);
      for (auto &r : rest)
        out.kids.push_back(std::move(r));
      return out;
    }
    auto sig = signature_for(*tmpl, args, e.span);
    auto symbol = irgen::mangle(tmpl->name(), args, t_);
    if (!m_.function_index.count(symbol) && !m_.pending.count(symbol)) {
      m_.pending[symbol] = PendingInstantiation{tmpl->name(), args};
      m_.pending_order.push_back(symbol);
    }
    out.kind = TExpr::Kind::Call;
    out.text = symbol;
    out.type = sig.ret;
    for (std::size_t i = 0; i < args.size(); ++i)
      if (tmpl->tparams[i].kind == TemplateParam::Kind::GlobalRef)
        out.kids.push_back(*inputs[i].value);
    auto rest = check_args(e, sig.params, ctx);
    for (auto &r : rest)
      out.kids.push_back(std::move(r));
    return out;
  }

  Signature signature_for(const FunctionTemplateDecl &tmpl, const std::vector<TemplateArg> &args, Span span) {
    auto env = bind(tmpl.tparams, args, span, false);
    try {
      return signature_of(tmpl.fn, env);
    } catch (const SemaError &err) {
      auto diags = err.diagnostics();
      diags.push_back({m_.ast.tu_name, span.offset, Severity::Note,
                       "while forming the call signature of '" + tmpl.name() + "'"});
      throw SemaError(diags);
    }
  }

  // -- instantiation --------------------------------------------------------

  std::vector<TemplateArg> specialization_args(const FunctionTemplateDecl &tmpl,
                                               const ExplicitSpecialization &s) {
    if (s.args.size() != tmpl.tparams.size())
      fail(s.span, "explicit specialization of '" + tmpl.name() + "' has " + std::to_string(s.args.size()) +
                       " arguments, expected " + std::to_string(tmpl.tparams.size()));
    FnCtx ctx;
    std::vector<TemplateArg> out;
    for (std::size_t i = 0; i < s.args.size(); ++i)
      out.push_back(match_one(tmpl.tparams[i], classify(tmpl.tparams[i], s.args[i], ctx), false));
    return out;
  }

  const ExplicitSpecialization *select(const FunctionTemplateDecl &tmpl, const std::vector<TemplateArg> &args) {
    for (const auto &s : tmpl.specializations)
      if (specialization_args(tmpl, s) == args)
        return &s;
    return nullptr;
  }

  const TypedFunction &add_function(TypedFunction f) {
    auto sym = f.symbol;
    m_.function_index[sym] = m_.functions.size();
    m_.functions.push_back(std::move(f));
    return m_.functions.back();
  }

  const TypedFunction &instantiate(const FunctionTemplateDecl &tmpl, const std::vector<TemplateArg> &args) {
    for (const auto &a : args)
      if (a.is_wildcard())
        throw Error("instantiate called with a runtime wildcard argument");
    auto symbol = irgen::mangle(tmpl.name(), args, t_);
    if (auto it = m_.function_index.find(symbol); it != m_.function_index.end())
      return m_.functions[it->second];
    ++m_.instantiate_calls[symbol];
    try {
      auto env = bind(tmpl.tparams, args, tmpl.span, true);
      auto f = check_function(tmpl.fn, env, symbol, TypedFunction::Origin::Instantiation, &tmpl.tparams);
      f.template_args = args;
      return add_function(std::move(f));
    } catch (const SemaError &err) {
      auto diags = err.diagnostics();
      diags.push_back({m_.ast.tu_name, tmpl.span.offset, Severity::Note, "in instantiation of '" + symbol + "'"});
      throw SemaError(diags);
    }
  }

  const TypedFunction &check_specialization(const FunctionTemplateDecl &tmpl, const ExplicitSpecialization &s,
                                            std::set<std::string> &seen) {
    auto args = specialization_args(tmpl, s);
    auto symbol = irgen::mangle(tmpl.name(), args, t_);
    if (!seen.insert(symbol).second)
      fail(s.span, "duplicate explicit specialization '" + symbol + "'");
    auto env = bind(tmpl.tparams, args, s.span, true);
    auto expected = signature_of(tmpl.fn, env);
    auto got = signature_of(s.fn, env);
    if (expected.params != got.params || expected.ret != got.ret)
      fail(s.span, "explicit specialization '" + symbol + "' does not match the template's signature");
    auto f = check_function(s.fn, env, symbol, TypedFunction::Origin::Specialization, &tmpl.tparams);
    f.template_args = args;
    return add_function(std::move(f));
  }

  // -- globals --------------------------------------------------------------

  GlobalInfo check_global(const GlobalVarDecl &g) {
    GlobalInfo info;
    info.name = g.name;
    info.exported = g.exported;
    info.is_extern = g.is_extern;
    info.type = resolve_type(g.type, Env{});
    if (info.type == TypeTable::kStr)
      fail(g.span, "global '" + g.name + "' cannot have type str");
    sized(info.type, g.span);
    if (g.init) {
      if (g.is_extern)
        fail(g.span, "extern global '" + g.name + "' cannot have an initializer");
      if (!t_.is_scalar(info.type))
        fail(g.init->span, "aggregate initializers are not supported");
      FnCtx ctx;
      auto v = check(*g.init, ctx, info.type);
      if (!v.is_const())
        fail(g.init->span, "initializer of '" + g.name + "' must be constant");
      if (v.type != info.type)
        fail(g.init->span, "initializer of '" + g.name + "' has type " + t_.name(v.type) + ", expected " +
                               t_.name(info.type));
      info.init = std::move(v);
    }
    return info;
  }

  const TypedFunction &check_plain(const FunctionDecl &f) {
    return add_function(check_function(f, Env{}, f.name, TypedFunction::Origin::Plain, nullptr));
  }

private:
  SemaModule &m_;
  TypeTable &t_;
  std::vector<std::string> alias_stack_;
  std::map<std::string, Signature> plain_sigs_;
  int depth_ = 0;
};

void collect(std::vector<Diagnostic> &diags, const SemaError &e) {
  for (const auto &d : e.diagnostics())
    diags.push_back(d);
}

void renumber(std::vector<TStmt> &body, const std::map<std::uint32_t, std::uint32_t> &ids);

void renumber(TExpr &e, const std::map<std::uint32_t, std::uint32_t> &ids) {
  if (e.kind == TExpr::Kind::JitCall)
    e.index = ids.at(e.index);
  for (auto &k : e.kids)
    renumber(k, ids);
}

void renumber(std::vector<TStmt> &body, const std::map<std::uint32_t, std::uint32_t> &ids) {
  for (auto &s : body) {
    for (auto &e : s.exprs)
      renumber(e, ids);
    renumber(s.body, ids);
    renumber(s.else_body, ids);
  }
}

} // namespace

const FunctionTemplateDecl *SemaModule::find_function_template(const std::string &name) const {
  auto it = decl_index.find(name);
  if (it == decl_index.end())
    return nullptr;
  return std::get_if<FunctionTemplateDecl>(&ast.decls[it->second]);
}

const TypedFunction *SemaModule::find_function(const std::string &symbol) const {
  auto it = function_index.find(symbol);
  return it == function_index.end() ? nullptr : &functions[it->second];
}

const GlobalInfo *SemaModule::find_global(const std::string &name) const {
  auto it = global_index.find(name);
  return it == global_index.end() ? nullptr : &globals[it->second];
}

namespace {

bool same_arg(const TypeTable &ta, const TemplateArg &a, const TypeTable &tb, const TemplateArg &b) {
  if (a.kind != b.kind || a.value != b.value || a.width != b.width || a.global != b.global)
    return false;
  return a.kind != TemplateArg::Kind::ConcreteType || ta.name(a.type) == tb.name(b.type);
}

} // namespace

bool equivalent(const SemaModule &a, const SemaModule &b) {
  if (!(a.ast == b.ast) || a.jit_sites.size() != b.jit_sites.size())
    return false;
  for (std::size_t i = 0; i < a.jit_sites.size(); ++i) {
    const auto &x = a.jit_sites[i];
    const auto &y = b.jit_sites[i];
    if (x.site_id != y.site_id || x.template_name != y.template_name || x.mangled != y.mangled ||
        x.pattern.size() != y.pattern.size() || x.param_types.size() != y.param_types.size() ||
        a.types.name(x.ret) != b.types.name(y.ret))
      return false;
    for (std::size_t k = 0; k < x.pattern.size(); ++k)
      if (!same_arg(a.types, x.pattern[k], b.types, y.pattern[k]))
        return false;
    for (std::size_t k = 0; k < x.param_types.size(); ++k)
      if (a.types.name(x.param_types[k]) != b.types.name(y.param_types[k]))
        return false;
  }
  return true;
}

SemaModule analyze(ast::AstModule ast) {
  SemaModule m;
  m.ast = std::move(ast);
  Checker c(m);
  std::vector<Diagnostic> diags;
  auto error = [&](Span s, std::string msg) {
    diags.push_back({m.ast.tu_name, s.offset, Severity::Error, std::move(msg)});
  };

  for (std::size_t i = 0; i < m.ast.decls.size(); ++i) {
    const auto &d = m.ast.decls[i];
    const auto &name = decl_name(d);
    if (kReserved.count(name)) {
      error(decl_span(d), "'" + name + "' is a reserved name");
      continue;
    }
    if (!m.decl_index.emplace(name, i).second)
      error(decl_span(d), "redefinition of '" + name + "'");
  }

  for (std::size_t i = 0; i < m.ast.decls.size(); ++i) {
    auto *g = std::get_if<GlobalVarDecl>(&m.ast.decls[i]);
    if (!g || m.decl_index[g->name] != i)
      continue;
    try {
      auto info = c.check_global(*g);
      m.global_index[info.name] = m.globals.size();
      m.globals.push_back(std::move(info));
    } catch (const SemaError &e) {
      collect(diags, e);
    }
  }

  for (const auto &d : m.ast.decls) {
    try {
      if (auto *r = std::get_if<RecordDecl>(&d))
        c.resolve_record(*r);
      else if (auto *a = std::get_if<TypeAliasDecl>(&d))
        c.resolve_type(a->target, {});
    } catch (const SemaError &e) {
      collect(diags, e);
    }
  }

  for (std::size_t i = 0; i < m.ast.decls.size(); ++i) {
    auto *f = std::get_if<FunctionDecl>(&m.ast.decls[i]);
    if (!f || m.decl_index[f->name] != i)
      continue;
    try {
      c.check_plain(*f);
    } catch (const SemaError &e) {
      collect(diags, e);
    }
  }

  for (const auto &d : m.ast.decls) {
    auto *t = std::get_if<FunctionTemplateDecl>(&d);
    if (!t)
      continue;
    std::set<std::string> seen;
    for (const auto &s : t->specializations) {
      try {
        c.check_specialization(*t, s, seen);
      } catch (const SemaError &e) {
        collect(diags, e);
      }
    }
  }

  for (std::size_t i = 0; i < m.pending_order.size(); ++i) {
    auto sym = m.pending_order[i];
    if (m.function_index.count(sym))
      continue;
    try {
      ensure_function(m, sym);
    } catch (const SemaError &e) {
      collect(diags, e);
    }
  }

  if (!diags.empty())
    throw SemaError(std::move(diags));
  assign_jit_site_ids(m);
  return m;
}

std::vector<TemplateArg> match_template_args(SemaModule &sema, const FunctionTemplateDecl &tmpl,
                                             const std::vector<ArgInput> &args, bool jit_mode) {
  Checker c(sema);
  if (args.size() != tmpl.tparams.size())
    c.fail(tmpl.span, "template '" + tmpl.name() + "' expects " + std::to_string(tmpl.tparams.size()) +
                          " template arguments, got " + std::to_string(args.size()));
  std::vector<TemplateArg> out;
  for (std::size_t i = 0; i < args.size(); ++i)
    out.push_back(c.match_one(tmpl.tparams[i], args[i], jit_mode));
  return out;
}

const TypedFunction &instantiate(SemaModule &sema, const FunctionTemplateDecl &tmpl,
                                 const std::vector<TemplateArg> &concrete) {
  return Checker(sema).instantiate(tmpl, concrete);
}

const ExplicitSpecialization *select_explicit_specialization(SemaModule &sema, const FunctionTemplateDecl &tmpl,
                                                             const std::vector<TemplateArg> &concrete) {
  try {
    return Checker(sema).select(tmpl, concrete);
  } catch (const SemaError &) {
    return nullptr;
  }
}

TypeId resolve_type_string(const TypeExpr &expr, SemaModule &sema) {
  return Checker(sema).resolve_type(expr, {});
}

void assign_jit_site_ids(SemaModule &sema) {
  std::map<std::uint32_t, std::uint32_t> ids;
  for (std::uint32_t i = 0; i < sema.jit_sites.size(); ++i) {
    ids[sema.jit_sites[i].site_id] = i;
    sema.jit_sites[i].site_id = i;
  }
  for (auto &f : sema.functions)
    renumber(f.body, ids);
}

const TypedFunction &ensure_function(SemaModule &sema, const std::string &symbol) {
  if (auto *f = sema.find_function(symbol))
    return *f;
  Checker c(sema);
  if (auto it = sema.pending.find(symbol); it != sema.pending.end()) {
    auto pending = it->second;
    const auto *tmpl = sema.find_function_template(pending.template_name);
    if (!tmpl)
      throw Error("queued instantiation of unknown template '" + pending.template_name + "'");
    if (c.select(*tmpl, pending.args))
      throw Error("explicit specialization '" + symbol + "' was not checked ahead of time");
    return c.instantiate(*tmpl, pending.args);
  }
  if (auto it = sema.decl_index.find(symbol); it != sema.decl_index.end())
    if (auto *f = std::get_if<FunctionDecl>(&sema.ast.decls[it->second]))
      return c.check_plain(*f);
  throw SemaError({Diagnostic{sema.ast.tu_name, 0, Severity::Error, "no definition available for '" + symbol + "'"}});
}

std::string concrete_symbol(const SemaModule &sema, const std::string &template_name,
                            const std::vector<TemplateArg> &concrete) {
  return irgen::mangle(template_name, concrete, sema.types);
}

Signature template_signature(SemaModule &sema, const FunctionTemplateDecl &tmpl,
                             const std::vector<TemplateArg> &args) {
  return Checker(sema).signature_for(tmpl, args, tmpl.span);
}

std::vector<std::uint8_t> constant_bytes(const TypeTable &types, const TExpr &e) {
  std::uint64_t bits = const_bits(e);
  std::size_t n = types.layout(e.type).size;
  std::vector<std::uint8_t> out(n);
  for (std::size_t i = 0; i < n; ++i)
    out[i] = static_cast<std::uint8_t>(bits >> (8 * i));
  return out;
}

} // namespace mtjit::sema
