#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtjit/frontend/ast.hpp"
#include "mtjit/sema/types.hpp"

namespace mtjit::sema {

/// One template argument after classification. Wildcard kinds stand for
/// values that arrive at runtime.
struct TemplateArg {
  enum class Kind : std::uint8_t {
    ConcreteType,
    ConstInt,
    RuntimeInt,
    RuntimeTypeString,
    GlobalRef,
    RuntimeGlobalRef,
  };
  Kind kind = Kind::ConstInt;
  TypeId type = 0;                              // ConcreteType
  std::int64_t value = 0;                       // ConstInt
  ast::Builtin width = ast::Builtin::I32;       // ConstInt / RuntimeInt
  std::string global;                           // GlobalRef

  bool is_wildcard() const {
    return kind == Kind::RuntimeInt || kind == Kind::RuntimeTypeString ||
           kind == Kind::RuntimeGlobalRef;
  }
  bool operator==(const TemplateArg &) const = default;

  static TemplateArg concrete_type(TypeId t) { return {Kind::ConcreteType, t, 0, {}, {}}; }
  static TemplateArg const_int(std::int64_t v, ast::Builtin w) { return {Kind::ConstInt, 0, v, w, {}}; }
  static TemplateArg runtime_int(ast::Builtin w) { return {Kind::RuntimeInt, 0, 0, w, {}}; }
  static TemplateArg runtime_type_string() { return {Kind::RuntimeTypeString, 0, 0, {}, {}}; }
  static TemplateArg global_ref(std::string name) { return {Kind::GlobalRef, 0, 0, {}, std::move(name)}; }
  static TemplateArg runtime_global_ref() { return {Kind::RuntimeGlobalRef, 0, 0, {}, {}}; }
};

// ---------------------------------------------------------------------------
// Typed AST

struct TExpr {
  enum class Kind : std::uint8_t {
    IntConst,
    FloatConst,
    BoolConst,
    StrConst,
    Local,     // index = local slot
    Global,    // text = global name
    RefParam,  // index = hidden parameter; text = referent name
    Unary,
    Binary,
    Cast,
    Index,     // kids = {base place, index}
    Field,     // index = field number; kids = {base place}
    Deref,     // place at the address held by kids[0] (a globalref value)
    Call,      // text = callee symbol; kids = args, hidden references first
    JitCall,   // index = site id; kids = wildcard values then call args
    Intrinsic, // text = argc | argv | atoi | atol
    AddrOf,    // text = global name
  };
  Kind kind = Kind::IntConst;
  TypeId type = TypeTable::kVoid;
  std::int64_t ival = 0;
  double fval = 0.0;
  std::string text;
  std::uint32_t index = 0;
  std::uint32_t wildcard_count = 0;  // JitCall
  ast::BinaryOp binop = ast::BinaryOp::Add;
  ast::UnaryOp unop = ast::UnaryOp::Neg;
  std::vector<TExpr> kids;
  ast::Span span;

  bool is_const() const {
    return kind == Kind::IntConst || kind == Kind::FloatConst || kind == Kind::BoolConst ||
           kind == Kind::StrConst;
  }
  bool is_place() const {
    return kind == Kind::Local || kind == Kind::Global || kind == Kind::Deref ||
           kind == Kind::Index || kind == Kind::Field;
  }
  bool operator==(const TExpr &) const = default;
};

struct TStmt {
  enum class Kind : std::uint8_t { Let, Assign, For, If, Return, Expr, Print };
  Kind kind = Kind::Expr;
  std::uint32_t local = 0;     // Let / For variable
  std::vector<TExpr> exprs;    // Let: [init]?  Assign: [place, value]  For: [lo, hi]
                               // If: [cond]  Return: [value]?  Expr: [e]  Print: args
  std::vector<TStmt> body;
  std::vector<TStmt> else_body;
  ast::Span span;
  bool operator==(const TStmt &) const = default;
};

struct LocalVar {
  std::string name;
  TypeId type = 0;
  bool mutable_ = true;
  bool operator==(const LocalVar &) const = default;
};

struct TypedParam {
  std::string name;
  TypeId type = 0;
  bool unique_object = false;  // global-reference template parameter
  bool operator==(const TypedParam &) const = default;
};

struct TypedFunction {
  enum class Origin : std::uint8_t { Plain, Instantiation, Specialization };
  std::string symbol;        // mangled for templates
  std::string source_name;   // declared name
  Origin origin = Origin::Plain;
  std::vector<TemplateArg> template_args;  // concrete arguments for template origins
  bool exported = false;
  bool is_extern = false;    // declaration only
  std::vector<TypedParam> params;   // hidden references first
  std::uint32_t hidden_params = 0;
  TypeId ret = TypeTable::kVoid;
  std::vector<LocalVar> locals;     // declared params occupy the first slots
  std::vector<TStmt> body;
  ast::Span span;
  bool operator==(const TypedFunction &) const = default;
};

/// A call site of a jit-tagged template.
struct JitSite {
  std::uint32_t site_id = 0;
  std::string template_name;
  std::vector<TemplateArg> pattern;
  std::string mangled;                // with "?k" placeholders
  std::vector<TypeId> param_types;    // declared (non-hidden) parameters
  TypeId ret = TypeTable::kVoid;
  ast::Span span;
  bool operator==(const JitSite &) const = default;
};

struct GlobalInfo {
  std::string name;
  TypeId type = 0;
  bool exported = false;
  bool is_extern = false;
  std::optional<TExpr> init;   // constant scalar initializer
  bool operator==(const GlobalInfo &) const = default;
};

/// Supplies the template and arguments for a queued instantiation.
struct PendingInstantiation {
  std::string template_name;
  std::vector<TemplateArg> args;
};

struct SemaModule {
  ast::AstModule ast;
  TypeTable types;
  std::map<std::string, std::size_t> decl_index;   // top-level name -> ast.decls index
  std::vector<GlobalInfo> globals;                 // declaration order
  std::map<std::string, std::size_t> global_index;
  std::deque<TypedFunction> functions;             // checked bodies, in check order; stable addresses
  std::map<std::string, std::size_t> function_index;
  std::vector<JitSite> jit_sites;
  std::map<std::string, PendingInstantiation> pending;   // symbol -> how to build it
  std::vector<std::string> pending_order;
  /// How often instantiate() built a body for a symbol.
  std::map<std::string, std::uint64_t> instantiate_calls;
  /// Set once AoT analysis is done; jit sites then become errors.
  bool runtime_mode = false;

  const ast::FunctionTemplateDecl *find_function_template(const std::string &name) const;
  const TypedFunction *find_function(const std::string &symbol) const;
  const GlobalInfo *find_global(const std::string &name) const;
};

/// Structural equality over what serialization preserves.
bool equivalent(const SemaModule &a, const SemaModule &b);

/// A classified template argument before matching: a type, or a typed value.
struct ArgInput {
  std::optional<TypeId> type;
  std::optional<TExpr> value;
  ast::Span span;
};

SemaModule analyze(ast::AstModule ast);

std::vector<TemplateArg> match_template_args(SemaModule &sema, const ast::FunctionTemplateDecl &tmpl,
                                             const std::vector<ArgInput> &args, bool jit_mode);

/// Builds (or returns the memoized) body for `tmpl` at `concrete`. Never
/// called for an argument list that has an explicit specialization.
const TypedFunction &instantiate(SemaModule &sema, const ast::FunctionTemplateDecl &tmpl,
                                 const std::vector<TemplateArg> &concrete);

const ast::ExplicitSpecialization *select_explicit_specialization(SemaModule &sema,
                                                                   const ast::FunctionTemplateDecl &tmpl,
                                                                   const std::vector<TemplateArg> &concrete);

TypeId resolve_type_string(const ast::TypeExpr &expr, SemaModule &sema);

void assign_jit_site_ids(SemaModule &sema);

/// Returns the checked function for `symbol`, checking a plain function or
/// building a queued instantiation on demand.
const TypedFunction &ensure_function(SemaModule &sema, const std::string &symbol);

/// Concrete mangled symbol for a template at fully concrete arguments.
std::string concrete_symbol(const SemaModule &sema, const std::string &template_name,
                            const std::vector<TemplateArg> &concrete);

/// Signature of the declared parameters for `tmpl` at `args` (wildcards allowed
/// as long as the signature does not depend on them).
struct Signature {
  std::vector<TypeId> params;
  TypeId ret = TypeTable::kVoid;
};
Signature template_signature(SemaModule &sema, const ast::FunctionTemplateDecl &tmpl,
                             const std::vector<TemplateArg> &args);

/// Evaluates a constant scalar initializer to its little-endian bytes.
std::vector<std::uint8_t> constant_bytes(const TypeTable &types, const TExpr &e);

} // namespace mtjit::sema
