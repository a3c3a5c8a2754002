#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "mtjit/support/box.hpp"

namespace mtjit::ast {

/// Source location. Spans are metadata: they never participate in
/// structural equality, so a pretty-printed-and-reparsed tree compares equal
/// to the original.
struct Span {
  std::uint32_t offset = 0;
  std::uint32_t length = 0;
  friend bool operator==(const Span &, const Span &) { return true; }
};

enum class Builtin : std::uint8_t { I32, I64, F32, F64, Bool, Str };

const char *builtin_name(Builtin b);
std::optional<Builtin> builtin_from_name(std::string_view name);

enum class BinaryOp : std::uint8_t { Add, Sub, Mul, Div, Rem, Eq, Ne, Lt, Le, Gt, Ge };
enum class UnaryOp : std::uint8_t { Neg, Not };

const char *binary_op_text(BinaryOp op);
bool is_comparison(BinaryOp op);

struct Expr;
struct TypeExpr;

/// A template argument as written: either a type or an expression. A bare
/// identifier is parsed as an expression and reclassified by sema.
struct TemplateArgExpr {
  Box<TypeExpr> type;
  Box<Expr> expr;
  bool is_type() const { return static_cast<bool>(type); }
  bool operator==(const TemplateArgExpr &) const = default;
};

struct TypeExpr {
  enum class Kind : std::uint8_t { Builtin, Named, Array, Apply, GlobalRef };
  Kind kind = Kind::Builtin;
  ast::Builtin builtin = ast::Builtin::I32;
  std::string name;   // Named / Apply
  bool qualified = false;
  Box<TypeExpr> element;                // Array element / GlobalRef pointee
  Box<Expr> count;                      // Array count
  std::vector<TemplateArgExpr> args;    // Apply
  Span span;
  bool operator==(const TypeExpr &) const = default;
};

struct Expr {
  enum class Kind : std::uint8_t {
    IntLit,
    FloatLit,
    BoolLit,
    StrLit,
    Name,
    Unary,
    Binary,
    Cast,
    Index,
    Field,
    Call,
    TemplateCall,
    AddrOf,
  };
  Kind kind = Kind::IntLit;
  std::int64_t int_value = 0;
  double float_value = 0.0;
  bool bool_value = false;
  std::string text;          // name, decoded string literal, field name, float lexeme
  bool qualified = false;    // leading :: on a name
  BinaryOp binop = BinaryOp::Add;
  UnaryOp unop = UnaryOp::Neg;
  std::vector<Expr> operands;           // unary/binary/index/field-base/call args
  std::vector<TemplateArgExpr> targs;   // template call
  Box<TypeExpr> cast_type;
  Span span;
  bool operator==(const Expr &) const = default;
};

struct Stmt {
  enum class Kind : std::uint8_t { Let, Assign, For, If, Return, ExprStmt, Print, AssertConst };
  Kind kind = Kind::ExprStmt;
  std::string name;               // let / for variable
  Box<TypeExpr> declared_type;    // optional let type
  std::vector<Expr> exprs;        // let: [init]?, assign: [target, value], for: [lo, hi],
                                  // if: [cond], return: [value]?, expr: [e], print: args
  std::vector<Stmt> body;
  std::vector<Stmt> else_body;
  bool has_else = false;
  Span span;
  bool operator==(const Stmt &) const = default;
};

struct Param {
  std::string name;
  TypeExpr type;
  Span span;
  bool operator==(const Param &) const = default;
};

struct TemplateParam {
  enum class Kind : std::uint8_t { Type, Int, GlobalRef };
  Kind kind = Kind::Type;
  std::string name;
  ast::Builtin width = ast::Builtin::I32;  // Int
  Box<TypeExpr> pointee;                   // GlobalRef
  Span span;
  bool operator==(const TemplateParam &) const = default;
};

struct FunctionDecl {
  std::string name;
  std::vector<Param> params;
  Box<TypeExpr> return_type;   // empty = no value
  std::vector<Stmt> body;
  bool has_body = true;        // false for `extern fn`
  bool exported = false;
  Span span;
  bool operator==(const FunctionDecl &) const = default;
};

struct ExplicitSpecialization {
  std::vector<TemplateArgExpr> args;
  FunctionDecl fn;
  Span span;
  bool operator==(const ExplicitSpecialization &) const = default;
};

struct FunctionTemplateDecl {
  std::vector<TemplateParam> tparams;
  FunctionDecl fn;
  bool is_jit = false;
  std::vector<ExplicitSpecialization> specializations;
  Span span;
  const std::string &name() const { return fn.name; }
  bool operator==(const FunctionTemplateDecl &) const = default;
};

struct FieldDecl {
  std::string name;
  TypeExpr type;
  Span span;
  bool operator==(const FieldDecl &) const = default;
};

struct RecordDecl {
  std::string name;
  std::vector<FieldDecl> fields;
  Span span;
  bool operator==(const RecordDecl &) const = default;
};

struct RecordTemplateDecl {
  std::string name;
  std::vector<TemplateParam> tparams;
  std::vector<FieldDecl> fields;
  Span span;
  bool operator==(const RecordTemplateDecl &) const = default;
};

struct TypeAliasDecl {
  std::string name;
  TypeExpr target;
  Span span;
  bool operator==(const TypeAliasDecl &) const = default;
};

struct GlobalVarDecl {
  std::string name;
  TypeExpr type;
  Box<Expr> init;
  bool exported = false;
  bool is_extern = false;
  Span span;
  bool operator==(const GlobalVarDecl &) const = default;
};

using Decl = std::variant<FunctionDecl, FunctionTemplateDecl, RecordDecl, RecordTemplateDecl,
                          TypeAliasDecl, GlobalVarDecl>;

const std::string &decl_name(const Decl &d);
Span decl_span(const Decl &d);

struct AstModule {
  std::string tu_name;
  std::vector<Decl> decls;
  std::string source_text;
  bool operator==(const AstModule &) const = default;
};

} // namespace mtjit::ast
