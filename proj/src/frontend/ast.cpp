#include "mtjit/frontend/ast.hpp"

namespace mtjit::ast {

const char *builtin_name(Builtin b) {
  switch (b) {
  case Builtin::I32:
    return "i32";
  case Builtin::I64:
    return "i64";
  case Builtin::F32:
    return "f32";
  case Builtin::F64:
    return "f64";
  case Builtin::Bool:
    return "bool";
  case Builtin::Str:
    return "str";
  }
  return "?";
}

std::optional<Builtin> builtin_from_name(std::string_view name) {
  if (name == "i32")
    return Builtin::I32;
  if (name == "i64")
    return Builtin::I64;
  if (name == "f32")
    return Builtin::F32;
  if (name == "f64")
    return Builtin::F64;
  if (name == "bool")
    return Builtin::Bool;
  if (name == "str")
    return Builtin::Str;
  return std::nullopt;
}

const char *binary_op_text(BinaryOp op) {
  switch (op) {
  case BinaryOp::Add:
    return "+";
  case BinaryOp::Sub:
    return "-";
  case BinaryOp::Mul:
    return "*";
  case BinaryOp::Div:
    return "/";
  case BinaryOp::Rem:
    return "%";
  case BinaryOp::Eq:
    return "==";
  case BinaryOp::Ne:
    return "!=";
  case BinaryOp::Lt:
    return "<";
  case BinaryOp::Le:
    return "<=";
  case BinaryOp::Gt:
    return ">";
  case BinaryOp::Ge:
    return ">=";
  }
  return "?";
}

bool is_comparison(BinaryOp op) { return op >= BinaryOp::Eq; }

const std::string &decl_name(const Decl &d) {
  return std::visit(
      [](const auto &x) -> const std::string & {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, FunctionTemplateDecl>)
          return x.fn.name;
        else
          return x.name;
      },
      d);
}

Span decl_span(const Decl &d) {
  return std::visit([](const auto &x) { return x.span; }, d);
}

} // namespace mtjit::ast
