#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "mtjit/frontend/ast.hpp"
#include "mtjit/frontend/token.hpp"

namespace mtjit::frontend {

/// Recursive-descent parser over the token stream. Explicit specializations
/// are attached to their primary template after all declarations are read,
/// so they may appear anywhere in the module.
ast::AstModule parse_module(const std::vector<Token> &tokens, const std::string &tu_name,
                            std::string source_text = {});

/// tokenize + parse_module, keeping the source text in the module.
ast::AstModule parse_source(std::string_view source, const std::string &tu_name);

/// Parses a runtime-supplied type string such as "G<F, 5>" or "::F".
ast::TypeExpr parse_type_string(std::string_view text);

std::string print_module(const ast::AstModule &m);
std::string print_type(const ast::TypeExpr &t);
std::string print_expr(const ast::Expr &e);

} // namespace mtjit::frontend
