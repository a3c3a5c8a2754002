#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mtjit/frontend/ast.hpp"

namespace mtjit::frontend {

enum class TokenKind : std::uint8_t {
  Identifier,
  IntLiteral,
  FloatLiteral,
  StringLiteral,
  Punct,
  Keyword,
};

struct Token {
  TokenKind kind;
  std::string text;
  ast::Span span;

  bool is(TokenKind k, std::string_view t) const { return kind == k && text == t; }
  bool is_punct(std::string_view t) const { return is(TokenKind::Punct, t); }
  bool is_keyword(std::string_view t) const { return is(TokenKind::Keyword, t); }
};

const char *token_kind_name(TokenKind k);
bool is_keyword(std::string_view word);

/// Splits MT source into tokens. Whitespace and `//` line comments are
/// skipped. Throws SyntaxError on an illegal character or an unterminated
/// string literal.
std::vector<Token> tokenize(std::string_view source, const std::string &tu_name = "<input>");

} // namespace mtjit::frontend
