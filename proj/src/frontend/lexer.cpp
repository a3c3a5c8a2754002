#include <array>

#include "mtjit/frontend/token.hpp"
#include "mtjit/support/error.hpp"

namespace mtjit::frontend {

namespace {

constexpr std::array kKeywords = {
    "fn",     "template",  "specialize", "record", "type",  "let",    "for",
    "in",     "if",        "else",       "return", "as",    "true",   "false",
    "i32",    "i64",       "f32",        "f64",    "bool",  "str",    "globalref",
    "global", "export",    "extern",     "print",  "assert_const",
};

constexpr std::array kTwoCharPunct = {"::", "->", "..", "==", "!=", "<=", ">="};
constexpr std::string_view kOneCharPunct = "()[]{}<>,;:.+-*/%=!&";

bool ident_start(char c) { return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c == '_'; }
bool ident_char(char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool digit(char c) { return c >= '0' && c <= '9'; }

} // namespace

const char *token_kind_name(TokenKind k) {
  switch (k) {
  case TokenKind::Identifier:
    return "identifier";
  case TokenKind::IntLiteral:
    return "integer literal";
  case TokenKind::FloatLiteral:
    return "float literal";
  case TokenKind::StringLiteral:
    return "string literal";
  case TokenKind::Punct:
    return "punctuation";
  case TokenKind::Keyword:
    return "keyword";
  }
  return "token";
}

bool is_keyword(std::string_view word) {
  for (auto *k : kKeywords)
    if (word == k)
      return true;
  return false;
}

std::vector<Token> tokenize(std::string_view src, const std::string &tu_name) {
  std::vector<Token> out;
  std::size_t i = 0;
  const std::size_t n = src.size();
  auto emit = [&](TokenKind kind, std::size_t begin) {
    out.push_back(Token{kind, std::string(src.substr(begin, i - begin)),
                        ast::Span{static_cast<std::uint32_t>(begin),
                                  static_cast<std::uint32_t>(i - begin)}});
  };

  while (i < n) {
    char c = src[i];
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r') {
      ++i;
      continue;
    }
    if (c == '/' && i + 1 < n && src[i + 1] == '/') {
      while (i < n && src[i] != '\n')
        ++i;
      continue;
    }
    std::size_t begin = i;
    if (ident_start(c)) {
      while (i < n && ident_char(src[i]))
        ++i;
      auto word = src.substr(begin, i - begin);
      emit(is_keyword(word) ? TokenKind::Keyword : TokenKind::Identifier, begin);
      continue;
    }
    if (c == '@') {
      ++i;
      while (i < n && ident_char(src[i]))
        ++i;
      if (src.substr(begin, i - begin) != "@jit")
        throw SyntaxError(tu_name, static_cast<std::uint32_t>(begin), "unknown attribute '" +
                                                                          std::string(src.substr(begin, i - begin)) + "'");
      emit(TokenKind::Keyword, begin);
      continue;
    }
    if (digit(c)) {
      while (i < n && digit(src[i]))
        ++i;
      bool is_float = false;
      if (i + 1 < n && src[i] == '.' && digit(src[i + 1])) {
        is_float = true;
        ++i;
        while (i < n && digit(src[i]))
          ++i;
      }
      if (i < n && (src[i] == 'e' || src[i] == 'E')) {
        std::size_t j = i + 1;
        if (j < n && (src[j] == '+' || src[j] == '-'))
          ++j;
        if (j < n && digit(src[j])) {
          is_float = true;
          i = j;
          while (i < n && digit(src[i]))
            ++i;
        }
      }
      if (i < n && ident_char(src[i]))
        throw SyntaxError(tu_name, static_cast<std::uint32_t>(i), "malformed number literal");
      emit(is_float ? TokenKind::FloatLiteral : TokenKind::IntLiteral, begin);
      continue;
    }
    if (c == '"') {
      ++i;
      bool closed = false;
      while (i < n) {
        if (src[i] == '\\') {
          i += 2;
          continue;
        }
        if (src[i] == '\n')
          break;
        if (src[i] == '"') {
          ++i;
          closed = true;
          break;
        }
        ++i;
      }
      if (!closed || i > n)
        throw SyntaxError(tu_name, static_cast<std::uint32_t>(begin), "unterminated string literal");
      emit(TokenKind::StringLiteral, begin);
      continue;
    }
    if (i + 1 < n) {
      auto two = src.substr(i, 2);
      bool matched = false;
      for (auto *p : kTwoCharPunct) {
        if (two == p) {
          i += 2;
          emit(TokenKind::Punct, begin);
          matched = true;
          break;
        }
      }
      if (matched)
        continue;
    }
    if (kOneCharPunct.find(c) != std::string_view::npos) {
      ++i;
      emit(TokenKind::Punct, begin);
      continue;
    }
    throw SyntaxError(tu_name, static_cast<std::uint32_t>(begin),
                      "illegal character (byte 0x" +
                          std::string{"0123456789abcdef"[(static_cast<unsigned char>(c) >> 4) & 0xf],
                                      "0123456789abcdef"[static_cast<unsigned char>(c) & 0xf]} +
                          ")");
  }
  return out;
}

} // namespace mtjit::frontend
