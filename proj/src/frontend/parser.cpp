#include "mtjit/frontend/parser.hpp"

#include <charconv>
#include <cstdlib>
#include <map>

#include "mtjit/support/error.hpp"

namespace mtjit::frontend {

using namespace ast;

namespace {

constexpr int kMaxDepth = 256;

class Parser {
public:
  Parser(const std::vector<Token> &toks, std::string tu) : toks_(toks), tu_(std::move(tu)) {}

  AstModule module(std::string source) {
    AstModule m;
    m.tu_name = tu_;
    m.source_text = std::move(source);
    std::vector<std::pair<std::string, ExplicitSpecialization>> specs;
    while (!at_end()) {
      if (peek().is_keyword("template") && peek(1).is_keyword("specialize")) {
        specs.push_back(specialization());
        continue;
      }
      m.decls.push_back(decl());
    }
    for (auto &[name, spec] : specs) {
      FunctionTemplateDecl *target = nullptr;
      for (auto &d : m.decls)
        if (auto *t = std::get_if<FunctionTemplateDecl>(&d); t && t->fn.name == name)
          target = t;
      if (!target)
        throw SyntaxError(tu_, spec.span.offset,
                          "explicit specialization of unknown function template '" + name + "'");
      target->specializations.push_back(std::move(spec));
    }
    return m;
  }

  TypeExpr type_only() {
    auto t = type();
    if (!at_end())
      error_expected("end of type string");
    return t;
  }

private:
  // -- token helpers -------------------------------------------------------
  bool at_end(std::size_t ahead = 0) const { return pos_ + ahead >= toks_.size(); }
  const Token &peek(std::size_t ahead = 0) const {
    static const Token eof{TokenKind::Punct, "<eof>", {}};
    return at_end(ahead) ? eof : toks_[pos_ + ahead];
  }
  std::uint32_t here() const {
    if (!at_end())
      return peek().span.offset;
    if (toks_.empty())
      return 0;
    return toks_.back().span.offset + toks_.back().span.length;
  }
  const Token &advance() {
    if (at_end())
      error_expected("more input");
    return toks_[pos_++];
  }
  bool accept_punct(std::string_view p) {
    if (peek().is_punct(p) && !at_end()) {
      ++pos_;
      return true;
    }
    return false;
  }
  bool accept_keyword(std::string_view k) {
    if (peek().is_keyword(k) && !at_end()) {
      ++pos_;
      return true;
    }
    return false;
  }
  [[noreturn]] void error_expected(const std::string &what) const {
    std::string found = at_end() ? "end of input" : "'" + peek().text + "'";
    throw SyntaxError(tu_, here(), "expected " + what + ", found " + found);
  }
  const Token &expect_punct(std::string_view p) {
    if (!peek().is_punct(p) || at_end())
      error_expected("'" + std::string(p) + "'");
    return advance();
  }
  const Token &expect_keyword(std::string_view k) {
    if (!peek().is_keyword(k) || at_end())
      error_expected("'" + std::string(k) + "'");
    return advance();
  }
  std::string expect_ident() {
    if (peek().kind != TokenKind::Identifier || at_end())
      error_expected("identifier");
    return advance().text;
  }
  Span span_from(std::uint32_t begin) const {
    std::uint32_t end = pos_ == 0 ? begin : toks_[pos_ - 1].span.offset + toks_[pos_ - 1].span.length;
    return Span{begin, end > begin ? end - begin : 0};
  }

  struct DepthGuard {
    Parser &p;
    explicit DepthGuard(Parser &parser) : p(parser) {
      if (++p.depth_ > kMaxDepth)
        throw SyntaxError(p.tu_, p.here(), "nesting too deep");
    }
    ~DepthGuard() { --p.depth_; }
  };

  // -- declarations --------------------------------------------------------
  Decl decl() {
    auto begin = here();
    bool jit = accept_keyword("@jit");
    if (accept_keyword("template")) {
      auto tparams = template_params();
      if (!jit && accept_keyword("record")) {
        RecordTemplateDecl r;
        r.name = expect_ident();
        r.tparams = std::move(tparams);
        r.fields = record_body();
        r.span = span_from(begin);
        return r;
      }
      FunctionTemplateDecl t;
      t.is_jit = jit;
      t.tparams = std::move(tparams);
      expect_keyword("fn");
      t.fn = function_rest(begin, false, true);
      t.span = span_from(begin);
      return t;
    }
    if (jit)
      error_expected("'template' after @jit");
    if (accept_keyword("record")) {
      RecordDecl r;
      r.name = expect_ident();
      r.fields = record_body();
      r.span = span_from(begin);
      return r;
    }
    if (accept_keyword("type")) {
      TypeAliasDecl a;
      a.name = expect_ident();
      expect_punct("=");
      a.target = type();
      expect_punct(";");
      a.span = span_from(begin);
      return a;
    }
    if (accept_keyword("extern")) {
      if (accept_keyword("fn"))
        return function_rest(begin, false, false);
      expect_keyword("global");
      GlobalVarDecl g;
      g.is_extern = true;
      g.name = expect_ident();
      expect_punct(":");
      g.type = type();
      expect_punct(";");
      g.span = span_from(begin);
      return g;
    }
    bool exported = accept_keyword("export");
    if (accept_keyword("fn"))
      return function_rest(begin, exported, true);
    if (accept_keyword("global")) {
      GlobalVarDecl g;
      g.exported = exported;
      g.name = expect_ident();
      expect_punct(":");
      g.type = type();
      if (accept_punct("="))
        g.init = expr();
      expect_punct(";");
      g.span = span_from(begin);
      return g;
    }
    error_expected("declaration");
  }

  std::pair<std::string, ExplicitSpecialization> specialization() {
    auto begin = here();
    expect_keyword("template");
    expect_keyword("specialize");
    expect_keyword("fn");
    ExplicitSpecialization s;
    auto name_begin = here();
    std::string name = expect_ident();
    expect_punct("[");
    s.args = template_args("]");
    expect_punct("]");
    s.fn = function_signature_and_body(name_begin, name, false, true);
    s.span = span_from(begin);
    return {name, std::move(s)};
  }

  std::vector<TemplateParam> template_params() {
    expect_punct("[");
    std::vector<TemplateParam> out;
    do {
      TemplateParam p;
      auto begin = here();
      p.name = expect_ident();
      expect_punct(":");
      if (accept_keyword("type")) {
        p.kind = TemplateParam::Kind::Type;
      } else if (accept_keyword("i32")) {
        p.kind = TemplateParam::Kind::Int;
        p.width = Builtin::I32;
      } else if (accept_keyword("i64")) {
        p.kind = TemplateParam::Kind::Int;
        p.width = Builtin::I64;
      } else if (accept_keyword("globalref")) {
        p.kind = TemplateParam::Kind::GlobalRef;
        p.pointee = type();
      } else {
        error_expected("'type', 'i32', 'i64' or 'globalref'");
      }
      p.span = span_from(begin);
      out.push_back(std::move(p));
    } while (accept_punct(","));
    expect_punct("]");
    return out;
  }

  std::vector<FieldDecl> record_body() {
    expect_punct("{");
    std::vector<FieldDecl> fields;
    while (!accept_punct("}")) {
      FieldDecl f;
      auto begin = here();
      f.name = expect_ident();
      expect_punct(":");
      f.type = type();
      expect_punct(";");
      f.span = span_from(begin);
      fields.push_back(std::move(f));
    }
    return fields;
  }

  FunctionDecl function_rest(std::uint32_t begin, bool exported, bool with_body) {
    std::string name = expect_ident();
    return function_signature_and_body(begin, name, exported, with_body);
  }

  FunctionDecl function_signature_and_body(std::uint32_t begin, std::string name, bool exported,
                                           bool with_body) {
    FunctionDecl f;
    f.name = std::move(name);
    f.exported = exported;
    expect_punct("(");
    if (!peek().is_punct(")")) {
      do {
        Param p;
        auto pb = here();
        p.name = expect_ident();
        expect_punct(":");
        p.type = type();
        p.span = span_from(pb);
        f.params.push_back(std::move(p));
      } while (accept_punct(","));
    }
    expect_punct(")");
    if (accept_punct("->"))
      f.return_type = type();
    if (with_body) {
      f.body = block();
    } else {
      f.has_body = false;
      expect_punct(";");
    }
    f.span = span_from(begin);
    return f;
  }

  // -- types ---------------------------------------------------------------
  bool starts_type() const {
    const auto &t = peek();
    if (at_end())
      return false;
    if (t.kind == TokenKind::Keyword && (builtin_from_name(t.text) || t.text == "globalref"))
      return true;
    if (t.is_punct("["))
      return true;
    if (t.is_punct("::"))
      return peek(1).kind == TokenKind::Identifier && peek(2).is_punct("<");
    return t.kind == TokenKind::Identifier && peek(1).is_punct("<");
  }

  TypeExpr type() {
    DepthGuard g(*this);
    auto begin = here();
    TypeExpr t;
    const auto &tok = peek();
    if (tok.kind == TokenKind::Keyword && !at_end()) {
      if (auto b = builtin_from_name(tok.text)) {
        advance();
        t.kind = TypeExpr::Kind::Builtin;
        t.builtin = *b;
        t.span = span_from(begin);
        return t;
      }
      if (tok.text == "globalref") {
        advance();
        t.kind = TypeExpr::Kind::GlobalRef;
        t.element = type();
        t.span = span_from(begin);
        return t;
      }
    }
    if (accept_punct("[")) {
      t.kind = TypeExpr::Kind::Array;
      t.element = type();
      expect_punct(";");
      t.count = expr();
      expect_punct("]");
      t.span = span_from(begin);
      return t;
    }
    t.qualified = accept_punct("::");
    t.name = expect_ident();
    if (accept_punct("<")) {
      t.kind = TypeExpr::Kind::Apply;
      t.args = template_args(">");
      expect_punct(">");
    } else {
      t.kind = TypeExpr::Kind::Named;
    }
    t.span = span_from(begin);
    return t;
  }

  /// Template arguments up to (not including) `close`. Inside `< >` the
  /// expression form stops below comparison level so `>` terminates.
  std::vector<TemplateArgExpr> template_args(std::string_view close) {
    std::vector<TemplateArgExpr> out;
    if (peek().is_punct(close))
      return out;
    do {
      TemplateArgExpr a;
      if (starts_type())
        a.type = type();
      else
        a.expr = close == ">" ? additive() : expr();
      out.push_back(std::move(a));
    } while (accept_punct(","));
    return out;
  }

  // -- statements ----------------------------------------------------------
  std::vector<Stmt> block() {
    DepthGuard g(*this);
    expect_punct("{");
    std::vector<Stmt> out;
    while (!accept_punct("}")) {
      if (at_end())
        error_expected("'}'");
      out.push_back(statement());
    }
    return out;
  }

  Stmt statement() {
    auto begin = here();
    Stmt s;
    if (accept_keyword("let")) {
      s.kind = Stmt::Kind::Let;
      s.name = expect_ident();
      if (accept_punct(":"))
        s.declared_type = type();
      if (accept_punct("="))
        s.exprs.push_back(expr());
      expect_punct(";");
    } else if (accept_keyword("for")) {
      s.kind = Stmt::Kind::For;
      s.name = expect_ident();
      expect_keyword("in");
      s.exprs.push_back(expr());
      expect_punct("..");
      s.exprs.push_back(expr());
      s.body = block();
    } else if (accept_keyword("if")) {
      return if_rest(begin);
    } else if (accept_keyword("return")) {
      s.kind = Stmt::Kind::Return;
      if (!peek().is_punct(";"))
        s.exprs.push_back(expr());
      expect_punct(";");
    } else if (accept_keyword("print")) {
      s.kind = Stmt::Kind::Print;
      expect_punct("(");
      if (!peek().is_punct(")")) {
        do
          s.exprs.push_back(expr());
        while (accept_punct(","));
      }
      expect_punct(")");
      expect_punct(";");
    } else if (accept_keyword("assert_const")) {
      s.kind = Stmt::Kind::AssertConst;
      expect_punct("(");
      s.exprs.push_back(expr());
      expect_punct(")");
      expect_punct(";");
    } else {
      auto e = expr();
      if (accept_punct("=")) {
        s.kind = Stmt::Kind::Assign;
        s.exprs.push_back(std::move(e));
        s.exprs.push_back(expr());
      } else {
        s.kind = Stmt::Kind::ExprStmt;
        s.exprs.push_back(std::move(e));
      }
      expect_punct(";");
    }
    s.span = span_from(begin);
    return s;
  }

  Stmt if_rest(std::uint32_t begin) {
    DepthGuard g(*this);
    Stmt s;
    s.kind = Stmt::Kind::If;
    s.exprs.push_back(expr());
    s.body = block();
    if (accept_keyword("else")) {
      s.has_else = true;
      auto else_begin = here();
      if (accept_keyword("if"))
        s.else_body.push_back(if_rest(else_begin));
      else
        s.else_body = block();
    }
    s.span = span_from(begin);
    return s;
  }

  // -- expressions ---------------------------------------------------------
  Expr expr() {
    DepthGuard g(*this);
    auto begin = here();
    Expr lhs = additive();
    static const std::map<std::string, BinaryOp, std::less<>> cmp = {
        {"==", BinaryOp::Eq}, {"!=", BinaryOp::Ne}, {"<", BinaryOp::Lt},
        {"<=", BinaryOp::Le}, {">", BinaryOp::Gt}, {">=", BinaryOp::Ge}};
    if (peek().kind == TokenKind::Punct && !at_end()) {
      if (auto it = cmp.find(peek().text); it != cmp.end()) {
        advance();
        Expr rhs = additive();
        return binary(it->second, std::move(lhs), std::move(rhs), begin);
      }
    }
    return lhs;
  }

  Expr binary(BinaryOp op, Expr lhs, Expr rhs, std::uint32_t begin) {
    Expr e;
    e.kind = Expr::Kind::Binary;
    e.binop = op;
    e.operands.push_back(std::move(lhs));
    e.operands.push_back(std::move(rhs));
    e.span = span_from(begin);
    return e;
  }

  Expr additive() {
    DepthGuard g(*this);
    auto begin = here();
    Expr lhs = multiplicative();
    while (true) {
      if (accept_punct("+"))
        lhs = binary(BinaryOp::Add, std::move(lhs), multiplicative(), begin);
      else if (accept_punct("-"))
        lhs = binary(BinaryOp::Sub, std::move(lhs), multiplicative(), begin);
      else
        return lhs;
    }
  }

  Expr multiplicative() {
    auto begin = here();
    Expr lhs = unary();
    while (true) {
      if (accept_punct("*"))
        lhs = binary(BinaryOp::Mul, std::move(lhs), unary(), begin);
      else if (accept_punct("/"))
        lhs = binary(BinaryOp::Div, std::move(lhs), unary(), begin);
      else if (accept_punct("%"))
        lhs = binary(BinaryOp::Rem, std::move(lhs), unary(), begin);
      else
        return lhs;
    }
  }

  Expr unary() {
    DepthGuard g(*this);
    auto begin = here();
    if (peek().is_punct("-") || peek().is_punct("!")) {
      bool neg = advance().text == "-";
      Expr e;
      e.kind = Expr::Kind::Unary;
      e.unop = neg ? UnaryOp::Neg : UnaryOp::Not;
      e.operands.push_back(unary());
      e.span = span_from(begin);
      return e;
    }
    Expr e = postfix();
    while (accept_keyword("as")) {
      Expr c;
      c.kind = Expr::Kind::Cast;
      c.operands.push_back(std::move(e));
      c.cast_type = type();
      c.span = span_from(begin);
      e = std::move(c);
    }
    return e;
  }

  std::vector<Expr> call_args() {
    expect_punct("(");
    std::vector<Expr> args;
    if (!peek().is_punct(")")) {
      do
        args.push_back(expr());
      while (accept_punct(","));
    }
    expect_punct(")");
    return args;
  }

  Expr postfix() {
    auto begin = here();
    Expr e = primary();
    while (true) {
      if (peek().is_punct("[") && !at_end()) {
        advance();
        auto args = template_args("]");
        expect_punct("]");
        if (peek().is_punct("(") && e.kind == Expr::Kind::Name) {
          Expr call;
          call.kind = Expr::Kind::TemplateCall;
          call.text = e.text;
          call.qualified = e.qualified;
          call.targs = std::move(args);
          call.operands = call_args();
          call.span = span_from(begin);
          e = std::move(call);
          continue;
        }
        if (args.size() != 1 || args[0].is_type())
          throw SyntaxError(tu_, e.span.offset, "expected a single index expression");
        Expr idx;
        idx.kind = Expr::Kind::Index;
        idx.operands.push_back(std::move(e));
        idx.operands.push_back(std::move(*args[0].expr));
        idx.span = span_from(begin);
        e = std::move(idx);
      } else if (accept_punct(".")) {
        Expr f;
        f.kind = Expr::Kind::Field;
        f.text = expect_ident();
        f.operands.push_back(std::move(e));
        f.span = span_from(begin);
        e = std::move(f);
      } else if (peek().is_punct("(") && e.kind == Expr::Kind::Name && !at_end()) {
        Expr call;
        call.kind = Expr::Kind::Call;
        call.text = e.text;
        call.qualified = e.qualified;
        call.operands = call_args();
        call.span = span_from(begin);
        e = std::move(call);
      } else {
        return e;
      }
    }
  }

  Expr primary() {
    auto begin = here();
    Expr e;
    const Token &t = peek();
    if (at_end())
      error_expected("expression");
    switch (t.kind) {
    case TokenKind::IntLiteral: {
      advance();
      e.kind = Expr::Kind::IntLit;
      std::uint64_t v = 0;
      auto [p, ec] = std::from_chars(t.text.data(), t.text.data() + t.text.size(), v);
      if (ec != std::errc() || v > static_cast<std::uint64_t>(INT64_MAX))
        throw SyntaxError(tu_, t.span.offset, "integer literal out of range");
      e.int_value = static_cast<std::int64_t>(v);
      break;
    }
    case TokenKind::FloatLiteral: {
      advance();
      e.kind = Expr::Kind::FloatLit;
      e.text = t.text;
      e.float_value = std::strtod(t.text.c_str(), nullptr);
      break;
    }
    case TokenKind::StringLiteral: {
      advance();
      e.kind = Expr::Kind::StrLit;
      e.text = decode_string(t);
      break;
    }
    case TokenKind::Keyword:
      if (t.text == "true" || t.text == "false") {
        advance();
        e.kind = Expr::Kind::BoolLit;
        e.bool_value = t.text == "true";
        break;
      }
      error_expected("expression");
    case TokenKind::Identifier:
      advance();
      e.kind = Expr::Kind::Name;
      e.text = t.text;
      break;
    case TokenKind::Punct:
      if (t.text == "(") {
        advance();
        e = expr();
        expect_punct(")");
        return e;
      }
      if (t.text == "::") {
        advance();
        e.kind = Expr::Kind::Name;
        e.qualified = true;
        e.text = expect_ident();
        break;
      }
      if (t.text == "&") {
        advance();
        e.kind = Expr::Kind::AddrOf;
        e.qualified = accept_punct("::");
        e.text = expect_ident();
        break;
      }
      error_expected("expression");
    }
    e.span = span_from(begin);
    return e;
  }

  std::string decode_string(const Token &t) const {
    std::string out;
    const std::string &s = t.text;
    for (std::size_t i = 1; i + 1 < s.size(); ++i) {
      if (s[i] != '\\') {
        out += s[i];
        continue;
      }
      char c = s[++i];
      switch (c) {
      case 'n':
        out += '\n';
        break;
      case 't':
        out += '\t';
        break;
      case '\\':
        out += '\\';
        break;
      case '"':
        out += '"';
        break;
      default:
        throw SyntaxError(tu_, t.span.offset + static_cast<std::uint32_t>(i),
                          std::string("unknown escape '\\") + c + "'");
      }
    }
    return out;
  }

  const std::vector<Token> &toks_;
  std::string tu_;
  std::size_t pos_ = 0;
  int depth_ = 0;
};

} // namespace

AstModule parse_module(const std::vector<Token> &tokens, const std::string &tu_name,
                       std::string source_text) {
  Parser p(tokens, tu_name);
  return p.module(std::move(source_text));
}

AstModule parse_source(std::string_view source, const std::string &tu_name) {
  auto toks = tokenize(source, tu_name);
  return parse_module(toks, tu_name, std::string(source));
}

TypeExpr parse_type_string(std::string_view text) {
  const std::string tu = "<type-string>";
  try {
    auto toks = tokenize(text, tu);
    if (toks.empty())
      throw SyntaxError(tu, 0, "empty type string");
    Parser p(toks, tu);
    return p.type_only();
  } catch (const SyntaxError &e) {
    throw SyntaxError(tu, e.diagnostic().offset,
                      e.diagnostic().message + " in type string '" + std::string(text) + "'");
  }
}

} // namespace mtjit::frontend
