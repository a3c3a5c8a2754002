#include <doctest.h>

#include "mtjit/frontend/parser.hpp"
#include "mtjit/support/error.hpp"

using namespace mtjit;
using namespace mtjit::ast;
using mtjit::frontend::parse_source;
using mtjit::frontend::parse_type_string;
using mtjit::frontend::print_module;
using mtjit::frontend::print_type;
using mtjit::frontend::tokenize;

namespace {

const char *kHello = R"(
@jit template [x: i32] fn run() {
  print("Hello, World, I was compiled at runtime, x = ", x);
}

fn main() -> i32 {
  let a = atoi(argv(1));
  run[a]();
  return 0;
}
)";

} // namespace

TEST_CASE("tokenize splits keywords, identifiers and punctuation") {
  auto toks = tokenize("fn run[x: i32]()", "t");
  REQUIRE(toks.size() == 9);
  CHECK(toks[0].is_keyword("fn"));
  CHECK(toks[1].kind == frontend::TokenKind::Identifier);
  CHECK(toks[1].text == "run");
  CHECK(toks[2].is_punct("["));
  CHECK(toks[4].is_punct(":"));
  CHECK(toks[5].is_keyword("i32"));
  CHECK(toks[8].is_punct(")"));
}

TEST_CASE("token spans cover the source text exactly") {
  std::string src = "let x: f64 = 1.5e3 + y; // c\nfor i in 0..3 {}";
  auto toks = tokenize(src, "t");
  for (const auto &t : toks)
    CHECK(src.substr(t.span.offset, t.span.length) == t.text);
  bool saw_range = false;
  for (const auto &t : toks)
    saw_range |= t.is_punct("..");
  CHECK(saw_range);
}

TEST_CASE("lexer errors carry offsets") {
  try {
    tokenize("let x = $;", "bad.mt");
    FAIL("expected a syntax error");
  } catch (const SyntaxError &e) {
    CHECK(e.diagnostic().offset == 8);
    CHECK(e.diagnostic().tu_name == "bad.mt");
  }
  CHECK_THROWS_AS(tokenize("\"open", "t"), SyntaxError);
  CHECK_THROWS_AS(tokenize("@inline fn f() {}", "t"), SyntaxError);
}

TEST_CASE("record with two fields parses") {
  auto m = parse_source("record F { i: i32; d: f64; }", "t");
  REQUIRE(m.decls.size() == 1);
  const auto &r = std::get<RecordDecl>(m.decls[0]);
  CHECK(r.name == "F");
  REQUIRE(r.fields.size() == 2);
  CHECK(r.fields[1].type.builtin == Builtin::F64);
}

TEST_CASE("jit-tagged template parses with its flag") {
  auto m = parse_source(kHello, "hello.mt");
  REQUIRE(m.decls.size() == 2);
  const auto &t = std::get<FunctionTemplateDecl>(m.decls[0]);
  CHECK(t.is_jit);
  CHECK(t.name() == "run");
  REQUIRE(t.tparams.size() == 1);
  CHECK(t.tparams[0].kind == TemplateParam::Kind::Int);
  const auto &main_fn = std::get<FunctionDecl>(m.decls[1]);
  CHECK(main_fn.body[1].exprs[0].kind == Expr::Kind::TemplateCall);
}

TEST_CASE("explicit specializations attach to their template") {
  auto m = parse_source(R"(
template specialize fn run[3]() { print("three"); }
@jit template [x: i32] fn run() { print(x); }
)",
                        "t");
  REQUIRE(m.decls.size() == 1);
  const auto &t = std::get<FunctionTemplateDecl>(m.decls[0]);
  REQUIRE(t.specializations.size() == 1);
  CHECK(t.specializations[0].args[0].expr->int_value == 3);
  CHECK_THROWS_AS(parse_source("template specialize fn nope[1]() {}", "t"), SyntaxError);
}

TEST_CASE("type strings") {
  auto f32 = parse_type_string("f32");
  CHECK(f32.kind == TypeExpr::Kind::Builtin);
  CHECK(f32.builtin == Builtin::F32);

  auto q = parse_type_string("::F");
  CHECK(q.kind == TypeExpr::Kind::Named);
  CHECK(q.qualified);
  CHECK(q.name == "F");

  auto g = parse_type_string("G<F, 5>");
  CHECK(g.kind == TypeExpr::Kind::Apply);
  REQUIRE(g.args.size() == 2);
  CHECK(g.args[1].expr->int_value == 5);
  CHECK(print_type(g) == "G<F, 5>");

  CHECK_THROWS_AS(parse_type_string("G<F, 5"), SyntaxError);
  CHECK_THROWS_AS(parse_type_string(""), SyntaxError);
}

TEST_CASE("print then parse is a fixed point") {
  const char *src = R"(
record F { i: i32; d: f64; }
template [T: type, N: i32] record G { v: [T; N]; }
type size_t = i64;
export global counter: i64 = 3;
extern fn helper(a: i32) -> i32;
template [T: type] fn id(v: T) -> T { return v; }
fn main() -> i32 {
  let m: [f64; 4];
  for i in 0..2 * 2 {
    m[i] = (i as f64) * -0.5 + 1.0e-3;
  }
  let b = !(1 == 2);
  if m[0] < 1.0 { print("a\tb\n", m[1]); } else if 1 < 2 { return 1; } else { return 2; }
  assert_const(sizeof[G<F, 5>]() == 80);
  return id[i32](helper(1) % 3);
}
)";
  auto first = parse_source(src, "t");
  auto printed = print_module(first);
  auto second = parse_source(printed, "t");
  CHECK(first.decls == second.decls);
  CHECK(print_module(second) == printed);
}
