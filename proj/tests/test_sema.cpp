#include <doctest.h>

#include <algorithm>
#include <set>

#include "mtjit/frontend/parser.hpp"
#include "mtjit/sema/sema.hpp"
#include "mtjit/support/error.hpp"
#include "support.hpp"

using namespace mtjit;
using namespace mtjit::sema;
using mtjit::testing::analyze_corpus;
using mtjit::testing::analyze_text;
using mtjit::testing::Rng;

namespace {

std::vector<Diagnostic> diagnostics_of(const std::string &src) {
  try {
    analyze_text(src);
  } catch (const SemaError &e) {
    return e.diagnostics();
  }
  return {};
}

bool any_message(const std::vector<Diagnostic> &ds, const std::string &needle) {
  return std::any_of(ds.begin(), ds.end(), [&](const Diagnostic &d) { return d.message.find(needle) != std::string::npos; });
}

std::size_t bodies_named(const SemaModule &m, const std::string &name) {
  return std::count_if(m.functions.begin(), m.functions.end(),
                       [&](const TypedFunction &f) { return f.source_name == name; });
}

TExpr local_of(TypeId t) {
  TExpr e;
  e.kind = TExpr::Kind::Local;
  e.type = t;
  return e;
}

TExpr int_const(std::int64_t v) {
  TExpr e;
  e.kind = TExpr::Kind::IntConst;
  e.type = TypeTable::kI32;
  e.ival = v;
  return e;
}

ArgInput value_arg(TExpr e) {
  ArgInput in;
  in.value = std::move(e);
  return in;
}

const char *kSpecialized = R"(
@jit template [x: i32] fn run() { print("generic ", x); }
template specialize fn run[3]() { print("special three"); }
fn main() -> i32 {
  let a = atoi(argv(1));
  run[a]();
  return 0;
}
)";

} // namespace

TEST_CASE("hello program has one jit site and no ahead-of-time body for the template") {
  auto m = analyze_corpus("hello.mt");
  REQUIRE(m.jit_sites.size() == 1);
  CHECK(m.jit_sites[0].site_id == 0);
  CHECK(m.jit_sites[0].mangled == "run<?0>");
  CHECK(bodies_named(m, "run") == 0);
  CHECK(bodies_named(m, "main") == 1);
}

TEST_CASE("empty module analyzes cleanly") {
  auto m = analyze_text("");
  CHECK(m.functions.empty());
  CHECK(m.jit_sites.empty());
}

TEST_CASE("undeclared call yields one diagnostic") {
  auto ds = diagnostics_of("fn main() -> i32 { foo(); return 0; }");
  REQUIRE(ds.size() == 1);
  CHECK(any_message(ds, "undeclared function 'foo'"));
  CHECK(ds[0].offset == 19);
  CHECK(ds[0].render() == "test.mt:19: error: call to undeclared function 'foo'");
}

TEST_CASE("diagnostics: mismatches, arity, missing return") {
  CHECK(any_message(diagnostics_of("fn f() -> i32 { return 1.5; }"), "returning f64"));
  CHECK(any_message(diagnostics_of("fn g(a: i32) {} fn f() { g(); }"), "expects 1 arguments"));
  CHECK(any_message(diagnostics_of("fn f() -> i32 { if true { return 1; } }"), "without returning"));
  CHECK(any_message(diagnostics_of("fn f() { let x = 1 + 2.0; }"), "different types"));
  CHECK(any_message(diagnostics_of("fn f() { for i in 0..3 { i = 2; } }"), "loop variable"));
  CHECK(any_message(diagnostics_of("fn f() { let a: [i32; 2]; let b: [i32; 2]; a = b; }"), "aggregate assignment"));
  CHECK(any_message(diagnostics_of("fn f() -> i32 { return 1 / 0; }"), "division by zero"));
  CHECK(any_message(diagnostics_of("fn f() { let a: [i32; 2]; a[2] = 1; }"), "out of bounds"));
  // Two independent errors are both reported, in source order.
  auto ds = diagnostics_of("fn f() { x(); } fn g() { y(); }");
  REQUIRE(ds.size() == 2);
  CHECK(ds[0].offset < ds[1].offset);
}

TEST_CASE("match_template_args classifies runtime and constant arguments") {
  auto m = analyze_text(R"(
@jit template [x: i32] fn run() { print(x); }
@jit template [T: type] fn runt() { print(sizeof[T]()); }
template [x: i32] fn plain() { print(x); }
)");
  const auto &run = *m.find_function_template("run");
  const auto &runt = *m.find_function_template("runt");
  const auto &plain = *m.find_function_template("plain");

  auto a = match_template_args(m, run, {value_arg(local_of(TypeTable::kI32))}, true);
  REQUIRE(a.size() == 1);
  CHECK(a[0] == TemplateArg::runtime_int(ast::Builtin::I32));

  auto t = match_template_args(m, runt, {value_arg(local_of(TypeTable::kStr))}, true);
  CHECK(t[0] == TemplateArg::runtime_type_string());

  auto c = match_template_args(m, run, {value_arg(int_const(7))}, true);
  CHECK(c[0] == TemplateArg::const_int(7, ast::Builtin::I32));

  CHECK_THROWS_AS(match_template_args(m, plain, {value_arg(local_of(TypeTable::kI32))}, false), SemaError);
  CHECK_THROWS_AS(match_template_args(m, run, {value_arg(local_of(TypeTable::kF64))}, true), SemaError);
  ArgInput as_type;
  as_type.type = TypeTable::kF64;
  CHECK_THROWS_AS(match_template_args(m, run, {as_type}, true), SemaError);
}

TEST_CASE("instantiate substitutes constants and is memoized") {
  auto m = analyze_corpus("hello.mt");
  const auto &run = *m.find_function_template("run");
  const auto &f = instantiate(m, run, {TemplateArg::const_int(5, ast::Builtin::I32)});
  CHECK(f.symbol == "run<5>");
  REQUIRE(f.body.size() == 1);
  const auto &print = f.body[0];
  CHECK(print.kind == TStmt::Kind::Print);
  REQUIRE(print.exprs.size() == 2);
  CHECK(print.exprs[0].text == "Hello, World, I was compiled at runtime, x = ");
  CHECK(print.exprs[1].kind == TExpr::Kind::IntConst);
  CHECK(print.exprs[1].ival == 5);
  auto copy = f;
  const auto &again = instantiate(m, run, {TemplateArg::const_int(5, ast::Builtin::I32)});
  CHECK(again == copy);
  CHECK(m.instantiate_calls["run<5>"] == 1);
}

TEST_CASE("identity template at i64") {
  auto m = analyze_text("template [T: type] fn id(v: T) -> T { return v; }");
  const auto &f = instantiate(m, *m.find_function_template("id"), {TemplateArg::concrete_type(TypeTable::kI64)});
  CHECK(f.symbol == "id<i64>");
  REQUIRE(f.params.size() == 1);
  CHECK(f.params[0].type == TypeTable::kI64);
  CHECK(f.ret == TypeTable::kI64);
}

TEST_CASE("failed static assertion names the assertion span") {
  std::string src = R"(@jit template [n: i32] fn check() {
  assert_const(n < 10);
  print(n);
})";
  auto m = analyze_text(src);
  const auto &t = *m.find_function_template("check");
  CHECK_NOTHROW(instantiate(m, t, {TemplateArg::const_int(3, ast::Builtin::I32)}));
  try {
    instantiate(m, t, {TemplateArg::const_int(12, ast::Builtin::I32)});
    FAIL("expected failure");
  } catch (const SemaError &e) {
    REQUIRE(e.diagnostics().size() == 2);
    const auto &d = e.diagnostics()[0];
    // Reference oracle: the offset of the asserted expression in the source.
    CHECK(d.offset == src.find("n < 10"));
    CHECK(d.message == "static assertion failed: n < 10");
    CHECK(e.diagnostics()[1].severity == Severity::Note);
    CHECK(e.diagnostics()[1].message == "in instantiation of 'check<12>'");
  }
}

TEST_CASE("explicit specialization selection") {
  auto m = analyze_text(kSpecialized);
  const auto &run = *m.find_function_template("run");
  auto *s3 = select_explicit_specialization(m, run, {TemplateArg::const_int(3, ast::Builtin::I32)});
  REQUIRE(s3 != nullptr);
  CHECK(s3 == &run.specializations[0]);
  CHECK(select_explicit_specialization(m, run, {TemplateArg::const_int(4, ast::Builtin::I32)}) == nullptr);
  // The specialization is compiled ahead of time under its concrete name.
  auto *f = m.find_function("run<3>");
  REQUIRE(f != nullptr);
  CHECK(f->origin == TypedFunction::Origin::Specialization);
  CHECK(m.instantiate_calls.count("run<3>") == 0);
}

TEST_CASE("type strings resolve in the top-level scope") {
  auto m = analyze_corpus("strtypes.mt");
  auto resolve = [&](const char *s) { return resolve_type_string(frontend::parse_type_string(s), m); };
  auto f = resolve("F");
  CHECK(resolve("::F") == f);
  CHECK(m.types.layout(f).size == 16);
  auto g = resolve("G<F, 5>");
  CHECK(m.types.name(g) == "G<F,5>");
  CHECK(m.types.layout(g).size == 80);
  CHECK(m.types.layout(resolve("float")).size == 4);
  CHECK(m.types.layout(resolve("double")).size == 8);
  CHECK(m.types.layout(resolve("size_t")).size == 8);
  try {
    resolve("NoSuchType");
    FAIL("expected failure");
  } catch (const SemaError &e) {
    CHECK(any_message(e.diagnostics(), "unknown type name 'NoSuchType'"));
  }
  CHECK_THROWS_AS(resolve("G<F>"), SemaError);
  CHECK_THROWS_AS(resolve("G<5, F>"), SemaError);
}

TEST_CASE("layout examples") {
  auto m = analyze_text("record F { i: i32; d: f64; } record H { b: bool; f: F; c: bool; }");
  auto f = *m.types.find("F");
  auto lf = m.types.layout(f);
  CHECK(lf.size == 16);
  CHECK(lf.align == 8);
  CHECK(lf.offsets == std::vector<std::uint64_t>{0, 8});
  CHECK(m.types.layout(TypeTable::kF32).size == 4);
  auto lh = m.types.layout(*m.types.find("H"));
  CHECK(lh.offsets == std::vector<std::uint64_t>{0, 8, 24});
  CHECK(lh.size == 32);
  CHECK_THROWS_AS(m.types.layout(TypeTable::kStr), Error);
  CHECK(any_message(diagnostics_of("record R { r: R; } fn f() { let x: R; }"), "contains itself"));
}

TEST_CASE("jit site ids are dense, in source order, and stable") {
  CHECK(analyze_text("fn main() -> i32 { return 0; }").jit_sites.empty());
  const char *src = R"(
@jit template [x: i32] fn a() { print(x); }
@jit template [x: i32] fn b() { print(x); }
fn main() -> i32 {
  let v = argc();
  b[v]();
  a[v]();
  return 0;
}
)";
  auto m1 = analyze_text(src);
  REQUIRE(m1.jit_sites.size() == 2);
  CHECK(m1.jit_sites[0].site_id == 0);
  CHECK(m1.jit_sites[0].template_name == "b");
  CHECK(m1.jit_sites[1].site_id == 1);
  CHECK(m1.jit_sites[1].template_name == "a");
  auto m2 = analyze_text(src);
  CHECK(equivalent(m1, m2));
}

TEST_CASE("nested jit use is rejected once analysis has finished") {
  auto m = analyze_text(R"(
@jit template [x: i32] fn inner() { print(x); }
@jit template [x: i32] fn outer() { let v = argc(); inner[v](); }
)");
  m.runtime_mode = true;
  try {
    instantiate(m, *m.find_function_template("outer"), {TemplateArg::const_int(1, ast::Builtin::I32)});
    FAIL("expected failure");
  } catch (const SemaError &e) {
    CHECK(any_message(e.diagnostics(), "nested jit"));
  }
}

TEST_CASE("global-reference parameters become unique-object hidden params") {
  auto m = analyze_text(R"(
global a: [f64; 4];
template [R: globalref [f64; 4]] fn fill(v: f64) { for i in 0..4 { R[i] = v; } }
fn main() -> i32 { fill[&a](1.0); return 0; }
)");
  auto *f = m.find_function("fill<@a>");
  REQUIRE(f != nullptr);
  REQUIRE(f->params.size() == 2);
  CHECK(f->hidden_params == 1);
  CHECK(f->params[0].unique_object);
  CHECK_FALSE(f->params[1].unique_object);
}

// ---------------------------------------------------------------------------
// Properties

namespace {

struct FieldSpec {
  const char *type;
  std::uint64_t size;
  std::uint64_t align;
};

const FieldSpec kScalars[] = {{"i32", 4, 4}, {"i64", 8, 8}, {"f32", 4, 4}, {"f64", 8, 8}, {"bool", 1, 1}};

} // namespace

TEST_CASE("property: layout laws over random records") {
  Rng rng(7);
  for (int iter = 0; iter < 200; ++iter) {
    std::string src = "record R {";
    std::vector<FieldSpec> fields;
    auto n = rng.range(1, 8);
    for (int i = 0; i < n; ++i) {
      auto f = kScalars[rng.below(5)];
      auto count = rng.range(0, 3);
      std::string type = f.type;
      if (count > 0) {
        type = "[" + type + "; " + std::to_string(count) + "]";
        f.size *= static_cast<std::uint64_t>(count);
      }
      src += " f" + std::to_string(i) + ": " + type + ";";
      fields.push_back(f);
    }
    src += " }";
    auto m = analyze_text(src);
    auto got = m.types.layout(*m.types.find("R"));
    // Independent oracle: place each field at the next multiple of its alignment.
    std::uint64_t off = 0, align = 1, sum = 0;
    std::vector<std::uint64_t> offsets;
    for (const auto &f : fields) {
      while (off % f.align)
        ++off;
      offsets.push_back(off);
      off += f.size;
      sum += f.size;
      align = std::max(align, f.align);
    }
    while (off % align)
      ++off;
    CHECK(got.offsets == offsets);
    CHECK(got.size == off);
    CHECK(got.size >= sum);
    CHECK(got.size % got.align == 0);
    for (std::size_t i = 0; i < offsets.size(); ++i)
      CHECK(got.offsets[i] % fields[i].align == 0);
    CHECK(analyze_text(src).types.layout(*m.types.find("R")) == got);
  }
}

TEST_CASE("property: ahead-of-time bodies are exactly non-jit uses plus specializations") {
  Rng rng(11);
  for (int iter = 0; iter < 50; ++iter) {
    std::string src = "@jit template [x: i32] fn j() { print(x); }\n"
                      "template [x: i32] fn p() { print(x); }\n"
                      "template specialize fn j[100]() { print(0); }\n"
                      "fn main() -> i32 { let v = argc();\n";
    std::set<std::int64_t> plain_values;
    auto calls = rng.range(0, 10);
    for (int i = 0; i < calls; ++i) {
      auto k = rng.range(0, 5);
      if (rng.coin()) {
        src += "  p[" + std::to_string(k) + "]();\n";
        plain_values.insert(k);
      } else {
        src += rng.coin() ? "  j[v]();\n" : "  j[" + std::to_string(k) + "]();\n";
      }
    }
    src += "  return 0; }\n";
    auto m = analyze_text(src);
    CHECK(bodies_named(m, "p") == plain_values.size());
    CHECK(bodies_named(m, "j") == 1);  // the specialization only
  }
}

TEST_CASE("property: a specialized argument list is never instantiated") {
  auto m = analyze_text(kSpecialized);
  const auto &run = *m.find_function_template("run");
  for (std::int64_t v = 0; v < 8; ++v) {
    std::vector<TemplateArg> args = {TemplateArg::const_int(v, ast::Builtin::I32)};
    if (select_explicit_specialization(m, run, args))
      continue;
    instantiate(m, run, args);
  }
  CHECK(m.instantiate_calls.count("run<3>") == 0);
  CHECK(m.instantiate_calls.size() == 7);
}

TEST_CASE("property: instantiated bodies re-check as hand-written code") {
  // Substitution soundness: printing the template with the constant written
  // in place of the parameter yields a plain function with the same body.
  auto m = analyze_text("template [n: i32] fn f(a: i32) -> i32 { let s = a; for i in 0..n { s = s + i * n; } return s; }");
  const auto &t = *m.find_function_template("f");
  for (int n : {0, 1, 5, 31}) {
    const auto &inst = instantiate(m, t, {TemplateArg::const_int(n, ast::Builtin::I32)});
    auto hand = analyze_text("fn f(a: i32) -> i32 { let s = a; for i in 0..(" + std::to_string(n) +
                             ") { s = s + i * " + std::to_string(n) + "; } return s; }");
    const auto &plain = *hand.find_function("f");
    CHECK(inst.body == plain.body);
    CHECK(inst.locals == plain.locals);
  }
}
