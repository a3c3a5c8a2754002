#include <doctest.h>

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <thread>

#include "run_support.hpp"

using namespace mtjit;
using namespace mtjit::testing;

namespace {

const char *kSpecialized = R"(
global a: [f64; 4];
global b: [f64; 4];
@jit template [x: i32] fn run() { print("generic ", x); }
template specialize fn run[3]() { print("special three"); }
@jit template [R: globalref [f64; 4], S: globalref [f64; 4]] fn copy() { R[0] = S[0]; }
template specialize fn copy[&a, &b]() { a[0] = b[0] + 1.0; }
fn main() -> i32 {
  let v = atoi(argv(1));
  run[v]();
  copy[&a, &b]();
  copy[&b, &a]();
  print(a[0], " ", b[0]);
  return 0;
}
)";

const char *kAffine = R"(
@jit template [k: i32] fn affine(x: i32) -> i32 { return x * k + 1; }
fn main() -> i32 {
  print(affine[atoi(argv(1))](2));
  return 0;
}
)";

const char *kReferents = R"(
global a: [f64; 4];
global b: [f64; 4];
@jit template [R: globalref [f64; 4]] fn fill(v: f64) {
  for i in 0..4 { R[i] = v + (i as f64); }
}
@jit template [R: globalref [f64; 4], S: globalref [f64; 4]] fn forward() -> f64 {
  R[0] = 1.5;
  S[0] = 2.5;
  return R[0];
}
fn main() -> i32 {
  fill[&a](10.0);
  fill[&b](20.0);
  fill[&a](30.0);
  print(a[0], " ", a[3], " ", b[0], " ", b[3]);
  print(forward[&a, &b]());
  print(forward[&a, &a]());
  print(a[0], " ", b[0]);
  return 0;
}
)";

std::uint64_t bits_of(std::int32_t v) { return static_cast<std::uint64_t>(static_cast<std::int64_t>(v)); }

} // namespace

TEST_CASE("hello: one compilation per distinct runtime value") {
  auto r = run_source(read_corpus("hello.mt"), {"42", "42", "7"}, true, "hello.mt");
  auto lines = lines_of(r.output);
  REQUIRE(lines.size() == 3);
  CHECK(lines[0] == "Hello, World, I was compiled at runtime, x = 42");
  CHECK(lines[1] == lines[0]);
  CHECK(lines[2].ends_with("x = 7"));
  CHECK(r.stats.compilations == 2);
  CHECK(r.stats.hits == 1);
  CHECK(r.stats.misses == 2);
  REQUIRE(r.stats.keys.size() == 2);
  CHECK(r.stats.keys[0].key == "hello.mt:run<42>");
  CHECK(r.stats.keys[0].hits == 1);
  CHECK(r.stats.keys[1].key == "hello.mt:run<7>");
}

TEST_CASE("strings name types in the caller's scope") {
  auto r = run_source(read_corpus("strtypes.mt"), {"::F", "F", "f32", "f64", "G<F, 5>", "size_t", "double"}, true,
                      "strtypes.mt");
  CHECK(lines_of(r.output) == std::vector<std::string>{"sizeof(T) = 16", "sizeof(T) = 16", "sizeof(T) = 4",
                                                       "sizeof(T) = 8", "sizeof(T) = 80", "sizeof(T) = 8",
                                                       "sizeof(T) = 8"});
  // "F" and "::F" resolve to one type; so do an alias and its target.
  CHECK(r.stats.compilations == 5);
  CHECK(r.stats.misses == 7);
}

TEST_CASE("an unknown type string is a jit failure pointing at the call") {
  auto image = image_of(read_corpus("strtypes.mt"), "strtypes.mt");
  Loaded l(image, {"NoSuchType"});
  try {
    l.runtime.run_main();
    FAIL("expected a jit failure");
  } catch (const JitError &e) {
    std::string msg = e.what();
    CHECK(msg.find("unknown type name 'NoSuchType'") != std::string::npos);
    CHECK(msg.find("strtypes.mt:") != std::string::npos);
    CHECK(msg.find("run[t]();") != std::string::npos);
  }
  Loaded bad(image, {"G<F,"});
  CHECK_THROWS_AS(bad.runtime.run_main(), JitError);
}

TEST_CASE("explicit specializations are seeded at load and win over instantiation") {
  auto image = image_of(kSpecialized, "spec.mt");
  Loaded l(image, {"3"});
  auto keys = l.runtime.cache_keys();
  CHECK(keys == std::vector<std::string>{"spec.mt:copy<@a,@b>", "spec.mt:run<3>"});
  CHECK(l.runtime.tu_instances() == 0);
  CHECK(l.runtime.run_main() == 0);
  auto lines = lines_of(l.text());
  REQUIRE(lines.size() == 2);
  CHECK(lines[0] == "special three");
  // copy[&a, &b] is the specialization: a = b + 1 = 1. copy[&b, &a] is generic: b = a.
  CHECK(lines[1] == "1 1");
  auto s = l.runtime.stats();
  CHECK(s.compilations == 1);
  CHECK(s.misses == 3);
  auto by_key = [&](const std::string &k) {
    return *std::find_if(s.keys.begin(), s.keys.end(), [&](const rt::KeyStats &x) { return x.key == k; });
  };
  CHECK(by_key("spec.mt:run<3>").preseeded);
  CHECK(by_key("spec.mt:run<3>").compilations == 0);
  CHECK(by_key("spec.mt:copy<@b,@a>").compilations == 1);

  Loaded other(image, {"4"});
  other.runtime.run_main();
  CHECK(lines_of(other.text())[0] == "generic 4");
}

TEST_CASE("compiler state is prepared once per translation unit") {
  auto image = image_of({{"a.mt", "extern fn twice(x: i32) -> i32;\n"
                                   "@jit template [n: i32] fn k() -> i32 { return twice(n); }\n"
                                   "fn main() -> i32 { print(k[atoi(argv(1))]()); return 0; }\n"},
                         {"b.mt", "export fn twice(x: i32) -> i32 { return x * 2; }\n"}},
                        true);
  Loaded l(image, {"21"});
  auto a = l.runtime.tu_index("a.mt");
  auto b = l.runtime.tu_index("b.mt");
  auto *first = l.runtime.ensure_tu_instance(a);
  CHECK(l.runtime.ensure_tu_instance(a) == first);
  CHECK(l.runtime.tu_instances() == 1);
  l.runtime.run_main();
  CHECK(l.text() == "42\n");
  CHECK(l.runtime.ensure_tu_instance(a) == first);
  CHECK(l.runtime.tu_instances() == 1);

  auto plain = image_of({{"a.mt", "extern fn twice(x: i32) -> i32;\nfn main() -> i32 { return twice(1); }\n"},
                         {"b.mt", "export fn twice(x: i32) -> i32 { return x * 2; }\n"}},
                        false);
  Loaded p(plain, {});
  CHECK(p.runtime.run_main() == 2);
  CHECK_THROWS_AS(p.runtime.ensure_tu_instance(p.runtime.tu_index("b.mt")), JitError);
}

TEST_CASE("property: a random trace over ten keys compiles each key once") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    Rng rng(seed);
    Loaded l(image_of(kAffine, "affine.mt"), {"0"});
    std::vector<std::int32_t> keys;
    while (keys.size() < 10) {
      auto k = static_cast<std::int32_t>(rng.range(-1000, 1000));
      if (std::find(keys.begin(), keys.end(), k) == keys.end())
        keys.push_back(k);
    }
    std::map<std::int32_t, int> seen;
    for (int i = 0; i < 1000; ++i) {
      auto k = keys[rng.below(keys.size())];
      ++seen[k];
      rt::PackedArgs packed;
      packed.values.push_back({irgen::PackedTag::Int32, bits_of(k)});
      const auto &h = l.runtime.jit_entry(0, 0, packed);
      auto x = static_cast<std::int32_t>(rng.range(-50, 50));
      std::uint64_t arg = bits_of(x);
      auto got = static_cast<std::int32_t>(l.runtime.execute(h, std::span(&arg, 1)));
      REQUIRE(got == x * k + 1);
    }
    auto s = l.runtime.stats();
    CHECK(s.compilations == seen.size());
    CHECK(s.misses == seen.size());
    CHECK(s.hits == 1000 - seen.size());
    CHECK(l.runtime.compile_log().size() == seen.size());
    for (const auto &ks : s.keys)
      CHECK(ks.compilations == 1);
  }
}

TEST_CASE("stats: totals agree with the per-key rows and the CSV") {
  auto r = run_source(read_corpus("hello.mt"), {"1", "2", "1", "1", "3"}, true, "hello.mt");
  std::uint64_t c = 0, h = 0, m = 0, ins = 0;
  for (const auto &k : r.stats.keys) {
    c += k.compilations;
    h += k.hits;
    m += k.misses;
    ins += k.instructions;
    CHECK(k.compilations <= 1);
  }
  CHECK(c == r.stats.compilations);
  CHECK(h == r.stats.hits);
  CHECK(m == r.stats.misses);
  CHECK(h + m == 5);
  CHECK(ins <= r.stats.instructions);
  CHECK(ins > 0);
  auto rows = lines_of(r.stats.csv());
  REQUIRE(rows.size() == 1 + 1 + r.stats.keys.size());
  CHECK(rows[0] == "key,compilations,hits,misses,instructions");
  CHECK(rows[1] == "total,3,2,3," + std::to_string(r.stats.instructions));
  CHECK(rows[2].starts_with("hello.mt:run<1>,1,2,1,"));
}

TEST_CASE("global-reference arguments key the cache by referent") {
  Loaded l(image_of(kReferents, "refs.mt"), {});
  REQUIRE(l.runtime.run_main() == 0);
  auto lines = lines_of(l.text());
  REQUIRE(lines.size() == 4);
  CHECK(lines[0] == "30 33 20 23");
  // Distinct referents: the load of R[0] may be forwarded from the store.
  CHECK(lines[1] == "1.5");
  // The same object twice: the second store must be seen.
  CHECK(lines[2] == "2.5");
  CHECK(lines[3] == "2.5 2.5");
  auto keys = l.runtime.cache_keys();
  CHECK(std::count(keys.begin(), keys.end(), "refs.mt:fill<@a>") == 1);
  CHECK(std::count(keys.begin(), keys.end(), "refs.mt:fill<@b>") == 1);
  auto s = l.runtime.stats();
  CHECK(s.compilations == 4);
  CHECK(s.hits == 1);

  for (const auto &rec : l.runtime.compile_log()) {
    if (rec.key != "refs.mt:forward<@a,@b>")
      continue;
    const auto *f = rec.module.find_function("forward<@a,@b>");
    REQUIRE(f != nullptr);
    // Forwarded: nothing is loaded back.
    CHECK(count_op(ir::Module{.functions = {*f}}, ir::Op::Load) == 0);
  }
}

TEST_CASE("a jit template used from runtime-compiled code is rejected") {
  const char *src = R"(
@jit template [n: i32] fn inner() -> i32 { return n; }
@jit template [n: i32] fn outer() -> i32 { return inner[n + 1](); }
fn main() -> i32 { print(outer[atoi(argv(1))]()); return 0; }
)";
  Loaded l(image_of(src, "nested.mt"), {"1"});
  try {
    l.runtime.run_main();
    FAIL("expected a jit failure");
  } catch (const JitError &e) {
    CHECK(std::string(e.what()).find("nested jit is unsupported") != std::string::npos);
  }
  CHECK(l.runtime.stats().compilations == 0);
}

TEST_CASE("traps") {
  const char *src = R"(
fn down(n: i32) -> i32 { return down(n + 1) + 1; }
fn main() -> i32 {
  let mode = atoi(argv(1));
  let a: [i32; 4];
  if mode == 0 { print(10 / atoi(argv(2))); }
  if mode == 1 { a[atoi(argv(2))] = 1; }
  if mode == 2 { print(down(0)); }
  if mode == 3 { print(argv(9)); }
  return mode;
}
)";
  auto image = image_of(src, "trap.mt", false);
  {
    Loaded l(image, {"0", "0"});
    CHECK_THROWS_AS(l.runtime.run_main(), Trap);
  }
  {
    Loaded l(image, {"0", "5"});
    CHECK(l.runtime.run_main() == 0);
    CHECK(l.text() == "2\n");
  }
  {
    Loaded l(image, {"1", "4"});
    CHECK_THROWS_AS(l.runtime.run_main(), Trap);
  }
  {
    Loaded l(image, {"1", "-1"});
    CHECK_THROWS_AS(l.runtime.run_main(), Trap);
  }
  {
    Loaded l(image, {"2"});
    CHECK_THROWS_AS(l.runtime.run_main(), Trap);
  }
  {
    Loaded l(image, {"3"});
    CHECK_THROWS_AS(l.runtime.run_main(), Trap);
  }
  Loaded l(image_of(kAffine, "affine.mt"), {"0"});
  rt::PackedArgs packed;
  packed.values.push_back({irgen::PackedTag::Int32, 5});
  const auto &h = l.runtime.jit_entry(0, 0, packed);
  CHECK_THROWS_AS(l.runtime.execute(h, {}), Trap);
  rt::PackedArgs wrong;
  wrong.values.push_back({irgen::PackedTag::Int64, 5});
  CHECK_THROWS_AS(l.runtime.jit_entry(0, 0, wrong), JitError);
  CHECK_THROWS_AS(l.runtime.jit_entry(0, 7, packed), JitError);
}

TEST_CASE("two translation units link and run") {
  auto image = image_of({{"a.mt", "extern fn twice(x: i32) -> i32;\nextern global base: i32;\n"
                                   "fn main() -> i32 { print(twice(base)); return 0; }\n"},
                         {"b.mt", "export global base: i32 = 21;\nexport fn twice(x: i32) -> i32 { return x * 2; }\n"}},
                        false);
  Loaded l(image, {});
  CHECK(l.runtime.run_main() == 0);
  CHECK(l.text() == "42\n");
}

TEST_CASE("jit code calling a small ahead-of-time function inlines it") {
  const char *src = R"(
fn small(x: i32) -> i32 { return x * 2 + 1; }
@jit template [n: i32] fn use() -> i32 { return small(n) + small(3); }
fn main() -> i32 { print(use[atoi(argv(1))]()); print(small(atoi(argv(1)))); return 0; }
)";
  Loaded l(image_of(src, "inl.mt"), {"5"});
  l.runtime.run_main();
  CHECK(l.text() == "18\n11\n");
  auto log = l.runtime.compile_log();
  REQUIRE(log.size() == 1);
  CHECK(count_op(log[0].module, ir::Op::Call) == 0);
  const auto *f = log[0].module.find_function("use<5>");
  REQUIRE(f != nullptr);
  CHECK(f->linkage == ir::Linkage::Exported);
}

TEST_CASE("a later instantiation inlines code installed by an earlier one") {
  const char *src = R"(
template [n: i32] fn base() -> i32 { return n * n + 4; }
@jit template [n: i32] fn first() -> i32 { return base[n]() + 1; }
@jit template [n: i32] fn second() -> i32 { return base[n]() * 2; }
fn main() -> i32 {
  let k = atoi(argv(1));
  print(first[k]());
  print(second[k]());
  return 0;
}
)";
  Loaded l(image_of(src, "chain.mt"), {"3"});
  l.runtime.run_main();
  CHECK(l.text() == "14\n26\n");
  auto log = l.runtime.compile_log();
  REQUIRE(log.size() == 2);
  CHECK(log[0].key == "chain.mt:first<3>");
  CHECK(log[0].module.find_function("base<3>") != nullptr);
  CHECK(log[1].key == "chain.mt:second<3>");
  CHECK(count_op(log[1].module, ir::Op::Call) == 0);
  // Not compiled a second time: at most an inlining-only copy remains.
  for (const auto &f : log[1].module.functions)
    if (f.name == "base<3>")
      CHECK(f.linkage != ir::Linkage::Exported);
  auto ext = l.runtime.ext_defs(0);
  const auto *b = ext.find_function("base<3>");
  REQUIRE(b != nullptr);
  CHECK(b->linkage == ir::Linkage::AvailableForInlining);
}

TEST_CASE("concurrent lookups compile each key once") {
  Loaded l(image_of(kAffine, "affine.mt"), {"0"});
  std::vector<std::thread> threads;
  std::atomic<int> wrong{0};
  for (int t = 0; t < 8; ++t)
    threads.emplace_back([&, t] {
      Rng rng(100 + t);
      for (int i = 0; i < 200; ++i) {
        auto k = static_cast<std::int32_t>(rng.below(10));
        rt::PackedArgs packed;
        packed.values.push_back({irgen::PackedTag::Int32, bits_of(k)});
        const auto &h = l.runtime.jit_entry(0, 0, packed);
        std::uint64_t arg = bits_of(i);
        if (static_cast<std::int32_t>(l.runtime.execute(h, std::span(&arg, 1))) != i * k + 1)
          ++wrong;
      }
    });
  for (auto &t : threads)
    t.join();
  CHECK(wrong == 0);
  auto s = l.runtime.stats();
  CHECK(s.compilations == 10);
  CHECK(s.hits + s.misses == 1600);
}

TEST_CASE("all runtime reads come from the in-memory image") {
  auto r = image_of(read_corpus("strtypes.mt"), "strtypes.mt");
  Loaded l(r, {"F", "f32"});
  l.runtime.run_main();
  CHECK(l.runtime.foreign_accesses() == 0);
  auto acc = l.runtime.accesses();
  REQUIRE_FALSE(acc.empty());
  std::set<std::string> sections;
  for (const auto &a : acc) {
    CHECK(a.source == "image");
    sections.insert(a.section);
  }
  CHECK(sections.count("AST") == 1);
  CHECK(sections.count("SRC") == 1);
}

TEST_CASE("property: jit instantiation computes what the ahead-of-time function computes") {
  // Random integer expressions over a and b; divisors are nonzero literals.
  Rng rng(77);
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth == 0 || rng.below(4) == 0) {
      switch (rng.below(3)) {
      case 0:
        return "a";
      case 1:
        return "b";
      default:
        return std::to_string(rng.range(-9, 9));
      }
    }
    auto l = gen(depth - 1);
    auto r = gen(depth - 1);
    switch (rng.below(5)) {
    case 0:
      return "(" + l + " + " + r + ")";
    case 1:
      return "(" + l + " - " + r + ")";
    case 2:
      return "(" + l + " * " + r + ")";
    case 3:
      return "(" + l + " / " + std::to_string(rng.range(1, 7)) + ")";
    default:
      return "(" + l + " % " + std::to_string(rng.range(1, 7)) + ")";
    }
  };
  for (int trial = 0; trial < 20; ++trial) {
    auto e = gen(4);
    std::string src = "@jit template [a: i32, b: i32] fn f() -> i32 { return " + e + "; }\n" +
                      "fn g(a: i32, b: i32) -> i32 { return " + e + "; }\n" +
                      "fn main() -> i32 {\n  let a = atoi(argv(1));\n  let b = atoi(argv(2));\n"
                      "  print(f[a, b](), \" \", g(a, b));\n  return 0;\n}\n";
    auto image = image_of(src, "diff.mt");
    for (int k = 0; k < 4; ++k) {
      auto a = std::to_string(rng.range(-100000, 100000));
      auto b = std::to_string(rng.range(-100000, 100000));
      Loaded l(image, {a, b});
      l.runtime.run_main();
      auto out = l.text();
      auto sp = out.find(' ');
      REQUIRE(sp != std::string::npos);
      INFO(e << " a=" << a << " b=" << b);
      CHECK(out.substr(0, sp) + "\n" == out.substr(sp + 1));
    }
  }
}

TEST_CASE("jit and ahead-of-time matrix variants print identical results") {
  auto gen = image_of(read_corpus("matrix_generic.mt"), "matrix_generic.mt", false);
  auto jit = image_of(read_corpus("matrix_jit.mt"), "matrix_jit.mt");
  for (const char *n : {"2", "5"}) {
    Loaded a(gen, {n, "4"});
    Loaded b(jit, {"f64", n, "4"});
    a.runtime.run_main();
    b.runtime.run_main();
    CHECK(a.text() == b.text());
    CHECK(b.runtime.stats().instructions < a.runtime.stats().instructions);
  }
}
