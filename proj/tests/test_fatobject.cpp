#include <doctest.h>

#include <set>

#include "mtjit/cli/driver.hpp"
#include "mtjit/fat/fatobject.hpp"
#include "mtjit/ir/irgen.hpp"
#include "support.hpp"

using namespace mtjit;
using mtjit::testing::analyze_text;
using mtjit::testing::read_corpus;
using mtjit::testing::Rng;

namespace {

// Reference hashes written out from the published FNV-1a constants.
std::uint64_t ref_fnv64(const Bytes &b) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (auto c : b) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t ref_fnv32(const Bytes &b) {
  std::uint32_t h = 0x811c9dc5U;
  for (auto c : b) {
    h ^= c;
    h *= 0x01000193U;
  }
  return h;
}

void put_le(Bytes &out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i)
    out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

std::uint64_t get_le(const Bytes &b, std::size_t at, int n) {
  std::uint64_t v = 0;
  for (int i = 0; i < n; ++i)
    v |= std::uint64_t{b[at + i]} << (8 * i);
  return v;
}

void set_le(Bytes &b, std::size_t at, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i)
    b[at + i] = static_cast<std::uint8_t>(v >> (8 * i));
}

void reseal(Bytes &obj) {
  obj.resize(obj.size() - 8);
  auto h = ref_fnv64(obj);
  put_le(obj, h, 8);
}

cli::BuildOptions jit_opts() {
  cli::BuildOptions o;
  o.jit = true;
  return o;
}

const char *kSpecialized = R"(
global a: [f64; 4];
global b: [f64; 4];
@jit template [x: i32] fn run() { print("generic ", x); }
template specialize fn run[3]() { print("special three"); }
@jit template [R: globalref [f64; 4], S: globalref [f64; 4]] fn copy() { R[0] = S[0]; }
template specialize fn copy[&a, &b]() { a[0] = b[0] + 1.0; }
fn helper() -> i32 { return 2; }
fn main() -> i32 {
  let v = atoi(argv(1));
  run[v]();
  copy[&a, &b]();
  return helper();
}
)";

const char *kTwoA = R"(
extern fn twice(x: i32) -> i32;
extern global base: i32;
fn main() -> i32 { print(twice(base)); return 0; }
)";

const char *kTwoB = R"(
export global base: i32 = 21;
export fn twice(x: i32) -> i32 { return x * 2; }
)";

std::vector<std::pair<std::string, std::string>> sample_sources() {
  return {{"hello.mt", read_corpus("hello.mt")},
          {"strtypes.mt", read_corpus("strtypes.mt")},
          {"spec.mt", kSpecialized},
          {"b.mt", kTwoB},
          {"empty.mt", ""}};
}

/// Decodes every payload the way the runtime would. Only FormatError may escape.
void decode_all(const fat::FatObject &obj) {
  ir::deserialize(obj.section(fat::Tag::Ir));
  if (!obj.is_jit())
    return;
  fat::deserialize_ast(obj.section(fat::Tag::Ast));
  fat::decode_source(obj.section(fat::Tag::Src));
  fat::decode_opts(obj.section(fat::Tag::Opts));
  fat::decode_locals(obj.section(fat::Tag::Locals));
  fat::decode_inst(obj.section(fat::Tag::Inst));
}

enum class Outcome { Accepted, Rejected, Other };

Outcome probe(const Bytes &bytes) {
  try {
    decode_all(fat::read_fat_object(bytes));
    return Outcome::Accepted;
  } catch (const FormatError &) {
    return Outcome::Rejected;
  } catch (...) {
    return Outcome::Other;
  }
}

} // namespace

// ---------------------------------------------------------------------------
// AST section

TEST_CASE("empty module serializes to a 16-byte header") {
  auto sema = analyze_text("", "");
  auto bytes = fat::serialize_ast(sema);
  Bytes expected = {'M', 'T', 'A', 'S', 1, 0, 0, 0, 0, 0, 0, 0};
  put_le(expected, ref_fnv32({}), 4);
  CHECK(bytes == expected);
  CHECK(sema::equivalent(fat::deserialize_ast(bytes), sema));
}

TEST_CASE("AST round-trips and is deterministic") {
  for (const auto &[name, src] : sample_sources()) {
    CAPTURE(name);
    auto sema = analyze_text(src, name);
    auto bytes = fat::serialize_ast(sema);
    CHECK(bytes == fat::serialize_ast(analyze_text(src, name)));
    auto back = fat::deserialize_ast(bytes);
    CHECK(sema::equivalent(back, sema));
    CHECK(back.jit_sites == sema.jit_sites);
    CHECK(fat::serialize_ast(back) == bytes);
  }
}

TEST_CASE("AST header checks") {
  auto bytes = fat::serialize_ast(analyze_text(read_corpus("hello.mt"), "hello.mt"));
  SUBCASE("magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(fat::deserialize_ast(bytes), FormatError);
  }
  SUBCASE("version") {
    bytes[4] = 2;
    CHECK_THROWS_WITH_AS(fat::deserialize_ast(bytes), doctest::Contains("version"), FormatError);
  }
  SUBCASE("corrupt body byte") {
    bytes[bytes.size() / 2] ^= 0x40;
    CHECK_THROWS_WITH_AS(fat::deserialize_ast(bytes), doctest::Contains("checksum"), FormatError);
  }
  SUBCASE("truncation") {
    bytes.pop_back();
    CHECK_THROWS_AS(fat::deserialize_ast(bytes), FormatError);
  }
}

TEST_CASE("AST with a stale site table is rejected") {
  auto sema = analyze_text(read_corpus("hello.mt"), "hello.mt");
  sema.jit_sites[0].mangled = "run<?1>";
  CHECK_THROWS_WITH_AS(fat::deserialize_ast(fat::serialize_ast(sema)), doctest::Contains("site"), FormatError);
}

TEST_CASE("property: resealed AST mutations are rejected or decoded, never anything else") {
  Rng rng(11);
  for (const auto &[name, src] : sample_sources()) {
    auto good = fat::serialize_ast(analyze_text(src, name));
    if (good.size() == 16)
      continue;
    for (int i = 0; i < 300; ++i) {
      auto b = good;
      auto n = 1 + rng.below(3);
      for (std::uint64_t k = 0; k < n; ++k)
        b[16 + rng.below(b.size() - 16)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
      Bytes body(b.begin() + 16, b.end());
      set_le(b, 12, ref_fnv32(body), 4);
      bool ok = true;
      try {
        fat::deserialize_ast(b);
      } catch (const FormatError &) {
      } catch (...) {
        ok = false;
      }
      CAPTURE(name);
      CAPTURE(i);
      CHECK(ok);
    }
  }
}

// ---------------------------------------------------------------------------
// small sections

TEST_CASE("property: option, local and instantiation tables round-trip") {
  Rng rng(5);
  auto word = [&] {
    std::string s;
    auto n = 1 + rng.below(6);
    for (std::uint64_t i = 0; i < n; ++i)
      s.push_back(static_cast<char>('a' + rng.below(26)));
    return s;
  };
  for (int i = 0; i < 200; ++i) {
    opt::PassConfig cfg;
    cfg.opt_level = static_cast<int>(rng.below(3));
    cfg.unroll_limit = static_cast<std::uint32_t>(1 + rng.below(1000));
    cfg.inline_budget = static_cast<std::uint32_t>(1 + rng.below(1000));
    cfg.pipeline_iterations = static_cast<std::uint32_t>(1 + rng.below(9));
    cfg.retain_locals = rng.coin();
    CHECK(fat::decode_opts(fat::encode_opts(cfg)) == cfg);

    irgen::LocalSymbols locals;
    std::set<std::string> names;
    auto n = rng.below(8);
    while (names.size() < n)
      names.insert(word());
    std::uint32_t slot = 0;
    for (const auto &s : names)
      locals.emplace(s, slot++);
    CHECK(fat::decode_locals(fat::encode_locals(locals)) == locals);

    fat::InstTable t;
    auto ns = rng.below(5);
    for (std::uint32_t k = 0; k < ns; ++k) {
      fat::InstSite s{k, word(), word() + "<?0>", {}};
      auto nt = rng.below(4);
      for (std::uint64_t j = 0; j < nt; ++j)
        s.tags.push_back(static_cast<irgen::PackedTag>(rng.below(4)));
      t.sites.push_back(s);
    }
    auto np = rng.below(4);
    for (std::uint64_t k = 0; k < np; ++k)
      t.specializations.push_back({word(), word() + "<" + std::to_string(k) + ">", {word(), word()}});
    CHECK(fat::decode_inst(fat::encode_inst(t)) == t);
  }
}

TEST_CASE("local table is read in slot order") {
  Bytes b;
  put_le(b, 1, 4);
  put_le(b, 1, 4);
  b.push_back('x');
  put_le(b, 1, 4);  // slot 1 where 0 is expected
  CHECK_THROWS_AS(fat::decode_locals(b), FormatError);
  CHECK_THROWS_AS(fat::decode_opts(fat::encode_opts(opt::PassConfig{3})), FormatError);
  CHECK(fat::decode_source(fat::encode_source("fn main() {}")) == "fn main() {}");
}

TEST_CASE("instantiation table lists sites and jit specializations with their referents") {
  auto sema = analyze_text(kSpecialized, "spec.mt");
  auto t = fat::build_inst_table(sema);
  REQUIRE(t.sites.size() == 2);
  CHECK(t.sites[0] == fat::InstSite{0, "run", "run<?0>", {irgen::PackedTag::Int32}});
  CHECK(t.sites[1] == fat::InstSite{1, "copy", "copy<@a,@b>", {}});
  REQUIRE(t.specializations.size() == 2);
  std::set<std::string> syms;
  for (const auto &s : t.specializations) {
    syms.insert(s.symbol);
    if (s.template_name == "copy")
      CHECK(s.referents == std::vector<std::string>{"a", "b"});
    else
      CHECK(s.referents.empty());
  }
  CHECK(syms == std::set<std::string>{"run<3>", "copy<@a,@b>"});
}

TEST_CASE("every jit request in the IR has exactly one table entry") {
  for (const auto &[name, src] : sample_sources()) {
    CAPTURE(name);
    auto built = cli::build_source(src, name, jit_opts());
    auto obj = fat::read_fat_object(built.object);
    auto table = fat::decode_inst(obj.section(fat::Tag::Inst));
    std::multiset<std::uint64_t> ids;
    for (const auto &s : table.sites)
      ids.insert(s.site_id);
    for (const auto &f : built.ir.functions)
      for (const auto &b : f.blocks)
        for (const auto &in : b.insts)
          if (in.op == ir::Op::JitRequest) {
            CHECK(ids.count(in.imm) == 1);
            CHECK(table.sites.at(in.imm).mangled == in.sym);
          }
  }
}

// ---------------------------------------------------------------------------
// container

TEST_CASE("container layout matches a hand-assembled object") {
  fat::FatObject obj;
  obj.sections[fat::Tag::Ir] = {0xAA, 0xBB, 0xCC};
  Bytes expected = {'M', 'T', 'F', 'O'};
  put_le(expected, 1, 2);   // version
  put_le(expected, 0, 2);   // flags
  put_le(expected, 1, 4);   // count
  put_le(expected, 4, 4);   // tag
  put_le(expected, 0, 4);
  put_le(expected, 40, 8);  // 12 + 24 rounded up to 8
  put_le(expected, 3, 8);
  expected.resize(40, 0);
  expected.insert(expected.end(), {0xAA, 0xBB, 0xCC});
  expected.resize(48, 0);
  put_le(expected, ref_fnv64(expected), 8);
  CHECK(fat::write_fat_object(obj) == expected);
  CHECK(fat::read_fat_object(expected) == obj);
}

TEST_CASE("jit builds carry all six sections and plain builds only IR") {
  auto plain = fat::read_fat_object(cli::build_source(kTwoB, "b.mt", {}).object);
  CHECK(plain.sections.size() == 1);
  CHECK(plain.has(fat::Tag::Ir));
  CHECK_FALSE(plain.is_jit());
  auto jit = fat::read_fat_object(cli::build_source(read_corpus("hello.mt"), "hello.mt", jit_opts()).object);
  CHECK(jit.sections.size() == 6);
  CHECK(jit.is_jit());
  std::vector<std::uint32_t> tags;
  for (const auto &[t, p] : jit.sections)
    tags.push_back(static_cast<std::uint32_t>(t));
  CHECK(tags == std::vector<std::uint32_t>{1, 2, 3, 4, 5, 6});
  CHECK(fat::decode_opts(jit.section(fat::Tag::Opts)).retain_locals);
}

TEST_CASE("jit attribute without the jit switch is a build error") {
  CHECK_THROWS_WITH_AS(cli::build_source(read_corpus("hello.mt"), "hello.mt", {}),
                       doctest::Contains("jit attribute requires --jit"), SemaError);
}

TEST_CASE("builds are byte-stable and objects round-trip") {
  for (const auto &[name, src] : sample_sources()) {
    for (bool jit : {false, true}) {
      CAPTURE(name);
      CAPTURE(jit);
      cli::BuildOptions o;
      o.jit = jit;
      if (!jit && name != "b.mt" && name != "empty.mt")
        continue;
      auto a = cli::build_source(src, name, o).object;
      auto b = cli::build_source(src, name, o).object;
      CHECK(a == b);
      auto obj = fat::read_fat_object(a);
      CHECK(fat::write_fat_object(obj) == a);
      CHECK(probe(a) == Outcome::Accepted);
      CHECK(ir::serialize(ir::deserialize(obj.section(fat::Tag::Ir))) == obj.section(fat::Tag::Ir));
    }
  }
}

TEST_CASE("reader rejects malformed tables") {
  fat::FatObject one;
  one.sections[fat::Tag::Ir] = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto good = fat::write_fat_object(one);

  SUBCASE("zero sections") {
    Bytes b = {'M', 'T', 'F', 'O', 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
    put_le(b, 0, 8);
    reseal(b);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(b), doctest::Contains("no sections"), FormatError);
  }
  SUBCASE("duplicate tag") {
    // Two IR entries pointing at adjacent payloads.
    Bytes b = {'M', 'T', 'F', 'O'};
    put_le(b, 1, 2);
    put_le(b, 0, 2);
    put_le(b, 2, 4);
    for (std::uint64_t off : {64, 72}) {
      put_le(b, 4, 4);
      put_le(b, 0, 4);
      put_le(b, off, 8);
      put_le(b, 8, 8);
    }
    b.resize(80, 0);
    put_le(b, 0, 8);
    reseal(b);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(b), doctest::Contains("duplicate"), FormatError);
  }
  SUBCASE("bad magic") {
    good[1] = 'X';
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("magic"), FormatError);
  }
  SUBCASE("out-of-range offset") {
    set_le(good, 20, 4096, 8);
    reseal(good);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("out of range"), FormatError);
  }
  SUBCASE("overlapping offset") {
    set_le(good, 20, 16, 8);
    reseal(good);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("overlapping"), FormatError);
  }
  SUBCASE("unknown tag") {
    set_le(good, 12, 9, 4);
    reseal(good);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("unknown section"), FormatError);
  }
  SUBCASE("missing IR") {
    set_le(good, 12, 2, 4);
    reseal(good);
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("IR"), FormatError);
  }
  SUBCASE("jit flag without payload") {
    set_le(good, 6, 1, 2);
    reseal(good);
    CHECK_THROWS_AS(fat::read_fat_object(good), FormatError);
  }
  SUBCASE("checksum") {
    good[40] ^= 1;
    CHECK_THROWS_WITH_AS(fat::read_fat_object(good), doctest::Contains("checksum"), FormatError);
  }
  SUBCASE("non-zero padding") {
    good[50] = 1;
    reseal(good);
    CHECK_THROWS_AS(fat::read_fat_object(good), FormatError);
  }
}

TEST_CASE("property: 100 mutations of each object never get past the reader as anything but errors") {
  Rng rng(2024);
  for (const auto &[name, src] : sample_sources()) {
    auto good = cli::build_source(src, name, jit_opts()).object;
    int rejected = 0;
    for (int i = 0; i < 100; ++i) {
      auto b = good;
      switch (rng.below(5)) {
      case 0:  // flip bits
        b[rng.below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        break;
      case 1:  // truncate
        b.resize(rng.below(b.size()));
        break;
      case 2:  // insert
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(rng.below(b.size() + 1)),
                 static_cast<std::uint8_t>(rng.below(256)));
        break;
      case 3:  // flip then reseal, to reach the structural checks
        b[rng.below(b.size() - 8)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        reseal(b);
        break;
      default:  // scramble a header or table field then reseal
        b[rng.below(std::min<std::size_t>(b.size() - 8, 12 + 24 * 6))] = static_cast<std::uint8_t>(rng.below(256));
        reseal(b);
        break;
      }
      auto outcome = probe(b);
      CAPTURE(name);
      CAPTURE(i);
      CHECK(outcome != Outcome::Other);
      if (b != good && outcome == Outcome::Rejected)
        ++rejected;
    }
    CHECK(rejected > 50);
  }
}

// ---------------------------------------------------------------------------
// program image

TEST_CASE("single unit with main links") {
  auto obj = fat::read_fat_object(cli::build_source(read_corpus("hello.mt"), "hello.mt", jit_opts()).object);
  auto image = fat::link_program({obj});
  REQUIRE(image.units.size() == 1);
  CHECK(image.units[0].name == "hello.mt");
  CHECK(image.units[0].object == obj);
  CHECK(image.entry == "main");
  CHECK(image.exports.at("main").kind == fat::ExportEntry::Kind::Function);
}

TEST_CASE("two units resolve each other through the export table") {
  auto a = fat::read_fat_object(cli::build_source(kTwoA, "a.mt", {}).object);
  auto b = fat::read_fat_object(cli::build_source(kTwoB, "b.mt", {}).object);
  auto image = fat::link_program({a, b});
  CHECK(image.exports.at("main").tu == 0);
  CHECK(image.exports.at("twice").tu == 1);
  CHECK(image.exports.at("base") == fat::ExportEntry{fat::ExportEntry::Kind::Global, 1});
  auto bytes = fat::write_image(image);
  CHECK(fat::read_image(bytes) == image);
  CHECK(fat::write_image(fat::read_image(bytes)) == bytes);
}

TEST_CASE("link errors") {
  auto b = fat::read_fat_object(cli::build_source(kTwoB, "b.mt", {}).object);
  auto a = fat::read_fat_object(cli::build_source(kTwoA, "a.mt", {}).object);
  CHECK_THROWS_WITH_AS(fat::link_program({b}), doctest::Contains("entry"), LinkError);
  CHECK_THROWS_WITH_AS(fat::link_program({a}), doctest::Contains("unresolved"), LinkError);
  auto b2 = fat::read_fat_object(cli::build_source(kTwoB, "b2.mt", {}).object);
  CHECK_THROWS_WITH_AS(fat::link_program({a, b, b2}), doctest::Contains("duplicate symbol"), LinkError);
  CHECK_THROWS_WITH_AS(fat::link_program({a, b, b}), doctest::Contains("duplicate translation unit"), LinkError);
  auto wrong = fat::read_fat_object(
      cli::build_source("export fn base() {}\nexport fn twice(x: i32) -> i32 { return x; }", "w.mt", {}).object);
  CHECK_THROWS_WITH_AS(fat::link_program({a, wrong}), doctest::Contains("resolves to a function"), LinkError);
}

TEST_CASE("property: image mutations are rejected or accepted, never anything else") {
  auto bytes = cli::build_program({{"a.mt", kTwoA}, {"b.mt", kTwoB}}, {});
  Rng rng(99);
  for (int i = 0; i < 100; ++i) {
    auto b = bytes;
    b[rng.below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
    if (rng.coin())
      reseal(b);
    bool ok = true;
    try {
      fat::read_image(b);
    } catch (const FormatError &) {
    } catch (...) {
      ok = false;
    }
    CHECK(ok);
  }
}
