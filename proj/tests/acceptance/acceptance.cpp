// Runs the ten acceptance criteria and prints one PASS/FAIL line for each.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "mtjit/cli/bench.hpp"
#include "mtjit/cli/driver.hpp"
#include "mtjit/fat/fatobject.hpp"
#include "mtjit/ir/ir.hpp"
#include "../fs_guard.hpp"
#include "../run_support.hpp"

using namespace mtjit;
using namespace mtjit::testing;

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

/// Failures collected by one criterion, plus a short summary of what was measured.
struct Outcome {
  std::vector<std::string> failures;
  std::ostringstream note;

  void expect(bool ok, const std::string &what) {
    if (!ok)
      failures.push_back(what);
  }
};

std::size_t foreign_total = 0;

void track(const rt::Runtime &r) { foreign_total += r.foreign_accesses(); }

struct Ran {
  std::string out;
  rt::Stats stats;
  std::vector<rt::CompileRecord> log;
  std::vector<std::string> keys;
};

Ran run_image(const Bytes &image, std::vector<std::string> args) {
  Loaded l(image, std::move(args));
  int status = l.runtime.run_main();
  if (status != 0)
    throw Error("program exited with status " + std::to_string(status));
  track(l.runtime);
  return {l.text(), l.runtime.stats(), l.runtime.compile_log(), l.runtime.cache_keys()};
}

Bytes corpus_image(const std::vector<std::string> &files) {
  std::vector<cli::SourceUnit> units;
  for (const auto &f : files)
    units.push_back({f, read_corpus(f)});
  return image_of(units, true);
}

std::size_t calls_in(const ir::Module &m) { return count_op(m, ir::Op::Call); }

const rt::CompileRecord *record_for(const std::vector<rt::CompileRecord> &log, const std::string &key) {
  for (const auto &r : log)
    if (r.key == key)
      return &r;
  return nullptr;
}

// ---------------------------------------------------------------------------

void strings_as_types(Outcome &o) {
  auto t0 = Clock::now();
  auto r = run_image(corpus_image({"strtypes.mt"}), {"::F", "F", "f32", "f64", "G<F, 5>"});
  double ms = ms_since(t0);
  std::vector<std::string> want;
  for (int size : {16, 16, 4, 8, 80})
    want.push_back("sizeof(T) = " + std::to_string(size));
  o.expect(lines_of(r.out) == want, "sizes printed: " + r.out);
  o.expect(ms < 5000, "took " + std::to_string(ms) + " ms");
  o.note << "sizes 16 16 4 8 80 in " << static_cast<int>(ms) << " ms";
}

void hello(Outcome &o) {
  auto image = corpus_image({"hello.mt"});
  auto once = run_image(image, {"42"});
  o.expect(once.out.find("x = 42") != std::string::npos, "single run printed: " + once.out);
  auto twice = run_image(image, {"42", "42"});
  o.expect(twice.stats.compilations == 1, "compilations " + std::to_string(twice.stats.compilations));
  o.expect(twice.stats.hits == 1, "hits " + std::to_string(twice.stats.hits));
  o.expect(lines_of(twice.out).size() == 2, "two calls print two lines");
  o.note << "compilations=" << twice.stats.compilations << " hits=" << twice.stats.hits;
}

/// The program's LCG, replayed here to know which keys the trace touches.
std::set<int> trace_keys(std::int64_t s, int calls, std::int64_t &sum) {
  std::set<int> keys;
  sum = 0;
  for (int i = 0; i < calls; ++i) {
    s = (s * 1103515245 + 12345) % 2147483648;
    int k = static_cast<int>((s / 65536) % 10) * 3 + 1;
    keys.insert(k);
    sum += static_cast<std::int64_t>(i) * k + 1;
  }
  return keys;
}

void single_compilation(Outcome &o) {
  auto image = corpus_image({"trace.mt"});
  for (int seed : {7, 19, 2024}) {
    std::int64_t sum = 0;
    auto keys = trace_keys(seed, 1000, sum);
    auto r = run_image(image, {std::to_string(seed), "1000"});
    auto tag = "seed " + std::to_string(seed) + ": ";
    o.expect(keys.size() == 10, tag + "trace covers " + std::to_string(keys.size()) + " keys");
    o.expect(r.stats.compilations == 10, tag + "compilations " + std::to_string(r.stats.compilations));
    o.expect(r.stats.hits + r.stats.misses == 1000, tag + "lookups != 1000");
    o.expect(r.keys.size() == 10, tag + "cache entries " + std::to_string(r.keys.size()));
    o.expect(r.out == std::to_string(sum) + "\n", tag + "checksum " + r.out);
  }
  o.note << "3 seeds x 1000 calls, compilations=10 each";
}

/// The matrix kernel evaluated natively, printed the way the interpreter prints.
std::string matrix_reference(int size, int repeat) {
  std::vector<double> m(size * size), p(size * size);
  for (int i = 0; i < size; ++i)
    for (int j = 0; j < size; ++j)
      m[i * size + j] = static_cast<double>(i + size * j);
  for (int r = 0; r < repeat; ++r) {
    for (int i = 0; i < size; ++i)
      for (int j = 0; j < size; ++j) {
        double acc = 0.0;
        for (int k = 0; k < size; ++k)
          acc = acc + m[i * size + k] * m[k * size + j];
        p[i * size + j] = acc;
      }
    for (int x = 0; x < size * size; ++x)
      m[x] = 1.0 + 0.00005 * (m[x] + p[x]);
  }
  std::string out;
  for (double v : m) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, res.ptr);
    out += '\n';
  }
  return out;
}

void specialization_payoff(Outcome &o) {
  auto t0 = Clock::now();
  cli::BenchConfig cfg;
  cfg.build_samples = 1;
  auto rep = cli::bench_matrix(cfg);
  double ms = ms_since(t0);
  for (int size : cfg.matrix_sizes) {
    auto params = "size=" + std::to_string(size);
    const auto *g = rep.find("generic", params);
    const auto *mv = rep.find("multiversioned", params);
    const auto *j = rep.find("jit", params);
    if (!g || !mv || !j) {
      o.expect(false, "missing rows for " + params);
      continue;
    }
    auto want = matrix_reference(size, cfg.matrix_repeat);
    o.expect(g->output == want, params + ": generic output differs from the native kernel");
    o.expect(mv->output == g->output, params + ": multiversioned output differs");
    o.expect(j->output == g->output, params + ": jit output differs");
    auto gi = g->executed_instructions, ji = j->executed_instructions;
    if (size < 16)
      o.expect(2 * ji < gi, params + ": jit " + std::to_string(ji) + " vs generic " + std::to_string(gi));
    else
      o.expect(ji <= gi, params + ": jit " + std::to_string(ji) + " vs generic " + std::to_string(gi));
    o.note << size << ":" << static_cast<double>(ji) / static_cast<double>(gi) << " ";
  }
  o.expect(ms < 60000, "took " + std::to_string(ms) + " ms");
  o.note << "(jit/generic instructions) in " << static_cast<int>(ms) << " ms";
}

void compile_economy(Outcome &o) {
  cli::BuildOptions plain, jit;
  jit.jit = true;
  auto multi_src = read_corpus("matrix_multi.mt");
  auto jit_src = read_corpus("matrix_jit.mt");
  double multi_ms = 1e300, jit_ms = 1e300;
  std::size_t multi_bodies = 0, jit_bodies = 0;
  for (int i = 0; i < 7; ++i) {
    auto t0 = Clock::now();
    multi_bodies = cli::build_source(multi_src, "matrix_multi.mt", plain).template_bodies;
    multi_ms = std::min(multi_ms, ms_since(t0));
    t0 = Clock::now();
    jit_bodies = cli::build_source(jit_src, "matrix_jit.mt", jit).template_bodies;
    jit_ms = std::min(jit_ms, ms_since(t0));
  }
  o.expect(jit_bodies < multi_bodies,
           "bodies jit " + std::to_string(jit_bodies) + " vs multiversioned " + std::to_string(multi_bodies));
  o.expect(jit_ms < multi_ms, "build ms jit " + std::to_string(jit_ms) + " vs multiversioned " + std::to_string(multi_ms));
  o.note << "bodies " << jit_bodies << " vs " << multi_bodies << ", build ms " << jit_ms << " vs " << multi_ms;
}

void dispatch_replacement(Outcome &o) {
  cli::BenchConfig cfg;
  cfg.build_samples = 1;
  auto rep = cli::bench_dispatch(cfg);
  int compared = 0;
  for (int d : cfg.dispatch_orders)
    for (int q : cfg.dispatch_orders) {
      auto params = "dofs=" + std::to_string(d) + " quads=" + std::to_string(q);
      const auto *m = rep.find("dispatch_map", params);
      const auto *j = rep.find("jit", params);
      const auto *g = rep.find("generic", params);
      if (!m || !j || !g) {
        o.expect(false, "missing rows for " + params);
        continue;
      }
      o.expect(j->output == m->output, params + ": jit output differs from the dispatch map");
      o.expect(g->output == m->output, params + ": generic output differs from the dispatch map");
      o.expect(j->compilations == 1, params + ": jit compiled " + std::to_string(j->compilations) + " kernels");
      ++compared;
    }
  for (const char *layout : {"DGZ", "DZG", "GDZ", "GZD", "ZDG", "ZGD"}) {
    auto params = std::string("layout=") + layout;
    const auto *m = rep.find("policy_map", params);
    const auto *j = rep.find("policy_jit", params);
    o.expect(m && j && m->output == j->output, params + ": policy outputs differ");
  }
  for (const char *file : {"laghos_jit.mt", "kripke_jit.mt"}) {
    cli::BuildOptions opts;
    opts.jit = true;
    auto r = cli::build_source(read_corpus(file), file, opts);
    auto obj = fat::read_fat_object(r.object);
    auto inst = fat::decode_inst(obj.section(fat::Tag::Inst));
    o.expect(inst.specializations.empty(), std::string(file) + ": object carries explicit specializations");
    o.expect(r.template_bodies == 0, std::string(file) + ": " + std::to_string(r.template_bodies) + " template bodies");
    auto code = ir::deserialize(obj.section(fat::Tag::Ir));
    for (const auto &f : code.functions)
      o.expect(f.name.find('<') == std::string::npos, std::string(file) + ": object defines " + f.name);
  }
  o.note << compared << " (dofs,quads) pairs and 6 layouts identical, no precompiled kernels";
}

void cross_stage_inlining(Outcome &o) {
  auto a = run_image(corpus_image({"inline_aot.mt"}), {"5"});
  o.expect(a.out == "18\n11\n", "inline_aot output " + a.out);
  const auto *use = record_for(a.log, "inline_aot.mt:use_small<5>");
  o.expect(use != nullptr, "use_small<5> was not compiled");
  std::size_t aot_calls = use ? calls_in(use->module) : 0;
  o.expect(aot_calls == 0, "use_small<5> keeps " + std::to_string(aot_calls) + " calls");

  auto c = run_image(corpus_image({"inline_chain.mt"}), {"3"});
  o.expect(c.out == "14\n26\n", "inline_chain output " + c.out);
  const auto *second = record_for(c.log, "inline_chain.mt:second<3>");
  o.expect(second != nullptr, "second<3> was not compiled");
  std::size_t chain_calls = second ? calls_in(second->module) : 0;
  o.expect(chain_calls == 0, "second<3> keeps " + std::to_string(chain_calls) + " calls");
  o.note << "residual calls: " << aot_calls << " and " << chain_calls;
}

void isolation(Outcome &o) {
  // Runtimes across several programs, including a two-unit image.
  auto t = run_image(corpus_image({"two_main.mt", "two_lib.mt"}), {"4"});
  o.expect(t.out == "42\n29\n", "two-unit output " + t.out);
  auto r = run_image(corpus_image({"referents.mt"}), {"1"});
  {
    Loaded l(corpus_image({"strtypes.mt"}), {"G<f64, 3>", "i32"});
    l.runtime.run_main();
    for (const auto &acc : l.runtime.accesses())
      o.expect(acc.source == "image", "state read from " + acc.source);
    o.expect(!l.runtime.accesses().empty(), "no state reads were recorded");
    track(l.runtime);
  }
  o.expect(opens_during_jit() == 0, std::to_string(opens_during_jit()) + " file opens inside jit_entry");
  o.expect(foreign_total == 0, std::to_string(foreign_total) + " reads from outside the image");
  o.note << "file opens during jit_entry " << opens_during_jit() << " (of " << opens_total()
         << " in this process), non-image reads " << foreign_total;
}

std::uint64_t fnv64(const Bytes &b) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto c : b) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  return h;
}

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

std::vector<std::string> corpus_sources() {
  std::vector<std::string> names;
  for (const auto &e : std::filesystem::directory_iterator(MTJIT_CORPUS_DIR))
    if (e.path().extension() == ".mt")
      names.push_back(e.path().filename().string());
  std::sort(names.begin(), names.end());
  return names;
}

void format_stability(Outcome &o) {
  Rng rng(909);
  cli::BuildOptions opts;
  opts.jit = true;
  auto names = corpus_sources();
  int crashes = 0, rejected = 0, goldens = 0;
  for (const auto &name : names) {
    auto bytes = cli::build_source(read_corpus(name), name, opts).object;
    auto obj = fat::read_fat_object(bytes);
    o.expect(fat::write_fat_object(obj) == bytes, name + ": read then write changes the bytes");
    auto golden_path = std::string(MTJIT_CORPUS_DIR) + "/golden/" +
                       std::filesystem::path(name).replace_extension(".mto").string();
    if (!std::filesystem::exists(golden_path)) {
      o.expect(false, name + ": no golden object");
      continue;
    }
    auto golden = cli::read_binary_file(golden_path);
    o.expect(golden == bytes, name + ": build differs from the golden object");
    o.expect(fat::write_fat_object(fat::read_fat_object(golden)) == golden, name + ": golden does not round-trip");
    ++goldens;
  }
  // 100 mutations per sample object; only FormatError may come out.
  for (const auto &name : {"hello.mt", "strtypes.mt", "matrix_jit.mt", "laghos_map.mt"}) {
    auto good = cli::build_source(read_corpus(name), name, opts).object;
    for (int i = 0; i < 100; ++i) {
      auto b = good;
      switch (rng.below(4)) {
      case 0:
        b[rng.below(b.size())] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        break;
      case 1:
        b.resize(rng.below(b.size()));
        break;
      case 2:
        b.insert(b.begin() + static_cast<std::ptrdiff_t>(rng.below(b.size() + 1)),
                 static_cast<std::uint8_t>(rng.below(256)));
        break;
      default: {
        // Corrupt then recompute the trailing checksum so structural checks run.
        b[rng.below(b.size() - 8)] ^= static_cast<std::uint8_t>(1 + rng.below(255));
        b.resize(b.size() - 8);
        auto h = fnv64(b);
        for (int k = 0; k < 8; ++k)
          b.push_back(static_cast<std::uint8_t>(h >> (8 * k)));
        break;
      }
      }
      try {
        decode_all(fat::read_fat_object(b));
      } catch (const FormatError &) {
        ++rejected;
      } catch (...) {
        ++crashes;
      }
    }
  }
  o.expect(crashes == 0, std::to_string(crashes) + " mutations escaped as something other than FormatError");
  o.note << goldens << " golden objects, 400 mutations: " << rejected << " rejected, " << crashes << " other";
}

void referent_sensitivity(Outcome &o) {
  auto r = run_image(corpus_image({"referents.mt"}), {"10"});
  o.expect(r.out == "10 13 20 23\n1.5\n1.5 2.5\n2.5\n", "output " + r.out);
  std::set<std::string> keys(r.keys.begin(), r.keys.end());
  o.expect(keys.count("referents.mt:fill<@a>") && keys.count("referents.mt:fill<@b>"),
           "fill has no separate entries for a and b");
  std::size_t fills = std::count_if(r.keys.begin(), r.keys.end(),
                                    [](const std::string &k) { return k.starts_with("referents.mt:fill<"); });
  o.expect(fills == 2, std::to_string(fills) + " fill entries");
  const auto *fwd = record_for(r.log, "referents.mt:forward<@a,@b>");
  o.expect(fwd != nullptr, "forward<@a,@b> was not compiled");
  std::size_t loads = fwd ? count_op(fwd->module, ir::Op::Load) : 0;
  o.expect(loads == 0, "forward<@a,@b> keeps " + std::to_string(loads) + " loads");
  o.note << fills << " fill entries, forward(a,b)=1.5 with " << loads << " loads, forward(b,b)=2.5";
}

} // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<void(Outcome &)>>> criteria = {
      {"strings as types", strings_as_types},
      {"hello jit", hello},
      {"single compilation per key", single_compilation},
      {"specialization payoff", specialization_payoff},
      {"compile-time economy", compile_economy},
      {"dispatch replacement", dispatch_replacement},
      {"cross-stage inlining", cross_stage_inlining},
      {"isolation", isolation},
      {"format stability", format_stability},
      {"referent sensitivity", referent_sensitivity},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Outcome o;
    try {
      criteria[i].second(o);
    } catch (const std::exception &e) {
      o.failures.push_back(std::string("exception: ") + e.what());
    }
    bool ok = o.failures.empty();
    failed += !ok;
    std::cout << (ok ? "PASS " : "FAIL ") << (i + 1) << " " << criteria[i].first << ": " << o.note.str() << "\n";
    for (const auto &f : o.failures)
      std::cout << "     " << f << "\n";
    std::cout.flush();
  }
  std::cout << (criteria.size() - failed) << "/" << criteria.size() << " criteria passed\n";
  return failed;
}
