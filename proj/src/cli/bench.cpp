#include "mtjit/cli/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <sstream>

#include "mtjit/cli/driver.hpp"

namespace mtjit::cli {

namespace {

struct Variant {
  std::string name;
  std::string file;
  bool jit = false;
};

struct Built {
  Bytes image;
  double aot_ms = 0;
  std::size_t bodies = 0;
};

std::string fmt_ms(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

Built build_variant(const BenchConfig &cfg, const Variant &v) {
  auto source = read_text_file(cfg.corpus_dir + "/" + v.file);
  BuildOptions opts;
  opts.jit = v.jit;
  Built b;
  b.aot_ms = 1e300;
  for (int i = 0; i < std::max(1, cfg.build_samples); ++i) {
    auto t0 = std::chrono::steady_clock::now();
    auto r = build_source(source, v.file, opts);
    auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    b.aot_ms = std::min(b.aot_ms, ms);
    b.bodies = r.template_bodies;
    if (b.image.empty())
      b.image = fat::write_image(fat::link_program({fat::read_fat_object(r.object)}));
  }
  return b;
}

BenchRow run_row(const std::string &scenario, const Variant &v, const Built &b, std::string params,
                 int repeats, std::vector<std::string> args) {
  args.insert(args.begin(), v.file);
  auto r = run_program(b.image, std::move(args));
  BenchRow row;
  row.scenario = scenario;
  row.variant = v.name;
  row.params = std::move(params);
  row.repeats = repeats;
  row.aot_compile_ms = b.aot_ms;
  row.jit_compile_ms = r.jit_compile_ms;
  row.executed_instructions = r.stats.instructions;
  row.wall_ms = r.wall_ms;
  row.compilations = r.stats.compilations;
  row.cache_hits = r.stats.hits;
  row.cache_misses = r.stats.misses;
  row.template_bodies = b.bodies;
  row.output_fnv = fnv1a64(ByteView(reinterpret_cast<const std::uint8_t *>(r.output.data()), r.output.size()));
  row.output = std::move(r.output);
  if (r.status != 0)
    throw Error(scenario + "/" + v.name + " (" + row.params + ") exited with status " + std::to_string(r.status) +
                ": " + row.output);
  return row;
}

} // namespace

std::string BenchReport::csv() const {
  std::ostringstream out;
  out << "scenario,variant,params,repeats,aot_compile_ms,jit_compile_ms,executed_instructions,wall_ms,"
         "compilations,cache_hits,cache_misses,template_bodies,output_fnv\n";
  for (const auto &r : rows) {
    char fnv[20];
    std::snprintf(fnv, sizeof fnv, "%016llx", static_cast<unsigned long long>(r.output_fnv));
    out << r.scenario << ',' << r.variant << ',' << r.params << ',' << r.repeats << ',' << fmt_ms(r.aot_compile_ms)
        << ',' << fmt_ms(r.jit_compile_ms) << ',' << r.executed_instructions << ',' << fmt_ms(r.wall_ms) << ','
        << r.compilations << ',' << r.cache_hits << ',' << r.cache_misses << ',' << r.template_bodies << ','
        << fnv << '\n';
  }
  return out.str();
}

const BenchRow *BenchReport::find(const std::string &variant, const std::string &params) const {
  for (const auto &r : rows)
    if (r.variant == variant && r.params == params)
      return &r;
  return nullptr;
}

BenchReport bench_matrix(const BenchConfig &cfg) {
  const Variant generic{"generic", "matrix_generic.mt", false};
  const Variant multi{"multiversioned", "matrix_multi.mt", false};
  const Variant jit{"jit", "matrix_jit.mt", true};
  auto bg = build_variant(cfg, generic);
  auto bm = build_variant(cfg, multi);
  auto bj = build_variant(cfg, jit);
  BenchReport rep;
  auto rs = std::to_string(cfg.matrix_repeat);
  for (int size : cfg.matrix_sizes) {
    auto n = std::to_string(size);
    auto params = "size=" + n;
    rep.rows.push_back(run_row("matrix", generic, bg, params, cfg.matrix_repeat, {n, rs}));
    rep.rows.push_back(run_row("matrix", multi, bm, params, cfg.matrix_repeat, {"f64", n, rs}));
    rep.rows.push_back(run_row("matrix", jit, bj, params, cfg.matrix_repeat, {"f64", n, rs}));
  }
  return rep;
}

BenchReport bench_shim(const BenchConfig &cfg) {
  const Variant aot{"aot", "shim.mt", true};
  const Variant jit{"jit", "shim.mt", true};
  auto b = build_variant(cfg, aot);
  BenchReport rep;
  auto total = std::to_string(cfg.shim_iterations);
  for (int batch : cfg.shim_batches) {
    auto n = std::to_string(batch);
    auto params = "batch=" + n;
    int calls = cfg.shim_iterations / batch;
    rep.rows.push_back(run_row("shim", aot, b, params, calls, {"aot", n, total}));
    rep.rows.push_back(run_row("shim", jit, b, params, calls, {"jit", n, total}));
  }
  return rep;
}

BenchReport bench_dispatch(const BenchConfig &cfg) {
  const Variant generic{"generic", "laghos_generic.mt", false};
  const Variant map{"dispatch_map", "laghos_map.mt", false};
  const Variant jit{"jit", "laghos_jit.mt", true};
  auto bg = build_variant(cfg, generic);
  auto bm = build_variant(cfg, map);
  auto bj = build_variant(cfg, jit);
  BenchReport rep;
  auto elements = std::to_string(cfg.dispatch_elements);
  for (int dofs : cfg.dispatch_orders)
    for (int quads : cfg.dispatch_orders) {
      auto d = std::to_string(dofs);
      auto q = std::to_string(quads);
      auto params = "dofs=" + d + " quads=" + q;
      rep.rows.push_back(run_row("dispatch", generic, bg, params, 1, {d, q, elements}));
      rep.rows.push_back(run_row("dispatch", map, bm, params, 1, {d, q, elements}));
      rep.rows.push_back(run_row("dispatch", jit, bj, params, 1, {d, q, elements}));
    }
  const Variant kmap{"policy_map", "kripke_map.mt", false};
  const Variant kjit{"policy_jit", "kripke_jit.mt", true};
  auto bkm = build_variant(cfg, kmap);
  auto bkj = build_variant(cfg, kjit);
  for (const char *layout : {"DGZ", "DZG", "GDZ", "GZD", "ZDG", "ZGD"}) {
    auto params = std::string("layout=") + layout;
    rep.rows.push_back(run_row("dispatch", kmap, bkm, params, 1, {layout}));
    rep.rows.push_back(run_row("dispatch", kjit, bkj, params, 1, {layout}));
  }
  return rep;
}

BenchReport run_bench(const std::string &scenario, const BenchConfig &cfg) {
  if (scenario == "matrix")
    return bench_matrix(cfg);
  if (scenario == "shim")
    return bench_shim(cfg);
  if (scenario == "dispatch")
    return bench_dispatch(cfg);
  throw Error("unknown bench scenario '" + scenario + "' (expected matrix, shim or dispatch)");
}

} // namespace mtjit::cli
