#include "mtjit/cli/driver.hpp"

#include <chrono>
#include <fstream>
#include <iterator>
#include <sstream>

#include "mtjit/frontend/parser.hpp"
#include "mtjit/ir/irgen.hpp"

namespace mtjit::cli {

opt::PassConfig BuildOptions::pass_config() const {
  opt::PassConfig cfg;
  cfg.opt_level = opt_level;
  cfg.unroll_limit = unroll_limit;
  cfg.retain_locals = jit;
  cfg.validate();
  return cfg;
}

BuildResult build_source(const std::string &source, const std::string &tu_name, const BuildOptions &opts) {
  auto cfg = opts.pass_config();
  auto ast = frontend::parse_source(source, tu_name);
  if (!opts.jit) {
    std::vector<Diagnostic> diags;
    for (const auto &d : ast.decls)
      if (const auto *t = std::get_if<ast::FunctionTemplateDecl>(&d); t && t->is_jit)
        diags.push_back({tu_name, t->span.offset, Severity::Error,
                         "jit attribute requires --jit (template '" + t->name() + "')"});
    if (!diags.empty())
      throw SemaError(std::move(diags));
  }
  BuildResult out;
  out.sema = sema::analyze(std::move(ast));
  for (const auto &f : out.sema.functions)
    if (f.origin != sema::TypedFunction::Origin::Plain)
      ++out.template_bodies;
  auto ir = irgen::emit_module(out.sema);
  ir::verify_or_throw(ir, "lowering");
  out.ir = opt::run_pipeline(std::move(ir), cfg);
  ir::verify_or_throw(out.ir, "optimization");
  std::optional<fat::JitPayload> payload;
  if (opts.jit) {
    fat::JitPayload p;
    p.ast = fat::serialize_ast(out.sema);
    p.source = source;
    p.opts = cfg;
    p.locals = irgen::collect_local_symbols(out.ir);
    p.inst = fat::build_inst_table(out.sema);
    payload = std::move(p);
  }
  out.object = fat::write_fat_object(out.ir, payload);
  return out;
}

Bytes build_program(const std::vector<SourceUnit> &units, const BuildOptions &opts) {
  std::vector<fat::FatObject> objects;
  for (const auto &u : units)
    objects.push_back(fat::read_fat_object(build_source(u.source, u.tu_name, opts).object));
  return fat::write_image(fat::link_program(std::move(objects)));
}

RunOutcome run_program(const Bytes &image, std::vector<std::string> argv) {
  std::ostringstream out;
  RunOutcome r;
  auto t0 = std::chrono::steady_clock::now();
  rt::Runtime runtime(image, {.out = &out, .argv = std::move(argv)});
  r.status = runtime.run_main();
  r.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  r.output = out.str();
  r.stats = runtime.stats();
  for (const auto &k : r.stats.keys)
    r.jit_compile_ms += k.compile_ms;
  return r;
}

std::string read_text_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw Error("cannot open '" + path + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Bytes read_binary_file(const std::string &path) {
  auto text = read_text_file(path);
  return Bytes(text.begin(), text.end());
}

void write_binary_file(const std::string &path, ByteView bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out)
    throw Error("cannot write '" + path + "'");
  out.write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out)
    throw Error("cannot write '" + path + "'");
}

} // namespace mtjit::cli
