// mtc: build, link, run and inspect MT programs; run the benchmark scenarios.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "mtjit/cli/bench.hpp"
#include "mtjit/cli/driver.hpp"
#include "mtjit/frontend/parser.hpp"
#include "mtjit/runtime/runtime.hpp"

using namespace mtjit;

namespace {

enum Exit { kOk = 0, kDiagnostics = 1, kUsage = 2, kRuntime = 3 };

std::string source_for_diagnostics;

int report(const std::exception &e) {
  if (const auto *s = dynamic_cast<const SyntaxError *>(&e)) {
    std::cerr << rt::render_with_source({s->diagnostic()}, source_for_diagnostics);
    return kDiagnostics;
  }
  if (const auto *s = dynamic_cast<const SemaError *>(&e)) {
    std::cerr << rt::render_with_source(s->diagnostics(), source_for_diagnostics);
    return kDiagnostics;
  }
  if (dynamic_cast<const Trap *>(&e)) {
    std::cerr << "mtc: trap: " << e.what() << "\n";
    return kRuntime;
  }
  if (dynamic_cast<const JitError *>(&e)) {
    std::cerr << "mtc: " << e.what();
    if (std::string_view(e.what()).ends_with('\n') == false)
      std::cerr << "\n";
    return kRuntime;
  }
  if (dynamic_cast<const LinkError *>(&e)) {
    std::cerr << "mtc: link error: " << e.what() << "\n";
    return kDiagnostics;
  }
  if (dynamic_cast<const FormatError *>(&e)) {
    std::cerr << "mtc: format error: " << e.what() << "\n";
    return kDiagnostics;
  }
  std::cerr << "mtc: error: " << e.what() << "\n";
  return kDiagnostics;
}

int cmd_build(const cli::BuildOptions &opts) {
  source_for_diagnostics = cli::read_text_file(opts.input);
  auto tu = std::filesystem::path(opts.input).filename().string();
  auto r = cli::build_source(source_for_diagnostics, tu, opts);
  if (opts.dump_ir)
    std::cout << ir::print_module(r.ir);
  auto out = opts.output.empty() ? std::filesystem::path(opts.input).replace_extension(".mto").string()
                                 : opts.output;
  cli::write_binary_file(out, r.object);
  if (opts.stats) {
    auto obj = fat::read_fat_object(r.object);
    std::cerr << "object_bytes,sections,template_bodies,functions\n"
              << r.object.size() << ',' << obj.sections.size() << ',' << r.template_bodies << ','
              << r.ir.functions.size() << "\n";
  }
  return kOk;
}

int cmd_link(const std::vector<std::string> &inputs, const std::string &output) {
  std::vector<fat::FatObject> objects;
  for (const auto &p : inputs) {
    try {
      objects.push_back(fat::read_fat_object(cli::read_binary_file(p)));
    } catch (const FormatError &e) {
      throw FormatError(p + ": " + e.what());
    }
  }
  auto image = fat::link_program(std::move(objects));
  cli::write_binary_file(output, fat::write_image(image));
  return kOk;
}

int cmd_run(const std::string &path, const std::vector<std::string> &args, bool stats) {
  std::vector<std::string> argv{std::filesystem::path(path).stem().string()};
  argv.insert(argv.end(), args.begin(), args.end());
  rt::Runtime runtime(cli::read_binary_file(path), {.out = &std::cout, .argv = std::move(argv)});
  int status = 0;
  try {
    status = runtime.run_main();
  } catch (...) {
    std::cout.flush();
    if (stats)
      std::cerr << runtime.stats().csv();
    throw;
  }
  std::cout.flush();
  if (stats)
    std::cerr << runtime.stats().csv();
  return status;
}

void print_tables(const fat::FatObject &obj, std::ostream &os) {
  os << "flags " << obj.flags << (obj.is_jit() ? " (jit)" : "") << "\n";
  os << "tag  name    offset  length\n";
  for (const auto &s : fat::section_layout(obj)) {
    char line[96];
    std::snprintf(line, sizeof line, "%-4u %-7s %-7llu %llu\n", static_cast<unsigned>(s.tag), fat::tag_name(s.tag),
                  static_cast<unsigned long long>(s.offset), static_cast<unsigned long long>(s.length));
    os << line;
  }
  if (obj.has(fat::Tag::Opts)) {
    auto o = fat::decode_opts(obj.section(fat::Tag::Opts));
    os << "opts: opt_level=" << o.opt_level << " unroll_limit=" << o.unroll_limit
       << " inline_budget=" << o.inline_budget << " pipeline_iterations=" << o.pipeline_iterations
       << " retain_locals=" << (o.retain_locals ? 1 : 0) << "\n";
  }
  if (obj.has(fat::Tag::Inst)) {
    auto t = fat::decode_inst(obj.section(fat::Tag::Inst));
    os << "inst sites: " << t.sites.size() << "\n";
    for (const auto &s : t.sites)
      os << "  " << s.site_id << " " << s.template_name << " " << s.mangled << "\n";
    os << "inst specializations: " << t.specializations.size() << "\n";
    for (const auto &s : t.specializations) {
      os << "  " << s.template_name << " " << s.symbol;
      for (const auto &r : s.referents)
        os << " &" << r;
      os << "\n";
    }
  }
  if (obj.has(fat::Tag::Locals)) {
    auto l = fat::decode_locals(obj.section(fat::Tag::Locals));
    std::vector<std::pair<std::uint32_t, std::string>> by_slot;
    for (const auto &[name, slot] : l)
      by_slot.push_back({slot, name});
    std::sort(by_slot.begin(), by_slot.end());
    os << "locals: " << by_slot.size() << "\n";
    for (const auto &[slot, name] : by_slot)
      os << "  " << slot << " " << name << "\n";
  }
}

int cmd_inspect(const std::string &path) {
  auto bytes = cli::read_binary_file(path);
  if (bytes.size() >= 4 && std::string(bytes.begin(), bytes.begin() + 4) == "MTPX") {
    auto image = fat::read_image(bytes);
    std::cout << "program image: " << image.units.size() << " unit(s), entry " << image.entry << "\n";
    for (const auto &u : image.units) {
      std::cout << "unit " << u.name << "\n";
      print_tables(u.object, std::cout);
    }
    std::cout << "exports: " << image.exports.size() << "\n";
    for (const auto &[name, e] : image.exports)
      std::cout << "  " << name << (e.kind == fat::ExportEntry::Kind::Function ? " fn " : " global ")
                << image.units.at(e.tu).name << "\n";
    return kOk;
  }
  print_tables(fat::read_fat_object(bytes), std::cout);
  return kOk;
}

int cmd_bench(const std::string &scenario, const std::string &csv_path, const std::string &corpus) {
  cli::BenchConfig cfg;
  if (!corpus.empty())
    cfg.corpus_dir = corpus;
  auto rep = cli::run_bench(scenario, cfg);
  auto csv = rep.csv();
  if (csv_path.empty()) {
    std::cout << csv;
  } else {
    std::ofstream out(csv_path);
    if (!out)
      throw Error("cannot write '" + csv_path + "'");
    out << csv;
  }
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"MT compiler driver with runtime template instantiation"};
  app.require_subcommand(1);

  cli::BuildOptions bopts;
  auto *build = app.add_subcommand("build", "compile one MT source file into an object");
  build->add_option("input", bopts.input, "source file")->required()->check(CLI::ExistingFile);
  build->add_option("-o,--output", bopts.output, "object file (default: input with .mto)");
  build->add_flag("--jit", bopts.jit, "allow jit templates and embed the compiler state");
  build->add_option("-O", bopts.opt_level, "optimization level")->check(CLI::Range(0, 2));
  build->add_option("--unroll-limit", bopts.unroll_limit, "largest trip count unrolled fully");
  build->add_flag("--dump-ir", bopts.dump_ir, "print the optimized IR");
  build->add_flag("--stats", bopts.stats, "object statistics as CSV on stderr");

  std::vector<std::string> link_inputs;
  std::string link_output;
  auto *link = app.add_subcommand("link", "link objects into a program image");
  link->add_option("objects", link_inputs, "object files")->required()->check(CLI::ExistingFile);
  link->add_option("-o,--output", link_output, "program image")->required();

  std::string run_image;
  std::vector<std::string> run_args;
  bool run_stats = false;
  auto *run = app.add_subcommand("run", "run a program image; program arguments follow --");
  run->add_option("image", run_image, "program image")->required()->check(CLI::ExistingFile);
  run->add_option("args", run_args, "program arguments");
  run->add_flag("--stats", run_stats, "jit cache statistics as CSV on stderr");

  std::string inspect_path;
  auto *inspect = app.add_subcommand("inspect", "print the section table of an object or image");
  inspect->add_option("file", inspect_path, "object or image")->required()->check(CLI::ExistingFile);

  std::string scenario;
  std::string csv_path;
  std::string corpus;
  auto *bench = app.add_subcommand("bench", "run a benchmark scenario and report CSV");
  bench->add_option("scenario", scenario, "matrix, shim or dispatch")
      ->required()
      ->check(CLI::IsMember({"matrix", "shim", "dispatch"}));
  bench->add_option("--csv", csv_path, "write the report here instead of stdout");
  bench->add_option("--corpus", corpus, "directory holding the benchmark sources");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*build)
      return cmd_build(bopts);
    if (*link)
      return cmd_link(link_inputs, link_output);
    if (*run)
      return cmd_run(run_image, run_args, run_stats);
    if (*inspect)
      return cmd_inspect(inspect_path);
    if (*bench)
      return cmd_bench(scenario, csv_path, corpus);
  } catch (const std::exception &e) {
    std::cout.flush();
    return report(e);
  }
  return kUsage;
}
