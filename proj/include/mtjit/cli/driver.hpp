#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "mtjit/fat/fatobject.hpp"
#include "mtjit/ir/ir.hpp"
#include "mtjit/opt/optimizer.hpp"
#include "mtjit/runtime/runtime.hpp"
#include "mtjit/sema/sema.hpp"

namespace mtjit::cli {

struct BuildOptions {
  std::string input;
  std::string output;
  bool jit = false;
  int opt_level = 2;
  std::uint32_t unroll_limit = 64;
  bool stats = false;
  bool dump_ir = false;

  opt::PassConfig pass_config() const;
};

struct BuildResult {
  Bytes object;
  ir::Module ir;             // optimized
  sema::SemaModule sema;
  /// Template bodies the AoT compile instantiated or specialized.
  std::size_t template_bodies = 0;
};

/// frontend, sema, irgen, optimizer, fat object. Throws SyntaxError or
/// SemaError; a jit template in a build without `jit` is a SemaError.
BuildResult build_source(const std::string &source, const std::string &tu_name, const BuildOptions &opts);

/// Builds and links in-memory sources into program image bytes.
struct SourceUnit {
  std::string tu_name;
  std::string source;
};
Bytes build_program(const std::vector<SourceUnit> &units, const BuildOptions &opts);

/// One complete execution of an image.
struct RunOutcome {
  int status = 0;
  std::string output;
  rt::Stats stats;
  double wall_ms = 0;          // load plus run
  double jit_compile_ms = 0;   // summed over compilations
};
/// argv[0] is the program name. Traps and jit failures propagate.
RunOutcome run_program(const Bytes &image, std::vector<std::string> argv);

std::string read_text_file(const std::string &path);
Bytes read_binary_file(const std::string &path);
void write_binary_file(const std::string &path, ByteView bytes);

} // namespace mtjit::cli
