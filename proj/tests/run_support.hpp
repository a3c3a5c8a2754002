#pragma once

#include <sstream>
#include <string>
#include <vector>

#include "mtjit/cli/driver.hpp"
#include "mtjit/runtime/runtime.hpp"
#include "support.hpp"

namespace mtjit::testing {

inline Bytes image_of(const std::vector<cli::SourceUnit> &units, bool jit = true) {
  cli::BuildOptions o;
  o.jit = jit;
  return cli::build_program(units, o);
}

inline Bytes image_of(const std::string &src, const std::string &tu = "t.mt", bool jit = true) {
  return image_of(std::vector<cli::SourceUnit>{{tu, src}}, jit);
}

/// A runtime whose output goes to a string.
struct Loaded {
  std::ostringstream out;
  rt::Runtime runtime;
  Loaded(const Bytes &image, std::vector<std::string> args)
      : runtime(image, {.out = &out, .argv = with_name(std::move(args))}) {}
  std::string text() const { return out.str(); }

private:
  static std::vector<std::string> with_name(std::vector<std::string> args) {
    args.insert(args.begin(), "program");
    return args;
  }
};

inline cli::RunOutcome run_source(const std::string &src, std::vector<std::string> args, bool jit = true,
                                  const std::string &tu = "t.mt") {
  args.insert(args.begin(), "program");
  return cli::run_program(image_of(src, tu, jit), std::move(args));
}

inline std::vector<std::string> lines_of(const std::string &text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);)
    out.push_back(line);
  return out;
}

inline std::size_t count_op(const ir::Module &m, ir::Op op) {
  std::size_t n = 0;
  for (const auto &f : m.functions)
    for (const auto &b : f.blocks)
      for (const auto &in : b.insts)
        n += in.op == op;
  return n;
}

} // namespace mtjit::testing
