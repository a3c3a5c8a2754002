#pragma once

#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include "mtjit/frontend/parser.hpp"
#include "mtjit/sema/sema.hpp"

namespace mtjit::testing {

inline std::string corpus_path(const std::string &name) { return std::string(MTJIT_CORPUS_DIR) + "/" + name; }

inline std::string read_corpus(const std::string &name) {
  std::ifstream in(corpus_path(name), std::ios::binary);
  if (!in)
    throw std::runtime_error("missing corpus file " + name);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline sema::SemaModule analyze_text(const std::string &src, const std::string &tu = "test.mt") {
  return sema::analyze(frontend::parse_source(src, tu));
}

inline sema::SemaModule analyze_corpus(const std::string &name) { return analyze_text(read_corpus(name), name); }

/// Seeded generator for property tests.
class Rng {
public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  std::uint64_t below(std::uint64_t n) { return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(eng_); }
  std::int64_t range(std::int64_t lo, std::int64_t hi) {
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(eng_);
  }
  bool coin() { return below(2) == 1; }

private:
  std::mt19937_64 eng_;
};

} // namespace mtjit::testing
