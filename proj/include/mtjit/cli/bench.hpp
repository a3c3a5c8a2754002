#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace mtjit::cli {

struct BenchRow {
  std::string scenario;
  std::string variant;
  std::string params;   // e.g. "size=3"
  int repeats = 0;
  double aot_compile_ms = 0;
  double jit_compile_ms = 0;
  std::uint64_t executed_instructions = 0;
  double wall_ms = 0;
  std::uint64_t compilations = 0;
  std::uint64_t cache_hits = 0;
  std::uint64_t cache_misses = 0;
  std::size_t template_bodies = 0;   // instantiated or specialized by the AoT build
  std::uint64_t output_fnv = 0;      // FNV-1a 64 of everything the program printed
  std::string output;                // not part of the CSV
};

struct BenchReport {
  std::vector<BenchRow> rows;
  /// Header row first. Wall-clock columns vary between runs; the rest do not.
  std::string csv() const;
  /// Null when absent.
  const BenchRow *find(const std::string &variant, const std::string &params) const;
};

struct BenchConfig {
  std::string corpus_dir = MTJIT_CORPUS_DIR;
  std::vector<int> matrix_sizes{1, 3, 7, 16};
  int matrix_repeat = 10;
  std::vector<int> shim_batches{10, 1000, 10000};
  int shim_iterations = 100000;
  std::vector<int> dispatch_orders{2, 4, 8};
  int dispatch_elements = 32;
  /// AoT builds are timed this many times; the fastest counts.
  int build_samples = 3;
};

BenchReport bench_matrix(const BenchConfig &cfg);
BenchReport bench_shim(const BenchConfig &cfg);
BenchReport bench_dispatch(const BenchConfig &cfg);
/// "matrix", "shim" or "dispatch"; anything else throws Error.
BenchReport run_bench(const std::string &scenario, const BenchConfig &cfg);

} // namespace mtjit::cli
