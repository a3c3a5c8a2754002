#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "mtjit/fat/fatobject.hpp"
#include "mtjit/ir/ir.hpp"
#include "mtjit/ir/irgen.hpp"

namespace mtjit::rt {

/// One runtime template argument as the call site packs it. Integers are
/// sign-extended to 64 bits; a global reference is the referent's address.
struct PackedValue {
  irgen::PackedTag tag = irgen::PackedTag::Int32;
  std::uint64_t bits = 0;
  bool operator==(const PackedValue &) const = default;
};

struct PackedArgs {
  std::vector<PackedValue> values;     // non-type wildcards, in wildcard order
  std::vector<std::string> typestrs;   // type wildcards, in wildcard order
  /// Tag byte plus eight little-endian value bytes per value.
  Bytes canonical() const;
};

struct InstantiationKey {
  std::uint32_t tu = 0;
  std::string mangled;   // wildcard form, e.g. "run<?0>"
  Bytes packed;
  std::vector<std::string> typestrs;
  auto operator<=>(const InstantiationKey &) const = default;
};

/// Callable result of a lookup. Hidden arguments are the addresses bound to
/// global-reference parameters and precede the ordinary arguments.
struct FunctionHandle {
  std::uint32_t tu = 0;
  std::string symbol;   // concrete mangled name
  std::vector<std::uint64_t> hidden;
  std::vector<ir::Type> params;
  ir::Type ret = ir::Type::Void;
};

struct KeyStats {
  std::string key;   // "tu:symbol"
  bool preseeded = false;
  std::uint64_t compilations = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t instructions = 0;   // retired inside this instantiation's code
  double compile_ms = 0;
};

struct Stats {
  std::uint64_t compilations = 0;
  std::uint64_t hits = 0;
  std::uint64_t misses = 0;
  std::uint64_t instructions = 0;
  std::vector<KeyStats> keys;   // sorted by key
  /// key,compilations,hits,misses,instructions with a leading "total" row.
  std::string csv() const;
};

/// One state read. Everything the runtime reads comes from the in-memory image.
struct Access {
  std::string source;   // "image" for image bytes
  std::string unit;
  std::string section;
  std::uint64_t bytes = 0;
};

/// One finished jit compilation, kept for inspection.
struct CompileRecord {
  std::string key;
  ir::Module module;   // after optimization, as installed
  double ms = 0;
};

/// True while the calling thread is inside jit_entry.
bool in_jit_entry();

class Runtime {
public:
  struct Options {
    std::ostream *out = nullptr;        // defaults to std::cout
    std::vector<std::string> argv;      // argv[0] is the program name
    int debug = -1;                     // -1 reads MTJIT_DEBUG
    std::size_t max_call_depth = 20000;
  };

  /// Loads a validated image: globals initialized, exports installed and the
  /// cache seeded with the jit templates' explicit specializations.
  explicit Runtime(Bytes image_bytes, Options opts);
  ~Runtime();
  Runtime(const Runtime &) = delete;
  Runtime &operator=(const Runtime &) = delete;

  /// Runs main with the configured argv and returns its exit status.
  int run_main();

  /// The instantiation for a jit site at runtime arguments, compiling at most
  /// once per key. Throws JitError.
  const FunctionHandle &jit_entry(std::uint32_t tu, std::uint32_t site_id, const PackedArgs &packed);

  /// Runs a handle with ordinary arguments given as value bits.
  std::uint64_t execute(const FunctionHandle &h, std::span<const std::uint64_t> args);

  /// Handle for an exported function.
  FunctionHandle exported_function(const std::string &name) const;

  /// Prepares a translation unit's compiler state; idempotent. Returns its
  /// address so callers can check identity.
  const void *ensure_tu_instance(std::uint32_t tu);
  std::size_t tu_instances() const;

  std::uint32_t tu_index(const std::string &name) const;
  std::size_t tu_count() const;
  std::uint64_t global_address(std::uint32_t tu, const std::string &name) const;
  Bytes read_global(std::uint32_t tu, const std::string &name) const;
  /// Interned value bits for a string.
  std::uint64_t intern(const std::string &s);

  Stats stats() const;
  /// Concrete cache keys, "tu:symbol", sorted.
  std::vector<std::string> cache_keys() const;
  std::vector<CompileRecord> compile_log() const;
  std::vector<Access> accesses() const;
  /// Accesses whose source is not the in-memory image.
  std::size_t foreign_accesses() const;
  /// The module a TU's jit code may inline from.
  ir::Module ext_defs(std::uint32_t tu) const;

  struct Impl;

private:
  std::unique_ptr<Impl> impl_;
};

/// `tu:line:col: severity: message` plus the offending source line and a caret.
std::string render_with_source(const std::vector<Diagnostic> &diags, const std::string &source);

} // namespace mtjit::rt
