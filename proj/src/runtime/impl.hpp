#pragma once

#include <atomic>
#include <deque>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <unordered_set>

#include "mtjit/opt/optimizer.hpp"
#include "mtjit/runtime/runtime.hpp"
#include "mtjit/sema/sema.hpp"
#include "mtjit/support/numeric.hpp"

namespace mtjit::rt {

struct FunctionSlot;
struct KeyEntry;

/// Globals live in regions 1..n; frame d of an execution lives in region
/// kFrameBase + d. An address is region << 32 | offset.
inline constexpr std::uint64_t kFrameBase = 1u << 24;

inline std::uint64_t make_address(std::uint64_t region, std::uint64_t offset) { return region << 32 | offset; }

/// Prepared instruction: operands resolved, branch targets are flat indices.
struct PInst {
  ir::Op op = ir::Op::Const;
  ir::Type type = ir::Type::Void;
  ir::Type vtype = ir::Type::Void;
  num::Scalar sc = num::Scalar::I64;
  num::Scalar vsc = num::Scalar::I64;
  std::uint32_t dst = 0;
  std::uint32_t a = 0;
  std::uint32_t b = 0;
  std::uint64_t imm = 0;
  std::uint64_t imm2 = 0;
  std::uint32_t t0 = 0;
  std::uint32_t t1 = 0;
  std::uint32_t list = 0;   // first entry in Code::pool / Code::tpool
  std::uint32_t count = 0;
  FunctionSlot *callee = nullptr;
};

struct Code {
  std::vector<PInst> insts;
  std::vector<std::uint32_t> pool;
  std::vector<ir::Type> tpool;
  std::vector<std::uint32_t> params;
  std::uint32_t nregs = 0;
  std::uint32_t frame_size = 0;
};

struct FunctionSlot {
  ir::Function fn;
  std::uint32_t tu = 0;
  bool jit = false;
  KeyEntry *owner = nullptr;   // the compilation that installed it
  std::once_flag once;
  std::unique_ptr<Code> code;
  std::atomic<std::uint64_t> self_instructions{0};
};

struct KeyEntry {
  std::string key;
  bool preseeded = false;
  FunctionHandle handle;
  FunctionSlot *slot = nullptr;
  std::atomic<std::uint64_t> hits{0};
  std::atomic<std::uint64_t> misses{0};
  std::atomic<std::uint64_t> compilations{0};
  double compile_ms = 0;
};

/// What a jit-compiled unit needs: resumed from the image on first use.
struct TuState {
  sema::SemaModule sema;
  ir::Module ext_defs;
  opt::PassConfig opts;
  irgen::LocalSymbols locals;
  std::string source;
  /// Slot id to the live entity: a function or a global address.
  std::vector<FunctionSlot *> local_functions;
  std::vector<std::uint64_t> local_globals;
};

struct Unit {
  std::string name;
  const fat::FatObject *object = nullptr;
  bool jit = false;
  ir::Module aot;
  std::map<std::string, FunctionSlot *> functions;   // definitions and resolved declarations
  std::map<std::string, std::uint64_t> globals;      // addresses, likewise
  std::map<std::string, FunctionSlot *> jit_symbols;
  fat::InstTable inst;

  std::mutex mu;   // one compilation at a time per unit
  std::unique_ptr<TuState> state;
};

struct Runtime::Impl {
  Impl(Bytes image_bytes, Options o);

  // -- loading and lookup --------------------------------------------------
  const Bytes &read(std::uint32_t tu, fat::Tag tag);
  void load();
  TuState &ensure_state(std::uint32_t tu);
  FunctionSlot *new_slot(ir::Function fn, std::uint32_t tu, bool jit);
  /// Resolves a callee or global named by code in `slot`.
  FunctionSlot *resolve_function(const FunctionSlot &slot, const std::string &name);
  std::uint64_t resolve_global(const FunctionSlot &slot, const std::string &name);
  void prepare(FunctionSlot &slot);
  Code &code_of(FunctionSlot &slot);

  // -- jit ---------------------------------------------------------------------
  KeyEntry &lookup(std::uint32_t tu, std::uint32_t site_id, const PackedArgs &packed);
  KeyEntry &compile(std::uint32_t tu, const fat::InstSite &site, const PackedArgs &packed);
  [[noreturn]] void jit_fail(std::uint32_t tu, const std::vector<Diagnostic> &diags);

  // -- execution ---------------------------------------------------------------
  std::uint64_t run(FunctionSlot &fn, std::span<const std::uint64_t> args);
  std::uint64_t intern(std::string_view s);
  static const std::string &text(std::uint64_t bits) { return *reinterpret_cast<const std::string *>(bits); }

  Options opts;
  std::ostream *out;
  int debug = 0;
  Bytes image_bytes;
  fat::ProgramImage image;

  std::deque<Unit> units;
  std::map<std::string, std::uint32_t> unit_index;
  std::deque<std::unique_ptr<FunctionSlot>> slots;
  std::mutex slots_mu;

  std::vector<Bytes> global_mem;   // region r at index r - 1
  std::vector<std::pair<std::uint32_t, std::string>> global_owner;
  std::map<std::string, FunctionSlot *> export_functions;
  std::map<std::string, std::uint64_t> export_globals;

  mutable std::shared_mutex cache_mu;
  std::map<InstantiationKey, KeyEntry *> raw_cache;
  std::map<std::pair<std::uint32_t, std::string>, KeyEntry *> concrete_cache;
  std::deque<std::unique_ptr<KeyEntry>> entries;

  std::atomic<std::uint64_t> compilations{0};
  std::atomic<std::uint64_t> hits{0};
  std::atomic<std::uint64_t> misses{0};
  std::atomic<std::uint64_t> instructions{0};

  mutable std::mutex log_mu;
  std::vector<CompileRecord> log;
  std::vector<Access> access_log;

  std::mutex strings_mu;
  std::unordered_set<std::string> strings;
  std::mutex out_mu;
  std::vector<std::uint64_t> argv_bits;
};

} // namespace mtjit::rt
