#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtjit/support/bytes.hpp"

namespace mtjit::ir {

/// Virtual register; 0 means "no register".
using Reg = std::uint32_t;

enum class Type : std::uint8_t { Void, Bool, I32, I64, F32, F64, Str, Ptr, Handle };

const char *type_name(Type t);

enum class Op : std::uint8_t {
  Const,        // imm = value bits; Str constants carry their text in sym
  GlobalAddr,   // sym = global
  Alloca,       // imm = size, imm2 = align; zero-filled frame slot
  Load,         // args = {ptr}
  Store,        // args = {ptr, value}; vtype = value type
  Elem,         // args = {ptr, index}; imm = element size, imm2 = element count; traps out of range
  Field,        // args = {ptr}; imm = byte offset
  Bin,          // imm = num::Arith; args = {a, b}
  Un,           // imm = UnOp; args = {a}
  Cmp,          // imm = num::Compare; vtype = operand type
  Cast,         // vtype = source type
  Call,         // sym = callee
  CallIndirect, // args = {handle, args...}; types = parameter tags
  JitRequest,   // imm = site id; sym = wildcard mangled name; args = wildcard values; types = their tags
  Intrinsic,    // sym = argc | argv | atoi | atol
  Print,        // args printed in order; types = their tags
  Br,           // targets = {dest}
  CondBr,       // args = {cond}; targets = {then, else}
  Ret,          // args = {} or {value}
  Unreachable,
};

const char *op_name(Op op);
bool is_terminator(Op op);
/// No side effects and no traps: removable when the result is unused.
bool is_pure(Op op);

enum class UnOp : std::uint8_t { Neg, Not };

struct Inst {
  Op op = Op::Const;
  Type type = Type::Void;  // result type
  Type vtype = Type::Void; // operand type where the op needs one
  Reg dst = 0;
  std::vector<Reg> args;
  std::uint64_t imm = 0;
  std::uint64_t imm2 = 0;
  std::string sym;
  std::vector<std::uint32_t> targets;
  std::vector<Type> types;
  bool operator==(const Inst &) const = default;
};

struct Block {
  std::vector<Inst> insts;
  bool operator==(const Block &) const = default;
};

enum class Linkage : std::uint8_t { Exported, Local, ExternalDecl, AvailableForInlining };

const char *linkage_name(Linkage l);

struct Param {
  Reg reg = 0;
  Type type = Type::Void;
  bool unique_object = false;
  bool operator==(const Param &) const = default;
};

struct Function {
  std::string name;
  std::vector<Param> params;
  Type ret = Type::Void;
  std::vector<Block> blocks;   // empty for declarations; blocks[0] is the entry
  Linkage linkage = Linkage::Local;
  Reg next_reg = 1;
  bool operator==(const Function &) const = default;

  bool is_declaration() const { return blocks.empty(); }
  Reg fresh() { return next_reg++; }
  std::size_t instruction_count() const;
};

struct Global {
  std::string name;
  std::string type_name;  // canonical source type, informational
  std::uint64_t size = 0;
  std::uint64_t align = 1;
  Bytes init;             // size bytes when defined; empty for declarations
  Linkage linkage = Linkage::Local;
  bool operator==(const Global &) const = default;
};

struct Module {
  std::string tu_name;
  std::vector<Global> globals;
  std::vector<Function> functions;
  bool operator==(const Module &) const = default;

  Function *find_function(const std::string &name);
  const Function *find_function(const std::string &name) const;
  Global *find_global(const std::string &name);
  const Global *find_global(const std::string &name) const;
  std::size_t instruction_count() const;
};

/// Deterministic textual dump, one instruction per line.
std::string print_module(const Module &m);
std::string print_function(const Function &f);

/// Returns problems found; empty means well-formed.
std::vector<std::string> verify(const Module &m);
/// Throws mtjit::Error listing the problems.
void verify_or_throw(const Module &m, const std::string &when);

Bytes serialize(const Module &m);
Module deserialize(ByteView bytes);

/// Blocks reachable from the entry, in depth-first preorder.
std::vector<std::uint32_t> reachable_blocks(const Function &f);
std::vector<std::vector<std::uint32_t>> predecessors(const Function &f);

struct Dominators {
  std::vector<std::uint32_t> idom;  // UINT32_MAX for unreachable blocks; idom[0] == 0
  std::vector<std::uint32_t> rpo;   // reachable blocks in reverse postorder
  std::vector<bool> reachable;
  bool dominates(std::uint32_t a, std::uint32_t b) const;
};
Dominators compute_dominators(const Function &f);

} // namespace mtjit::ir
