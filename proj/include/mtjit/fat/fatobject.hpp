#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mtjit/ir/ir.hpp"
#include "mtjit/ir/irgen.hpp"
#include "mtjit/opt/optimizer.hpp"
#include "mtjit/sema/sema.hpp"
#include "mtjit/support/bytes.hpp"

namespace mtjit::fat {

enum class Tag : std::uint32_t { Ast = 1, Src = 2, Opts = 3, Ir = 4, Locals = 5, Inst = 6 };

const char *tag_name(Tag t);

inline constexpr std::uint16_t kFormatVersion = 1;
inline constexpr std::uint16_t kFlagJit = 1;

/// Sections keyed by tag; payloads are opaque here.
struct FatObject {
  std::uint16_t flags = 0;
  std::map<Tag, Bytes> sections;
  bool operator==(const FatObject &) const = default;

  bool has(Tag t) const { return sections.count(t) > 0; }
  /// Throws FormatError when missing.
  const Bytes &section(Tag t) const;
  bool is_jit() const { return (flags & kFlagJit) != 0; }
};

// -- AST section --------------------------------------------------------------

/// Canonical encoding of the module's syntax tree, source text and jit sites.
Bytes serialize_ast(const sema::SemaModule &sema);
/// Decodes, re-analyzes and checks that the jit sites agree with the stored table.
sema::SemaModule deserialize_ast(ByteView bytes);

// -- small sections -----------------------------------------------------------

Bytes encode_source(const std::string &text);
std::string decode_source(ByteView bytes);

Bytes encode_opts(const opt::PassConfig &cfg);
opt::PassConfig decode_opts(ByteView bytes);

Bytes encode_locals(const irgen::LocalSymbols &locals);
irgen::LocalSymbols decode_locals(ByteView bytes);

struct InstSite {
  std::uint32_t site_id = 0;
  std::string template_name;
  std::string mangled;
  std::vector<irgen::PackedTag> tags;
  bool operator==(const InstSite &) const = default;
};

/// An explicit specialization of a jit template, compiled ahead of time.
struct InstSpecialization {
  std::string template_name;
  std::string symbol;                   // concrete mangled name
  std::vector<std::string> referents;   // globals bound to its hidden parameters, in order
  bool operator==(const InstSpecialization &) const = default;
};

struct InstTable {
  std::vector<InstSite> sites;   // site_id order
  std::vector<InstSpecialization> specializations;
  bool operator==(const InstTable &) const = default;
};

InstTable build_inst_table(const sema::SemaModule &sema);
Bytes encode_inst(const InstTable &t);
InstTable decode_inst(ByteView bytes);

// -- container ----------------------------------------------------------------

struct JitPayload {
  Bytes ast;
  std::string source;
  opt::PassConfig opts;
  irgen::LocalSymbols locals;
  InstTable inst;
};

/// IR only, or all six sections when a jit payload is given.
Bytes write_fat_object(const ir::Module &ir, const std::optional<JitPayload> &jit);
Bytes write_fat_object(const FatObject &obj);
/// Validates the container: magic, version, canonical layout, checksum,
/// section set. Payloads are not interpreted.
FatObject read_fat_object(ByteView bytes);

struct SectionEntry {
  Tag tag = Tag::Ir;
  std::uint64_t offset = 0;
  std::uint64_t length = 0;
};
/// Where write_fat_object places each payload.
std::vector<SectionEntry> section_layout(const FatObject &obj);

// -- program image ------------------------------------------------------------

struct ExportEntry {
  enum class Kind : std::uint8_t { Function, Global };
  Kind kind = Kind::Function;
  std::uint32_t tu = 0;
  bool operator==(const ExportEntry &) const = default;
};

struct ProgramImage {
  struct Unit {
    std::string name;
    FatObject object;
    bool operator==(const Unit &) const = default;
  };
  std::vector<Unit> units;
  std::string entry;
  std::map<std::string, ExportEntry> exports;
  bool operator==(const ProgramImage &) const = default;
};

/// Builds the export table; rejects duplicate exports, duplicate unit names,
/// unresolved external declarations and a missing entry definition.
ProgramImage link_program(std::vector<FatObject> objects, const std::string &entry = "main");

Bytes write_image(const ProgramImage &image);
ProgramImage read_image(ByteView bytes);

} // namespace mtjit::fat
