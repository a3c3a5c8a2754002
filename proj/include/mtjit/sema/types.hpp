#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mtjit::sema {

using TypeId = std::uint32_t;

enum class TypeKind : std::uint8_t { Void, I32, I64, F32, F64, Bool, Str, Record, Array, GlobalRef };

struct FieldInfo {
  std::string name;
  TypeId type = 0;
};

struct TypeInfo {
  TypeKind kind = TypeKind::Void;
  std::string name;              // canonical spelling, e.g. "G<F,5>", "[f64;4]"
  TypeId element = 0;            // Array element / GlobalRef pointee
  std::int64_t count = 0;        // Array count
  std::vector<FieldInfo> fields; // Record
  bool complete = true;          // Record fields resolved
};

/// C-style layout: natural alignment, record align = max field align,
/// size rounded up to align.
struct LayoutInfo {
  std::uint64_t size = 0;
  std::uint64_t align = 1;
  std::vector<std::uint64_t> offsets;
  bool operator==(const LayoutInfo &) const = default;
};

/// Interning table; every distinct canonical type has exactly one id.
class TypeTable {
public:
  static constexpr TypeId kVoid = 0, kI32 = 1, kI64 = 2, kF32 = 3, kF64 = 4, kBool = 5, kStr = 6;

  TypeTable();

  TypeId array_of(TypeId element, std::int64_t count);
  TypeId globalref_to(TypeId pointee);
  /// Creates an incomplete record named `canonical`, or returns the existing id.
  TypeId declare_record(const std::string &canonical);
  void complete_record(TypeId id, std::vector<FieldInfo> fields);

  std::optional<TypeId> find(const std::string &canonical) const;
  const TypeInfo &info(TypeId id) const { return types_.at(id); }
  const std::string &name(TypeId id) const { return types_.at(id).name; }
  std::size_t size() const { return types_.size(); }

  bool is_integer(TypeId id) const { return id == kI32 || id == kI64; }
  bool is_float(TypeId id) const { return id == kF32 || id == kF64; }
  bool is_numeric(TypeId id) const { return is_integer(id) || is_float(id); }
  bool is_globalref(TypeId id) const { return info(id).kind == TypeKind::GlobalRef; }
  /// Types that fit in a register: numerics, bool, str, globalref.
  bool is_scalar(TypeId id) const;
  bool is_aggregate(TypeId id) const {
    auto k = info(id).kind;
    return k == TypeKind::Record || k == TypeKind::Array;
  }

  /// Throws mtjit::Error for unsized (str, void) or recursively-contained types.
  LayoutInfo layout(TypeId id) const;

private:
  TypeId intern(TypeInfo info);
  LayoutInfo compute_layout(TypeId id, std::vector<TypeId> &stack) const;

  std::vector<TypeInfo> types_;
  std::map<std::string, TypeId, std::less<>> by_name_;
  mutable std::map<TypeId, LayoutInfo> layout_cache_;
};

LayoutInfo layout(const TypeTable &types, TypeId t);

} // namespace mtjit::sema
