#include "mtjit/sema/types.hpp"

#include <algorithm>

#include "mtjit/support/error.hpp"

namespace mtjit::sema {

TypeTable::TypeTable() {
  const std::pair<TypeKind, const char *> builtins[] = {
      {TypeKind::Void, "void"}, {TypeKind::I32, "i32"}, {TypeKind::I64, "i64"},
      {TypeKind::F32, "f32"},   {TypeKind::F64, "f64"}, {TypeKind::Bool, "bool"},
      {TypeKind::Str, "str"}};
  for (auto [k, n] : builtins)
    intern(TypeInfo{k, n, 0, 0, {}, true});
}

TypeId TypeTable::intern(TypeInfo ti) {
  if (auto it = by_name_.find(ti.name); it != by_name_.end())
    return it->second;
  auto id = static_cast<TypeId>(types_.size());
  by_name_.emplace(ti.name, id);
  types_.push_back(std::move(ti));
  return id;
}

TypeId TypeTable::array_of(TypeId element, std::int64_t count) {
  TypeInfo ti;
  ti.kind = TypeKind::Array;
  ti.element = element;
  ti.count = count;
  ti.name = "[" + name(element) + ";" + std::to_string(count) + "]";
  return intern(std::move(ti));
}

TypeId TypeTable::globalref_to(TypeId pointee) {
  TypeInfo ti;
  ti.kind = TypeKind::GlobalRef;
  ti.element = pointee;
  ti.name = "globalref " + name(pointee);
  return intern(std::move(ti));
}

TypeId TypeTable::declare_record(const std::string &canonical) {
  if (auto found = find(canonical))
    return *found;
  TypeInfo ti;
  ti.kind = TypeKind::Record;
  ti.name = canonical;
  ti.complete = false;
  return intern(std::move(ti));
}

void TypeTable::complete_record(TypeId id, std::vector<FieldInfo> fields) {
  auto &ti = types_.at(id);
  ti.fields = std::move(fields);
  ti.complete = true;
}

std::optional<TypeId> TypeTable::find(const std::string &canonical) const {
  if (auto it = by_name_.find(canonical); it != by_name_.end())
    return it->second;
  return std::nullopt;
}

bool TypeTable::is_scalar(TypeId id) const {
  switch (info(id).kind) {
  case TypeKind::I32:
  case TypeKind::I64:
  case TypeKind::F32:
  case TypeKind::F64:
  case TypeKind::Bool:
  case TypeKind::Str:
  case TypeKind::GlobalRef:
    return true;
  default:
    return false;
  }
}

LayoutInfo TypeTable::layout(TypeId id) const {
  if (auto it = layout_cache_.find(id); it != layout_cache_.end())
    return it->second;
  std::vector<TypeId> stack;
  auto li = compute_layout(id, stack);
  layout_cache_.emplace(id, li);
  return li;
}

LayoutInfo TypeTable::compute_layout(TypeId id, std::vector<TypeId> &stack) const {
  const auto &ti = info(id);
  auto scalar = [](std::uint64_t n) { return LayoutInfo{n, n, {}}; };
  switch (ti.kind) {
  case TypeKind::I32:
  case TypeKind::F32:
    return scalar(4);
  case TypeKind::I64:
  case TypeKind::F64:
  case TypeKind::GlobalRef:
    return scalar(8);
  case TypeKind::Bool:
    return scalar(1);
  case TypeKind::Void:
  case TypeKind::Str:
    throw Error("type '" + ti.name + "' is unsized");
  case TypeKind::Array: {
    auto el = compute_layout(ti.element, stack);
    return LayoutInfo{el.size * static_cast<std::uint64_t>(ti.count), el.align, {}};
  }
  case TypeKind::Record: {
    if (std::find(stack.begin(), stack.end(), id) != stack.end())
      throw Error("record '" + ti.name + "' contains itself");
    if (!ti.complete)
      throw Error("record '" + ti.name + "' is incomplete");
    stack.push_back(id);
    LayoutInfo out;
    std::uint64_t offset = 0;
    for (const auto &f : ti.fields) {
      auto fl = compute_layout(f.type, stack);
      offset = (offset + fl.align - 1) / fl.align * fl.align;
      out.offsets.push_back(offset);
      offset += fl.size;
      out.align = std::max(out.align, fl.align);
    }
    out.size = (offset + out.align - 1) / out.align * out.align;
    stack.pop_back();
    return out;
  }
  }
  throw Error("layout of unknown type");
}

LayoutInfo layout(const TypeTable &types, TypeId t) { return types.layout(t); }

} // namespace mtjit::sema
