#include <set>

#include "mtjit/fat/fatobject.hpp"

namespace mtjit::fat {

namespace {

void check_exports(const ProgramImage &image) {
  for (const auto &[name, e] : image.exports)
    if (name.empty() || e.tu >= image.units.size())
      throw FormatError("program image: bad export entry");
}

} // namespace

ProgramImage link_program(std::vector<FatObject> objects, const std::string &entry) {
  ProgramImage image;
  image.entry = entry;
  std::vector<ir::Module> modules;
  std::set<std::string> names;
  for (auto &obj : objects) {
    auto m = ir::deserialize(obj.section(Tag::Ir));
    if (!names.insert(m.tu_name).second)
      throw LinkError("duplicate translation unit '" + m.tu_name + "'");
    image.units.push_back({m.tu_name, std::move(obj)});
    modules.push_back(std::move(m));
  }
  for (std::uint32_t tu = 0; tu < modules.size(); ++tu) {
    const auto &m = modules[tu];
    auto add = [&](const std::string &name, ExportEntry::Kind kind) {
      auto [it, fresh] = image.exports.emplace(name, ExportEntry{kind, tu});
      if (!fresh)
        throw LinkError("duplicate symbol '" + name + "' in " + image.units[it->second.tu].name + " and " +
                        m.tu_name);
    };
    for (const auto &f : m.functions)
      if (f.linkage == ir::Linkage::Exported)
        add(f.name, ExportEntry::Kind::Function);
    for (const auto &g : m.globals)
      if (g.linkage == ir::Linkage::Exported)
        add(g.name, ExportEntry::Kind::Global);
  }
  for (const auto &m : modules) {
    auto need = [&](const std::string &name, ExportEntry::Kind kind) {
      auto it = image.exports.find(name);
      if (it == image.exports.end())
        throw LinkError("unresolved symbol '" + name + "' in " + m.tu_name);
      if (it->second.kind != kind)
        throw LinkError("symbol '" + name + "' in " + m.tu_name + " resolves to a " +
                        (it->second.kind == ExportEntry::Kind::Function ? "function" : "global"));
    };
    for (const auto &f : m.functions)
      if (f.linkage == ir::Linkage::ExternalDecl)
        need(f.name, ExportEntry::Kind::Function);
    for (const auto &g : m.globals)
      if (g.linkage == ir::Linkage::ExternalDecl)
        need(g.name, ExportEntry::Kind::Global);
  }
  auto it = image.exports.find(entry);
  if (it == image.exports.end() || it->second.kind != ExportEntry::Kind::Function)
    throw LinkError("missing entry point '" + entry + "'");
  return image;
}

Bytes write_image(const ProgramImage &image) {
  check_exports(image);
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t *>("MTPX"), 4));
  w.u32(static_cast<std::uint32_t>(image.units.size()));
  for (const auto &u : image.units) {
    w.str(u.name);
    auto obj = write_fat_object(u.object);
    w.u64(obj.size());
    w.raw(obj);
  }
  w.str(image.entry);
  w.u32(static_cast<std::uint32_t>(image.exports.size()));
  for (const auto &[name, e] : image.exports) {
    w.str(name);
    w.u8(static_cast<std::uint8_t>(e.kind));
    w.u32(e.tu);
  }
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

ProgramImage read_image(ByteView bytes) {
  ByteReader r(bytes, "program image");
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "MTPX")
    r.fail("bad magic");
  if (bytes.size() < 12)
    r.fail("truncated");
  ByteReader tail(bytes.subspan(bytes.size() - 8), "program image");
  if (tail.u64() != fnv1a64(bytes.first(bytes.size() - 8)))
    r.fail("checksum mismatch");
  ByteReader br(bytes.first(bytes.size() - 8), "program image");
  br.raw(4);
  ProgramImage image;
  image.units.resize(br.count(12));
  std::set<std::string> names;
  for (auto &u : image.units) {
    u.name = br.str();
    if (!names.insert(u.name).second)
      br.fail("duplicate unit name");
    auto len = br.u64();
    if (len > br.remaining())
      br.fail("unit out of range");
    u.object = read_fat_object(br.raw(len));
  }
  image.entry = br.str();
  auto n = br.count(9);
  std::string prev;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = br.str();
    if (i > 0 && name <= prev)
      br.fail("export table not sorted");
    ExportEntry e;
    auto kind = br.u8();
    if (kind > 1)
      br.fail("bad export kind");
    e.kind = static_cast<ExportEntry::Kind>(kind);
    e.tu = br.u32();
    image.exports.emplace(name, e);
    prev = std::move(name);
  }
  br.expect_end();
  check_exports(image);
  return image;
}

} // namespace mtjit::fat
