#include <set>

#include "mtjit/fat/fatobject.hpp"

namespace mtjit::fat {

namespace {

constexpr std::size_t kHeaderSize = 12;
constexpr std::size_t kEntrySize = 24;
constexpr std::uint32_t kOptsVersion = 1;

bool known_tag(std::uint32_t t) { return t >= 1 && t <= 6; }

const Tag kJitTags[] = {Tag::Ast, Tag::Src, Tag::Opts, Tag::Locals, Tag::Inst};

void check_section_set(const FatObject &obj) {
  if (!obj.has(Tag::Ir))
    throw FormatError("fat object: missing IR section");
  if ((obj.flags & ~kFlagJit) != 0)
    throw FormatError("fat object: unknown flags");
  std::size_t jit = 0;
  for (auto t : kJitTags)
    jit += obj.has(t) ? 1 : 0;
  if (jit != 0 && jit != std::size(kJitTags))
    throw FormatError("fat object: incomplete jit payload");
  if ((jit != 0) != obj.is_jit())
    throw FormatError("fat object: jit flag disagrees with sections");
}

} // namespace

const char *tag_name(Tag t) {
  switch (t) {
  case Tag::Ast:
    return "AST";
  case Tag::Src:
    return "SRC";
  case Tag::Opts:
    return "OPTS";
  case Tag::Ir:
    return "IR";
  case Tag::Locals:
    return "LOCALS";
  case Tag::Inst:
    return "INST";
  }
  return "?";
}

const Bytes &FatObject::section(Tag t) const {
  auto it = sections.find(t);
  if (it == sections.end())
    throw FormatError(std::string("fat object: no ") + tag_name(t) + " section");
  return it->second;
}

// -- small sections -------------------------------------------------------------

Bytes encode_source(const std::string &text) {
  ByteWriter w;
  w.u8(0);  // reserved for compression
  w.str(text);
  return w.take();
}

std::string decode_source(ByteView bytes) {
  ByteReader r(bytes, "SRC section");
  if (r.u8() != 0)
    r.fail("unsupported source encoding");
  auto s = r.str();
  r.expect_end();
  return s;
}

Bytes encode_opts(const opt::PassConfig &cfg) {
  ByteWriter w;
  w.u32(kOptsVersion);
  w.u8(static_cast<std::uint8_t>(cfg.opt_level));
  w.u32(cfg.unroll_limit);
  w.u32(cfg.inline_budget);
  w.u32(cfg.pipeline_iterations);
  w.u8(cfg.retain_locals ? 1 : 0);
  return w.take();
}

opt::PassConfig decode_opts(ByteView bytes) {
  ByteReader r(bytes, "OPTS section");
  if (auto v = r.u32(); v != kOptsVersion)
    r.fail("unsupported options version " + std::to_string(v));
  opt::PassConfig cfg;
  cfg.opt_level = r.u8();
  cfg.unroll_limit = r.u32();
  cfg.inline_budget = r.u32();
  cfg.pipeline_iterations = r.u32();
  auto keep = r.u8();
  if (keep > 1)
    r.fail("bad flag byte");
  cfg.retain_locals = keep == 1;
  r.expect_end();
  try {
    cfg.validate();
  } catch (const Error &e) {
    r.fail(e.what());
  }
  return cfg;
}

Bytes encode_locals(const irgen::LocalSymbols &locals) {
  std::vector<const std::string *> by_slot(locals.size(), nullptr);
  for (const auto &[name, slot] : locals)
    by_slot.at(slot) = &name;
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(locals.size()));
  for (std::uint32_t i = 0; i < by_slot.size(); ++i) {
    w.str(*by_slot[i]);
    w.u32(i);
  }
  return w.take();
}

irgen::LocalSymbols decode_locals(ByteView bytes) {
  ByteReader r(bytes, "LOCALS section");
  auto n = r.count(8);
  irgen::LocalSymbols out;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto name = r.str();
    if (r.u32() != i)
      r.fail("slots out of order");
    if (name.empty() || !out.emplace(std::move(name), i).second)
      r.fail("bad or repeated local name");
  }
  r.expect_end();
  return out;
}

InstTable build_inst_table(const sema::SemaModule &sema) {
  InstTable t;
  for (const auto &s : sema.jit_sites)
    t.sites.push_back({s.site_id, s.template_name, s.mangled, irgen::packed_tags(s)});
  for (const auto &f : sema.functions) {
    if (f.origin != sema::TypedFunction::Origin::Specialization)
      continue;
    const auto *tmpl = sema.find_function_template(f.source_name);
    if (!tmpl || !tmpl->is_jit)
      continue;
    InstSpecialization spec{f.source_name, f.symbol, {}};
    for (const auto &a : f.template_args)
      if (a.kind == sema::TemplateArg::Kind::GlobalRef)
        spec.referents.push_back(a.global);
    t.specializations.push_back(std::move(spec));
  }
  return t;
}

Bytes encode_inst(const InstTable &t) {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(t.sites.size()));
  for (const auto &s : t.sites) {
    w.u32(s.site_id);
    w.str(s.template_name);
    w.str(s.mangled);
    w.u32(static_cast<std::uint32_t>(s.tags.size()));
    for (auto tag : s.tags)
      w.u8(static_cast<std::uint8_t>(tag));
  }
  w.u32(static_cast<std::uint32_t>(t.specializations.size()));
  for (const auto &s : t.specializations) {
    w.str(s.template_name);
    w.str(s.symbol);
    w.u32(static_cast<std::uint32_t>(s.referents.size()));
    for (const auto &r : s.referents)
      w.str(r);
  }
  return w.take();
}

InstTable decode_inst(ByteView bytes) {
  ByteReader r(bytes, "INST section");
  InstTable t;
  t.sites.resize(r.count(16));
  for (std::uint32_t i = 0; i < t.sites.size(); ++i) {
    auto &s = t.sites[i];
    s.site_id = r.u32();
    if (s.site_id != i)
      r.fail("site ids out of order");
    s.template_name = r.str();
    s.mangled = r.str();
    s.tags.resize(r.count(1));
    for (auto &tag : s.tags) {
      auto v = r.u8();
      if (v > static_cast<std::uint8_t>(irgen::PackedTag::GlobalRef))
        r.fail("bad packed tag");
      tag = static_cast<irgen::PackedTag>(v);
    }
  }
  t.specializations.resize(r.count(12));
  std::set<std::string> symbols;
  for (auto &s : t.specializations) {
    s.template_name = r.str();
    s.symbol = r.str();
    if (!symbols.insert(s.symbol).second)
      r.fail("repeated specialization " + s.symbol);
    s.referents.resize(r.count(4));
    for (auto &ref : s.referents)
      ref = r.str();
  }
  r.expect_end();
  return t;
}

// -- container ------------------------------------------------------------------

Bytes write_fat_object(const ir::Module &ir, const std::optional<JitPayload> &jit) {
  FatObject obj;
  obj.sections[Tag::Ir] = ir::serialize(ir);
  if (jit) {
    obj.flags = kFlagJit;
    obj.sections[Tag::Ast] = jit->ast;
    obj.sections[Tag::Src] = encode_source(jit->source);
    obj.sections[Tag::Opts] = encode_opts(jit->opts);
    obj.sections[Tag::Locals] = encode_locals(jit->locals);
    obj.sections[Tag::Inst] = encode_inst(jit->inst);
  }
  return write_fat_object(obj);
}

std::vector<SectionEntry> section_layout(const FatObject &obj) {
  std::vector<SectionEntry> out;
  std::uint64_t off = kHeaderSize + kEntrySize * obj.sections.size();
  for (const auto &[tag, payload] : obj.sections) {
    off = (off + 7) & ~std::uint64_t{7};
    out.push_back({tag, off, payload.size()});
    off += payload.size();
  }
  return out;
}

Bytes write_fat_object(const FatObject &obj) {
  check_section_set(obj);
  ByteWriter w;
  w.raw(ByteView(reinterpret_cast<const std::uint8_t *>("MTFO"), 4));
  w.u16(kFormatVersion);
  w.u16(obj.flags);
  w.u32(static_cast<std::uint32_t>(obj.sections.size()));
  std::uint64_t off = kHeaderSize + kEntrySize * obj.sections.size();
  for (const auto &[tag, payload] : obj.sections) {
    off = (off + 7) & ~std::uint64_t{7};
    w.u32(static_cast<std::uint32_t>(tag));
    w.u32(0);
    w.u64(off);
    w.u64(payload.size());
    off += payload.size();
  }
  for (const auto &[tag, payload] : obj.sections) {
    w.pad_to(8);
    w.raw(payload);
  }
  w.pad_to(8);
  w.u64(fnv1a64(w.bytes()));
  return w.take();
}

FatObject read_fat_object(ByteView bytes) {
  ByteReader r(bytes, "fat object");
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "MTFO")
    r.fail("bad magic");
  if (auto v = r.u16(); v != kFormatVersion)
    r.fail("unsupported version " + std::to_string(v));
  if (bytes.size() < kHeaderSize + 8 || bytes.size() % 8 != 0)
    r.fail("truncated");
  auto body = bytes.first(bytes.size() - 8);
  ByteReader tail(bytes.subspan(bytes.size() - 8), "fat object");
  if (tail.u64() != fnv1a64(body))
    r.fail("checksum mismatch");

  FatObject obj;
  obj.flags = r.u16();
  auto n = r.u32();
  if (n == 0)
    r.fail("no sections");
  if (n > 6)
    r.fail("too many sections");
  std::uint64_t expected = kHeaderSize + kEntrySize * std::uint64_t{n};
  std::uint32_t last_tag = 0;
  for (std::uint32_t i = 0; i < n; ++i) {
    auto tag = r.u32();
    if (!known_tag(tag))
      r.fail("unknown section tag " + std::to_string(tag));
    if (tag == last_tag)
      r.fail(std::string("duplicate ") + tag_name(static_cast<Tag>(tag)) + " section");
    if (tag < last_tag)
      r.fail("sections out of order");
    last_tag = tag;
    if (r.u32() != 0)
      r.fail("reserved field set");
    auto off = r.u64();
    auto len = r.u64();
    expected = (expected + 7) & ~std::uint64_t{7};
    if (off > body.size() || len > body.size() - off)
      r.fail("section out of range");
    if (off < expected)
      r.fail("overlapping sections");
    if (off != expected)
      r.fail("non-canonical section offset");
    auto payload = body.subspan(off, len);
    obj.sections[static_cast<Tag>(tag)] = Bytes(payload.begin(), payload.end());
    expected = off + len;
  }
  check_section_set(obj);
  // Anything but zero padding between and after payloads is rejected, so
  // reading then writing gives back the input.
  if (write_fat_object(obj) != Bytes(bytes.begin(), bytes.end()))
    r.fail("non-canonical padding");
  return obj;
}

} // namespace mtjit::fat
