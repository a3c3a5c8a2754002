#include <algorithm>
#include <cstdlib>
#include <iostream>
#include <sstream>

#include "impl.hpp"
#include "mtjit/ir/eval.hpp"

namespace mtjit::rt {

namespace {

std::string csv_field(const std::string &s) {
  if (s.find_first_of(",\"\n") == std::string::npos)
    return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"')
      out += '"';
    out += c;
  }
  return out + "\"";
}

} // namespace

Bytes PackedArgs::canonical() const {
  ByteWriter w;
  for (const auto &v : values) {
    w.u8(static_cast<std::uint8_t>(v.tag));
    w.u64(v.bits);
  }
  return w.take();
}

std::string Stats::csv() const {
  std::ostringstream os;
  os << "key,compilations,hits,misses,instructions\n";
  os << "total," << compilations << ',' << hits << ',' << misses << ',' << instructions << '\n';
  for (const auto &k : keys)
    os << csv_field(k.key) << ',' << k.compilations << ',' << k.hits << ',' << k.misses << ',' << k.instructions
       << '\n';
  return os.str();
}

std::string render_with_source(const std::vector<Diagnostic> &diags, const std::string &source) {
  std::string out;
  for (const auto &d : diags) {
    std::uint32_t line = 1;
    std::size_t line_start = 0;
    auto end = std::min<std::size_t>(d.offset, source.size());
    for (std::size_t i = 0; i < end; ++i)
      if (source[i] == '\n') {
        ++line;
        line_start = i + 1;
      }
    auto col = end - line_start + 1;
    const char *sev = d.severity == Severity::Error ? "error" : d.severity == Severity::Warning ? "warning" : "note";
    out += d.tu_name + ":" + std::to_string(line) + ":" + std::to_string(col) + ": " + sev + ": " + d.message + "\n";
    if (line_start < source.size()) {
      auto line_end = source.find('\n', line_start);
      if (line_end == std::string::npos)
        line_end = source.size();
      out += "  " + source.substr(line_start, line_end - line_start) + "\n";
      out += "  " + std::string(col - 1, ' ') + "^\n";
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Runtime::Impl::Impl(Bytes bytes, Options o) : opts(std::move(o)), image_bytes(std::move(bytes)) {
  out = opts.out ? opts.out : &std::cout;
  debug = opts.debug;
  if (debug < 0) {
    const char *env = std::getenv("MTJIT_DEBUG");
    debug = env ? std::atoi(env) : 0;
  }
  {
    std::lock_guard lock(log_mu);
    access_log.push_back({"image", "", "program", image_bytes.size()});
  }
  image = fat::read_image(image_bytes);
  load();
  if (opts.argv.empty())
    opts.argv.push_back("program");
  for (const auto &a : opts.argv)
    argv_bits.push_back(intern(a));
}

const Bytes &Runtime::Impl::read(std::uint32_t tu, fat::Tag tag) {
  const auto &bytes = image.units.at(tu).object.section(tag);
  std::lock_guard lock(log_mu);
  access_log.push_back({"image", image.units[tu].name, fat::tag_name(tag), bytes.size()});
  return bytes;
}

FunctionSlot *Runtime::Impl::new_slot(ir::Function fn, std::uint32_t tu, bool jit) {
  auto s = std::make_unique<FunctionSlot>();
  s->fn = std::move(fn);
  s->tu = tu;
  s->jit = jit;
  std::lock_guard lock(slots_mu);
  slots.push_back(std::move(s));
  return slots.back().get();
}

void Runtime::Impl::load() {
  for (std::uint32_t i = 0; i < image.units.size(); ++i) {
    auto &u = units.emplace_back();
    u.name = image.units[i].name;
    u.object = &image.units[i].object;
    u.jit = u.object->is_jit();
    u.aot = ir::deserialize(read(i, fat::Tag::Ir));
    unit_index[u.name] = i;
    for (const auto &g : u.aot.globals) {
      if (g.linkage == ir::Linkage::ExternalDecl)
        continue;
      global_mem.push_back(g.init);
      global_owner.emplace_back(i, g.name);
      auto addr = make_address(global_mem.size(), 0);
      u.globals[g.name] = addr;
      if (g.linkage == ir::Linkage::Exported)
        export_globals[g.name] = addr;
    }
    for (const auto &f : u.aot.functions) {
      if (f.is_declaration())
        continue;
      auto *slot = new_slot(f, i, false);
      u.functions[f.name] = slot;
      if (f.linkage == ir::Linkage::Exported)
        export_functions[f.name] = slot;
    }
  }
  for (auto &u : units) {
    for (const auto &g : u.aot.globals)
      if (g.linkage == ir::Linkage::ExternalDecl) {
        auto it = export_globals.find(g.name);
        if (it == export_globals.end())
          throw LinkError("unresolved global '" + g.name + "' in " + u.name);
        u.globals[g.name] = it->second;
      }
    for (const auto &f : u.aot.functions)
      if (f.is_declaration()) {
        auto it = export_functions.find(f.name);
        if (it == export_functions.end())
          throw LinkError("unresolved function '" + f.name + "' in " + u.name);
        u.functions[f.name] = it->second;
      }
  }
  // Explicit specializations of jit templates are already compiled; a
  // runtime lookup that lands on one reuses it.
  for (std::uint32_t i = 0; i < units.size(); ++i) {
    auto &u = units[i];
    if (!u.jit)
      continue;
    u.inst = fat::decode_inst(read(i, fat::Tag::Inst));
    for (const auto &spec : u.inst.specializations) {
      auto it = u.functions.find(spec.symbol);
      if (it == u.functions.end() || it->second->tu != i)
        throw FormatError("specialization '" + spec.symbol + "' is missing from " + u.name);
      auto e = std::make_unique<KeyEntry>();
      e->key = u.name + ":" + spec.symbol;
      e->preseeded = true;
      e->slot = it->second;
      e->slot->owner = e.get();
      e->handle.tu = i;
      e->handle.symbol = spec.symbol;
      for (const auto &r : spec.referents)
        e->handle.hidden.push_back(u.globals.at(r));
      const auto &params = e->slot->fn.params;
      if (params.size() < e->handle.hidden.size())
        throw FormatError("specialization '" + spec.symbol + "' has too few parameters");
      for (std::size_t k = e->handle.hidden.size(); k < params.size(); ++k)
        e->handle.params.push_back(params[k].type);
      e->handle.ret = e->slot->fn.ret;
      bool fresh = concrete_cache.emplace(std::pair{i, spec.symbol}, e.get()).second;
      if (!fresh)
        throw FormatError("duplicate specialization '" + spec.symbol + "'");
      entries.push_back(std::move(e));
    }
  }
}

TuState &Runtime::Impl::ensure_state(std::uint32_t tu) {
  auto &u = units.at(tu);
  if (u.state)
    return *u.state;
  if (!u.jit)
    throw JitError("translation unit '" + u.name + "' was not compiled with --jit and has no compiler state");
  auto st = std::make_unique<TuState>();
  st->sema = fat::deserialize_ast(read(tu, fat::Tag::Ast));
  st->sema.runtime_mode = true;
  st->source = fat::decode_source(read(tu, fat::Tag::Src));
  st->opts = fat::decode_opts(read(tu, fat::Tag::Opts));
  st->locals = fat::decode_locals(read(tu, fat::Tag::Locals));
  st->ext_defs = ir::deserialize(read(tu, fat::Tag::Ir));
  for (auto &f : st->ext_defs.functions)
    if (!f.is_declaration())
      f.linkage = ir::Linkage::AvailableForInlining;
  for (auto &g : st->ext_defs.globals) {
    g.linkage = ir::Linkage::ExternalDecl;
    g.init.clear();
  }
  st->local_functions.assign(st->locals.size(), nullptr);
  st->local_globals.assign(st->locals.size(), 0);
  for (const auto &[name, slot] : st->locals) {
    const auto *f = u.aot.find_function(name);
    const auto *g = u.aot.find_global(name);
    if (f && f->linkage == ir::Linkage::Local)
      st->local_functions[slot] = u.functions.at(name);
    else if (g && g->linkage == ir::Linkage::Local)
      st->local_globals[slot] = u.globals.at(name);
    else
      throw FormatError("local symbol '" + name + "' of " + u.name + " has no local definition");
  }
  u.state = std::move(st);
  return *u.state;
}

FunctionSlot *Runtime::Impl::resolve_function(const FunctionSlot &slot, const std::string &name) {
  auto &u = units[slot.tu];
  if (!slot.jit) {
    if (auto it = u.functions.find(name); it != u.functions.end())
      return it->second;
  } else {
    if (auto it = u.jit_symbols.find(name); it != u.jit_symbols.end())
      return it->second;
    auto &st = *u.state;
    if (auto it = st.locals.find(name); it != st.locals.end() && st.local_functions[it->second])
      return st.local_functions[it->second];
    const auto *f = u.aot.find_function(name);
    if (f && f->linkage != ir::Linkage::Local)
      return u.functions.at(name);
    if (auto it = export_functions.find(name); it != export_functions.end())
      return it->second;
  }
  throw Error("unresolved function '" + name + "' referenced from '" + slot.fn.name + "'");
}

std::uint64_t Runtime::Impl::resolve_global(const FunctionSlot &slot, const std::string &name) {
  auto &u = units[slot.tu];
  if (!slot.jit) {
    if (auto it = u.globals.find(name); it != u.globals.end())
      return it->second;
  } else {
    auto &st = *u.state;
    if (auto it = st.locals.find(name); it != st.locals.end() && st.local_globals[it->second])
      return st.local_globals[it->second];
    const auto *g = u.aot.find_global(name);
    if (g && g->linkage != ir::Linkage::Local)
      return u.globals.at(name);
    if (auto it = export_globals.find(name); it != export_globals.end())
      return it->second;
  }
  throw Error("unresolved global '" + name + "' referenced from '" + slot.fn.name + "'");
}

std::uint64_t Runtime::Impl::intern(std::string_view s) {
  std::lock_guard lock(strings_mu);
  auto it = strings.emplace(s).first;
  return reinterpret_cast<std::uint64_t>(&*it);
}

// ---------------------------------------------------------------------------
// public surface

Runtime::Runtime(Bytes image_bytes, Options opts) : impl_(std::make_unique<Impl>(std::move(image_bytes), std::move(opts))) {}

Runtime::~Runtime() = default;

int Runtime::run_main() {
  auto it = impl_->export_functions.find(impl_->image.entry);
  if (it == impl_->export_functions.end())
    throw LinkError("missing entry point '" + impl_->image.entry + "'");
  auto *slot = it->second;
  if (!slot->fn.params.empty())
    throw Error("entry point takes parameters");
  auto bits = impl_->run(*slot, {});
  if (slot->fn.ret == ir::Type::Void)
    return 0;
  return static_cast<int>(num::to_int(ir::scalar_of(slot->fn.ret), bits));
}

const FunctionHandle &Runtime::jit_entry(std::uint32_t tu, std::uint32_t site_id, const PackedArgs &packed) {
  return impl_->lookup(tu, site_id, packed).handle;
}

std::uint64_t Runtime::execute(const FunctionHandle &h, std::span<const std::uint64_t> args) {
  FunctionSlot *slot = nullptr;
  {
    std::shared_lock lock(impl_->cache_mu);
    if (auto it = impl_->concrete_cache.find({h.tu, h.symbol}); it != impl_->concrete_cache.end())
      slot = it->second->slot;
  }
  if (!slot) {
    auto &u = impl_->units.at(h.tu);
    if (auto it = u.functions.find(h.symbol); it != u.functions.end())
      slot = it->second;
  }
  if (!slot)
    throw Error("no installed code for '" + h.symbol + "'");
  if (args.size() != h.params.size())
    throw Trap("argument count mismatch calling '" + h.symbol + "'");
  std::vector<std::uint64_t> all(h.hidden);
  all.insert(all.end(), args.begin(), args.end());
  return impl_->run(*slot, all);
}

FunctionHandle Runtime::exported_function(const std::string &name) const {
  auto it = impl_->export_functions.find(name);
  if (it == impl_->export_functions.end())
    throw Error("no exported function '" + name + "'");
  FunctionHandle h;
  h.tu = it->second->tu;
  h.symbol = name;
  for (const auto &p : it->second->fn.params)
    h.params.push_back(p.type);
  h.ret = it->second->fn.ret;
  return h;
}

const void *Runtime::ensure_tu_instance(std::uint32_t tu) {
  auto &u = impl_->units.at(tu);
  std::lock_guard lock(u.mu);
  return &impl_->ensure_state(tu);
}

std::size_t Runtime::tu_instances() const {
  std::size_t n = 0;
  for (auto &u : impl_->units) {
    std::lock_guard lock(u.mu);
    n += u.state ? 1 : 0;
  }
  return n;
}

std::uint32_t Runtime::tu_index(const std::string &name) const {
  auto it = impl_->unit_index.find(name);
  if (it == impl_->unit_index.end())
    throw Error("no translation unit '" + name + "'");
  return it->second;
}

std::size_t Runtime::tu_count() const { return impl_->units.size(); }

std::uint64_t Runtime::global_address(std::uint32_t tu, const std::string &name) const {
  const auto &g = impl_->units.at(tu).globals;
  auto it = g.find(name);
  if (it == g.end())
    throw Error("no global '" + name + "'");
  return it->second;
}

Bytes Runtime::read_global(std::uint32_t tu, const std::string &name) const {
  return impl_->global_mem.at((global_address(tu, name) >> 32) - 1);
}

std::uint64_t Runtime::intern(const std::string &s) { return impl_->intern(s); }

Stats Runtime::stats() const {
  Stats s;
  s.compilations = impl_->compilations;
  s.hits = impl_->hits;
  s.misses = impl_->misses;
  s.instructions = impl_->instructions;
  std::map<const KeyEntry *, std::uint64_t> per_key;
  {
    std::lock_guard lock(impl_->slots_mu);
    for (const auto &slot : impl_->slots)
      if (slot->owner)
        per_key[slot->owner] += slot->self_instructions;
  }
  std::shared_lock lock(impl_->cache_mu);
  for (const auto &e : impl_->entries) {
    KeyStats k;
    k.key = e->key;
    k.preseeded = e->preseeded;
    k.compilations = e->compilations;
    k.hits = e->hits;
    k.misses = e->misses;
    k.instructions = per_key[e.get()];
    k.compile_ms = e->compile_ms;
    s.keys.push_back(std::move(k));
  }
  std::sort(s.keys.begin(), s.keys.end(), [](const KeyStats &a, const KeyStats &b) { return a.key < b.key; });
  return s;
}

std::vector<std::string> Runtime::cache_keys() const {
  std::shared_lock lock(impl_->cache_mu);
  std::vector<std::string> out;
  for (const auto &[k, e] : impl_->concrete_cache)
    out.push_back(e->key);
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<CompileRecord> Runtime::compile_log() const {
  std::lock_guard lock(impl_->log_mu);
  return impl_->log;
}

std::vector<Access> Runtime::accesses() const {
  std::lock_guard lock(impl_->log_mu);
  return impl_->access_log;
}

std::size_t Runtime::foreign_accesses() const {
  std::lock_guard lock(impl_->log_mu);
  return static_cast<std::size_t>(std::count_if(impl_->access_log.begin(), impl_->access_log.end(),
                                                [](const Access &a) { return a.source != "image"; }));
}

ir::Module Runtime::ext_defs(std::uint32_t tu) const {
  auto &u = impl_->units.at(tu);
  std::lock_guard lock(u.mu);
  return u.state ? u.state->ext_defs : ir::Module{};
}

} // namespace mtjit::rt
