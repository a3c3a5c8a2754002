#include <chrono>
#include <iostream>
#include <set>

#include "impl.hpp"
#include "mtjit/frontend/parser.hpp"

namespace mtjit::rt {

namespace {

thread_local int jit_depth = 0;

struct JitScope {
  JitScope() { ++jit_depth; }
  ~JitScope() { --jit_depth; }
};

void collect_refs(const ir::Function &f, std::set<std::string> &calls, std::set<std::string> &globals) {
  for (const auto &b : f.blocks)
    for (const auto &in : b.insts) {
      if (in.op == ir::Op::Call)
        calls.insert(in.sym);
      else if (in.op == ir::Op::GlobalAddr)
        globals.insert(in.sym);
    }
}

ir::Function declaration_of(const sema::TypedFunction &tf, const sema::SemaModule &sema) {
  ir::Function d;
  d.name = tf.symbol;
  d.linkage = ir::Linkage::ExternalDecl;
  d.ret = irgen::lower_type(sema.types, tf.ret);
  for (const auto &p : tf.params)
    d.params.push_back({d.fresh(), irgen::lower_type(sema.types, p.type), p.unique_object});
  return d;
}

ir::Function as_declaration(ir::Function f) {
  f.blocks.clear();
  f.linkage = ir::Linkage::ExternalDecl;
  return f;
}

ir::Global global_declaration(ir::Global g) {
  g.linkage = ir::Linkage::ExternalDecl;
  g.init.clear();
  return g;
}

} // namespace

bool in_jit_entry() { return jit_depth > 0; }

void Runtime::Impl::jit_fail(std::uint32_t tu, const std::vector<Diagnostic> &diags) {
  const auto &u = units[tu];
  std::string src = u.state ? u.state->source : std::string{};
  throw JitError("jit compilation failed\n" + render_with_source(diags, src));
}

KeyEntry &Runtime::Impl::lookup(std::uint32_t tu, std::uint32_t site_id, const PackedArgs &packed) {
  JitScope scope;
  if (tu >= units.size())
    throw JitError("no translation unit " + std::to_string(tu));
  auto &u = units[tu];
  if (!u.jit)
    throw JitError("translation unit '" + u.name + "' was not compiled with --jit and has no compiler state");
  if (site_id >= u.inst.sites.size())
    throw JitError("translation unit '" + u.name + "' has no jit site " + std::to_string(site_id));
  const auto &site = u.inst.sites[site_id];

  InstantiationKey key{tu, site.mangled, packed.canonical(), packed.typestrs};
  {
    std::shared_lock lock(cache_mu);
    if (auto it = raw_cache.find(key); it != raw_cache.end()) {
      ++hits;
      ++it->second->hits;
      return *it->second;
    }
  }
  ++misses;
  std::lock_guard tu_lock(u.mu);
  {
    std::shared_lock lock(cache_mu);
    if (auto it = raw_cache.find(key); it != raw_cache.end()) {
      ++it->second->misses;
      return *it->second;
    }
  }
  auto &entry = compile(tu, site, packed);
  ++entry.misses;
  std::unique_lock lock(cache_mu);
  raw_cache.emplace(std::move(key), &entry);
  return entry;
}

KeyEntry &Runtime::Impl::compile(std::uint32_t tu, const fat::InstSite &site, const PackedArgs &packed) {
  auto t0 = std::chrono::steady_clock::now();
  auto &u = units[tu];
  auto &st = ensure_state(tu);
  auto &sema = st.sema;
  if (site.site_id >= sema.jit_sites.size())
    throw JitError("jit site " + std::to_string(site.site_id) + " is not in the compiler state of " + u.name);
  const auto &js = sema.jit_sites[site.site_id];
  const auto *tmpl = sema.find_function_template(js.template_name);
  if (!tmpl)
    throw JitError("jit site names unknown template '" + js.template_name + "'");

  // Bind the wildcards in order: integers and references from the packed
  // values, types by parsing and resolving the strings.
  std::vector<sema::TemplateArg> concrete;
  std::size_t vi = 0;
  std::size_t ti = 0;
  try {
    for (std::size_t i = 0; i < js.pattern.size(); ++i) {
      const auto &p = js.pattern[i];
      switch (p.kind) {
      case sema::TemplateArg::Kind::RuntimeInt: {
        if (vi >= packed.values.size())
          throw JitError("too few runtime values for '" + js.mangled + "'");
        const auto &v = packed.values[vi++];
        auto want = p.width == ast::Builtin::I64 ? irgen::PackedTag::Int64 : irgen::PackedTag::Int32;
        if (v.tag != want)
          throw JitError("runtime value of the wrong kind for '" + js.mangled + "'");
        concrete.push_back(sema::TemplateArg::const_int(static_cast<std::int64_t>(v.bits), p.width));
        break;
      }
      case sema::TemplateArg::Kind::RuntimeTypeString: {
        if (ti >= packed.typestrs.size())
          throw JitError("too few type strings for '" + js.mangled + "'");
        const auto &text = packed.typestrs[ti++];
        ast::TypeExpr te;
        try {
          te = frontend::parse_type_string(text);
        } catch (const SyntaxError &e) {
          auto d = e.diagnostic();
          jit_fail(tu, {{u.name, js.span.offset, Severity::Error,
                         "cannot parse type string \"" + text + "\": " + d.message}});
        }
        concrete.push_back(sema::TemplateArg::concrete_type(sema::resolve_type_string(te, sema)));
        break;
      }
      case sema::TemplateArg::Kind::RuntimeGlobalRef: {
        if (vi >= packed.values.size() || packed.values[vi].tag != irgen::PackedTag::GlobalRef)
          throw JitError("missing global reference for '" + js.mangled + "'");
        auto addr = packed.values[vi++].bits;
        auto region = addr >> 32;
        if ((addr & 0xffffffffu) != 0 || region == 0 || region > global_owner.size())
          throw JitError("global reference argument is not the address of a global");
        const auto &[owner, name] = global_owner[region - 1];
        auto it = u.globals.find(name);
        if (it == u.globals.end() || it->second != addr)
          throw JitError("global '" + name + "' of " + units[owner].name + " is not visible in " + u.name);
        concrete.push_back(sema::TemplateArg::global_ref(name));
        break;
      }
      default:
        concrete.push_back(p);
      }
    }
    if (vi != packed.values.size() || ti != packed.typestrs.size())
      throw JitError("too many runtime arguments for '" + js.mangled + "'");
  } catch (const SemaError &e) {
    auto diags = e.diagnostics();
    for (auto &d : diags)
      if (d.offset == 0)
        d.offset = js.span.offset;
    diags.push_back({u.name, js.span.offset, Severity::Note, "while resolving the template arguments of this call"});
    jit_fail(tu, diags);
  }

  auto symbol = sema::concrete_symbol(sema, tmpl->name(), concrete);
  {
    std::shared_lock lock(cache_mu);
    if (auto it = concrete_cache.find({tu, symbol}); it != concrete_cache.end())
      return *it->second;
  }
  if (sema::select_explicit_specialization(sema, *tmpl, concrete))
    throw Error("explicit specialization '" + symbol + "' was not seeded");

  // Instantiate, then emit everything it needs that the program lacks.
  ir::Module fresh;
  fresh.tu_name = u.name;
  std::vector<std::uint64_t> hidden;
  try {
    const auto &root = sema::instantiate(sema, *tmpl, concrete);
    for (const auto &a : concrete)
      if (a.kind == sema::TemplateArg::Kind::GlobalRef)
        hidden.push_back(u.globals.at(a.global));
    auto in_program = [&](const std::string &s) {
      if (u.jit_symbols.count(s) || st.locals.count(s))
        return true;
      const auto *f = u.aot.find_function(s);
      return f != nullptr && f->linkage != ir::Linkage::Local;
    };
    std::vector<std::string> work{root.symbol};
    std::set<std::string> calls;
    std::set<std::string> globals;
    while (!work.empty()) {
      auto s = work.back();
      work.pop_back();
      if (fresh.find_function(s))
        continue;
      const auto &tf = sema::ensure_function(sema, s);
      auto f = irgen::lower_function(tf, sema);
      if (!f.is_declaration())
        f.linkage = ir::Linkage::Exported;
      std::set<std::string> c;
      collect_refs(f, c, globals);
      fresh.functions.push_back(std::move(f));
      for (const auto &callee : c) {
        calls.insert(callee);
        if (!in_program(callee) && !fresh.find_function(callee))
          work.push_back(callee);
      }
    }
    for (const auto &c : calls)
      if (!fresh.find_function(c))
        fresh.functions.push_back(declaration_of(ensure_function(sema, c), sema));
    for (const auto &g : globals) {
      const auto *info = sema.find_global(g);
      if (!info)
        throw Error("unknown global '" + g + "'");
      fresh.globals.push_back(global_declaration(irgen::lower_global(*info, sema)));
    }
  } catch (const SemaError &e) {
    jit_fail(tu, e.diagnostics());
  }
  ir::verify_or_throw(fresh, "jit lowering");

  // Bring in what may be inlined.
  auto linked = fresh;
  for (const auto &f : st.ext_defs.functions) {
    auto *have = linked.find_function(f.name);
    if (!have)
      linked.functions.push_back(f);
    else if (have->is_declaration() && !f.is_declaration())
      *have = f;
  }
  for (const auto &g : st.ext_defs.globals)
    if (!linked.find_global(g.name))
      linked.globals.push_back(g);

  opt::PassObserver observe;
  if (debug >= 2)
    observe = [&](const std::string &pass, const ir::Module &m) {
      std::lock_guard lock(out_mu);
      std::cerr << "; after " << pass << " (" << u.name << ":" << symbol << ")\n" << ir::print_module(m);
    };
  auto optimized = opt::run_pipeline(std::move(linked), st.opts, observe);
  ir::verify_or_throw(optimized, "jit optimization");
  if (debug >= 1) {
    std::lock_guard lock(out_mu);
    std::cerr << "; jit module " << u.name << ":" << symbol << "\n" << ir::print_module(optimized);
  }

  auto entry = std::make_unique<KeyEntry>();
  entry->key = u.name + ":" + symbol;
  entry->handle.tu = tu;
  entry->handle.symbol = symbol;
  entry->handle.hidden = std::move(hidden);

  // Install, then resolve: new functions may call each other.
  std::vector<FunctionSlot *> installed;
  for (const auto &f : optimized.functions) {
    if (f.linkage != ir::Linkage::Exported)
      continue;
    if (u.jit_symbols.count(f.name) || (u.aot.find_function(f.name) && !u.aot.find_function(f.name)->is_declaration()))
      throw Error("jit code redefines installed symbol '" + f.name + "'");
    auto *slot = new_slot(f, tu, true);
    slot->owner = entry.get();
    u.jit_symbols[f.name] = slot;
    installed.push_back(slot);
  }
  for (auto *slot : installed)
    code_of(*slot);

  auto *root = u.jit_symbols.at(symbol);
  entry->slot = root;
  for (std::size_t k = entry->handle.hidden.size(); k < root->fn.params.size(); ++k)
    entry->handle.params.push_back(root->fn.params[k].type);
  entry->handle.ret = root->fn.ret;

  // The new code becomes inlining fodder for later compilations.
  for (const auto &f : optimized.functions) {
    auto *have = st.ext_defs.find_function(f.name);
    if (f.linkage == ir::Linkage::Exported) {
      auto def = f;
      def.linkage = ir::Linkage::AvailableForInlining;
      if (have)
        *have = std::move(def);
      else
        st.ext_defs.functions.push_back(std::move(def));
    } else if (!have) {
      st.ext_defs.functions.push_back(as_declaration(f));
    }
  }
  for (const auto &g : optimized.globals)
    if (!st.ext_defs.find_global(g.name))
      st.ext_defs.globals.push_back(global_declaration(g));

  auto ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  entry->compile_ms = ms;
  entry->compilations = 1;
  ++compilations;
  {
    std::lock_guard lock(log_mu);
    log.push_back({entry->key, optimized, ms});
  }
  std::unique_lock lock(cache_mu);
  auto *e = entry.get();
  concrete_cache.emplace(std::pair{tu, symbol}, e);
  entries.push_back(std::move(entry));
  return *e;
}

} // namespace mtjit::rt
