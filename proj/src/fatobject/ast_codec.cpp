#include "mtjit/fat/fatobject.hpp"

namespace mtjit::fat {

namespace {

using namespace ast;

constexpr std::uint16_t kAstVersion = 1;
constexpr std::size_t kHeaderSize = 16;
constexpr int kMaxDepth = 200;

enum RecordTag : std::uint8_t { kTuName = 1, kSource = 2, kDecl = 3, kSites = 4 };

// -- encoding -------------------------------------------------------------------

class Encoder {
public:
  explicit Encoder(ByteWriter &w) : w_(w) {}

  void span(const Span &s) {
    w_.u32(s.offset);
    w_.u32(s.length);
  }
  void flag(bool b) { w_.u8(b ? 1 : 0); }

  void type(const TypeExpr &t) {
    w_.u8(static_cast<std::uint8_t>(t.kind));
    w_.u8(static_cast<std::uint8_t>(t.builtin));
    w_.str(t.name);
    flag(t.qualified);
    opt_type(t.element);
    opt_expr(t.count);
    targs(t.args);
    span(t.span);
  }
  void opt_type(const Box<TypeExpr> &t) {
    flag(static_cast<bool>(t));
    if (t)
      type(*t);
  }
  void opt_expr(const Box<Expr> &e) {
    flag(static_cast<bool>(e));
    if (e)
      expr(*e);
  }
  void targs(const std::vector<TemplateArgExpr> &as) {
    w_.u32(static_cast<std::uint32_t>(as.size()));
    for (const auto &a : as) {
      if (a.is_type()) {
        w_.u8(1);
        type(*a.type);
      } else {
        w_.u8(2);
        expr(*a.expr);
      }
    }
  }
  void expr(const Expr &e) {
    w_.u8(static_cast<std::uint8_t>(e.kind));
    w_.i64(e.int_value);
    w_.f64(e.float_value);
    flag(e.bool_value);
    w_.str(e.text);
    flag(e.qualified);
    w_.u8(static_cast<std::uint8_t>(e.binop));
    w_.u8(static_cast<std::uint8_t>(e.unop));
    w_.u32(static_cast<std::uint32_t>(e.operands.size()));
    for (const auto &o : e.operands)
      expr(o);
    targs(e.targs);
    opt_type(e.cast_type);
    span(e.span);
  }
  void stmts(const std::vector<Stmt> &ss) {
    w_.u32(static_cast<std::uint32_t>(ss.size()));
    for (const auto &s : ss)
      stmt(s);
  }
  void stmt(const Stmt &s) {
    w_.u8(static_cast<std::uint8_t>(s.kind));
    w_.str(s.name);
    opt_type(s.declared_type);
    w_.u32(static_cast<std::uint32_t>(s.exprs.size()));
    for (const auto &e : s.exprs)
      expr(e);
    stmts(s.body);
    stmts(s.else_body);
    flag(s.has_else);
    span(s.span);
  }
  void tparams(const std::vector<TemplateParam> &ps) {
    w_.u32(static_cast<std::uint32_t>(ps.size()));
    for (const auto &p : ps) {
      w_.u8(static_cast<std::uint8_t>(p.kind));
      w_.str(p.name);
      w_.u8(static_cast<std::uint8_t>(p.width));
      opt_type(p.pointee);
      span(p.span);
    }
  }
  void fields(const std::vector<FieldDecl> &fs) {
    w_.u32(static_cast<std::uint32_t>(fs.size()));
    for (const auto &f : fs) {
      w_.str(f.name);
      type(f.type);
      span(f.span);
    }
  }
  void function(const FunctionDecl &f) {
    w_.str(f.name);
    w_.u32(static_cast<std::uint32_t>(f.params.size()));
    for (const auto &p : f.params) {
      w_.str(p.name);
      type(p.type);
      span(p.span);
    }
    opt_type(f.return_type);
    stmts(f.body);
    flag(f.has_body);
    flag(f.exported);
    span(f.span);
  }
  void decl(const Decl &d) {
    w_.u8(static_cast<std::uint8_t>(d.index()));
    std::visit(
        [&](const auto &x) {
          using T = std::decay_t<decltype(x)>;
          if constexpr (std::is_same_v<T, FunctionDecl>) {
            function(x);
          } else if constexpr (std::is_same_v<T, FunctionTemplateDecl>) {
            tparams(x.tparams);
            function(x.fn);
            flag(x.is_jit);
            w_.u32(static_cast<std::uint32_t>(x.specializations.size()));
            for (const auto &s : x.specializations) {
              targs(s.args);
              function(s.fn);
              span(s.span);
            }
            span(x.span);
          } else if constexpr (std::is_same_v<T, RecordDecl>) {
            w_.str(x.name);
            fields(x.fields);
            span(x.span);
          } else if constexpr (std::is_same_v<T, RecordTemplateDecl>) {
            w_.str(x.name);
            tparams(x.tparams);
            fields(x.fields);
            span(x.span);
          } else if constexpr (std::is_same_v<T, TypeAliasDecl>) {
            w_.str(x.name);
            type(x.target);
            span(x.span);
          } else {
            w_.str(x.name);
            type(x.type);
            opt_expr(x.init);
            flag(x.exported);
            flag(x.is_extern);
            span(x.span);
          }
        },
        d);
  }

private:
  ByteWriter &w_;
};

void record(ByteWriter &body, std::uint8_t tag, const Bytes &payload) {
  body.u8(tag);
  body.u32(static_cast<std::uint32_t>(payload.size()));
  body.raw(payload);
}

// -- decoding -------------------------------------------------------------------

class Decoder {
public:
  explicit Decoder(ByteReader &r) : r_(r) {}

  Span span() {
    Span s;
    s.offset = r_.u32();
    s.length = r_.u32();
    return s;
  }
  bool flag() {
    auto v = r_.u8();
    if (v > 1)
      r_.fail("bad flag byte");
    return v == 1;
  }
  template <class E> E enum_value(std::uint8_t max) {
    auto v = r_.u8();
    if (v > max)
      r_.fail("enumeration value out of range");
    return static_cast<E>(v);
  }

  TypeExpr type() {
    Depth d(*this);
    TypeExpr t;
    t.kind = enum_value<TypeExpr::Kind>(4);
    t.builtin = enum_value<Builtin>(5);
    t.name = r_.str();
    t.qualified = flag();
    t.element = opt_type();
    t.count = opt_expr();
    t.args = targs();
    t.span = span();
    bool ok = true;
    if (t.kind == TypeExpr::Kind::Array)
      ok = t.element && t.count;
    else if (t.kind == TypeExpr::Kind::GlobalRef)
      ok = static_cast<bool>(t.element);
    if (!ok)
      r_.fail("malformed type");
    return t;
  }
  Box<TypeExpr> opt_type() {
    if (!flag())
      return {};
    return Box<TypeExpr>(type());
  }
  Box<Expr> opt_expr() {
    if (!flag())
      return {};
    return Box<Expr>(expr());
  }
  std::vector<TemplateArgExpr> targs() {
    std::vector<TemplateArgExpr> out(r_.count(2));
    for (auto &a : out) {
      auto which = r_.u8();
      if (which == 1)
        a.type = Box<TypeExpr>(type());
      else if (which == 2)
        a.expr = Box<Expr>(expr());
      else
        r_.fail("bad template argument");
    }
    return out;
  }
  Expr expr() {
    Depth d(*this);
    Expr e;
    e.kind = enum_value<Expr::Kind>(12);
    e.int_value = r_.i64();
    e.float_value = r_.f64();
    e.bool_value = flag();
    e.text = r_.str();
    e.qualified = flag();
    e.binop = enum_value<BinaryOp>(10);
    e.unop = enum_value<UnaryOp>(1);
    e.operands.resize(r_.count(8));
    for (auto &o : e.operands)
      o = expr();
    e.targs = targs();
    e.cast_type = opt_type();
    e.span = span();
    std::size_t n = e.operands.size();
    bool ok = true;
    switch (e.kind) {
    case Expr::Kind::Unary:
    case Expr::Kind::Field:
      ok = n == 1;
      break;
    case Expr::Kind::Cast:
      ok = n == 1 && e.cast_type;
      break;
    case Expr::Kind::Binary:
    case Expr::Kind::Index:
      ok = n == 2;
      break;
    case Expr::Kind::Call:
    case Expr::Kind::TemplateCall:
      break;
    default:
      ok = n == 0;
    }
    if (!ok)
      r_.fail("malformed expression");
    return e;
  }
  std::vector<Stmt> stmts() {
    std::vector<Stmt> out(r_.count(8));
    for (auto &s : out)
      s = stmt();
    return out;
  }
  Stmt stmt() {
    Depth d(*this);
    Stmt s;
    s.kind = enum_value<Stmt::Kind>(7);
    s.name = r_.str();
    s.declared_type = opt_type();
    s.exprs.resize(r_.count(8));
    for (auto &e : s.exprs)
      e = expr();
    s.body = stmts();
    s.else_body = stmts();
    s.has_else = flag();
    s.span = span();
    std::size_t n = s.exprs.size();
    bool ok = true;
    switch (s.kind) {
    case Stmt::Kind::Let:
    case Stmt::Kind::Return:
      ok = n <= 1;
      break;
    case Stmt::Kind::Assign:
    case Stmt::Kind::For:
      ok = n == 2;
      break;
    case Stmt::Kind::If:
    case Stmt::Kind::ExprStmt:
    case Stmt::Kind::AssertConst:
      ok = n == 1;
      break;
    case Stmt::Kind::Print:
      break;
    }
    if (!ok)
      r_.fail("malformed statement");
    return s;
  }
  std::vector<TemplateParam> tparams() {
    std::vector<TemplateParam> out(r_.count(8));
    for (auto &p : out) {
      p.kind = enum_value<TemplateParam::Kind>(2);
      p.name = r_.str();
      p.width = enum_value<Builtin>(5);
      p.pointee = opt_type();
      p.span = span();
      if (p.kind == TemplateParam::Kind::GlobalRef && !p.pointee)
        r_.fail("global reference parameter without a type");
    }
    return out;
  }
  std::vector<FieldDecl> fields() {
    std::vector<FieldDecl> out(r_.count(8));
    for (auto &f : out) {
      f.name = r_.str();
      f.type = type();
      f.span = span();
    }
    return out;
  }
  FunctionDecl function() {
    FunctionDecl f;
    f.name = r_.str();
    f.params.resize(r_.count(8));
    for (auto &p : f.params) {
      p.name = r_.str();
      p.type = type();
      p.span = span();
    }
    f.return_type = opt_type();
    f.body = stmts();
    f.has_body = flag();
    f.exported = flag();
    f.span = span();
    return f;
  }
  Decl decl() {
    switch (r_.u8()) {
    case 0:
      return function();
    case 1: {
      FunctionTemplateDecl t;
      t.tparams = tparams();
      t.fn = function();
      t.is_jit = flag();
      t.specializations.resize(r_.count(8));
      for (auto &s : t.specializations) {
        s.args = targs();
        s.fn = function();
        s.span = span();
      }
      t.span = span();
      return t;
    }
    case 2: {
      RecordDecl rd;
      rd.name = r_.str();
      rd.fields = fields();
      rd.span = span();
      return rd;
    }
    case 3: {
      RecordTemplateDecl rt;
      rt.name = r_.str();
      rt.tparams = tparams();
      rt.fields = fields();
      rt.span = span();
      return rt;
    }
    case 4: {
      TypeAliasDecl a;
      a.name = r_.str();
      a.target = type();
      a.span = span();
      return a;
    }
    case 5: {
      GlobalVarDecl g;
      g.name = r_.str();
      g.type = type();
      g.init = opt_expr();
      g.exported = flag();
      g.is_extern = flag();
      g.span = span();
      return g;
    }
    default:
      r_.fail("unknown declaration kind");
    }
  }

private:
  struct Depth {
    explicit Depth(Decoder &d) : d_(d) {
      if (++d_.depth_ > kMaxDepth)
        d_.r_.fail("nesting too deep");
    }
    ~Depth() { --d_.depth_; }
    Decoder &d_;
  };

  ByteReader &r_;
  int depth_ = 0;
};

struct StoredSite {
  std::uint32_t site_id;
  std::string template_name;
  std::string mangled;
  Span span;
};

} // namespace

Bytes serialize_ast(const sema::SemaModule &sema) {
  const auto &m = sema.ast;
  ByteWriter body;
  if (!m.tu_name.empty()) {
    ByteWriter p;
    p.str(m.tu_name);
    record(body, kTuName, p.bytes());
  }
  if (!m.source_text.empty()) {
    ByteWriter p;
    p.str(m.source_text);
    record(body, kSource, p.bytes());
  }
  for (const auto &d : m.decls) {
    ByteWriter p;
    Encoder(p).decl(d);
    record(body, kDecl, p.bytes());
  }
  if (!sema.jit_sites.empty()) {
    ByteWriter p;
    Encoder enc(p);
    p.u32(static_cast<std::uint32_t>(sema.jit_sites.size()));
    for (const auto &s : sema.jit_sites) {
      p.u32(s.site_id);
      p.str(s.template_name);
      p.str(s.mangled);
      enc.span(s.span);
    }
    record(body, kSites, p.bytes());
  }
  ByteWriter out;
  out.raw(ByteView(reinterpret_cast<const std::uint8_t *>("MTAS"), 4));
  out.u16(kAstVersion);
  out.u16(0);
  out.u32(static_cast<std::uint32_t>(body.size()));
  out.u32(fnv1a32(body.bytes()));
  out.raw(body.bytes());
  return out.take();
}

sema::SemaModule deserialize_ast(ByteView bytes) {
  ByteReader r(bytes, "AST section");
  auto magic = r.raw(4);
  if (std::string(magic.begin(), magic.end()) != "MTAS")
    r.fail("bad magic");
  if (auto v = r.u16(); v != kAstVersion)
    r.fail("unsupported version " + std::to_string(v));
  if (r.u16() != 0)
    r.fail("unknown flags");
  auto len = r.u32();
  auto sum = r.u32();
  auto body = r.raw(len);
  r.expect_end();
  if (fnv1a32(body) != sum)
    throw FormatError("AST section: checksum mismatch");

  AstModule m;
  std::vector<StoredSite> sites;
  bool have_sites = false;
  ByteReader br(body, "AST section");
  std::uint8_t last = 0;
  while (!br.at_end()) {
    auto tag = br.u8();
    auto plen = br.u32();
    ByteReader pr(br.raw(plen), "AST record");
    if (tag < last || tag < kTuName || tag > kSites || (tag == last && tag != kDecl))
      br.fail("records out of order");
    last = tag;
    Decoder dec(pr);
    switch (tag) {
    case kTuName:
      m.tu_name = pr.str();
      if (m.tu_name.empty())
        pr.fail("empty name record");
      break;
    case kSource:
      m.source_text = pr.str();
      if (m.source_text.empty())
        pr.fail("empty source record");
      break;
    case kDecl:
      m.decls.push_back(dec.decl());
      break;
    case kSites: {
      auto n = pr.count(20);
      if (n == 0)
        pr.fail("empty site record");
      for (std::uint32_t i = 0; i < n; ++i) {
        StoredSite s;
        s.site_id = pr.u32();
        s.template_name = pr.str();
        s.mangled = pr.str();
        s.span = dec.span();
        sites.push_back(std::move(s));
      }
      have_sites = true;
      break;
    }
    }
    pr.expect_end();
  }
  (void)have_sites;

  sema::SemaModule out;
  try {
    out = sema::analyze(std::move(m));
  } catch (const Error &e) {
    throw FormatError(std::string("AST section does not check: ") + e.what());
  }
  bool same = out.jit_sites.size() == sites.size();
  for (std::size_t i = 0; same && i < sites.size(); ++i) {
    const auto &a = out.jit_sites[i];
    const auto &b = sites[i];
    same = a.site_id == b.site_id && a.template_name == b.template_name && a.mangled == b.mangled &&
           a.span.offset == b.span.offset && a.span.length == b.span.length;
  }
  if (!same)
    throw FormatError("AST section: jit site table disagrees with the checked module");
  return out;
}

} // namespace mtjit::fat
