#include <charconv>
#include <sstream>

#include "mtjit/frontend/parser.hpp"

namespace mtjit::frontend {

using namespace ast;

namespace {

std::string escape(const std::string &s) {
  std::string out = "\"";
  for (char c : s) {
    switch (c) {
    case '\n':
      out += "\\n";
      break;
    case '\t':
      out += "\\t";
      break;
    case '\\':
      out += "\\\\";
      break;
    case '"':
      out += "\\\"";
      break;
    default:
      out += c;
    }
  }
  return out + "\"";
}

std::string float_text(const Expr &e) {
  if (!e.text.empty())
    return e.text;
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, e.float_value);
  std::string s(buf, p);
  if (s.find_first_of(".e") == std::string::npos)
    s += ".0";
  return s;
}

bool needs_parens(const Expr &e) {
  return e.kind == Expr::Kind::Binary || e.kind == Expr::Kind::Unary || e.kind == Expr::Kind::Cast;
}

std::string child(const Expr &e) {
  auto s = print_expr(e);
  return needs_parens(e) ? "(" + s + ")" : s;
}

std::string targ_text(const TemplateArgExpr &a) {
  if (a.is_type())
    return print_type(*a.type);
  return child(*a.expr);
}

std::string targ_list(const std::vector<TemplateArgExpr> &args) {
  std::string out;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i)
      out += ", ";
    out += targ_text(args[i]);
  }
  return out;
}

class ModulePrinter {
public:
  std::string run(const AstModule &m) {
    for (const auto &d : m.decls) {
      std::visit([this](const auto &x) { decl(x); }, d);
      out_ << '\n';
    }
    return out_.str();
  }

private:
  void indent() {
    for (int i = 0; i < depth_; ++i)
      out_ << "  ";
  }

  void tparams(const std::vector<TemplateParam> &ps) {
    out_ << "template [";
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i)
        out_ << ", ";
      const auto &p = ps[i];
      out_ << p.name << ": ";
      switch (p.kind) {
      case TemplateParam::Kind::Type:
        out_ << "type";
        break;
      case TemplateParam::Kind::Int:
        out_ << builtin_name(p.width);
        break;
      case TemplateParam::Kind::GlobalRef:
        out_ << "globalref " << print_type(*p.pointee);
        break;
      }
    }
    out_ << "] ";
  }

  void fields(const std::vector<FieldDecl> &fs) {
    out_ << " {\n";
    for (const auto &f : fs)
      out_ << "  " << f.name << ": " << print_type(f.type) << ";\n";
    out_ << "}\n";
  }

  void signature(const FunctionDecl &f) {
    out_ << "(";
    for (std::size_t i = 0; i < f.params.size(); ++i) {
      if (i)
        out_ << ", ";
      out_ << f.params[i].name << ": " << print_type(f.params[i].type);
    }
    out_ << ")";
    if (f.return_type)
      out_ << " -> " << print_type(*f.return_type);
  }

  void decl(const FunctionDecl &f) {
    if (!f.has_body) {
      out_ << "extern fn " << f.name;
      signature(f);
      out_ << ";\n";
      return;
    }
    if (f.exported)
      out_ << "export ";
    out_ << "fn " << f.name;
    signature(f);
    out_ << ' ';
    block(f.body);
    out_ << '\n';
  }

  void decl(const FunctionTemplateDecl &t) {
    if (t.is_jit)
      out_ << "@jit ";
    tparams(t.tparams);
    decl(t.fn);
    for (const auto &s : t.specializations) {
      out_ << "template specialize fn " << t.fn.name << "[" << targ_list(s.args) << "]";
      signature(s.fn);
      out_ << ' ';
      block(s.fn.body);
      out_ << '\n';
    }
  }

  void decl(const RecordDecl &r) {
    out_ << "record " << r.name;
    fields(r.fields);
  }

  void decl(const RecordTemplateDecl &r) {
    tparams(r.tparams);
    out_ << "record " << r.name;
    fields(r.fields);
  }

  void decl(const TypeAliasDecl &a) { out_ << "type " << a.name << " = " << print_type(a.target) << ";\n"; }

  void decl(const GlobalVarDecl &g) {
    if (g.is_extern)
      out_ << "extern ";
    else if (g.exported)
      out_ << "export ";
    out_ << "global " << g.name << ": " << print_type(g.type);
    if (g.init)
      out_ << " = " << print_expr(*g.init);
    out_ << ";\n";
  }

  void block(const std::vector<Stmt> &body) {
    out_ << "{\n";
    ++depth_;
    for (const auto &s : body)
      stmt(s);
    --depth_;
    indent();
    out_ << "}";
  }

  void stmt(const Stmt &s) {
    indent();
    switch (s.kind) {
    case Stmt::Kind::Let:
      out_ << "let " << s.name;
      if (s.declared_type)
        out_ << ": " << print_type(*s.declared_type);
      if (!s.exprs.empty())
        out_ << " = " << print_expr(s.exprs[0]);
      out_ << ";\n";
      return;
    case Stmt::Kind::Assign:
      out_ << print_expr(s.exprs[0]) << " = " << print_expr(s.exprs[1]) << ";\n";
      return;
    case Stmt::Kind::For:
      out_ << "for " << s.name << " in " << child(s.exprs[0]) << ".." << child(s.exprs[1]) << ' ';
      block(s.body);
      out_ << '\n';
      return;
    case Stmt::Kind::If:
      if_stmt(s);
      out_ << '\n';
      return;
    case Stmt::Kind::Return:
      out_ << "return";
      if (!s.exprs.empty())
        out_ << ' ' << print_expr(s.exprs[0]);
      out_ << ";\n";
      return;
    case Stmt::Kind::ExprStmt:
      out_ << print_expr(s.exprs[0]) << ";\n";
      return;
    case Stmt::Kind::Print:
      out_ << "print(";
      for (std::size_t i = 0; i < s.exprs.size(); ++i) {
        if (i)
          out_ << ", ";
        out_ << print_expr(s.exprs[i]);
      }
      out_ << ");\n";
      return;
    case Stmt::Kind::AssertConst:
      out_ << "assert_const(" << print_expr(s.exprs[0]) << ");\n";
      return;
    }
  }

  void if_stmt(const Stmt &s) {
    out_ << "if " << print_expr(s.exprs[0]) << ' ';
    block(s.body);
    if (!s.has_else)
      return;
    out_ << " else ";
    if (s.else_body.size() == 1 && s.else_body[0].kind == Stmt::Kind::If)
      if_stmt(s.else_body[0]);
    else
      block(s.else_body);
  }

  std::ostringstream out_;
  int depth_ = 0;
};

} // namespace

std::string print_type(const TypeExpr &t) {
  switch (t.kind) {
  case TypeExpr::Kind::Builtin:
    return builtin_name(t.builtin);
  case TypeExpr::Kind::Named:
    return (t.qualified ? "::" : "") + t.name;
  case TypeExpr::Kind::Apply:
    return (t.qualified ? "::" : "") + t.name + "<" + targ_list(t.args) + ">";
  case TypeExpr::Kind::Array:
    return "[" + print_type(*t.element) + "; " + print_expr(*t.count) + "]";
  case TypeExpr::Kind::GlobalRef:
    return "globalref " + print_type(*t.element);
  }
  return "?";
}

std::string print_expr(const Expr &e) {
  switch (e.kind) {
  case Expr::Kind::IntLit:
    return std::to_string(e.int_value);
  case Expr::Kind::FloatLit:
    return float_text(e);
  case Expr::Kind::BoolLit:
    return e.bool_value ? "true" : "false";
  case Expr::Kind::StrLit:
    return escape(e.text);
  case Expr::Kind::Name:
    return (e.qualified ? "::" : "") + e.text;
  case Expr::Kind::Unary:
    return (e.unop == UnaryOp::Neg ? "-" : "!") + child(e.operands[0]);
  case Expr::Kind::Binary:
    return child(e.operands[0]) + " " + binary_op_text(e.binop) + " " + child(e.operands[1]);
  case Expr::Kind::Cast:
    return child(e.operands[0]) + " as " + print_type(*e.cast_type);
  case Expr::Kind::Index:
    return child(e.operands[0]) + "[" + print_expr(e.operands[1]) + "]";
  case Expr::Kind::Field:
    return child(e.operands[0]) + "." + e.text;
  case Expr::Kind::Call:
  case Expr::Kind::TemplateCall: {
    std::string s = (e.qualified ? "::" : "") + e.text;
    if (e.kind == Expr::Kind::TemplateCall)
      s += "[" + targ_list(e.targs) + "]";
    s += "(";
    for (std::size_t i = 0; i < e.operands.size(); ++i) {
      if (i)
        s += ", ";
      s += print_expr(e.operands[i]);
    }
    return s + ")";
  }
  case Expr::Kind::AddrOf:
    return std::string("&") + (e.qualified ? "::" : "") + e.text;
  }
  return "?";
}

std::string print_module(const AstModule &m) { return ModulePrinter{}.run(m); }

} // namespace mtjit::frontend
