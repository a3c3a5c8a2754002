#include "mtjit/ir/mangle.hpp"

namespace mtjit::irgen {

std::string mangle(std::string_view name, const std::vector<sema::TemplateArg> &args,
                   const sema::TypeTable &types) {
  using K = sema::TemplateArg::Kind;
  std::string out(name);
  out += '<';
  unsigned wildcard = 0;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i)
      out += ',';
    const auto &a = args[i];
    switch (a.kind) {
    case K::ConcreteType:
      out += types.name(a.type);
      break;
    case K::ConstInt:
      out += std::to_string(a.value);
      break;
    case K::GlobalRef:
      out += '@' + a.global;
      break;
    case K::RuntimeInt:
    case K::RuntimeTypeString:
    case K::RuntimeGlobalRef:
      out += '?' + std::to_string(wildcard++);
      break;
    }
  }
  out += '>';
  return out;
}

} // namespace mtjit::irgen
