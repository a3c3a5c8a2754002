#include "mtjit/ir/eval.hpp"

namespace mtjit::ir {

num::Scalar scalar_of(Type t) {
  switch (t) {
  case Type::I32: return num::Scalar::I32;
  case Type::F32: return num::Scalar::F32;
  case Type::F64: return num::Scalar::F64;
  case Type::Bool: return num::Scalar::Bool;
  default: return num::Scalar::I64;
  }
}

std::uint64_t type_size(Type t) {
  switch (t) {
  case Type::Bool: return 1;
  case Type::I32:
  case Type::F32: return 4;
  default: return 8;
  }
}

std::optional<std::uint64_t> eval_pure(const Inst &in, std::uint64_t a, std::uint64_t b) {
  switch (in.op) {
  case Op::Bin:
    return num::arith(static_cast<num::Arith>(in.imm), scalar_of(in.type), a, b);
  case Op::Un:
    if (in.imm == static_cast<std::uint64_t>(UnOp::Not))
      return a ? 0 : 1;
    return num::negate(scalar_of(in.type), a);
  case Op::Cmp:
    return num::compare(static_cast<num::Compare>(in.imm), scalar_of(in.vtype), a, b) ? 1 : 0;
  case Op::Cast:
    return num::convert(scalar_of(in.vtype), scalar_of(in.type), a);
  default:
    return std::nullopt;
  }
}

} // namespace mtjit::ir
