#include <charconv>
#include <cstring>
#include <ostream>

#include "impl.hpp"
#include "mtjit/ir/eval.hpp"

namespace mtjit::rt {

namespace {

enum Intrinsic : std::uint64_t { kArgc, kArgv, kAtoi, kAtol };

std::uint64_t parse_int(const std::string &s, bool wide) {
  std::size_t i = 0;
  while (i < s.size() && (s[i] == ' ' || (s[i] >= '\t' && s[i] <= '\r')))
    ++i;
  bool neg = false;
  if (i < s.size() && (s[i] == '+' || s[i] == '-'))
    neg = s[i++] == '-';
  std::uint64_t v = 0;
  for (; i < s.size() && s[i] >= '0' && s[i] <= '9'; ++i)
    v = v * 10 + static_cast<std::uint64_t>(s[i] - '0');
  if (neg)
    v = ~v + 1;
  if (wide)
    return v;
  return static_cast<std::uint64_t>(static_cast<std::int64_t>(static_cast<std::int32_t>(static_cast<std::uint32_t>(v))));
}

void append_value(std::string &out, ir::Type t, std::uint64_t bits) {
  char buf[64];
  switch (t) {
  case ir::Type::I32:
  case ir::Type::I64: {
    auto r = std::to_chars(buf, buf + sizeof buf, static_cast<std::int64_t>(bits));
    out.append(buf, r.ptr);
    break;
  }
  case ir::Type::F32: {
    auto r = std::to_chars(buf, buf + sizeof buf, static_cast<float>(num::to_double(num::Scalar::F32, bits)));
    out.append(buf, r.ptr);
    break;
  }
  case ir::Type::F64: {
    auto r = std::to_chars(buf, buf + sizeof buf, num::to_double(num::Scalar::F64, bits));
    out.append(buf, r.ptr);
    break;
  }
  case ir::Type::Bool:
    out += bits ? "true" : "false";
    break;
  case ir::Type::Str:
    out += Runtime::Impl::text(bits);
    break;
  default: {
    auto r = std::to_chars(buf, buf + sizeof buf, bits, 16);
    out += "0x";
    out.append(buf, r.ptr);
  }
  }
}

std::uint64_t load_bits(const std::uint8_t *p, ir::Type t) {
  switch (t) {
  case ir::Type::Bool:
    return *p != 0;
  case ir::Type::I32: {
    std::int32_t v;
    std::memcpy(&v, p, 4);
    return static_cast<std::uint64_t>(static_cast<std::int64_t>(v));
  }
  case ir::Type::F32: {
    std::uint32_t v;
    std::memcpy(&v, p, 4);
    return v;
  }
  default: {
    std::uint64_t v;
    std::memcpy(&v, p, 8);
    return v;
  }
  }
}

void store_bits(std::uint8_t *p, ir::Type t, std::uint64_t bits) {
  switch (t) {
  case ir::Type::Bool:
    *p = bits != 0;
    break;
  case ir::Type::I32:
  case ir::Type::F32: {
    auto v = static_cast<std::uint32_t>(bits);
    std::memcpy(p, &v, 4);
    break;
  }
  default:
    std::memcpy(p, &bits, 8);
  }
}

class Executor {
public:
  explicit Executor(Runtime::Impl &rt) : rt_(rt) {}
  ~Executor() { rt_.instructions += executed_; }

  std::uint64_t call(FunctionSlot &fn, std::span<const std::uint64_t> args) {
    scratch_.assign(args.begin(), args.end());
    push(fn, 0);
    return loop();
  }

private:
  struct Frame {
    FunctionSlot *slot;
    const Code *code;
    std::uint32_t pc;
    std::uint32_t reg_base;
    std::uint32_t mem_base;
    std::uint32_t ret_dst;
    std::uint64_t start;
    std::uint64_t child;
  };

  [[noreturn]] void trap(const std::string &msg) {
    throw Trap("trap in '" + frames_.back().slot->fn.name + "': " + msg);
  }

  /// Arguments are taken from scratch_.
  void push(FunctionSlot &fn, std::uint32_t ret_dst) {
    const Code &code = rt_.code_of(fn);
    if (frames_.size() >= rt_.opts.max_call_depth)
      trap("call depth limit exceeded");
    if (scratch_.size() != code.params.size())
      trap("wrong argument count calling '" + fn.fn.name + "'");
    auto reg_base = static_cast<std::uint32_t>(regs_.size());
    regs_.resize(reg_base + code.nregs);
    for (std::size_t i = 0; i < code.params.size(); ++i)
      regs_[reg_base + code.params[i]] = scratch_[i];
    auto mem_base = static_cast<std::uint32_t>(mem_.size());
    mem_.resize(mem_base + code.frame_size);
    frames_.push_back({&fn, &code, 0, reg_base, mem_base, ret_dst, executed_, 0});
  }

  std::uint8_t *at(std::uint64_t addr, std::uint64_t size) {
    auto region = addr >> 32;
    auto off = addr & 0xffffffffu;
    if (region == 0)
      trap("null address");
    if (region < kFrameBase) {
      if (region > rt_.global_mem.size())
        trap("bad address");
      auto &g = rt_.global_mem[region - 1];
      if (off + size > g.size())
        trap("access outside global '" + rt_.global_owner[region - 1].second + "'");
      return g.data() + off;
    }
    auto depth = region - kFrameBase;
    if (depth >= frames_.size())
      trap("dangling frame address");
    const auto &fr = frames_[depth];
    if (off + size > fr.code->frame_size)
      trap("access outside the frame");
    return mem_.data() + fr.mem_base + off;
  }

  std::uint64_t loop() {
    while (true) {
      Frame &f = frames_.back();
      const PInst &in = f.code->insts[f.pc++];
      std::uint64_t *r = regs_.data() + f.reg_base;
      ++executed_;
      switch (in.op) {
      case ir::Op::Const:
      case ir::Op::GlobalAddr:
        r[in.dst] = in.imm;
        break;
      case ir::Op::Alloca: {
        auto depth = frames_.size() - 1;
        std::memset(mem_.data() + f.mem_base + in.imm2, 0, in.imm);
        r[in.dst] = make_address(kFrameBase + depth, in.imm2);
        break;
      }
      case ir::Op::Load:
        r[in.dst] = load_bits(at(r[in.a], ir::type_size(in.type)), in.type);
        break;
      case ir::Op::Store:
        store_bits(at(r[in.a], ir::type_size(in.vtype)), in.vtype, r[in.b]);
        break;
      case ir::Op::Elem: {
        auto idx = static_cast<std::int64_t>(r[in.b]);
        if (idx < 0 || static_cast<std::uint64_t>(idx) >= in.imm2)
          trap("index " + std::to_string(idx) + " out of range for " + std::to_string(in.imm2) + " elements");
        r[in.dst] = r[in.a] + static_cast<std::uint64_t>(idx) * in.imm;
        break;
      }
      case ir::Op::Field:
        r[in.dst] = r[in.a] + in.imm;
        break;
      case ir::Op::Bin: {
        auto v = num::arith(static_cast<num::Arith>(in.imm), in.sc, r[in.a], r[in.b]);
        if (!v)
          trap("integer division by zero");
        r[in.dst] = *v;
        break;
      }
      case ir::Op::Un:
        r[in.dst] = in.imm == static_cast<std::uint64_t>(ir::UnOp::Neg) ? num::negate(in.sc, r[in.a]) : !r[in.a];
        break;
      case ir::Op::Cmp:
        r[in.dst] = num::compare(static_cast<num::Compare>(in.imm), in.vsc, r[in.a], r[in.b]);
        break;
      case ir::Op::Cast:
        r[in.dst] = num::convert(in.vsc, in.sc, r[in.a]);
        break;
      case ir::Op::Call: {
        scratch_.clear();
        for (std::uint32_t k = 0; k < in.count; ++k)
          scratch_.push_back(r[f.code->pool[in.list + k]]);
        push(*in.callee, in.dst);
        break;
      }
      case ir::Op::CallIndirect: {
        auto *e = reinterpret_cast<const KeyEntry *>(r[in.a]);
        const auto &h = e->handle;
        bool ok = h.params.size() == in.count;
        for (std::uint32_t k = 0; ok && k < in.count; ++k)
          ok = h.params[k] == f.code->tpool[in.list + k];
        if (!ok)
          trap("signature mismatch calling '" + h.symbol + "'");
        scratch_.assign(h.hidden.begin(), h.hidden.end());
        for (std::uint32_t k = 0; k < in.count; ++k)
          scratch_.push_back(r[f.code->pool[in.list + k]]);
        push(*e->slot, in.dst);
        break;
      }
      case ir::Op::JitRequest: {
        PackedArgs packed;
        for (std::uint32_t k = 0; k < in.count; ++k) {
          auto v = r[f.code->pool[in.list + k]];
          switch (f.code->tpool[in.list + k]) {
          case ir::Type::I32:
            packed.values.push_back({irgen::PackedTag::Int32, v});
            break;
          case ir::Type::I64:
            packed.values.push_back({irgen::PackedTag::Int64, v});
            break;
          case ir::Type::Str:
            packed.typestrs.push_back(Runtime::Impl::text(v));
            break;
          default:
            packed.values.push_back({irgen::PackedTag::GlobalRef, v});
          }
        }
        auto tu = f.slot->tu;
        auto dst = in.dst;
        auto &entry = rt_.lookup(tu, static_cast<std::uint32_t>(in.imm), packed);
        regs_[frames_.back().reg_base + dst] = reinterpret_cast<std::uint64_t>(&entry);
        break;
      }
      case ir::Op::Intrinsic:
        switch (in.imm) {
        case kArgc:
          r[in.dst] = rt_.argv_bits.size();
          break;
        case kArgv: {
          auto i = static_cast<std::int64_t>(r[in.a]);
          if (i < 0 || static_cast<std::uint64_t>(i) >= rt_.argv_bits.size())
            trap("argv index " + std::to_string(i) + " out of range");
          r[in.dst] = rt_.argv_bits[static_cast<std::size_t>(i)];
          break;
        }
        default:
          r[in.dst] = parse_int(Runtime::Impl::text(r[in.a]), in.imm == kAtol);
        }
        break;
      case ir::Op::Print: {
        std::string line;
        for (std::uint32_t k = 0; k < in.count; ++k)
          append_value(line, f.code->tpool[in.list + k], r[f.code->pool[in.list + k]]);
        line += '\n';
        std::lock_guard lock(rt_.out_mu);
        *rt_.out << line;
        break;
      }
      case ir::Op::Br:
        f.pc = in.t0;
        break;
      case ir::Op::CondBr:
        f.pc = r[in.a] ? in.t0 : in.t1;
        break;
      case ir::Op::Ret: {
        std::uint64_t v = in.count ? r[in.a] : 0;
        auto inclusive = executed_ - f.start;
        f.slot->self_instructions.fetch_add(inclusive - f.child, std::memory_order_relaxed);
        auto dst = f.ret_dst;
        regs_.resize(f.reg_base);
        mem_.resize(f.mem_base);
        frames_.pop_back();
        if (frames_.empty())
          return v;
        auto &caller = frames_.back();
        caller.child += inclusive;
        if (dst)
          regs_[caller.reg_base + dst] = v;
        break;
      }
      case ir::Op::Unreachable:
        trap("reached unreachable code");
      }
    }
  }

  Runtime::Impl &rt_;
  std::vector<std::uint64_t> regs_;
  std::vector<std::uint8_t> mem_;
  std::vector<Frame> frames_;
  std::vector<std::uint64_t> scratch_;
  std::uint64_t executed_ = 0;
};

} // namespace

void Runtime::Impl::prepare(FunctionSlot &slot) {
  auto code = std::make_unique<Code>();
  const auto &fn = slot.fn;
  if (fn.is_declaration())
    throw Error("no body for '" + fn.name + "'");
  code->nregs = fn.next_reg;
  for (const auto &p : fn.params)
    code->params.push_back(p.reg);
  std::vector<std::uint32_t> start;
  std::uint32_t n = 0;
  for (const auto &b : fn.blocks) {
    start.push_back(n);
    n += static_cast<std::uint32_t>(b.insts.size());
  }
  std::uint64_t frame = 0;
  for (const auto &b : fn.blocks) {
    for (const auto &in : b.insts) {
      PInst p;
      p.op = in.op;
      p.type = in.type;
      p.vtype = in.vtype;
      p.sc = ir::scalar_of(in.type);
      p.vsc = ir::scalar_of(in.vtype);
      p.dst = in.dst;
      p.imm = in.imm;
      p.imm2 = in.imm2;
      if (!in.args.empty())
        p.a = in.args[0];
      if (in.args.size() > 1)
        p.b = in.args[1];
      auto list = [&](std::size_t from) {
        p.list = static_cast<std::uint32_t>(code->pool.size());
        p.count = static_cast<std::uint32_t>(in.args.size() - from);
        for (std::size_t k = from; k < in.args.size(); ++k)
          code->pool.push_back(in.args[k]);
        code->tpool.resize(code->pool.size());
        for (std::size_t k = 0; k < in.types.size(); ++k)
          code->tpool[p.list + k] = in.types[k];
      };
      switch (in.op) {
      case ir::Op::Const:
        if (in.type == ir::Type::Str)
          p.imm = intern(in.sym);
        break;
      case ir::Op::GlobalAddr:
        p.imm = resolve_global(slot, in.sym);
        break;
      case ir::Op::Alloca: {
        auto align = std::max<std::uint64_t>(in.imm2, 1);
        frame = (frame + align - 1) / align * align;
        p.imm = in.imm;
        p.imm2 = frame;
        frame += in.imm;
        break;
      }
      case ir::Op::Call:
        list(0);
        p.callee = resolve_function(slot, in.sym);
        break;
      case ir::Op::CallIndirect:
        list(1);
        break;
      case ir::Op::JitRequest:
      case ir::Op::Print:
        list(0);
        break;
      case ir::Op::Intrinsic:
        p.imm = in.sym == "argc" ? kArgc : in.sym == "argv" ? kArgv : in.sym == "atoi" ? kAtoi : kAtol;
        break;
      case ir::Op::Br:
        p.t0 = start.at(in.targets[0]);
        break;
      case ir::Op::CondBr:
        p.t0 = start.at(in.targets[0]);
        p.t1 = start.at(in.targets[1]);
        break;
      case ir::Op::Ret:
        p.count = static_cast<std::uint32_t>(in.args.size());
        break;
      default:
        break;
      }
      code->insts.push_back(p);
    }
  }
  if (frame > 0xffffffffu)
    throw Error("frame of '" + fn.name + "' is too large");
  code->frame_size = static_cast<std::uint32_t>(frame);
  slot.code = std::move(code);
}

Code &Runtime::Impl::code_of(FunctionSlot &slot) {
  std::call_once(slot.once, [&] { prepare(slot); });
  return *slot.code;
}

std::uint64_t Runtime::Impl::run(FunctionSlot &fn, std::span<const std::uint64_t> args) {
  Executor ex(*this);
  return ex.call(fn, args);
}

} // namespace mtjit::rt
