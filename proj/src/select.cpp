#include "matchfuzz/select.hpp"

#include <cstdio>

#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/verifier.hpp"

namespace matchfuzz {

namespace {

// Probe site numbering.
enum Site : std::uint32_t {
  kParse = 1,
  kParseFail,
  kVerifyOk,
  kVerifyFail,
  kFunctionEnter,
  kResultOk,
  kResultFinding,           // + FindingKind
  kSelectLoop = 24,         // head of the per-instruction loop
  kDispatchInstr = 32,      // + opcode
  kDispatchTerm = 96,       // + terminator kind
  kFaultFired = 128,
  kHangLoop,
};

constexpr std::uint16_t kNoRoot = 0xFFFF;
constexpr std::uint16_t kAnyRoot = 0xFFFE;

std::uint16_t rd16(const std::uint8_t* b) { return static_cast<std::uint16_t>(b[0] | (b[1] << 8)); }
std::uint32_t rd32(const std::uint8_t* b) {
  return std::uint32_t{b[0]} | (std::uint32_t{b[1]} << 8) | (std::uint32_t{b[2]} << 16) |
         (std::uint32_t{b[3]} << 24);
}
std::int64_t rd64(const std::uint8_t* b) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[k]} << (8 * k);
  return static_cast<std::int64_t>(v);
}

// Signed value of a scalar integer constant, when it fits in 64 bits.
std::optional<std::int64_t> signed_constant(const ValueRef& v) {
  if (!v.is_const() || !v.type.is_int()) return std::nullopt;
  if (v.constant.kind == Constant::Kind::Zero) return 0;
  if (v.constant.kind != Constant::Kind::Int) return std::nullopt;
  unsigned w = v.type.scalar_bits();
  u128 bits = v.constant.bits & width_mask(w);
  bool neg = (bits >> (w - 1)) & 1;
  if (neg) bits |= ~width_mask(w);
  // Fits iff bits 63..127 are all equal.
  u128 top = bits >> 63;
  u128 all = (u128{1} << 65) - 1;
  if (top != 0 && top != all) return std::nullopt;
  return static_cast<std::int64_t>(static_cast<std::uint64_t>(bits));
}

}  // namespace

std::string_view finding_kind_name(FindingKind k) {
  switch (k) {
    case FindingKind::MissingPattern: return "MissingPattern";
    case FindingKind::InjectedAbort: return "InjectedAbort";
    case FindingKind::HangSentinel: return "HangSentinel";
    case FindingKind::VerifierReject: return "VerifierReject";
  }
  return "?";
}

std::optional<FindingKind> finding_kind_from_name(std::string_view s) {
  for (auto k : {FindingKind::MissingPattern, FindingKind::InjectedAbort, FindingKind::HangSentinel,
                 FindingKind::VerifierReject})
    if (finding_kind_name(k) == s) return k;
  return std::nullopt;
}

std::string FailureSignature::str() const {
  return std::string(finding_kind_name(kind)) + " " + root + " " + (types.empty() ? "-" : types) +
         " " + std::to_string(byte_index) + " " + target;
}

FailureSignature FailureSignature::parse(std::string_view line) {
  std::vector<std::string> parts;
  std::string cur;
  for (char c : line) {
    if (c == ' ' || c == '\n' || c == '\t') {
      if (!cur.empty()) parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) parts.push_back(std::move(cur));
  if (parts.size() != 5) throw std::invalid_argument("malformed signature line");
  FailureSignature s;
  auto kind = finding_kind_from_name(parts[0]);
  if (!kind) throw std::invalid_argument("unknown finding kind " + parts[0]);
  s.kind = *kind;
  s.root = parts[1];
  s.types = parts[2] == "-" ? "" : parts[2];
  s.byte_index = static_cast<std::uint32_t>(std::stoul(parts[3]));
  s.target = parts[4];
  return s;
}

std::string FailureSignature::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : str()) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::uint16_t probe_id(std::uint32_t site) {
  // splitmix64 finaliser, folded to 16 bits.
  std::uint64_t z = site + 0x9e3779b97f4a7c15ull;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return static_cast<std::uint16_t>(z ^ (z >> 16) ^ (z >> 32) ^ (z >> 48));
}

std::string type_summary(const std::vector<Type>& operands, Type result) {
  std::string s;
  for (std::size_t k = 0; k < operands.size(); ++k) {
    if (k) s += ",";
    s += operands[k].str();
  }
  s += "->" + result.str();
  // Signature lines are space separated.
  for (char& c : s)
    if (c == ' ') c = '_';
  return s;
}

Selector::Selector(const TargetSpec& t, FeatureSet features)
    : target_(t), features_(std::move(features)), table_(compile_patterns(t)) {
  if (features_.size() != target_.features.size())
    throw ConfigError("feature set size does not match target " + t.name);
  const auto& prog = table_.program;
  opcode_root_.assign(kOpcodeCount * 2, kNoRoot);
  for (std::size_t op = 0; op < kOpcodeCount; ++op) {
    std::string name(opcode_name(static_cast<Opcode>(op)));
    opcode_root_[op * 2] = prog.root_id(name);
    opcode_root_[op * 2 + 1] = prog.root_id(name + "-vector");
  }
  const char* terms[] = {"ret", "br", "br-cond", "switch"};
  for (int k = 0; k < 4; ++k) term_root_[k] = prog.root_id(terms[k]);
  for (const auto& f : target_.faults)
    fault_root_.push_back(f.root ? prog.root_id(*f.root) : kAnyRoot);
  for (const auto& p : target_.patterns) {
    if (mop_by_pattern_.size() <= p.id) mop_by_pattern_.resize(p.id + 1u);
    mop_by_pattern_[p.id] = p.emits;
  }
}

std::uint16_t Selector::instruction_root(const ModuleUnit& m, const Instruction& inst) const {
  std::size_t op = static_cast<std::size_t>(inst.opcode);
  switch (inst.opcode) {
    case Opcode::ExtractElement:
    case Opcode::InsertElement:
    case Opcode::ShuffleVector:
    case Opcode::ExtractValue:
    case Opcode::InsertValue:
    case Opcode::GetElementPtr:
    case Opcode::Alloca:
      return opcode_root_[op * 2];
    case Opcode::Call:
      if (m.find_decl(inst.callee)) return table_.program.root_id(inst.callee);
      return opcode_root_[op * 2];
    case Opcode::Store:
    case Opcode::ICmp:
    case Opcode::FCmp:
      return opcode_root_[op * 2 + (!inst.operands.empty() && inst.operands[0].type.is_vector())];
    default:
      return opcode_root_[op * 2 + inst.type.is_vector()];
  }
}

bool Selector::fault_matches(std::size_t k, std::uint16_t root, const Slots& s) const {
  if (fault_root_[k] != kAnyRoot && fault_root_[k] != root) return false;
  const TypeClass& cls = target_.faults[k].type;
  auto hit = [&](Type t) { return !t.is_void() && (cls.matches(t) || cls.matches(t.scalar())); };
  if (hit(s.result)) return true;
  for (std::size_t i = 0; i < s.count; ++i)
    if (hit(s.ops[i]->type)) return true;
  return false;
}

Selector::Outcome Selector::interpret(std::uint16_t root, const Slots& s, CoverageState& cov,
                                      std::vector<TraceEvent>* trace) const {
  const std::uint8_t* b = table_.program.bytes.data();
  const std::uint32_t size = static_cast<std::uint32_t>(table_.program.size());
  const std::uint32_t budget = step_budget();
  std::uint32_t stack[64];
  std::size_t depth = 0;
  std::uint32_t pc = 0;
  std::uint32_t steps = 0;

  auto slot_type = [&](std::uint8_t slot, Type& out) {
    if (slot == kResultSlot) {
      out = s.result;
      return !out.is_void();
    }
    if (slot >= s.count) return false;
    out = s.ops[slot]->type;
    return true;
  };

  for (;;) {
    if (++steps > budget) {
      cov.record_probe_edge(probe_id(kHangLoop));
      return {std::nullopt, FindingKind::HangSentinel, pc};
    }
    if (pc >= size) throw MalformedTable("matcher ran off the table at " + std::to_string(pc));
    const std::uint8_t opb = b[pc];
    const std::size_t sz = entry_size(opb);
    if (sz == 0 || pc + sz > size) throw MalformedTable("bad entry at " + std::to_string(pc));
    const auto op = static_cast<MatcherOp>(opb);
    for (std::uint32_t k = 0; k < sz; ++k) {
      cov.record_table_access(pc + k);
      if (trace) trace->push_back({pc + k, op});
    }
    const std::uint8_t* a = b + pc + 1;
    bool pass = true;
    switch (op) {
      case MatcherOp::Scope:
        if (depth == 64) throw MalformedTable("scope nesting too deep");
        stack[depth++] = pc + rd32(a);
        break;
      case MatcherOp::CheckOpcode:
        pass = rd16(a) == root;
        break;
      case MatcherOp::CheckType: {
        Type t;
        TypeClass cls{static_cast<TypeFamily>(a[1]), a[2], a[3]};
        pass = slot_type(a[0], t) && cls.matches(t);
        break;
      }
      case MatcherOp::CheckFeature:
        pass = a[0] < features_.size() && features_[a[0]];
        break;
      case MatcherOp::CheckIsConst:
        pass = a[0] < s.count && s.ops[a[0]]->is_const() && !s.ops[a[0]]->constant.is_special();
        break;
      case MatcherOp::CheckConstRange: {
        pass = false;
        if (a[0] < s.count) {
          auto v = signed_constant(*s.ops[a[0]]);
          pass = v && *v >= rd64(a + 1) && *v <= rd64(a + 9);
        }
        break;
      }
      case MatcherOp::Emit: {
        for (std::size_t k = 0; k < target_.faults.size(); ++k) {
          if (!fault_matches(k, root, s)) continue;
          cov.record_probe_edge(probe_id(kFaultFired));
          if (target_.faults[k].effect == FaultEffect::Abort)
            return {std::nullopt, FindingKind::InjectedAbort, pc};
          // Hang: the selector restarts forever; only the budget stops it.
          pc = 0;
          depth = 0;
          goto next;
        }
        return {rd16(a), std::nullopt, pc};
      }
      case MatcherOp::Fail:
        pass = false;
        break;
    }
    if (pass) {
      pc += static_cast<std::uint32_t>(sz);
    } else if (depth == 0) {
      return {std::nullopt, FindingKind::MissingPattern, pc};
    } else {
      pc = stack[--depth];
    }
  next:;
  }
}

Selector::Outcome Selector::select_instruction(const ModuleUnit& m, const Instruction& inst,
                                               CoverageState& cov,
                                               std::vector<TraceEvent>* trace) const {
  cov.record_probe_edge(probe_id(kSelectLoop));
  cov.record_probe_edge(probe_id(kDispatchInstr + static_cast<std::uint32_t>(inst.opcode)));
  Slots s;
  s.count = std::min<std::size_t>(inst.operands.size(), 8);
  for (std::size_t k = 0; k < s.count; ++k) s.ops[k] = &inst.operands[k];
  s.result = inst.type;
  return interpret(instruction_root(m, inst), s, cov, trace);
}

Selector::Outcome Selector::select_terminator(const Terminator& term, CoverageState& cov,
                                              std::vector<TraceEvent>* trace) const {
  auto kind = static_cast<std::uint32_t>(term.kind);
  cov.record_probe_edge(probe_id(kSelectLoop));
  cov.record_probe_edge(probe_id(kDispatchTerm + kind));
  Slots s;
  if (term.value) {
    s.ops[0] = &*term.value;
    s.count = 1;
  }
  return interpret(term_root_[kind], s, cov, trace);
}

SelectionResult Selector::select_module(const ModuleUnit& m, CoverageState& cov,
                                        const SelectOptions& opts) const {
  SelectionResult res;
  if (opts.verify) {
    auto violations = verify_module(m);
    if (!violations.empty()) {
      cov.record_probe_edge(probe_id(kVerifyFail));
      cov.record_probe_edge(probe_id(kResultFinding + static_cast<std::uint32_t>(FindingKind::VerifierReject)));
      FailureSignature sig;
      sig.kind = FindingKind::VerifierReject;
      sig.root = std::string(violation_kind_name(violations[0].kind));
      sig.target = target_.name;
      res.finding = sig;
      return res;
    }
    cov.record_probe_edge(probe_id(kVerifyOk));
  }

  auto fail = [&](FindingKind kind, std::string root, std::vector<Type> ops, Type result,
                  std::uint32_t byte) {
    cov.record_probe_edge(probe_id(kResultFinding + static_cast<std::uint32_t>(kind)));
    res.finding = FailureSignature{kind, std::move(root), type_summary(ops, result), byte, target_.name};
  };
  auto record = [&](const FunctionDef& f, std::uint32_t b, std::uint32_t idx, std::string root,
                    const Outcome& o) {
    if (!opts.collect) return;
    InstrSelection sel{f.name, b, idx, std::move(root), o.pattern, {}};
    if (o.pattern) sel.machine_op = mop_by_pattern_[*o.pattern];
    res.selected.push_back(std::move(sel));
  };

  for (const auto& f : m.functions) {
    cov.record_probe_edge(probe_id(kFunctionEnter));
    for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
      const BasicBlock& bb = f.blocks[b];
      std::uint32_t idx = 0;
      auto one = [&](const Instruction& inst) {
        ++res.instructions;
        Outcome o = select_instruction(m, inst, cov, opts.trace);
        if (o.failure) {
          std::vector<Type> ops;
          for (const auto& v : inst.operands) ops.push_back(v.type);
          fail(*o.failure, root_key(m, inst), std::move(ops), inst.type, o.byte_index);
          return false;
        }
        record(f, b, idx++, opts.collect ? root_key(m, inst) : std::string(), o);
        return true;
      };
      for (const auto& inst : bb.phis)
        if (!one(inst)) return res;
      for (const auto& inst : bb.body)
        if (!one(inst)) return res;
      ++res.instructions;
      Outcome o = select_terminator(bb.term, cov, opts.trace);
      if (o.failure) {
        std::vector<Type> ops;
        if (bb.term.value) ops.push_back(bb.term.value->type);
        fail(*o.failure, root_key(bb.term), std::move(ops), Type::void_type(), o.byte_index);
        return res;
      }
      record(f, b, idx, root_key(bb.term), o);
    }
  }
  cov.record_probe_edge(probe_id(kResultOk));
  return res;
}

SelectionResult Selector::select_text(std::string_view text, CoverageState& cov,
                                      const SelectOptions& opts) const {
  ModuleUnit m;
  try {
    m = parse_module(text);
  } catch (const SyntaxError&) {
    cov.record_probe_edge(probe_id(kParseFail));
    SelectionResult r;
    r.parse_error = true;
    return r;
  }
  cov.record_probe_edge(probe_id(kParse));
  return select_module(m, cov, opts);
}

}  // namespace matchfuzz
