#include "matchfuzz/mutate.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "matchfuzz/dominance.hpp"

namespace matchfuzz {

// ---------------------------------------------------------------------------
// Constraints

std::string_view constraint_name(OperandConstraint c) {
  switch (c) {
    case OperandConstraint::AnyIntOrVecInt: return "anyIntOrVecInt";
    case OperandConstraint::AnyFPOrVecFP: return "anyFPOrVecFP";
    case OperandConstraint::AnyFloatPointOrVectorFloatPoint: return "anyFloatPointOrVectorFloatPoint";
    case OperandConstraint::SameAsFirst: return "sameAsFirst";
    case OperandConstraint::AnyVector: return "anyVector";
    case OperandConstraint::AnyInt: return "anyInt";
    case OperandConstraint::MatchScalarOfFirst: return "matchScalarOfFirst";
    case OperandConstraint::MatchLengthOfFirst: return "matchLengthOfFirst";
    case OperandConstraint::VecOfConstI32: return "VecOfConstI32";
    case OperandConstraint::AnyAggregateOrArray: return "anyAggregateOrArray";
    case OperandConstraint::AnyConstInt: return "anyConstInt";
    case OperandConstraint::PointerOfFirst: return "pointerOfFirst";
    case OperandConstraint::AnySized: return "anySized";
    case OperandConstraint::AnyNonBoolIntOrVecInt: return "anyNonBoolIntOrVecInt";
    case OperandConstraint::AnyIntOrVecIntWithLowerPrecision: return "anyIntOrVecIntWithLowerPrecision";
    case OperandConstraint::AnyIntOrVecIntWithHigherPrecision: return "anyIntOrVecIntWithHigherPrecision";
    case OperandConstraint::AnyNonHalfFPOrVecFP: return "anyNonHalfFPOrVecFP";
    case OperandConstraint::AndFPOrVecFPWHigherPrecision: return "andFPOrVecFPWHigherPrecision";
    case OperandConstraint::MatchLengthOfFirstWithInt: return "matchLengthOfFirstWithInt";
    case OperandConstraint::MatchLengthOfFirstWithFP: return "matchLengthOfFirstWithFP";
    case OperandConstraint::MatchLengthOfFirstWithPtr: return "matchLengthOfFirstWithPtr";
    case OperandConstraint::AnyPtrOrVecPtr: return "anyPtrOrVecPtr";
    case OperandConstraint::AnyTypeWithSameBitWidth: return "anyTypeWithSameBitWidth";
    case OperandConstraint::AnyBoolOrVecBool: return "anyBoolOrVecBool";
    case OperandConstraint::SameAsSecond: return "sameAsSecond";
    case OperandConstraint::AnyType: return "anyType";
  }
  return "?";
}

namespace {

bool same_lanes(Type a, Type b) { return a.is_vector() == b.is_vector() && a.lanes() == b.lanes(); }

}  // namespace

bool satisfies(OperandConstraint c, Type t, std::span<const Type> prior) {
  if (t.is_void() || !t.valid()) return false;
  auto first = [&]() -> std::optional<Type> {
    if (prior.empty()) return std::nullopt;
    return prior[0];
  };
  using C = OperandConstraint;
  switch (c) {
    case C::AnyIntOrVecInt: return t.is_int_or_int_vector();
    case C::AnyFPOrVecFP:
    case C::AnyFloatPointOrVectorFloatPoint:
    case C::AnyNonHalfFPOrVecFP: return t.is_fp_or_fp_vector();
    case C::SameAsFirst: return first() && t == *first();
    case C::AnyVector: return t.is_vector();
    case C::AnyInt: return t.is_int();
    case C::MatchScalarOfFirst:
      return first() && (first()->is_vector() || first()->is_array()) && t == first()->element();
    case C::MatchLengthOfFirst:
      if (!first()) return false;
      if (t.is_array()) return !first()->is_vector();
      return !first()->is_vector() || (t.is_vector() && t.lanes() == first()->lanes());
    case C::VecOfConstI32: return t.is_vector() && t.scalar() == Type::int_type(32);
    case C::AnyAggregateOrArray: return t.is_array();
    case C::AnyConstInt: return t.is_int();
    case C::PointerOfFirst: return t.is_addr();
    case C::AnySized: return true;
    case C::AnyNonBoolIntOrVecInt: return t.is_int_or_int_vector() && t.scalar_bits() > 1;
    case C::AnyIntOrVecIntWithLowerPrecision:
      return first() && first()->is_int_or_int_vector() && t.is_int_or_int_vector() &&
             same_lanes(t, *first()) && t.scalar_bits() < first()->scalar_bits();
    case C::AnyIntOrVecIntWithHigherPrecision:
      return first() && first()->is_int_or_int_vector() && t.is_int_or_int_vector() &&
             same_lanes(t, *first()) && t.scalar_bits() > first()->scalar_bits();
    case C::AndFPOrVecFPWHigherPrecision:
      // Destination of fptrunc: strictly narrower than the source.
      return first() && first()->is_fp_or_fp_vector() && t.is_fp_or_fp_vector() &&
             same_lanes(t, *first()) && t.scalar_bits() < first()->scalar_bits();
    case C::MatchLengthOfFirstWithInt:
      return first() && t.is_int_or_int_vector() && same_lanes(t, *first());
    case C::MatchLengthOfFirstWithFP:
      return first() && t.is_fp_or_fp_vector() && same_lanes(t, *first());
    case C::MatchLengthOfFirstWithPtr:
      return first() && t.is_addr_or_addr_vector() && same_lanes(t, *first());
    case C::AnyPtrOrVecPtr: return t.is_addr_or_addr_vector();
    case C::AnyTypeWithSameBitWidth:
      return first() && !t.is_array() && t.bit_width() == first()->bit_width() &&
             t.is_addr_or_addr_vector() == first()->is_addr_or_addr_vector();
    case C::AnyBoolOrVecBool: return t.is_bool_or_bool_vector();
    case C::SameAsSecond: return prior.size() >= 2 && t == prior[1];
    case C::AnyType: return !t.is_array();
  }
  return false;
}

namespace {

using C = OperandConstraint;
using R = SlotRole;

std::vector<OpcodeModel> build_models() {
  std::vector<OpcodeModel> out;
  auto add = [&](Opcode op, std::vector<SlotSpec> slots, int principal) {
    out.push_back({op, std::move(slots), principal});
  };
  add(Opcode::FNeg, {{R::Operand, C::AnyFloatPointOrVectorFloatPoint}}, 0);
  for (Opcode op : {Opcode::Add, Opcode::Sub, Opcode::Mul, Opcode::SDiv, Opcode::UDiv, Opcode::SRem,
                    Opcode::URem, Opcode::Shl, Opcode::LShr, Opcode::AShr, Opcode::And, Opcode::Or,
                    Opcode::Xor})
    add(op, {{R::Operand, C::AnyIntOrVecInt}, {R::Operand, C::SameAsFirst}}, 0);
  for (Opcode op : {Opcode::FAdd, Opcode::FSub, Opcode::FMul, Opcode::FDiv, Opcode::FRem})
    add(op, {{R::Operand, C::AnyFPOrVecFP}, {R::Operand, C::SameAsFirst}}, 0);
  add(Opcode::ExtractElement, {{R::Operand, C::AnyVector}, {R::Operand, C::AnyInt}}, -1);
  add(Opcode::InsertElement,
      {{R::Operand, C::AnyVector}, {R::Operand, C::MatchScalarOfFirst}, {R::Operand, C::AnyInt}}, -1);
  // Both shuffle inputs must have the same type.
  add(Opcode::ShuffleVector, {{R::Operand, C::AnyVector}, {R::Operand, C::SameAsFirst}, {R::Mask, C::VecOfConstI32}},
      -1);
  add(Opcode::ExtractValue, {{R::Operand, C::AnyAggregateOrArray}, {R::AggIndex, C::AnyConstInt}}, -1);
  add(Opcode::InsertValue,
      {{R::Operand, C::AnyAggregateOrArray}, {R::Operand, C::MatchScalarOfFirst}, {R::AggIndex, C::AnyConstInt}},
      -1);
  add(Opcode::GetElementPtr,
      {{R::ElementType, C::AnySized}, {R::Operand, C::PointerOfFirst}, {R::Operand, C::AnyInt}}, -1);
  add(Opcode::Trunc, {{R::Operand, C::AnyNonBoolIntOrVecInt}, {R::Result, C::AnyIntOrVecIntWithLowerPrecision}}, 0);
  for (Opcode op : {Opcode::ZExt, Opcode::SExt})
    add(op, {{R::Operand, C::AnyIntOrVecInt}, {R::Result, C::AnyIntOrVecIntWithHigherPrecision}}, 0);
  add(Opcode::FPTrunc, {{R::Operand, C::AnyNonHalfFPOrVecFP}, {R::Result, C::AndFPOrVecFPWHigherPrecision}}, 0);
  for (Opcode op : {Opcode::FPToUI, Opcode::FPToSI})
    add(op, {{R::Operand, C::AnyFPOrVecFP}, {R::Result, C::MatchLengthOfFirstWithInt}}, 0);
  for (Opcode op : {Opcode::UIToFP, Opcode::SIToFP})
    add(op, {{R::Operand, C::AnyIntOrVecInt}, {R::Result, C::MatchLengthOfFirstWithFP}}, 0);
  add(Opcode::PtrToInt, {{R::Operand, C::AnyPtrOrVecPtr}, {R::Result, C::MatchLengthOfFirstWithInt}}, 0);
  add(Opcode::IntToPtr, {{R::Operand, C::AnyIntOrVecInt}, {R::Result, C::MatchLengthOfFirstWithPtr}}, 0);
  add(Opcode::BitCast, {{R::Operand, C::AnyType}, {R::Result, C::AnyTypeWithSameBitWidth}}, 0);
  add(Opcode::ICmp, {{R::Operand, C::AnyIntOrVecInt}, {R::Operand, C::SameAsFirst}}, 0);
  add(Opcode::FCmp, {{R::Operand, C::AnyFPOrVecFP}, {R::Operand, C::SameAsFirst}}, 0);
  add(Opcode::Select,
      {{R::Operand, C::AnyBoolOrVecBool}, {R::Operand, C::MatchLengthOfFirst}, {R::Operand, C::SameAsSecond}}, 1);
  return out;
}

const std::vector<OpcodeModel>& models() {
  static const std::vector<OpcodeModel> m = build_models();
  return m;
}

}  // namespace

const OpcodeModel* opcode_model(Opcode op) {
  for (const auto& m : models())
    if (m.opcode == op) return &m;
  return nullptr;
}

// ---------------------------------------------------------------------------
// Type universe

TypeUniverse TypeUniverse::for_target(const TargetSpec& t, const FeatureSet& fs) {
  TypeUniverse u;
  auto add = [&](Type ty, double w) {
    if (!ty.valid() || u.contains(ty)) return;
    u.types.push_back(ty);
    u.weights.push_back(w);
  };
  std::vector<Type> scalars;
  for (unsigned w : t.widths) {
    add(Type::int_type(w), 4.0);
    scalars.push_back(Type::int_type(w));
  }
  for (unsigned w : {32u, 64u}) {
    add(Type::float_type(w), 2.0);
    scalars.push_back(Type::float_type(w));
  }
  add(Type::addr(), 1.5);
  scalars.push_back(Type::addr());
  bool vectors = t.vectors_enabled(fs);
  if (vectors) {
    for (unsigned lanes : {2u, 4u, 8u, 16u})
      for (Type s : scalars) {
        Type v = Type::vector(s, lanes);
        unsigned bits = v.bit_width();
        if (bits > 512) continue;
        add(v, bits == 128 ? 1.5 : 0.4);
      }
  }
  for (unsigned w : t.widths)
    if (w >= 8) add(Type::array(Type::int_type(w), 2), 0.4);
  add(Type::array(Type::int_type(8), 4), 0.4);
  add(Type::array(Type::float_type(64), 3), 0.4);
  add(Type::array(Type::addr(), 2), 0.3);
  if (vectors) add(Type::array(Type::vector(Type::int_type(32), 4), 2), 0.3);
  return u;
}

bool TypeUniverse::contains(Type t) const { return std::find(types.begin(), types.end(), t) != types.end(); }

bool TypeUniverse::has_vectors() const {
  return std::any_of(types.begin(), types.end(), [](Type t) { return t.is_vector(); });
}

// ---------------------------------------------------------------------------
// Names

std::string_view strategy_name(Strategy s) {
  switch (s) {
    case Strategy::GenerateFunction: return "generate_function";
    case Strategy::InsertScfg: return "insert_scfg";
    case Strategy::GenerateInstruction: return "generate_instruction";
    case Strategy::GenerateCall: return "generate_call";
    case Strategy::SinkValue: return "sink_value";
    case Strategy::FixupPlaceholders: return "fixup_placeholders";
  }
  return "?";
}

std::string_view status_name(MutationStatus s) {
  switch (s) {
    case MutationStatus::Applied: return "Applied";
    case MutationStatus::LimitExceeded: return "LimitExceeded";
    case MutationStatus::NoFunction: return "NoFunction";
    case MutationStatus::NoCallable: return "NoCallable";
    case MutationStatus::NothingDead: return "NothingDead";
    case MutationStatus::NoCandidateOpcode: return "NoCandidateOpcode";
  }
  return "?";
}

MutatorConfig MutatorConfig::for_target(const TargetSpec& t, const FeatureSet& fs) {
  MutatorConfig c;
  c.universe = TypeUniverse::for_target(t, fs);
  return c;
}

void MutatorConfig::validate() const {
  double total = 0;
  for (double w : weights) {
    if (w < 0) throw ConfigError("strategy weights must be non-negative");
    total += w;
  }
  if (total <= 0) throw ConfigError("at least one strategy weight must be positive");
  if (max_blocks < 1 || max_instrs_per_block < 1 || max_functions < 1 || max_instrs_per_function < 1)
    throw ConfigError("mutator caps must be positive");
  if (max_scfg_blocks < 1) throw ConfigError("sCFG size bound must be positive");
  if (guidance_bias < 0 || guidance_bias > 1) throw ConfigError("guidance bias must be in [0,1]");
  if (universe.types.empty()) throw ConfigError("empty type universe");
}

// ---------------------------------------------------------------------------
// Helpers shared by the strategies

namespace {

std::unordered_set<std::string> local_names(const FunctionDef& f) {
  std::unordered_set<std::string> s;
  for (const auto& p : f.params) s.insert(p.name);
  for (const auto& b : f.blocks) {
    for (const auto& i : b.phis) s.insert(i.name);
    for (const auto& i : b.body)
      if (i.has_result()) s.insert(i.name);
  }
  return s;
}

std::string unique_name(const std::unordered_set<std::string>& taken, const std::string& base) {
  if (!taken.count(base)) return base;
  for (unsigned n = 1;; ++n) {
    std::string s = base + "." + std::to_string(n);
    if (!taken.count(s)) return s;
  }
}

std::string unique_label(const FunctionDef& f, const std::string& base) {
  std::unordered_set<std::string> taken;
  for (const auto& b : f.blocks) taken.insert(b.label);
  if (!taken.count(base)) return base;
  for (unsigned n = 1;; ++n) {
    std::string s = base + std::to_string(n);
    if (!taken.count(s)) return s;
  }
}

std::string unique_symbol(const ModuleUnit& m, const std::string& prefix) {
  for (std::size_t n = 0;; ++n) {
    std::string s = prefix + std::to_string(n);
    if (!m.has_symbol(s)) return s;
  }
}

template <typename T>
const T& pick_weighted(Rng& rng, const std::vector<T>& items, const std::vector<double>& w) {
  std::size_t k = rng.weighted(w);
  return items[k < items.size() ? k : 0];
}

// Random constant of type t. undef and poison each show up 5% of the time
// for scalar draws.
Constant random_constant(Rng& rng, Type t, bool allow_special = true) {
  if (allow_special) {
    double r = rng.unit();
    if (r < 0.05) return Constant::undef();
    if (r < 0.10) return Constant::poison();
  }
  if (t.is_vector() || t.is_array()) {
    if (rng.chance(0.3)) return Constant::zero();
    unsigned n = t.is_vector() ? t.lanes() : t.count();
    std::vector<Constant> elems;
    Type et = t.element();
    for (unsigned k = 0; k < n; ++k) elems.push_back(random_constant(rng, et, rng.chance(0.1)));
    return Constant::aggregate(std::move(elems));
  }
  if (t.is_addr()) return Constant::zero();
  unsigned w = t.scalar_bits();
  u128 mask = width_mask(w);
  if (t.is_float()) {
    static const std::uint64_t f32[] = {0x00000000, 0x3F800000, 0x80000000, 0x7FC00000, 0x7F800000, 0x40490FDB};
    static const std::uint64_t f64[] = {0, 0x3FF0000000000000, 0x8000000000000000, 0x7FF8000000000000,
                                        0x7FF0000000000000, 0x400921FB54442D18};
    if (rng.chance(0.6)) return Constant::fp(w == 32 ? f32[rng.below(6)] : f64[rng.below(6)]);
    return Constant::fp(u128{rng.next()} & mask);
  }
  u128 v;
  switch (rng.below(6)) {
    case 0: v = 0; break;
    case 1: v = 1; break;
    case 2: v = ~u128{0}; break;
    case 3: v = static_cast<u128>(static_cast<__int128>(rng.range(-128, 127))); break;
    case 4: v = u128{1} << rng.below(w); break;
    default: v = (u128{rng.next()} << 64) | rng.next(); break;
  }
  return Constant::integer(v & mask);
}

// Where values live inside one function.
struct DefSite {
  std::uint32_t block;
  std::uint32_t pos;  // phis first, then body; phis are all pos 0
  bool phi;
};

class FunctionView {
 public:
  FunctionView(const FunctionDef& f) : f_(f), dom_(f) {
    defs_.assign(f.next_value_id, DefSite{kNone, 0, false});
    for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
      for (const auto& i : f.blocks[b].phis) defs_[i.id] = {b, 0, true};
      for (std::uint32_t k = 0; k < f.blocks[b].body.size(); ++k) {
        const auto& i = f.blocks[b].body[k];
        if (i.has_result()) defs_[i.id] = {b, k, false};
      }
    }
  }

  const DomTree& dom() const { return dom_; }
  const DefSite* def(std::uint32_t id) const {
    return id < defs_.size() && defs_[id].block != kNone ? &defs_[id] : nullptr;
  }

  // Values usable before body position `pos` of block b.
  std::vector<ValueRef> available(const ModuleUnit& m, std::uint32_t b, std::uint32_t pos) const {
    std::vector<ValueRef> out;
    for (std::uint32_t k = 0; k < m.globals.size(); ++k) out.push_back(ValueRef::global(k));
    for (std::uint32_t k = 0; k < f_.params.size(); ++k) out.push_back(ValueRef::arg(k, f_.params[k].type));
    bool reach = dom_.reachable(b);
    for (std::uint32_t d = 0; d < f_.blocks.size(); ++d) {
      const BasicBlock& bb = f_.blocks[d];
      if (d == b) {
        for (const auto& i : bb.phis) out.push_back(i.result());
        for (std::uint32_t k = 0; k < pos && k < bb.body.size(); ++k)
          if (bb.body[k].has_result()) out.push_back(bb.body[k].result());
      } else if (reach && dom_.reachable(d) && dom_.dominates(d, b)) {
        for (const auto& i : bb.phis) out.push_back(i.result());
        for (const auto& i : bb.body)
          if (i.has_result()) out.push_back(i.result());
      }
    }
    return out;
  }

  std::vector<ValueRef> available_at_end(const ModuleUnit& m, std::uint32_t b) const {
    return available(m, b, static_cast<std::uint32_t>(f_.blocks[b].body.size()));
  }

  // Whether the value defined at `d` may be used by body position `pos` of
  // block b (pos == body size means the terminator).
  bool usable_at(const DefSite& d, std::uint32_t b, std::uint32_t pos) const {
    if (d.block == b) return d.phi || d.pos < pos;
    return dom_.reachable(b) && dom_.reachable(d.block) && dom_.dominates(d.block, b);
  }
  bool usable_at_end(const DefSite& d, std::uint32_t b) const {
    return usable_at(d, b, static_cast<std::uint32_t>(f_.blocks[b].body.size()));
  }

 private:
  const FunctionDef& f_;
  static constexpr std::uint32_t kNone = 0xFFFFFFFFu;
  DomTree dom_;
  std::vector<DefSite> defs_;  // by value id
};

std::vector<ValueRef> of_type(const std::vector<ValueRef>& vals, Type t) {
  std::vector<ValueRef> out;
  for (const auto& v : vals)
    if (v.type == t) out.push_back(v);
  return out;
}

Instruction make_instr(FunctionDef& f, std::unordered_set<std::string>& names, Opcode op, Type type,
                       std::vector<ValueRef> operands) {
  Instruction i;
  i.opcode = op;
  i.type = type;
  i.operands = std::move(operands);
  if (!type.is_void()) {
    i.id = f.fresh_id();
    std::string base(opcode_name(op));
    i.name = unique_name(names, base + std::to_string(i.id));
    names.insert(i.name);
  }
  return i;
}

// Builds operand values at one insertion point. Helper instructions (stack
// slots, loads) go into `prefix`, which is inserted before the new
// instruction.
class OperandSource {
 public:
  OperandSource(ModuleUnit& m, FunctionDef& f, std::vector<ValueRef> avail, std::size_t room,
                std::size_t max_globals, Rng& rng)
      : m_(m), f_(f), avail_(std::move(avail)), room_(room), max_globals_(max_globals), rng_(rng),
        names_(local_names(f)) {}

  std::vector<Instruction>& prefix() { return prefix_; }
  std::unordered_set<std::string>& names() { return names_; }

  ValueRef value(Type t) {
    auto matches = of_type(avail_, t);
    if (!matches.empty() && !rng_.chance(0.2)) return matches[rng_.below(matches.size())];
    return fallback(t);
  }

  // Address operand: existing ptr values, else a fresh slot or global.
  ValueRef address(Type pointee) {
    auto ptrs = of_type(avail_, Type::addr());
    if (!ptrs.empty() && rng_.chance(0.7)) return ptrs[rng_.below(ptrs.size())];
    if (room_ >= 1 && rng_.chance(0.5)) return stack_slot(pointee);
    if (auto g = new_global(pointee)) return *g;
    if (!ptrs.empty()) return ptrs[rng_.below(ptrs.size())];
    return ValueRef::constant_of(Type::addr(), Constant::zero());
  }

  ValueRef constant(Type t) { return ValueRef::constant_of(t, random_constant(rng_, t)); }

 private:
  ValueRef fallback(Type t) {
    double r = rng_.unit();
    if (r < 0.25 && room_ >= 1) {
      // Load from an address already in scope.
      auto ptrs = of_type(avail_, Type::addr());
      if (!ptrs.empty()) return load(t, ptrs[rng_.below(ptrs.size())]);
    }
    if (r < 0.45 && room_ >= 1) {
      if (auto g = new_global(t)) return load(t, *g);
    }
    if (r < 0.6 && room_ >= 2) return load(t, stack_slot(t));
    return constant(t);
  }

  ValueRef stack_slot(Type t) {
    Instruction a = make_instr(f_, names_, Opcode::Alloca, Type::addr(), {});
    a.aux_type = t;
    ValueRef ref = a.result();
    push(std::move(a));
    return ref;
  }

  std::optional<ValueRef> new_global(Type t) {
    if (m_.globals.size() >= max_globals_) return std::nullopt;
    GlobalVar g;
    g.name = unique_symbol(m_, "g");
    g.type = t;
    g.init = random_constant(rng_, t, false);
    m_.globals.push_back(std::move(g));
    ValueRef ref = ValueRef::global(static_cast<std::uint32_t>(m_.globals.size() - 1));
    avail_.push_back(ref);
    return ref;
  }

  ValueRef load(Type t, ValueRef ptr) {
    Instruction l = make_instr(f_, names_, Opcode::Load, t, {ptr});
    ValueRef ref = l.result();
    push(std::move(l));
    return ref;
  }

  void push(Instruction i) {
    if (room_ > 0) --room_;
    avail_.push_back(i.result());
    prefix_.push_back(std::move(i));
  }

  ModuleUnit& m_;
  FunctionDef& f_;
  std::vector<ValueRef> avail_;
  std::size_t room_;
  std::size_t max_globals_;
  Rng& rng_;
  std::unordered_set<std::string> names_;
  std::vector<Instruction> prefix_;
};

std::vector<std::size_t> functions_with_room(const ModuleUnit& m, const MutatorConfig& cfg) {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < m.functions.size(); ++k)
    if (m.functions[k].instruction_count() < cfg.max_instrs_per_function) out.push_back(k);
  return out;
}

std::vector<std::uint32_t> blocks_with_room(const FunctionDef& f, const MutatorConfig& cfg) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b)
    if (f.blocks[b].body.size() + f.blocks[b].phis.size() < cfg.max_instrs_per_block) out.push_back(b);
  return out;
}

std::size_t block_room(const FunctionDef& f, std::uint32_t b, const MutatorConfig& cfg) {
  std::size_t used = f.blocks[b].body.size() + f.blocks[b].phis.size();
  std::size_t fn_used = f.instruction_count();
  std::size_t r1 = used < cfg.max_instrs_per_block ? cfg.max_instrs_per_block - used : 0;
  std::size_t r2 = fn_used < cfg.max_instrs_per_function ? cfg.max_instrs_per_function - fn_used : 0;
  return std::min(r1, r2);
}

std::optional<std::pair<Opcode, bool>> parse_root(std::string_view root) {
  bool vec = false;
  constexpr std::string_view kSuffix = "-vector";
  if (root.size() > kSuffix.size() && root.substr(root.size() - kSuffix.size()) == kSuffix) {
    vec = true;
    root.remove_suffix(kSuffix.size());
  }
  auto op = opcode_from_name(root);
  if (!op) return std::nullopt;
  return std::pair{*op, vec};
}

}  // namespace

// ---------------------------------------------------------------------------
// Mutator

Mutator::Mutator(MutatorConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  for (std::size_t k = 0; k < kOpcodeCount; ++k) {
    auto op = static_cast<Opcode>(k);
    if (op == Opcode::Call) continue;  // calls have their own strategy
    opcodes_.push_back(op);
  }
  set_guidance(cfg_.guidance);
}

void Mutator::set_guidance(std::optional<GuidanceReport> report) {
  cfg_.guidance = std::move(report);
  guided_.clear();
  guided_weights_.clear();
  if (!cfg_.guidance) return;
  bool vectors = cfg_.universe.has_vectors();
  for (const auto& o : cfg_.guidance->opcodes) {
    auto parsed = parse_root(o.root);
    if (!parsed || o.weight == 0) continue;
    auto [op, vec] = *parsed;
    if (vec && !vectors) continue;
    OpcodeChoice c{op, std::nullopt, true};
    // Roots that never carry the suffix say nothing about vector-ness.
    bool suffixable = op != Opcode::ExtractElement && op != Opcode::InsertElement &&
                      op != Opcode::ShuffleVector && op != Opcode::ExtractValue &&
                      op != Opcode::InsertValue && op != Opcode::GetElementPtr && op != Opcode::Alloca &&
                      op != Opcode::Call;
    if (suffixable) c.vector = vec;
    guided_.push_back(c);
    guided_weights_.push_back(o.weight);
  }
}

OpcodeChoice Mutator::draw_opcode(Rng& rng) const {
  if (!guided_.empty() && rng.chance(cfg_.guidance_bias)) return pick_weighted(rng, guided_, guided_weights_);
  return {opcodes_[rng.below(opcodes_.size())], std::nullopt, false};
}

MutationStatus Mutator::generate_function(ModuleUnit& m, Rng& rng) const {
  if (m.functions.size() >= cfg_.max_functions) return MutationStatus::LimitExceeded;
  const auto& U = cfg_.universe;
  FunctionDef f;
  f.name = unique_symbol(m, "f");
  std::size_t nparams = rng.below(7);
  for (std::size_t k = 0; k < nparams; ++k)
    f.params.push_back({pick_weighted(rng, U.types, U.weights), "a" + std::to_string(k)});
  if (!rng.chance(0.25)) {
    std::vector<Type> rets;
    std::vector<double> w;
    for (std::size_t k = 0; k < U.types.size(); ++k)
      if (!U.types[k].is_array()) {
        rets.push_back(U.types[k]);
        w.push_back(U.weights[k]);
      }
    f.ret = pick_weighted(rng, rets, w);
  }
  BasicBlock entry;
  entry.label = "Entry";
  if (f.ret.is_void()) {
    entry.term = Terminator::ret();
  } else {
    // Placeholder memory; a later fixup stores a real value into it.
    std::unordered_set<std::string> names = local_names(f);
    Instruction slot = make_instr(f, names, Opcode::Alloca, Type::addr(), {});
    slot.aux_type = f.ret;
    slot.name = unique_name(names, "m");
    names.insert(slot.name);
    Instruction ld = make_instr(f, names, Opcode::Load, f.ret, {slot.result()});
    ld.name = unique_name(names, "L");
    entry.term = Terminator::ret(ld.result());
    entry.body.push_back(std::move(slot));
    entry.body.push_back(std::move(ld));
  }
  f.blocks.push_back(std::move(entry));
  m.functions.push_back(std::move(f));
  return MutationStatus::Applied;
}

MutationStatus Mutator::insert_scfg(ModuleUnit& m, Rng& rng) const {
  std::vector<std::size_t> fns;
  for (std::size_t k = 0; k < m.functions.size(); ++k)
    if (!m.functions[k].blocks.empty() && m.functions[k].blocks.size() + 2 <= cfg_.max_blocks) fns.push_back(k);
  if (fns.empty()) return m.functions.empty() ? MutationStatus::NoFunction : MutationStatus::LimitExceeded;
  FunctionDef& f = m.functions[fns[rng.below(fns.size())]];

  const auto src = static_cast<std::uint32_t>(rng.below(f.blocks.size()));
  std::size_t room = cfg_.max_blocks - f.blocks.size() - 1;  // minus the sink
  std::size_t n = 1 + rng.below(std::min(room, cfg_.max_scfg_blocks));

  // Values visible at the split point; they dominate every new block.
  const auto split = static_cast<std::uint32_t>(rng.below(f.blocks[src].body.size() + 1));
  std::vector<ValueRef> avail;
  {
    FunctionView view(f);
    avail = view.available(m, src, split);
  }

  // Split: the sink takes the tail and the original terminator.
  const auto first_new = static_cast<std::uint32_t>(f.blocks.size());
  const std::uint32_t sink = first_new + static_cast<std::uint32_t>(n);
  BasicBlock sink_block;
  {
    BasicBlock& s = f.blocks[src];
    std::string base = s.label;
    if (base.size() > 3 && base.compare(base.size() - 3, 3, "Src") == 0) base.resize(base.size() - 3);
    sink_block.label = unique_label(f, base + "Sink");
    sink_block.body.assign(std::make_move_iterator(s.body.begin() + split),
                           std::make_move_iterator(s.body.end()));
    s.body.erase(s.body.begin() + split, s.body.end());
    sink_block.term = std::move(s.term);
    if (s.label.size() < 3 || s.label.compare(s.label.size() - 3, 3, "Src") != 0) {
      std::string l = unique_label(f, s.label + "Src");
      s.label = l;
    }
  }
  // Every edge that used to leave src now leaves the sink.
  for (auto& bb : f.blocks)
    for (auto& phi : bb.phis)
      for (auto& inc : phi.incoming)
        if (inc == src) inc = sink;

  std::vector<BasicBlock> region(n);
  for (std::size_t k = 0; k < n; ++k) {
    region[k].label = unique_label(f, "sCFG_" + std::to_string(k));
    f.blocks.push_back({region[k].label, {}, {}, {}});  // reserve label
  }
  f.blocks.resize(first_new);

  // Random spanning tree rooted at src keeps every new block reachable.
  // Node 0 is src, node k (1..n) is region block k-1.
  std::vector<std::vector<std::uint32_t>> required(n + 1);
  auto block_of = [&](std::size_t node) { return node == 0 ? src : first_new + static_cast<std::uint32_t>(node - 1); };
  for (std::size_t k = 1; k <= n; ++k) required[rng.below(k)].push_back(block_of(k));
  // Leaves exit to the sink (or return); at least one must reach the sink.
  std::vector<std::size_t> leaves;
  for (std::size_t k = 1; k <= n; ++k)
    if (required[k].empty()) leaves.push_back(k);
  std::size_t sink_leaf = leaves[rng.below(leaves.size())];
  std::vector<bool> returns(n + 1, false);
  for (std::size_t k : leaves) {
    if (k != sink_leaf && rng.chance(0.15)) {
      returns[k] = true;
    } else {
      required[k].push_back(sink);
    }
  }

  auto pick_of = [&](Type t) -> ValueRef {
    auto c = of_type(avail, t);
    if (!c.empty() && rng.chance(0.75)) return c[rng.below(c.size())];
    return ValueRef::constant_of(t, random_constant(rng, t, false));
  };
  auto ints_avail = [&]() {
    std::vector<ValueRef> out;
    for (const auto& v : avail)
      if (v.type.is_int() && v.type.scalar_bits() > 1) out.push_back(v);
    return out;
  };

  auto make_term = [&](std::size_t node) -> Terminator {
    if (returns[node]) {
      if (f.ret.is_void()) return Terminator::ret();
      return Terminator::ret(pick_of(f.ret));
    }
    std::vector<std::uint32_t> targets = required[node];
    // Optional extra edges: loops back into the region, self-loops, or an
    // early exit to the sink.
    std::size_t extra = rng.below(3);
    for (std::size_t e = 0; e < extra; ++e) {
      std::size_t r = rng.below(n + 1);
      targets.push_back(r == n ? sink : first_new + static_cast<std::uint32_t>(r));
    }
    if (targets.size() == 1) return Terminator::br(targets[0]);
    if (targets.size() == 2 && rng.chance(0.6)) return Terminator::cond_br(pick_of(Type::i1()), targets[0], targets[1]);
    // Switch over an integer in scope; case values mix consecutive runs and
    // random picks.
    auto ints = ints_avail();
    ValueRef scrut = !ints.empty() && rng.chance(0.8) ? ints[rng.below(ints.size())]
                                                       : ValueRef::const_int(Type::int_type(32), rng.below(64));
    unsigned w = scrut.type.scalar_bits();
    Terminator t;
    t.kind = Terminator::Kind::Switch;
    t.value = scrut;
    t.targets = {targets[0]};
    std::set<u128> used;
    u128 mask = width_mask(w);
    u128 next = static_cast<u128>(rng.below(4));
    for (std::size_t k = 1; k < targets.size(); ++k) {
      u128 v;
      for (int tries = 0;; ++tries) {
        v = (rng.chance(0.6) ? next++ : ((u128{rng.next()} << 64) | rng.next())) & mask;
        if (!used.count(v)) break;
        if (tries > 64) {
          v = ~u128{0};
          break;
        }
      }
      if (used.count(v)) continue;  // width too small for more cases
      used.insert(v);
      t.cases.push_back({v, targets[k]});
    }
    // A narrow scrutinee can run out of case values; keep required targets.
    for (std::uint32_t req : required[node]) {
      bool present = t.targets[0] == req;
      for (const auto& c : t.cases) present |= c.target == req;
      if (!present) t.targets[0] = req;
    }
    return t;
  };

  f.blocks[src].term = make_term(0);
  for (std::size_t k = 1; k <= n; ++k) {
    region[k - 1].term = make_term(k);
    f.blocks.push_back(std::move(region[k - 1]));
  }
  f.blocks.push_back(std::move(sink_block));
  return MutationStatus::Applied;
}

MutationStatus Mutator::build_instruction(ModuleUnit& m, std::size_t fn, std::uint32_t b, std::uint32_t pos,
                                          const OpcodeChoice& choice, Rng& rng) const {
  FunctionDef& f = m.functions[fn];
  std::size_t room = block_room(f, b, cfg_);
  if (room == 0) return MutationStatus::LimitExceeded;
  const auto& U = cfg_.universe;

  if (choice.opcode == Opcode::Phi) {
    FunctionView view(f);
    const auto& preds = view.dom().preds()[b];
    if (b == 0 || preds.empty() || !view.dom().reachable(b)) return MutationStatus::NoCandidateOpcode;
    std::vector<Type> types;
    std::vector<double> w;
    for (std::size_t k = 0; k < U.types.size(); ++k)
      if (!choice.vector || U.types[k].is_vector() == *choice.vector) {
        types.push_back(U.types[k]);
        w.push_back(U.weights[k]);
      }
    if (types.empty()) return MutationStatus::NoCandidateOpcode;
    Type t = pick_weighted(rng, types, w);
    std::vector<ValueRef> ops;
    for (std::uint32_t p : preds) {
      auto c = of_type(view.available_at_end(m, p), t);
      ops.push_back(!c.empty() && rng.chance(0.8) ? c[rng.below(c.size())]
                                                  : ValueRef::constant_of(t, random_constant(rng, t)));
    }
    auto names = local_names(f);
    Instruction phi = make_instr(f, names, Opcode::Phi, t, std::move(ops));
    phi.incoming = preds;
    f.blocks[b].phis.push_back(std::move(phi));
    return MutationStatus::Applied;
  }

  std::vector<ValueRef> avail;
  {
    FunctionView view(f);
    avail = view.available(m, b, pos);
  }
  OperandSource src(m, f, std::move(avail), room - 1, cfg_.max_globals, rng);
  Instruction inst;

  auto type_pick = [&](auto pred) -> std::optional<Type> {
    std::vector<Type> c;
    std::vector<double> w;
    for (std::size_t k = 0; k < U.types.size(); ++k)
      if (pred(U.types[k])) {
        c.push_back(U.types[k]);
        w.push_back(U.weights[k]);
      }
    if (c.empty()) return std::nullopt;
    return pick_weighted(rng, c, w);
  };

  switch (choice.opcode) {
    case Opcode::Alloca: {
      auto t = type_pick([](Type) { return true; });
      inst = make_instr(f, src.names(), Opcode::Alloca, Type::addr(), {});
      inst.aux_type = *t;
      break;
    }
    case Opcode::Load: {
      auto t = type_pick([&](Type x) { return !choice.vector || x.is_vector() == *choice.vector; });
      if (!t) return MutationStatus::NoCandidateOpcode;
      ValueRef p = src.address(*t);
      inst = make_instr(f, src.names(), Opcode::Load, *t, {p});
      break;
    }
    case Opcode::Store: {
      auto t = type_pick([&](Type x) { return !choice.vector || x.is_vector() == *choice.vector; });
      if (!t) return MutationStatus::NoCandidateOpcode;
      ValueRef v = src.value(*t);
      ValueRef p = src.address(*t);
      inst = make_instr(f, src.names(), Opcode::Store, Type::void_type(), {v, p});
      break;
    }
    default: {
      const OpcodeModel* model = opcode_model(choice.opcode);
      if (!model) return MutationStatus::NoCandidateOpcode;
      // Choose slot types first, retrying when a later slot has no candidate.
      std::vector<Type> types;
      bool ok = false;
      for (int attempt = 0; attempt < 8 && !ok; ++attempt) {
        types.clear();
        ok = true;
        for (std::size_t s = 0; s < model->slots.size() && ok; ++s) {
          const SlotSpec& spec = model->slots[s];
          if (spec.role == SlotRole::AggIndex || spec.role == SlotRole::Mask) {
            types.push_back(Type::int_type(32));
            continue;
          }
          std::optional<Type> t;
          switch (spec.constraint) {
            case C::SameAsFirst: t = types[0]; break;
            case C::SameAsSecond: t = types[1]; break;
            case C::MatchScalarOfFirst: t = types[0].element(); break;
            case C::PointerOfFirst: t = Type::addr(); break;
            default: {
              bool is_principal = static_cast<int>(s) == model->principal;
              t = type_pick([&](Type x) {
                if (!satisfies(spec.constraint, x, types)) return false;
                if (is_principal && choice.vector && x.is_vector() != *choice.vector) return false;
                return true;
              });
            }
          }
          if (!t || !satisfies(spec.constraint, *t, types)) {
            ok = false;
            break;
          }
          if (static_cast<int>(s) == model->principal && choice.vector && t->is_vector() != *choice.vector) {
            ok = false;
            break;
          }
          types.push_back(*t);
        }
      }
      if (!ok) return MutationStatus::NoCandidateOpcode;

      std::vector<ValueRef> ops;
      Type result;
      Type aux;
      std::int32_t agg = -1;
      std::vector<std::int32_t> mask;
      for (std::size_t s = 0; s < model->slots.size(); ++s) {
        const SlotSpec& spec = model->slots[s];
        switch (spec.role) {
          case SlotRole::Operand: {
            Type t = types[s];
            // Index operands lean towards in-range constants.
            bool index = (choice.opcode == Opcode::ExtractElement && s == 1) ||
                         (choice.opcode == Opcode::InsertElement && s == 2);
            if (index && rng.chance(0.7))
              ops.push_back(ValueRef::const_int(t, rng.below(types[0].lanes())));
            else
              ops.push_back(src.value(t));
            break;
          }
          case SlotRole::Result: result = types[s]; break;
          case SlotRole::ElementType: aux = types[s]; break;
          case SlotRole::AggIndex: agg = static_cast<std::int32_t>(rng.below(types[0].count())); break;
          case SlotRole::Mask: {
            static const unsigned lens[] = {2, 4, 8, 16};
            unsigned n = rng.chance(0.5) ? types[0].lanes() : lens[rng.below(4)];
            auto lanes = static_cast<std::int32_t>(types[0].lanes());
            for (unsigned k = 0; k < n; ++k)
              mask.push_back(rng.chance(0.1) ? -1 : static_cast<std::int32_t>(rng.below(2 * lanes)));
            break;
          }
        }
      }
      Opcode op = choice.opcode;
      if (is_int_binary(op) || is_fp_binary(op) || op == Opcode::FNeg || op == Opcode::InsertElement ||
          op == Opcode::InsertValue)
        result = types[0];
      else if (op == Opcode::ExtractElement || op == Opcode::ExtractValue)
        result = types[0].element();
      else if (op == Opcode::ShuffleVector)
        result = Type::vector(types[0].element(), static_cast<unsigned>(mask.size()));
      else if (op == Opcode::GetElementPtr)
        result = Type::addr();
      else if (op == Opcode::ICmp || op == Opcode::FCmp)
        result = types[0].with_scalar(Type::i1());
      else if (op == Opcode::Select)
        result = types[1];
      if (!result.valid() || result.is_void()) return MutationStatus::NoCandidateOpcode;
      inst = make_instr(f, src.names(), op, result, std::move(ops));
      inst.aux_type = aux;
      inst.mask = std::move(mask);
      if (agg >= 0) inst.agg_index = static_cast<std::uint32_t>(agg);
      if (op == Opcode::ICmp)
        inst.predicate = static_cast<CmpPredicate>(static_cast<int>(CmpPredicate::Eq) + rng.below(10));
      if (op == Opcode::FCmp)
        inst.predicate = static_cast<CmpPredicate>(static_cast<int>(CmpPredicate::False) + rng.below(16));
    }
  }
  auto& body = f.blocks[b].body;
  auto& pre = src.prefix();
  pre.push_back(std::move(inst));
  body.insert(body.begin() + pos, std::make_move_iterator(pre.begin()), std::make_move_iterator(pre.end()));
  return MutationStatus::Applied;
}

MutationStatus Mutator::generate_instruction(ModuleUnit& m, Rng& rng) const {
  if (m.functions.empty()) return MutationStatus::NoFunction;
  auto fns = functions_with_room(m, cfg_);
  if (fns.empty()) return MutationStatus::LimitExceeded;
  OpcodeChoice choice = draw_opcode(rng);
  std::size_t fn = fns[rng.below(fns.size())];
  auto blocks = blocks_with_room(m.functions[fn], cfg_);
  if (blocks.empty()) return MutationStatus::LimitExceeded;
  std::uint32_t b = blocks[rng.below(blocks.size())];
  if (choice.opcode == Opcode::Phi) {
    // Phis need a block with predecessors.
    DomTree dom(m.functions[fn]);
    std::vector<std::uint32_t> ok;
    for (std::uint32_t x : blocks)
      if (x != 0 && dom.reachable(x) && !dom.preds()[x].empty()) ok.push_back(x);
    if (ok.empty()) choice = {opcodes_[rng.below(opcodes_.size())], std::nullopt, false};
    else b = ok[rng.below(ok.size())];
  }
  if (choice.opcode == Opcode::Phi) return build_instruction(m, fn, b, 0, choice, rng);
  auto pos = static_cast<std::uint32_t>(rng.below(m.functions[fn].blocks[b].body.size() + 1));
  MutationStatus s = build_instruction(m, fn, b, pos, choice, rng);
  if (s == MutationStatus::NoCandidateOpcode && choice.from_guidance) {
    OpcodeChoice plain{opcodes_[rng.below(opcodes_.size())], std::nullopt, false};
    if (plain.opcode != Opcode::Phi) s = build_instruction(m, fn, b, pos, plain, rng);
  }
  return s;
}

MutationStatus Mutator::generate_call(ModuleUnit& m, Rng& rng) const {
  struct Callee {
    std::string name;
    std::vector<Type> params;
    Type ret;
    const IntrinsicDecl* to_declare;
  };
  std::vector<Callee> known, guided;
  for (const auto& f : m.functions) {
    Callee c{f.name, {}, f.ret, nullptr};
    for (const auto& p : f.params) c.params.push_back(p.type);
    known.push_back(std::move(c));
  }
  for (const auto& d : m.decls) known.push_back({d.name, d.params, d.ret, nullptr});
  if (cfg_.guidance)
    for (const auto& d : cfg_.guidance->intrinsics)
      if (!m.find_decl(d.name) && !m.has_symbol(d.name)) guided.push_back({d.name, d.params, d.ret, &d});
  if (known.empty() && guided.empty()) return MutationStatus::NoCallable;
  if (m.functions.empty()) return MutationStatus::NoFunction;
  auto fns = functions_with_room(m, cfg_);
  if (fns.empty()) return MutationStatus::LimitExceeded;
  std::size_t fn = fns[rng.below(fns.size())];
  auto blocks = blocks_with_room(m.functions[fn], cfg_);
  if (blocks.empty()) return MutationStatus::LimitExceeded;
  std::uint32_t b = blocks[rng.below(blocks.size())];

  // Guidance intrinsics take the guidance share of draws; declared
  // intrinsics still waiting for coverage are favoured among the rest.
  const Callee* callee = nullptr;
  if (!guided.empty() && (known.empty() || rng.chance(cfg_.guidance_bias)))
    callee = &guided[rng.below(guided.size())];
  else
    callee = &known[rng.below(known.size())];

  FunctionDef& f = m.functions[fn];
  std::size_t room = block_room(f, b, cfg_);
  auto pos = static_cast<std::uint32_t>(rng.below(f.blocks[b].body.size() + 1));
  std::vector<ValueRef> avail;
  {
    FunctionView view(f);
    avail = view.available(m, b, pos);
  }
  if (callee->to_declare) m.decls.push_back(*callee->to_declare);
  // Copy what we need before `m` is touched by OperandSource.
  std::string name = callee->name;
  std::vector<Type> params = callee->params;
  Type ret = callee->ret;
  OperandSource src(m, m.functions[fn], std::move(avail), room - 1, cfg_.max_globals, rng);
  std::vector<ValueRef> args;
  for (Type t : params) args.push_back(src.value(t));
  Instruction call = make_instr(m.functions[fn], src.names(), Opcode::Call, ret, std::move(args));
  call.callee = name;
  auto& pre = src.prefix();
  pre.push_back(std::move(call));
  auto& body = m.functions[fn].blocks[b].body;
  body.insert(body.begin() + pos, std::make_move_iterator(pre.begin()), std::make_move_iterator(pre.end()));
  return MutationStatus::Applied;
}

namespace {

struct UseSite {
  std::uint32_t block;
  enum Kind { Phi, Body, Term } kind;
  std::uint32_t index;    // phi or body index
  std::uint32_t operand;  // operand index (phi: incoming slot)
};

template <typename Fn>
void for_each_use(FunctionDef& f, Fn&& fn) {
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b) {
    auto& bb = f.blocks[b];
    for (std::uint32_t k = 0; k < bb.phis.size(); ++k)
      for (std::uint32_t o = 0; o < bb.phis[k].operands.size(); ++o)
        fn(UseSite{b, UseSite::Phi, k, o}, bb.phis[k].operands[o]);
    for (std::uint32_t k = 0; k < bb.body.size(); ++k)
      for (std::uint32_t o = 0; o < bb.body[k].operands.size(); ++o)
        fn(UseSite{b, UseSite::Body, k, o}, bb.body[k].operands[o]);
    if (bb.term.value) fn(UseSite{b, UseSite::Term, 0, 0}, *bb.term.value);
  }
}

}  // namespace

MutationStatus Mutator::sink_value(ModuleUnit& m, Rng& rng) const {
  struct Dead {
    std::size_t fn;
    std::uint32_t id;
    Type type;
  };
  std::vector<Dead> dead;
  for (std::size_t fi = 0; fi < m.functions.size(); ++fi) {
    FunctionDef& f = m.functions[fi];
    std::unordered_set<std::uint32_t> used;
    for_each_use(f, [&](const UseSite&, const ValueRef& v) {
      if (v.is_instr()) used.insert(v.index);
    });
    for (const auto& bb : f.blocks) {
      for (const auto& i : bb.phis)
        if (!used.count(i.id)) dead.push_back({fi, i.id, i.type});
      for (const auto& i : bb.body)
        if (i.has_result() && !used.count(i.id)) dead.push_back({fi, i.id, i.type});
    }
  }
  if (dead.empty()) return MutationStatus::NothingDead;
  const Dead d = dead[rng.below(dead.size())];
  FunctionDef& f = m.functions[d.fn];
  FunctionView view(f);
  const DefSite site = *view.def(d.id);
  const ValueRef val = ValueRef::instr(d.id, d.type);

  // Option 1: replace a compatible operand of a later, dominated use.
  std::vector<UseSite> sites;
  for_each_use(f, [&](const UseSite& u, const ValueRef& v) {
    if (v.type != d.type || v.same_value(val)) return;
    switch (u.kind) {
      case UseSite::Phi: {
        if (u.block == site.block && site.phi && f.blocks[u.block].phis[u.index].id == d.id) return;
        std::uint32_t pred = f.blocks[u.block].phis[u.index].incoming[u.operand];
        if (view.usable_at_end(site, pred)) sites.push_back(u);
        break;
      }
      case UseSite::Body:
        if (view.usable_at(site, u.block, u.index)) sites.push_back(u);
        break;
      case UseSite::Term:
        if (view.usable_at_end(site, u.block)) sites.push_back(u);
        break;
    }
  });
  std::size_t room = block_room(f, site.block, cfg_);
  bool can_store = room >= 1;
  if (!sites.empty() && (!can_store || rng.chance(0.5))) {
    const UseSite u = sites[rng.below(sites.size())];
    auto& bb = f.blocks[u.block];
    switch (u.kind) {
      case UseSite::Phi: bb.phis[u.index].operands[u.operand] = val; break;
      case UseSite::Body: bb.body[u.index].operands[u.operand] = val; break;
      case UseSite::Term: *bb.term.value = val; break;
    }
    return MutationStatus::Applied;
  }
  if (!can_store) return MutationStatus::LimitExceeded;

  // Option 2: store it to a global or a fresh stack slot right after the
  // definition.
  std::uint32_t at = site.phi ? 0 : site.pos + 1;
  auto names = local_names(f);
  std::vector<Instruction> seq;
  ValueRef ptr;
  if (rng.chance(0.5) && (m.globals.size() < cfg_.max_globals || !m.globals.empty())) {
    if (m.globals.size() < cfg_.max_globals) {
      GlobalVar g;
      g.name = unique_symbol(m, "g");
      g.type = d.type;
      g.init = random_constant(rng, d.type, false);
      m.globals.push_back(std::move(g));
      ptr = ValueRef::global(static_cast<std::uint32_t>(m.globals.size() - 1));
    } else {
      ptr = ValueRef::global(static_cast<std::uint32_t>(rng.below(m.globals.size())));
    }
  } else if (room >= 2) {
    Instruction slot = make_instr(f, names, Opcode::Alloca, Type::addr(), {});
    slot.aux_type = d.type;
    ptr = slot.result();
    seq.push_back(std::move(slot));
  } else if (!m.globals.empty()) {
    ptr = ValueRef::global(static_cast<std::uint32_t>(rng.below(m.globals.size())));
  } else {
    return MutationStatus::LimitExceeded;
  }
  seq.push_back(make_instr(f, names, Opcode::Store, Type::void_type(), {val, ptr}));
  auto& body = f.blocks[site.block].body;
  body.insert(body.begin() + at, std::make_move_iterator(seq.begin()), std::make_move_iterator(seq.end()));
  return MutationStatus::Applied;
}

namespace {

struct PlaceholderLoad {
  std::uint32_t block;
  std::uint32_t pos;
};

// Loads in `f` whose address is a stack slot with no dominating earlier
// store to it.
std::vector<PlaceholderLoad> placeholder_loads(const FunctionDef& f, const DomTree& dom) {
  std::unordered_set<std::uint32_t> slots;
  for (const auto& bb : f.blocks)
    for (const auto& i : bb.body)
      if (i.opcode == Opcode::Alloca) slots.insert(i.id);
  struct StoreSite {
    std::uint32_t block, pos;
  };
  std::unordered_map<std::uint32_t, std::vector<StoreSite>> stores;
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b)
    for (std::uint32_t k = 0; k < f.blocks[b].body.size(); ++k) {
      const auto& i = f.blocks[b].body[k];
      if (i.opcode == Opcode::Store && i.operands.size() == 2 && i.operands[1].is_instr() &&
          slots.count(i.operands[1].index))
        stores[i.operands[1].index].push_back({b, k});
    }
  std::vector<PlaceholderLoad> out;
  for (std::uint32_t b = 0; b < f.blocks.size(); ++b)
    for (std::uint32_t k = 0; k < f.blocks[b].body.size(); ++k) {
      const auto& i = f.blocks[b].body[k];
      if (i.opcode != Opcode::Load || i.operands.empty() || !i.operands[0].is_instr() ||
          !slots.count(i.operands[0].index))
        continue;
      bool stored = false;
      auto it = stores.find(i.operands[0].index);
      if (it != stores.end())
        for (const auto& s : it->second) {
          if (s.block == b ? s.pos < k
                           : dom.reachable(b) && dom.reachable(s.block) && dom.dominates(s.block, b)) {
            stored = true;
            break;
          }
        }
      if (!stored) out.push_back({b, k});
    }
  return out;
}

}  // namespace

std::size_t count_placeholder_loads(const ModuleUnit& m) {
  std::size_t n = 0;
  for (const auto& f : m.functions) n += placeholder_loads(f, DomTree(f)).size();
  return n;
}

MutationStatus Mutator::fixup_placeholders(ModuleUnit& m, Rng& rng) const {
  for (auto& f : m.functions) {
    // Fix one load at a time; positions shift after each insertion.
    for (;;) {
      FunctionView view(f);
      auto loads = placeholder_loads(f, view.dom());
      if (loads.empty()) break;
      const PlaceholderLoad pl = loads.back();
      const Instruction& ld = f.blocks[pl.block].body[pl.pos];
      Type t = ld.type;
      ValueRef slot = ld.operands[0];
      auto cands = of_type(view.available(m, pl.block, pl.pos), t);
      // Prefer computed values over parameters and globals.
      std::vector<ValueRef> computed;
      for (const auto& v : cands)
        if (v.is_instr()) computed.push_back(v);
      ValueRef v = !computed.empty() ? computed[rng.below(computed.size())]
                   : !cands.empty()  ? cands[rng.below(cands.size())]
                                     : ValueRef::constant_of(t, random_constant(rng, t, false));
      auto names = local_names(f);
      Instruction st = make_instr(f, names, Opcode::Store, Type::void_type(), {v, slot});
      auto& body = f.blocks[pl.block].body;
      body.insert(body.begin() + pl.pos, std::move(st));
    }
  }
  return MutationStatus::Applied;
}

MutationStatus Mutator::apply(Strategy s, ModuleUnit& m, Rng& rng) const {
  switch (s) {
    case Strategy::GenerateFunction: return generate_function(m, rng);
    case Strategy::InsertScfg: return insert_scfg(m, rng);
    case Strategy::GenerateInstruction: return generate_instruction(m, rng);
    case Strategy::GenerateCall: return generate_call(m, rng);
    case Strategy::SinkValue: return sink_value(m, rng);
    case Strategy::FixupPlaceholders: return fixup_placeholders(m, rng);
  }
  return MutationStatus::NoCandidateOpcode;
}

StepResult Mutator::mutate_step(ModuleUnit& m, Rng& rng) const {
  StepResult r{Strategy::GenerateFunction, MutationStatus::NoFunction};
  for (int attempt = 0; attempt < 4; ++attempt) {
    std::size_t k = rng.weighted(cfg_.weights);
    r.strategy = static_cast<Strategy>(k < kStrategyCount ? k : 0);
    r.status = apply(r.strategy, m, rng);
    if (r.status == MutationStatus::Applied) break;
  }
  return r;
}

}  // namespace matchfuzz
