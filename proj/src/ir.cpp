#include "matchfuzz/ir.hpp"

#include <algorithm>
#include <array>
#include <unordered_map>

namespace matchfuzz {

Type Type::vector(Type lane, unsigned lanes) {
  return Type(TypeKind::Vector, lane.scalar_kind(), lane.scalar_bits(), lanes, 0);
}

Type Type::array(Type element, unsigned count) {
  return Type(TypeKind::Array, element.scalar_kind(), element.scalar_bits(),
              element.is_vector() ? element.lanes() : 0, count);
}

Type Type::scalar() const {
  switch (scalar_) {
    case TypeKind::Int: return int_type(bits_);
    case TypeKind::Float: return float_type(bits_);
    case TypeKind::Addr: return addr();
    default: return void_type();
  }
}

Type Type::element() const {
  if (is_vector()) return scalar();
  if (is_array()) return lanes_ ? vector(scalar(), lanes_) : scalar();
  return *this;
}

Type Type::with_scalar(Type s) const {
  return is_vector() ? vector(s, lanes_) : s;
}

unsigned Type::bit_width() const {
  switch (kind_) {
    case TypeKind::Void: return 0;
    case TypeKind::Int:
    case TypeKind::Float:
    case TypeKind::Addr: return bits_;
    case TypeKind::Vector: return bits_ * lanes_;
    case TypeKind::Array: return element().bit_width() * count_;
  }
  return 0;
}

namespace {

bool valid_scalar(TypeKind k, unsigned bits) {
  switch (k) {
    case TypeKind::Int: return bits >= 1 && bits <= 128;
    case TypeKind::Float: return bits == 32 || bits == 64;
    case TypeKind::Addr: return bits == 64;
    default: return false;
  }
}

bool valid_lanes(unsigned n) { return n == 2 || n == 4 || n == 8 || n == 16; }

}  // namespace

bool Type::valid() const {
  switch (kind_) {
    case TypeKind::Void: return true;
    case TypeKind::Int:
    case TypeKind::Float:
    case TypeKind::Addr: return valid_scalar(kind_, bits_);
    case TypeKind::Vector: return valid_scalar(scalar_, bits_) && valid_lanes(lanes_);
    case TypeKind::Array:
      return valid_scalar(scalar_, bits_) && (lanes_ == 0 || valid_lanes(lanes_)) &&
             count_ >= 1 && count_ <= 16;
  }
  return false;
}

std::string Type::str() const {
  switch (kind_) {
    case TypeKind::Void: return "void";
    case TypeKind::Int: return "i" + std::to_string(bits_);
    case TypeKind::Float: return bits_ == 32 ? "f32" : "f64";
    case TypeKind::Addr: return "ptr";
    case TypeKind::Vector:
      return "<" + std::to_string(lanes_) + " x " + scalar().str() + ">";
    case TypeKind::Array:
      return "[" + std::to_string(count_) + " x " + element().str() + "]";
  }
  return "?";
}

u128 width_mask(unsigned bits) {
  if (bits >= 128) return ~u128{0};
  return (u128{1} << bits) - 1;
}

namespace {

constexpr std::array<std::string_view, kOpcodeCount> kOpcodeNames = {
#define MATCHFUZZ_NAME(name, text) text,
    MATCHFUZZ_OPCODES(MATCHFUZZ_NAME)
#undef MATCHFUZZ_NAME
};

struct PredicateName {
  CmpPredicate pred;
  std::string_view name;
  bool fcmp;
};

constexpr std::array<PredicateName, 26> kPredicates = {{
    {CmpPredicate::Eq, "eq", false},      {CmpPredicate::Ne, "ne", false},
    {CmpPredicate::Ugt, "ugt", false},    {CmpPredicate::Uge, "uge", false},
    {CmpPredicate::Ult, "ult", false},    {CmpPredicate::Ule, "ule", false},
    {CmpPredicate::Sgt, "sgt", false},    {CmpPredicate::Sge, "sge", false},
    {CmpPredicate::Slt, "slt", false},    {CmpPredicate::Sle, "sle", false},
    {CmpPredicate::False, "false", true}, {CmpPredicate::Oeq, "oeq", true},
    {CmpPredicate::Ogt, "ogt", true},     {CmpPredicate::Oge, "oge", true},
    {CmpPredicate::Olt, "olt", true},     {CmpPredicate::Ole, "ole", true},
    {CmpPredicate::One, "one", true},     {CmpPredicate::Ord, "ord", true},
    {CmpPredicate::Ueq, "ueq", true},     {CmpPredicate::Ugt_f, "ugt", true},
    {CmpPredicate::Uge_f, "uge", true},   {CmpPredicate::Ult_f, "ult", true},
    {CmpPredicate::Ule_f, "ule", true},   {CmpPredicate::Une, "une", true},
    {CmpPredicate::Uno, "uno", true},     {CmpPredicate::True, "true", true},
}};

}  // namespace

std::string_view opcode_name(Opcode op) {
  return kOpcodeNames[static_cast<std::size_t>(op)];
}

std::optional<Opcode> opcode_from_name(std::string_view name) {
  for (std::size_t i = 0; i < kOpcodeNames.size(); ++i)
    if (kOpcodeNames[i] == name) return static_cast<Opcode>(i);
  return std::nullopt;
}

bool is_int_binary(Opcode op) {
  return (op >= Opcode::Add && op <= Opcode::URem) ||
         (op >= Opcode::Shl && op <= Opcode::Xor);
}

bool is_fp_binary(Opcode op) { return op >= Opcode::FAdd && op <= Opcode::FRem; }

bool is_cast(Opcode op) { return op >= Opcode::Trunc && op <= Opcode::BitCast; }

std::string_view predicate_name(CmpPredicate p) {
  for (const auto& e : kPredicates)
    if (e.pred == p) return e.name;
  return "none";
}

std::optional<CmpPredicate> icmp_predicate_from_name(std::string_view name) {
  for (const auto& e : kPredicates)
    if (!e.fcmp && e.name == name) return e.pred;
  return std::nullopt;
}

std::optional<CmpPredicate> fcmp_predicate_from_name(std::string_view name) {
  for (const auto& e : kPredicates)
    if (e.fcmp && e.name == name) return e.pred;
  return std::nullopt;
}

bool is_icmp_predicate(CmpPredicate p) {
  return p >= CmpPredicate::Eq && p <= CmpPredicate::Sle;
}

bool is_fcmp_predicate(CmpPredicate p) {
  return p >= CmpPredicate::False && p <= CmpPredicate::True;
}

std::vector<std::uint32_t> Terminator::successors() const {
  std::vector<std::uint32_t> out = targets;
  for (const auto& c : cases) out.push_back(c.target);
  return out;
}

std::size_t FunctionDef::instruction_count() const {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.phis.size() + b.body.size();
  return n;
}

const FunctionDef* ModuleUnit::find_function(std::string_view name) const {
  for (const auto& f : functions)
    if (f.name == name) return &f;
  return nullptr;
}

const IntrinsicDecl* ModuleUnit::find_decl(std::string_view name) const {
  for (const auto& d : decls)
    if (d.name == name) return &d;
  return nullptr;
}

bool ModuleUnit::has_symbol(std::string_view name) const {
  if (find_function(name) || find_decl(name)) return true;
  return std::any_of(globals.begin(), globals.end(),
                     [&](const GlobalVar& g) { return g.name == name; });
}

std::size_t ModuleUnit::instruction_count() const {
  std::size_t n = 0;
  for (const auto& f : functions) n += f.instruction_count();
  return n;
}

namespace {

template <typename Fn>
void for_each_ref(FunctionDef& f, Fn&& fn) {
  for (auto& b : f.blocks) {
    for (auto& i : b.phis)
      for (auto& op : i.operands) fn(op);
    for (auto& i : b.body)
      for (auto& op : i.operands) fn(op);
    if (b.term.value) fn(*b.term.value);
  }
}

}  // namespace

void canonicalize(ModuleUnit& m) {
  for (auto& f : m.functions) {
    std::unordered_map<std::uint32_t, std::uint32_t> remap;
    std::uint32_t next = 0;
    auto assign = [&](Instruction& i) {
      if (i.id == kNoValue) return;
      remap.emplace(i.id, next);
      i.id = next++;
    };
    for (auto& b : f.blocks) {
      for (auto& i : b.phis) assign(i);
      for (auto& i : b.body) assign(i);
    }
    for_each_ref(f, [&](ValueRef& v) {
      if (!v.is_instr()) return;
      auto it = remap.find(v.index);
      if (it != remap.end()) v.index = it->second;
    });
    f.next_value_id = next;
  }
}

bool structurally_equal(const ModuleUnit& a, const ModuleUnit& b) {
  ModuleUnit ca = a;
  ModuleUnit cb = b;
  canonicalize(ca);
  canonicalize(cb);
  if (ca.globals != cb.globals || ca.decls != cb.decls ||
      ca.functions.size() != cb.functions.size())
    return false;
  for (std::size_t i = 0; i < ca.functions.size(); ++i) {
    const auto& fa = ca.functions[i];
    const auto& fb = cb.functions[i];
    if (fa.name != fb.name || fa.params != fb.params || fa.ret != fb.ret ||
        fa.blocks != fb.blocks)
      return false;
  }
  return true;
}

ValueTable::ValueTable(const ModuleUnit& m, const FunctionDef& f)
    : module_(m), function_(f) {
  auto add = [&](const Instruction& i) {
    if (i.id == kNoValue || !i.has_result()) return;
    if (i.id >= by_id_.size()) {
      by_id_.resize(i.id + 1);
      present_.resize(i.id + 1, false);
    }
    by_id_[i.id] = i.type;
    present_[i.id] = true;
  };
  for (const auto& b : f.blocks) {
    for (const auto& i : b.phis) add(i);
    for (const auto& i : b.body) add(i);
  }
}

bool ValueTable::defined(std::uint32_t id) const {
  return id < present_.size() && present_[id];
}

Type ValueTable::type_of(const ValueRef& v) const {
  switch (v.source) {
    case ValueSource::Const: return v.type;
    case ValueSource::Arg:
      if (v.index >= function_.params.size())
        throw DanglingRef("argument index out of range");
      return function_.params[v.index].type;
    case ValueSource::Global:
      if (v.index >= module_.globals.size())
        throw DanglingRef("global index out of range");
      return Type::addr();
    case ValueSource::Instr:
      if (!defined(v.index)) throw DanglingRef("value id has no definition");
      return by_id_[v.index];
  }
  throw DanglingRef("unknown value source");
}

Type type_of(const ModuleUnit& m, const FunctionDef& f, const ValueRef& v) {
  return ValueTable(m, f).type_of(v);
}

namespace {

std::string with_vector_suffix(Opcode op, Type principal) {
  std::string key(opcode_name(op));
  if (principal.is_vector()) key += "-vector";
  return key;
}

}  // namespace

std::string root_key(const ModuleUnit& m, const Instruction& inst) {
  switch (inst.opcode) {
    case Opcode::ExtractElement:
    case Opcode::InsertElement:
    case Opcode::ShuffleVector:
    case Opcode::ExtractValue:
    case Opcode::InsertValue:
    case Opcode::GetElementPtr:
    case Opcode::Alloca:
      return std::string(opcode_name(inst.opcode));
    case Opcode::Call:
      if (m.find_decl(inst.callee)) return inst.callee;
      return "call";
    case Opcode::Store:
    case Opcode::ICmp:
    case Opcode::FCmp:
      return with_vector_suffix(
          inst.opcode, inst.operands.empty() ? Type{} : inst.operands[0].type);
    default:
      return with_vector_suffix(inst.opcode, inst.type);
  }
}

std::string root_key(const Terminator& term) {
  switch (term.kind) {
    case Terminator::Kind::Ret: return "ret";
    case Terminator::Kind::Br: return "br";
    case Terminator::Kind::CondBr: return "br-cond";
    case Terminator::Kind::Switch: return "switch";
  }
  return "?";
}

}  // namespace matchfuzz
