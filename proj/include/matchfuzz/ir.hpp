#pragma once

// Miniature typed SSA IR: types, values, instructions, blocks, functions and
// modules. All of it is plain value data.

#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace matchfuzz {

using u128 = unsigned __int128;

enum class TypeKind : std::uint8_t { Void, Int, Float, Addr, Vector, Array };

// Integers carry 1..128 bits, floats 32 or 64, vectors 2/4/8/16 scalar lanes,
// arrays 1..16 elements of any non-void, non-array type. The representation
// is flat: an array element is described by (scalar kind, bits, lanes).
class Type {
 public:
  constexpr Type() = default;

  static constexpr Type void_type() { return Type{}; }
  static constexpr Type int_type(unsigned bits) {
    return Type(TypeKind::Int, TypeKind::Int, bits, 0, 0);
  }
  static constexpr Type float_type(unsigned bits) {
    return Type(TypeKind::Float, TypeKind::Float, bits, 0, 0);
  }
  static constexpr Type addr() {
    return Type(TypeKind::Addr, TypeKind::Addr, 64, 0, 0);
  }
  static constexpr Type i1() { return int_type(1); }
  static Type vector(Type lane, unsigned lanes);
  static Type array(Type element, unsigned count);

  constexpr TypeKind kind() const { return kind_; }
  constexpr bool is_void() const { return kind_ == TypeKind::Void; }
  constexpr bool is_int() const { return kind_ == TypeKind::Int; }
  constexpr bool is_float() const { return kind_ == TypeKind::Float; }
  constexpr bool is_addr() const { return kind_ == TypeKind::Addr; }
  constexpr bool is_vector() const { return kind_ == TypeKind::Vector; }
  constexpr bool is_array() const { return kind_ == TypeKind::Array; }
  constexpr bool is_scalar() const { return is_int() || is_float() || is_addr(); }

  // Scalar kind of this type, or of the lanes of a vector. Arrays report the
  // kind of their element's scalar.
  constexpr TypeKind scalar_kind() const { return scalar_; }
  constexpr unsigned scalar_bits() const { return bits_; }
  constexpr bool is_int_or_int_vector() const {
    return (is_int() || is_vector()) && scalar_ == TypeKind::Int;
  }
  constexpr bool is_fp_or_fp_vector() const {
    return (is_float() || is_vector()) && scalar_ == TypeKind::Float;
  }
  constexpr bool is_addr_or_addr_vector() const {
    return (is_addr() || is_vector()) && scalar_ == TypeKind::Addr;
  }
  constexpr bool is_bool_or_bool_vector() const {
    return is_int_or_int_vector() && bits_ == 1;
  }

  // Vector lane count; 0 for non-vectors.
  constexpr unsigned lanes() const { return is_vector() ? lanes_ : 0; }
  // Array element count; 0 for non-arrays.
  constexpr unsigned count() const { return is_array() ? count_ : 0; }

  // Lane type of a vector, element type of an array, self for scalars.
  Type element() const;
  // Scalar (lane) type.
  Type scalar() const;
  // Same shape as this (scalar or vector with equal lanes) with a new scalar.
  Type with_scalar(Type scalar) const;

  unsigned bit_width() const;
  bool valid() const;

  std::string str() const;

  friend constexpr bool operator==(const Type&, const Type&) = default;

  std::size_t hash() const {
    return (static_cast<std::size_t>(kind_) << 40) ^
           (static_cast<std::size_t>(scalar_) << 32) ^ (std::size_t{bits_} << 16) ^
           (std::size_t{lanes_} << 8) ^ count_;
  }

 private:
  constexpr Type(TypeKind kind, TypeKind scalar, unsigned bits, unsigned lanes,
                 unsigned count)
      : kind_(kind),
        scalar_(scalar),
        lanes_(static_cast<std::uint8_t>(lanes)),
        count_(static_cast<std::uint8_t>(count)),
        bits_(static_cast<std::uint16_t>(bits)) {}

  TypeKind kind_ = TypeKind::Void;
  TypeKind scalar_ = TypeKind::Void;
  std::uint8_t lanes_ = 0;
  std::uint8_t count_ = 0;
  std::uint16_t bits_ = 0;
};

struct TypeHash {
  std::size_t operator()(const Type& t) const { return t.hash(); }
};

// Constant payload. Int and Float hold raw bits masked to the type width.
struct Constant {
  enum class Kind : std::uint8_t { Int, Float, Undef, Poison, Zero, Aggregate };
  Kind kind = Kind::Zero;
  u128 bits = 0;
  std::vector<Constant> elements;

  static Constant integer(u128 bits) { return {Kind::Int, bits, {}}; }
  static Constant fp(u128 bits) { return {Kind::Float, bits, {}}; }
  static Constant undef() { return {Kind::Undef, 0, {}}; }
  static Constant poison() { return {Kind::Poison, 0, {}}; }
  static Constant zero() { return {Kind::Zero, 0, {}}; }
  static Constant aggregate(std::vector<Constant> elems) {
    return {Kind::Aggregate, 0, std::move(elems)};
  }

  bool is_special() const { return kind == Kind::Undef || kind == Kind::Poison; }

  friend bool operator==(const Constant&, const Constant&) = default;
};

u128 width_mask(unsigned bits);

enum class ValueSource : std::uint8_t { Instr, Arg, Global, Const };

// A typed reference to an SSA value. Instr refs name a function-unique value
// id, Arg refs a parameter index, Global refs a module global index.
struct ValueRef {
  ValueSource source = ValueSource::Const;
  Type type;
  std::uint32_t index = 0;
  Constant constant;

  static ValueRef instr(std::uint32_t id, Type t) {
    return {ValueSource::Instr, t, id, {}};
  }
  static ValueRef arg(std::uint32_t idx, Type t) {
    return {ValueSource::Arg, t, idx, {}};
  }
  static ValueRef global(std::uint32_t idx) {
    return {ValueSource::Global, Type::addr(), idx, {}};
  }
  static ValueRef constant_of(Type t, Constant c) {
    return {ValueSource::Const, t, 0, std::move(c)};
  }
  static ValueRef const_int(Type t, u128 v) {
    return constant_of(t, Constant::integer(v & width_mask(t.scalar_bits())));
  }

  bool is_instr() const { return source == ValueSource::Instr; }
  bool is_const() const { return source == ValueSource::Const; }
  bool same_value(const ValueRef& o) const {
    return source == o.source && index == o.index &&
           (source != ValueSource::Const || (type == o.type && constant == o.constant));
  }

  friend bool operator==(const ValueRef&, const ValueRef&) = default;
};

#define MATCHFUZZ_OPCODES(X)                                                  \
  X(FNeg, "fneg") X(Add, "add") X(Sub, "sub") X(Mul, "mul") X(SDiv, "sdiv")     \
  X(UDiv, "udiv") X(SRem, "srem") X(URem, "urem") X(FAdd, "fadd")               \
  X(FSub, "fsub") X(FMul, "fmul") X(FDiv, "fdiv") X(FRem, "frem")               \
  X(Shl, "shl") X(LShr, "lshr") X(AShr, "ashr") X(And, "and") X(Or, "or")       \
  X(Xor, "xor") X(ExtractElement, "extractelement")                             \
  X(InsertElement, "insertelement") X(ShuffleVector, "shufflevector")           \
  X(ExtractValue, "extractvalue") X(InsertValue, "insertvalue")                 \
  X(GetElementPtr, "getelementptr") X(Trunc, "trunc") X(ZExt, "zext")           \
  X(SExt, "sext") X(FPTrunc, "fptrunc") X(FPToUI, "fptoui")                     \
  X(FPToSI, "fptosi") X(UIToFP, "uitofp") X(SIToFP, "sitofp")                   \
  X(PtrToInt, "ptrtoint") X(IntToPtr, "inttoptr") X(BitCast, "bitcast")         \
  X(ICmp, "icmp") X(FCmp, "fcmp") X(Select, "select") X(Alloca, "alloca")       \
  X(Load, "load") X(Store, "store") X(Call, "call") X(Phi, "phi")

enum class Opcode : std::uint8_t {
#define MATCHFUZZ_ENUM(name, text) name,
  MATCHFUZZ_OPCODES(MATCHFUZZ_ENUM)
#undef MATCHFUZZ_ENUM
};

inline constexpr std::size_t kOpcodeCount =
    static_cast<std::size_t>(Opcode::Phi) + 1;

std::string_view opcode_name(Opcode op);
std::optional<Opcode> opcode_from_name(std::string_view name);

bool is_int_binary(Opcode op);   // add..urem, shl..xor
bool is_fp_binary(Opcode op);    // fadd..frem
bool is_cast(Opcode op);         // trunc..bitcast

enum class CmpPredicate : std::uint8_t {
  None,
  // icmp
  Eq, Ne, Ugt, Uge, Ult, Ule, Sgt, Sge, Slt, Sle,
  // fcmp
  False, Oeq, Ogt, Oge, Olt, Ole, One, Ord, Ueq, Ugt_f, Uge_f, Ult_f, Ule_f,
  Une, Uno, True,
};

std::string_view predicate_name(CmpPredicate p);
std::optional<CmpPredicate> icmp_predicate_from_name(std::string_view name);
std::optional<CmpPredicate> fcmp_predicate_from_name(std::string_view name);
bool is_icmp_predicate(CmpPredicate p);
bool is_fcmp_predicate(CmpPredicate p);

inline constexpr std::uint32_t kNoValue = 0xFFFFFFFFu;

struct Instruction {
  Opcode opcode = Opcode::Add;
  Type type;                       // result type; void for store / void call
  std::uint32_t id = kNoValue;     // SSA value id when the result is non-void
  std::string name;                // printed name, unique per function
  std::vector<ValueRef> operands;

  // Opcode-specific immediates.
  CmpPredicate predicate = CmpPredicate::None;   // icmp / fcmp
  Type aux_type;                   // alloca: allocated type; gep: element type
  std::vector<std::int32_t> mask;  // shufflevector lane indices
  std::uint32_t agg_index = 0;     // extractvalue / insertvalue
  std::string callee;              // call
  std::vector<std::uint32_t> incoming;  // phi: predecessor block per operand

  bool has_result() const { return !type.is_void(); }
  ValueRef result() const { return ValueRef::instr(id, type); }

  friend bool operator==(const Instruction&, const Instruction&) = default;
};

struct SwitchCase {
  u128 value = 0;
  std::uint32_t target = 0;
  friend bool operator==(const SwitchCase&, const SwitchCase&) = default;
};

struct Terminator {
  enum class Kind : std::uint8_t { Ret, Br, CondBr, Switch };
  Kind kind = Kind::Ret;
  // Ret value, CondBr condition or Switch scrutinee.
  std::optional<ValueRef> value;
  // Br: {target}; CondBr: {then, else}; Switch: {default}.
  std::vector<std::uint32_t> targets;
  std::vector<SwitchCase> cases;

  static Terminator ret(std::optional<ValueRef> v = std::nullopt) {
    return {Kind::Ret, std::move(v), {}, {}};
  }
  static Terminator br(std::uint32_t target) {
    return {Kind::Br, std::nullopt, {target}, {}};
  }
  static Terminator cond_br(ValueRef cond, std::uint32_t t, std::uint32_t f) {
    return {Kind::CondBr, std::move(cond), {t, f}, {}};
  }

  // Successor blocks in edge order (may repeat).
  std::vector<std::uint32_t> successors() const;
  template <typename Fn>
  void for_each_successor(Fn&& fn) const {
    for (std::uint32_t t : targets) fn(t);
    for (const auto& c : cases) fn(c.target);
  }

  friend bool operator==(const Terminator&, const Terminator&) = default;
};

struct BasicBlock {
  std::string label;
  std::vector<Instruction> phis;
  std::vector<Instruction> body;
  Terminator term;

  friend bool operator==(const BasicBlock&, const BasicBlock&) = default;
};

struct Param {
  Type type;
  std::string name;
  friend bool operator==(const Param&, const Param&) = default;
};

struct FunctionDef {
  std::string name;
  std::vector<Param> params;
  Type ret;
  std::vector<BasicBlock> blocks;  // blocks[0] is the entry
  std::uint32_t next_value_id = 0;

  std::uint32_t fresh_id() { return next_value_id++; }
  std::size_t instruction_count() const;
};

struct IntrinsicDecl {
  std::string name;
  std::vector<Type> params;
  Type ret;
  friend bool operator==(const IntrinsicDecl&, const IntrinsicDecl&) = default;
};

struct GlobalVar {
  std::string name;
  Type type;
  std::optional<Constant> init;
  friend bool operator==(const GlobalVar&, const GlobalVar&) = default;
};

struct ModuleUnit {
  std::vector<GlobalVar> globals;
  std::vector<IntrinsicDecl> decls;
  std::vector<FunctionDef> functions;

  const FunctionDef* find_function(std::string_view name) const;
  const IntrinsicDecl* find_decl(std::string_view name) const;
  bool has_symbol(std::string_view name) const;
  std::size_t instruction_count() const;
};

// Renumbers value ids of every function in textual order (params excluded,
// phis then body per block). Two modules are structurally equal when their
// canonical forms compare equal.
void canonicalize(ModuleUnit& m);
bool structurally_equal(const ModuleUnit& a, const ModuleUnit& b);

class DanglingRef : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// O(1) type lookup for value references inside one function.
class ValueTable {
 public:
  ValueTable(const ModuleUnit& m, const FunctionDef& f);
  Type type_of(const ValueRef& v) const;
  bool defined(std::uint32_t id) const;

 private:
  const ModuleUnit& module_;
  const FunctionDef& function_;
  std::vector<Type> by_id_;
  std::vector<bool> present_;
};

Type type_of(const ModuleUnit& m, const FunctionDef& f, const ValueRef& v);

// Root key used by the selector: opcode name, with a "-vector" suffix when the
// instruction's principal type is a vector. Calls to declared intrinsics use
// the intrinsic name.
std::string root_key(const ModuleUnit& m, const Instruction& inst);
std::string root_key(const Terminator& term);

}  // namespace matchfuzz
