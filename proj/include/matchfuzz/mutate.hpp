#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "matchfuzz/feedback.hpp"
#include "matchfuzz/ir.hpp"
#include "matchfuzz/rng.hpp"
#include "matchfuzz/target.hpp"

namespace matchfuzz {

// Operand type predicates from the instruction model. Each is evaluated
// against the candidate type and the types already chosen for earlier slots.
enum class OperandConstraint : std::uint8_t {
  AnyIntOrVecInt,
  AnyFPOrVecFP,
  AnyFloatPointOrVectorFloatPoint,
  SameAsFirst,
  AnyVector,
  AnyInt,
  MatchScalarOfFirst,
  MatchLengthOfFirst,
  VecOfConstI32,
  AnyAggregateOrArray,
  AnyConstInt,
  PointerOfFirst,
  AnySized,
  AnyNonBoolIntOrVecInt,
  AnyIntOrVecIntWithLowerPrecision,
  AnyIntOrVecIntWithHigherPrecision,
  AnyNonHalfFPOrVecFP,
  AndFPOrVecFPWHigherPrecision,
  MatchLengthOfFirstWithInt,
  MatchLengthOfFirstWithFP,
  MatchLengthOfFirstWithPtr,
  AnyPtrOrVecPtr,
  AnyTypeWithSameBitWidth,
  AnyBoolOrVecBool,
  SameAsSecond,
  AnyType,
};

std::string_view constraint_name(OperandConstraint c);
bool satisfies(OperandConstraint c, Type t, std::span<const Type> prior);

enum class SlotRole : std::uint8_t { Operand, Result, ElementType, AggIndex, Mask };

struct SlotSpec {
  SlotRole role;
  OperandConstraint constraint;
};

struct OpcodeModel {
  Opcode opcode;
  std::vector<SlotSpec> slots;
  int principal;  // slot whose type decides the "-vector" root, -1 if none
};

// Declarative model for an opcode, or nullptr for the hand-built ones
// (alloca, load, store, call, phi).
const OpcodeModel* opcode_model(Opcode op);

// Types the mutator may use, with selection weights.
struct TypeUniverse {
  std::vector<Type> types;
  std::vector<double> weights;

  static TypeUniverse for_target(const TargetSpec& t, const FeatureSet& fs);
  bool contains(Type t) const;
  bool has_vectors() const;
};

enum class Strategy : std::uint8_t {
  GenerateFunction,
  InsertScfg,
  GenerateInstruction,
  GenerateCall,
  SinkValue,
  FixupPlaceholders,
};
inline constexpr std::size_t kStrategyCount = 6;
std::string_view strategy_name(Strategy s);

enum class MutationStatus : std::uint8_t {
  Applied,
  LimitExceeded,
  NoFunction,
  NoCallable,
  NothingDead,
  NoCandidateOpcode,
};
std::string_view status_name(MutationStatus s);

struct MutatorConfig {
  std::size_t max_blocks = 64;
  std::size_t max_instrs_per_block = 48;
  std::size_t max_functions = 4;
  std::size_t max_instrs_per_function = 192;
  std::size_t max_globals = 16;
  std::size_t max_scfg_blocks = 8;
  std::array<double, kStrategyCount> weights = {1, 2, 8, 2, 2, 1};
  double guidance_bias = 0.5;  // chance an opcode/callee comes from guidance
  std::optional<GuidanceReport> guidance;
  TypeUniverse universe;

  static MutatorConfig for_target(const TargetSpec& t, const FeatureSet& fs);
  void validate() const;  // throws ConfigError
};

struct StepResult {
  Strategy strategy;
  MutationStatus status;
};

// What generate_instruction intends to build.
struct OpcodeChoice {
  Opcode opcode;
  std::optional<bool> vector;  // required principal vector-ness
  bool from_guidance = false;
};

class Mutator {
 public:
  explicit Mutator(MutatorConfig cfg);

  const MutatorConfig& config() const { return cfg_; }
  void set_guidance(std::optional<GuidanceReport> report);

  MutationStatus generate_function(ModuleUnit& m, Rng& rng) const;
  MutationStatus insert_scfg(ModuleUnit& m, Rng& rng) const;
  MutationStatus generate_instruction(ModuleUnit& m, Rng& rng) const;
  MutationStatus generate_call(ModuleUnit& m, Rng& rng) const;
  MutationStatus sink_value(ModuleUnit& m, Rng& rng) const;
  MutationStatus fixup_placeholders(ModuleUnit& m, Rng& rng) const;

  MutationStatus apply(Strategy s, ModuleUnit& m, Rng& rng) const;
  // Picks strategies by weight; retries a few times when one is a no-op.
  StepResult mutate_step(ModuleUnit& m, Rng& rng) const;

  // Opcode draw used by generate_instruction (exposed for bias tests).
  OpcodeChoice draw_opcode(Rng& rng) const;
  // Builds one instance of `choice` in function `fn`, block `b` before body
  // position `pos`.
  MutationStatus build_instruction(ModuleUnit& m, std::size_t fn, std::uint32_t b, std::uint32_t pos,
                                   const OpcodeChoice& choice, Rng& rng) const;

 private:
  MutatorConfig cfg_;
  std::vector<Opcode> opcodes_;                  // unguided opcode pool
  std::vector<OpcodeChoice> guided_;             // guidance roots that map to instructions
  std::vector<double> guided_weights_;
};

// Loads from a stack slot with no dominating earlier store to that slot.
std::size_t count_placeholder_loads(const ModuleUnit& m);

}  // namespace matchfuzz
