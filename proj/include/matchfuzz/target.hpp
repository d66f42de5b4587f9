#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "matchfuzz/ir.hpp"

namespace matchfuzz {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};
class DuplicatePriority : public ConfigError {
 public:
  using ConfigError::ConfigError;
};
class UnknownFeature : public ConfigError {
 public:
  using ConfigError::ConfigError;
};

enum class TypeFamily : std::uint8_t { Any = 0, Int = 1, Float = 2, Addr = 3, Array = 4 };

inline constexpr std::uint8_t kAnyLanes = 255;

// Three-byte type predicate: family, lanes (0 = scalar, 255 = any vector),
// scalar bits (0 = any).
struct TypeClass {
  TypeFamily family = TypeFamily::Any;
  std::uint8_t lanes = 0;
  std::uint8_t bits = 0;

  bool matches(Type t) const;
  std::string str() const;
  static TypeClass parse(std::string_view text);  // throws ConfigError

  friend bool operator==(const TypeClass&, const TypeClass&) = default;
};

inline constexpr std::uint8_t kResultSlot = 0xFF;

struct OperandCheck {
  enum class Kind : std::uint8_t { Type, IsConst, ConstRange };
  Kind kind = Kind::Type;
  std::uint8_t slot = 0;
  TypeClass cls;
  std::int64_t lo = 0;
  std::int64_t hi = 0;

  std::string str() const;
  static OperandCheck parse(std::string_view text);  // e.g. "op1:range(0,7)"

  friend bool operator==(const OperandCheck&, const OperandCheck&) = default;
};

struct PatternDef {
  std::uint16_t id = 0;
  int priority = 0;
  std::string root;
  std::vector<OperandCheck> checks;
  std::vector<std::string> features;
  std::string emits;

  friend bool operator==(const PatternDef&, const PatternDef&) = default;
};

enum class FaultEffect : std::uint8_t { Abort, Hang };

// Fires when the instruction's root matches (if given) and the result type or
// any operand type, or its scalar, matches `type`.
struct FaultSpec {
  FaultEffect effect = FaultEffect::Abort;
  std::optional<std::string> root;
  TypeClass type;

  friend bool operator==(const FaultSpec&, const FaultSpec&) = default;
};

struct FeatureDef {
  std::string name;
  bool default_on = true;
  friend bool operator==(const FeatureDef&, const FeatureDef&) = default;
};

struct IntrinsicDef {
  IntrinsicDecl decl;
  std::vector<std::string> features;
  friend bool operator==(const IntrinsicDef&, const IntrinsicDef&) = default;
};

using FeatureSet = std::vector<bool>;

struct TargetSpec {
  std::string name;
  std::vector<FeatureDef> features;
  std::vector<unsigned> widths;          // legal integer widths
  std::optional<std::string> vector_feature;  // vectors legal when this is on
  bool vectors_always = false;
  std::vector<IntrinsicDef> intrinsics;
  std::vector<PatternDef> patterns;
  std::vector<FaultSpec> faults;

  std::optional<std::size_t> feature_index(std::string_view name) const;
  FeatureSet default_features() const;
  // Applies "name=on|off" settings to a feature set; throws UnknownFeature.
  FeatureSet with_settings(const std::vector<std::string>& settings) const;
  bool vectors_enabled(const FeatureSet& fs) const;
  bool enabled(const FeatureSet& fs, const std::vector<std::string>& names) const;
  const IntrinsicDef* find_intrinsic(std::string_view name) const;

  friend bool operator==(const TargetSpec&, const TargetSpec&) = default;
};

// Throws UnknownFeature, DuplicatePriority or ConfigError.
void validate_target(const TargetSpec& t);

TargetSpec parse_target(std::string_view text);
std::string print_target(const TargetSpec& t);

// alpha (scalar only), vex (alpha + simd vectors + intrinsics) and vex-i20
// (vex with i20 legal and faults injected on it).
const std::vector<TargetSpec>& builtin_targets();
const TargetSpec* find_builtin_target(std::string_view name);

}  // namespace matchfuzz
