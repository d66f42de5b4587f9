#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "matchfuzz/coverage.hpp"
#include "matchfuzz/ir.hpp"
#include "matchfuzz/matcher.hpp"
#include "matchfuzz/target.hpp"

namespace matchfuzz {

enum class FindingKind : std::uint8_t { MissingPattern, InjectedAbort, HangSentinel, VerifierReject };

std::string_view finding_kind_name(FindingKind k);
std::optional<FindingKind> finding_kind_from_name(std::string_view s);

// Dedup key of a failure.
struct FailureSignature {
  FindingKind kind = FindingKind::MissingPattern;
  std::string root;
  std::string types;  // "op0,op1->result"
  std::uint32_t byte_index = 0;
  std::string target;

  // Single-line form: "<kind> <root> <types> <byte> <target>".
  std::string str() const;
  static FailureSignature parse(std::string_view line);
  // FNV-1a 64 of str(), 16 hex digits.
  std::string hash() const;

  friend bool operator==(const FailureSignature&, const FailureSignature&) = default;
};

struct InstrSelection {
  std::string function;
  std::uint32_t block = 0;
  std::uint32_t index = 0;  // phis, body, then terminator
  std::string root;
  std::optional<std::uint16_t> pattern;
  std::string machine_op;
};

struct SelectionResult {
  std::vector<InstrSelection> selected;  // filled only when requested
  std::optional<FailureSignature> finding;
  std::size_t instructions = 0;
  bool parse_error = false;

  bool ok() const { return !finding && !parse_error; }
};

struct TraceEvent {
  std::uint32_t index;
  MatcherOp kind;
};

struct SelectOptions {
  bool collect = false;                     // fill SelectionResult::selected
  std::vector<TraceEvent>* trace = nullptr;  // every byte read, in order
  bool verify = true;
};

// Probe ids used for edge coverage. Stable across runs.
std::uint16_t probe_id(std::uint32_t site);

// Table-driven instruction selector for one target and feature set.
class Selector {
 public:
  Selector(const TargetSpec& t, FeatureSet features);
  explicit Selector(const TargetSpec& t) : Selector(t, t.default_features()) {}

  const TargetSpec& target() const { return target_; }
  const FeatureSet& features() const { return features_; }
  const CompiledTable& table() const { return table_; }
  std::size_t table_size() const { return table_.program.size(); }
  std::uint32_t step_budget() const { return static_cast<std::uint32_t>(10 * table_size()); }

  SelectionResult select_module(const ModuleUnit& m, CoverageState& cov,
                                const SelectOptions& opts = {}) const;
  // Parse, then select. Syntax errors set parse_error.
  SelectionResult select_text(std::string_view text, CoverageState& cov,
                              const SelectOptions& opts = {}) const;

  struct Outcome {
    std::optional<std::uint16_t> pattern;
    std::optional<FindingKind> failure;
    std::uint32_t byte_index = 0;
  };
  Outcome select_instruction(const ModuleUnit& m, const Instruction& inst, CoverageState& cov,
                             std::vector<TraceEvent>* trace = nullptr) const;
  Outcome select_terminator(const Terminator& term, CoverageState& cov,
                            std::vector<TraceEvent>* trace = nullptr) const;

 private:
  struct Slots {
    const ValueRef* ops[8] = {};
    std::size_t count = 0;
    Type result;
  };
  Outcome interpret(std::uint16_t root, const Slots& s, CoverageState& cov,
                    std::vector<TraceEvent>* trace) const;
  std::uint16_t instruction_root(const ModuleUnit& m, const Instruction& inst) const;
  bool fault_matches(std::size_t fault, std::uint16_t root, const Slots& s) const;

  TargetSpec target_;
  FeatureSet features_;
  CompiledTable table_;
  std::vector<std::uint16_t> opcode_root_;   // [opcode * 2 + vector]
  std::uint16_t term_root_[4] = {};
  std::vector<std::uint16_t> fault_root_;    // 0xFFFE = any root
  std::vector<std::string> mop_by_pattern_;
};

// Summary used in signatures, e.g. "i20,i20->i20".
std::string type_summary(const std::vector<Type>& operands, Type result);

}  // namespace matchfuzz
