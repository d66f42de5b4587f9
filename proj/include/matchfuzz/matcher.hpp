#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "matchfuzz/target.hpp"

namespace matchfuzz {

class MalformedTable : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Fixed-width entries; multi-byte operands are little-endian.
//   SCOPE              op u32 skip      (failure target = scope start + skip)
//   CHECK_OPCODE       op u16 root
//   CHECK_TYPE         op slot family lanes bits
//   CHECK_FEATURE      op flag
//   CHECK_IS_CONST     op slot
//   CHECK_CONST_RANGE  op slot i64 lo i64 hi
//   EMIT               op u16 pattern
//   FAIL               op
enum class MatcherOp : std::uint8_t {
  Scope = 1,
  CheckOpcode = 2,
  CheckType = 3,
  CheckFeature = 4,
  CheckIsConst = 5,
  CheckConstRange = 6,
  Emit = 7,
  Fail = 8,
};

inline constexpr std::size_t kMatcherOpCount = 8;

// Byte size of an entry, or 0 for an unknown opcode byte.
std::size_t entry_size(std::uint8_t op);
std::string_view matcher_op_name(MatcherOp op);

struct MatcherProgram {
  std::vector<std::uint8_t> bytes;
  std::vector<std::string> roots;  // CHECK_OPCODE operand -> root key
  std::unordered_map<std::string, std::uint16_t> root_ids;

  std::size_t size() const { return bytes.size(); }
  // Root id of `key`, or 0xFFFF when the table has no group for it.
  std::uint16_t root_id(std::string_view key) const;
};

enum class PatternKind : std::uint8_t { Instruction, Intrinsic };

struct LookupRow {
  std::uint32_t begin = 0;  // byte range [begin, end)
  std::uint32_t end = 0;
  std::uint16_t pattern = 0;
  PatternKind kind = PatternKind::Instruction;
  std::string root;

  friend bool operator==(const LookupRow&, const LookupRow&) = default;
};

struct LookupTable {
  std::vector<LookupRow> rows;  // ordered by begin
  std::uint32_t program_size = 0;

  const LookupRow* find(std::uint16_t pattern) const;
  friend bool operator==(const LookupTable&, const LookupTable&) = default;
};

struct CompiledTable {
  MatcherProgram program;
  LookupTable lut;
};

// Groups patterns by root (first-appearance order), orders each group by
// descending priority and wraps alternatives in SCOPE entries. Throws
// DuplicatePriority / UnknownFeature from validation.
CompiledTable compile_patterns(const TargetSpec& t);

struct DecodedEntry {
  std::uint32_t offset;
  MatcherOp op;
  std::uint32_t size;
  std::uint32_t depth;   // scope nesting depth
  std::uint64_t a = 0;   // first operand (skip, root, slot, flag, pattern)
  std::int64_t lo = 0;
  std::int64_t hi = 0;
  TypeClass cls;
};

// Linear depth-first decode. Throws MalformedTable when an entry runs past
// the end or a SCOPE target is not an entry boundary.
std::vector<DecodedEntry> decode_program(const MatcherProgram& prog);

// Human-readable listing, one entry per line.
std::string disassemble(const MatcherProgram& prog);

}  // namespace matchfuzz
