#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "matchfuzz/coverage.hpp"
#include "matchfuzz/matcher.hpp"
#include "matchfuzz/target.hpp"

namespace matchfuzz {

class SizeMismatch : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DecodedPattern {
  std::uint16_t pattern = 0;
  bool covered = false;
};

// One entry per lookup row, in row order. A pattern counts as covered when
// any bit of its EMIT range is set.
std::vector<DecodedPattern> decode_coverage(const MatcherBitmap& bitmap, const LookupTable& lut);

struct OpcodeWeight {
  std::string root;  // root key, e.g. "add" or "fadd-vector"
  unsigned weight = 0;

  friend bool operator==(const OpcodeWeight&, const OpcodeWeight&) = default;
};

struct GuidanceReport {
  std::uint64_t epoch = 0;
  std::vector<OpcodeWeight> opcodes;        // uncovered instruction roots
  std::vector<IntrinsicDecl> intrinsics;    // intrinsics never selected

  bool empty() const { return opcodes.empty() && intrinsics.empty(); }
  unsigned weight_of(std::string_view root) const;

  // "uncovered <root> weight=K" and "uncovered-intrinsic <decl>" lines.
  std::string str() const;
  static GuidanceReport parse(std::string_view text);  // throws ConfigError

  friend bool operator==(const GuidanceReport&, const GuidanceReport&) = default;
};

// Instruction roots aggregate their uncovered patterns into a weight, in
// table order. An intrinsic is listed while none of its patterns is covered.
GuidanceReport build_report(const std::vector<DecodedPattern>& decoded, const LookupTable& lut,
                            const TargetSpec& t);

// Fires on every N-th executed input.
class EpochSchedule {
 public:
  static constexpr std::uint64_t kDefaultEvery = 10000;

  explicit EpochSchedule(std::uint64_t every = kDefaultEvery);
  std::uint64_t every() const { return every_; }
  bool fires(std::uint64_t executions) const { return executions != 0 && executions % every_ == 0; }

 private:
  std::uint64_t every_;
};

}  // namespace matchfuzz
