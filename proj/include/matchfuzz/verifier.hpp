#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "matchfuzz/ir.hpp"

namespace matchfuzz {

enum class ViolationKind : std::uint8_t {
  TypeMismatch,
  UseBeforeDef,
  DominanceViolation,
  PhiArity,
  BadTerminator,
  BadIndex,
  NameClash,
};

std::string_view violation_kind_name(ViolationKind k);

// Location is (function, block, position); position counts phis, then body
// instructions, then the terminator. Module-level problems use an empty
// function name.
struct Violation {
  ViolationKind kind;
  std::string function;
  std::uint32_t block = 0;
  std::uint32_t index = 0;
  std::string message;

  std::string str() const;
};

std::vector<Violation> verify_module(const ModuleUnit& m);

// True iff c is a well-formed constant of type t.
bool constant_fits(Type t, const Constant& c);

}  // namespace matchfuzz
