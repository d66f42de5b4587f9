#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

#include "matchfuzz/ir.hpp"

namespace matchfuzz {

class SyntaxError : public std::runtime_error {
 public:
  SyntaxError(int line, int col, const std::string& message)
      : std::runtime_error(std::to_string(line) + ":" + std::to_string(col) +
                           ": " + message),
        line_(line),
        col_(col) {}
  int line() const { return line_; }
  int col() const { return col_; }

 private:
  int line_;
  int col_;
};

// Token-based reader for the LLVM-flavoured text form. Layout (newlines,
// indentation) is not significant.
ModuleUnit parse_module(std::string_view text);

// Deterministic printer; parse_module(print_module(m)) is structurally equal
// to m for every well-formed m.
std::string print_module(const ModuleUnit& m);

Type parse_type(std::string_view text);
std::string print_constant(Type t, const Constant& c);
std::string print_value(const ModuleUnit& m, const FunctionDef& f, const ValueRef& v);
std::string print_instruction(const ModuleUnit& m, const FunctionDef& f,
                              const Instruction& inst);
std::string print_decl(const IntrinsicDecl& d);
// Parses a single `declare` line.
IntrinsicDecl parse_decl(std::string_view text);

}  // namespace matchfuzz
