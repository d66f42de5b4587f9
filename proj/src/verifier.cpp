#include "matchfuzz/verifier.hpp"

#include <algorithm>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "matchfuzz/dominance.hpp"

namespace matchfuzz {

std::string_view violation_kind_name(ViolationKind k) {
  switch (k) {
    case ViolationKind::TypeMismatch: return "TypeMismatch";
    case ViolationKind::UseBeforeDef: return "UseBeforeDef";
    case ViolationKind::DominanceViolation: return "DominanceViolation";
    case ViolationKind::PhiArity: return "PhiArity";
    case ViolationKind::BadTerminator: return "BadTerminator";
    case ViolationKind::BadIndex: return "BadIndex";
    case ViolationKind::NameClash: return "NameClash";
  }
  return "?";
}

std::string Violation::str() const {
  std::string where = function.empty() ? "<module>" : "@" + function + ":" +
                                                          std::to_string(block) + ":" +
                                                          std::to_string(index);
  return std::string(violation_kind_name(kind)) + " " + where + ": " + message;
}

bool constant_fits(Type t, const Constant& c) {
  if (!t.valid() || t.is_void()) return false;
  switch (c.kind) {
    case Constant::Kind::Undef:
    case Constant::Kind::Poison:
    case Constant::Kind::Zero:
      return true;
    case Constant::Kind::Int:
      return t.is_int() && c.bits == (c.bits & width_mask(t.scalar_bits()));
    case Constant::Kind::Float:
      return t.is_float() && c.bits == (c.bits & width_mask(t.scalar_bits()));
    case Constant::Kind::Aggregate: {
      unsigned n = t.is_vector() ? t.lanes() : t.is_array() ? t.count() : 0;
      if (n == 0 || c.elements.size() != n) return false;
      Type et = t.element();
      return std::all_of(c.elements.begin(), c.elements.end(),
                         [&](const Constant& e) { return constant_fits(et, e); });
    }
  }
  return false;
}

namespace {

bool same_shape(Type a, Type b) { return a.lanes() == b.lanes() && a.is_vector() == b.is_vector(); }

class FunctionVerifier {
 public:
  FunctionVerifier(const ModuleUnit& m, const FunctionDef& f, std::vector<Violation>& out)
      : m_(m), f_(f), out_(out), dom_(f) {}

  void run() {
    if (f_.blocks.empty()) {
      report(ViolationKind::BadTerminator, 0, 0, "function has no blocks");
      return;
    }
    if (!f_.ret.valid() || f_.ret.is_array()) report(ViolationKind::TypeMismatch, 0, 0, "bad return type");
    collect_definitions();
    for (std::uint32_t b = 0; b < f_.blocks.size(); ++b) check_block(b);
  }

 private:
  static constexpr std::uint32_t kNoBlock = 0xFFFFFFFFu;
  struct Def {
    std::uint32_t block;
    std::uint32_t pos;
    Type type;
  };

  void report(ViolationKind k, std::uint32_t b, std::uint32_t i, std::string msg) {
    out_.push_back({k, f_.name, b, i, std::move(msg)});
  }

  // Open-addressing duplicate detector over names that outlive it.
  class NameSet {
   public:
    explicit NameSet(std::size_t n) {
      std::size_t cap = 16;
      while (cap < 2 * n) cap <<= 1;
      slots_.assign(cap, {});
    }
    // False when `name` was already present.
    bool insert(std::string_view name) {
      std::size_t h = std::hash<std::string_view>{}(name);
      std::size_t mask = slots_.size() - 1;
      for (std::size_t i = h & mask;; i = (i + 1) & mask) {
        Slot& s = slots_[i];
        if (!s.used) {
          s = {true, h, name};
          return true;
        }
        if (s.hash == h && s.name == name) return false;
      }
    }

   private:
    struct Slot {
      bool used = false;
      std::size_t hash = 0;
      std::string_view name;
    };
    std::vector<Slot> slots_;
  };

  void collect_definitions() {
    NameSet names(f_.params.size() + f_.instruction_count());
    defs_.assign(f_.next_value_id, Def{kNoBlock, 0, Type()});
    for (std::uint32_t p = 0; p < f_.params.size(); ++p) {
      const Param& prm = f_.params[p];
      if (!prm.type.valid() || prm.type.is_void())
        report(ViolationKind::TypeMismatch, 0, 0, "bad parameter type");
      if (!names.insert(prm.name)) report(ViolationKind::NameClash, 0, 0, "duplicate name %" + prm.name);
    }
    NameSet labels(f_.blocks.size());
    for (std::uint32_t b = 0; b < f_.blocks.size(); ++b) {
      const BasicBlock& bb = f_.blocks[b];
      if (!labels.insert(bb.label)) report(ViolationKind::NameClash, b, 0, "duplicate label " + bb.label);
      std::uint32_t pos = 0;
      auto add = [&](const Instruction& i) {
        if (i.has_result()) {
          if (i.id == kNoValue || i.id >= f_.next_value_id) {
            report(ViolationKind::NameClash, b, pos, "result has no valid value id");
          } else if (defs_[i.id].block != kNoBlock) {
            report(ViolationKind::NameClash, b, pos, "value id defined twice");
          } else {
            defs_[i.id] = Def{b, pos, i.type};
          }
          if (!names.insert(i.name)) report(ViolationKind::NameClash, b, pos, "duplicate name %" + i.name);
        }
        ++pos;
      };
      for (const auto& i : bb.phis) add(i);
      for (const auto& i : bb.body) add(i);
    }
  }

  // Checks existence, type agreement and dominance of one operand. `pred` is
  // the incoming block for phi operands.
  bool check_ref(const ValueRef& v, std::uint32_t b, std::uint32_t pos,
                 std::optional<std::uint32_t> pred) {
    switch (v.source) {
      case ValueSource::Const:
        if (!constant_fits(v.type, v.constant)) {
          report(ViolationKind::TypeMismatch, b, pos, "malformed constant of type " + v.type.str());
          return false;
        }
        return true;
      case ValueSource::Arg:
        if (v.index >= f_.params.size()) {
          report(ViolationKind::UseBeforeDef, b, pos, "argument index out of range");
          return false;
        }
        if (f_.params[v.index].type != v.type) {
          report(ViolationKind::TypeMismatch, b, pos, "argument reference type disagrees");
          return false;
        }
        return true;
      case ValueSource::Global:
        if (v.index >= m_.globals.size()) {
          report(ViolationKind::UseBeforeDef, b, pos, "global index out of range");
          return false;
        }
        if (!v.type.is_addr()) {
          report(ViolationKind::TypeMismatch, b, pos, "global reference must be ptr");
          return false;
        }
        return true;
      case ValueSource::Instr:
        break;
    }
    if (v.index >= defs_.size() || defs_[v.index].block == kNoBlock) {
      report(ViolationKind::UseBeforeDef, b, pos, "use of undefined value");
      return false;
    }
    const Def& d = defs_[v.index];
    if (d.type != v.type) {
      report(ViolationKind::TypeMismatch, b, pos, "reference type disagrees with definition");
      return false;
    }
    if (pred) {
      std::uint32_t p = *pred;
      if (p >= f_.blocks.size() || !dom_.reachable(p)) return true;
      if (!dom_.reachable(d.block) || !dom_.dominates(d.block, p)) {
        report(ViolationKind::DominanceViolation, b, pos,
               "incoming value does not dominate the end of its predecessor");
        return false;
      }
      return true;
    }
    if (!dom_.reachable(b)) return true;
    if (d.block == b) {
      if (d.pos >= pos) {
        report(ViolationKind::UseBeforeDef, b, pos, "use precedes definition in block");
        return false;
      }
      return true;
    }
    if (!dom_.reachable(d.block) || !dom_.dominates(d.block, b)) {
      report(ViolationKind::DominanceViolation, b, pos, "definition does not dominate use");
      return false;
    }
    return true;
  }

  void check_block(std::uint32_t b) {
    const BasicBlock& bb = f_.blocks[b];
    std::uint32_t pos = 0;
    for (const auto& i : bb.phis) check_phi(b, pos++, i);
    for (const auto& i : bb.body) {
      if (i.opcode == Opcode::Phi) {
        report(ViolationKind::PhiArity, b, pos, "phi after non-phi instruction");
      } else {
        bool refs_ok = true;
        for (const auto& op : i.operands) refs_ok &= check_ref(op, b, pos, std::nullopt);
        if (refs_ok) check_typing(b, pos, i);
      }
      ++pos;
    }
    check_terminator(b, pos, bb.term);
  }

  void check_phi(std::uint32_t b, std::uint32_t pos, const Instruction& i) {
    if (i.opcode != Opcode::Phi) {
      report(ViolationKind::PhiArity, b, pos, "non-phi in phi section");
      return;
    }
    if (!i.type.valid() || i.type.is_void()) {
      report(ViolationKind::TypeMismatch, b, pos, "bad phi type");
      return;
    }
    if (b == 0) {
      report(ViolationKind::PhiArity, b, pos, "phi in entry block");
      return;
    }
    const auto& preds = dom_.preds()[b];
    if (i.operands.size() != i.incoming.size()) {
      report(ViolationKind::PhiArity, b, pos, "operand/incoming count mismatch");
      return;
    }
    std::set<std::uint32_t> seen;
    for (std::uint32_t p : i.incoming) {
      if (!seen.insert(p).second) {
        report(ViolationKind::PhiArity, b, pos, "duplicate incoming block");
        return;
      }
    }
    if (seen != std::set<std::uint32_t>(preds.begin(), preds.end())) {
      report(ViolationKind::PhiArity, b, pos,
             "incoming blocks differ from predecessors (" + std::to_string(i.incoming.size()) +
                 " vs " + std::to_string(preds.size()) + ")");
      return;
    }
    for (std::size_t k = 0; k < i.operands.size(); ++k) {
      if (i.operands[k].type != i.type) {
        report(ViolationKind::TypeMismatch, b, pos, "phi incoming type mismatch");
        continue;
      }
      check_ref(i.operands[k], b, pos, i.incoming[k]);
    }
  }

  void check_typing(std::uint32_t b, std::uint32_t pos, const Instruction& i) {
    auto bad = [&](const std::string& why) {
      report(ViolationKind::TypeMismatch, b, pos, std::string(opcode_name(i.opcode)) + ": " + why);
    };
    auto arity = [&](std::size_t n) {
      if (i.operands.size() == n) return true;
      bad("expected " + std::to_string(n) + " operands");
      return false;
    };
    if (!i.type.valid()) return bad("invalid result type");
    const auto& ops = i.operands;
    auto t = [&](std::size_t k) { return ops[k].type; };
    Opcode op = i.opcode;

    if (op == Opcode::FNeg) {
      if (!arity(1)) return;
      if (!t(0).is_fp_or_fp_vector()) return bad("operand must be fp or fp vector");
      if (i.type != t(0)) return bad("result type");
      return;
    }
    if (is_int_binary(op) || is_fp_binary(op)) {
      if (!arity(2)) return;
      bool ok = is_int_binary(op) ? t(0).is_int_or_int_vector() : t(0).is_fp_or_fp_vector();
      if (!ok) return bad("first operand class");
      if (t(1) != t(0)) return bad("second operand must match first");
      if (i.type != t(0)) return bad("result type");
      return;
    }
    if (is_cast(op)) {
      if (!arity(1)) return;
      Type s = t(0), d = i.type;
      bool ok = false;
      switch (op) {
        case Opcode::Trunc:
          ok = s.is_int_or_int_vector() && s.scalar_bits() > 1 && d.is_int_or_int_vector() &&
               same_shape(s, d) && d.scalar_bits() < s.scalar_bits();
          break;
        case Opcode::ZExt:
        case Opcode::SExt:
          ok = s.is_int_or_int_vector() && d.is_int_or_int_vector() && same_shape(s, d) &&
               d.scalar_bits() > s.scalar_bits();
          break;
        case Opcode::FPTrunc:
          ok = s.is_fp_or_fp_vector() && d.is_fp_or_fp_vector() && same_shape(s, d) &&
               d.scalar_bits() < s.scalar_bits();
          break;
        case Opcode::FPToUI:
        case Opcode::FPToSI:
          ok = s.is_fp_or_fp_vector() && d.is_int_or_int_vector() && same_shape(s, d);
          break;
        case Opcode::UIToFP:
        case Opcode::SIToFP:
          ok = s.is_int_or_int_vector() && d.is_fp_or_fp_vector() && same_shape(s, d);
          break;
        case Opcode::PtrToInt:
          ok = s.is_addr_or_addr_vector() && d.is_int_or_int_vector() && same_shape(s, d);
          break;
        case Opcode::IntToPtr:
          ok = s.is_int_or_int_vector() && d.is_addr_or_addr_vector() && same_shape(s, d);
          break;
        case Opcode::BitCast:
          ok = !s.is_void() && !s.is_array() && !d.is_void() && !d.is_array() &&
               s.bit_width() == d.bit_width() &&
               s.is_addr_or_addr_vector() == d.is_addr_or_addr_vector();
          break;
        default:
          break;
      }
      if (!ok) bad(s.str() + " to " + d.str() + " not allowed");
      return;
    }
    switch (op) {
      case Opcode::ExtractElement:
        if (!arity(2)) return;
        if (!t(0).is_vector()) return bad("first operand must be a vector");
        if (!t(1).is_int()) return bad("index must be an integer");
        if (i.type != t(0).element()) return bad("result type");
        return;
      case Opcode::InsertElement:
        if (!arity(3)) return;
        if (!t(0).is_vector()) return bad("first operand must be a vector");
        if (t(1) != t(0).element()) return bad("element must match vector scalar");
        if (!t(2).is_int()) return bad("index must be an integer");
        if (i.type != t(0)) return bad("result type");
        return;
      case Opcode::ShuffleVector: {
        if (!arity(2)) return;
        if (!t(0).is_vector()) return bad("first operand must be a vector");
        if (t(1) != t(0)) return bad("second operand must match first");
        std::size_t n = i.mask.size();
        if (n != 2 && n != 4 && n != 8 && n != 16) return bad("mask length");
        for (auto e : i.mask) {
          if (e < -1 || e >= static_cast<std::int32_t>(2 * t(0).lanes())) {
            report(ViolationKind::BadIndex, b, pos, "shufflevector mask index out of range");
            return;
          }
        }
        if (i.type != Type::vector(t(0).element(), static_cast<unsigned>(n))) return bad("result type");
        return;
      }
      case Opcode::ExtractValue:
      case Opcode::InsertValue: {
        bool ins = op == Opcode::InsertValue;
        if (!arity(ins ? 2 : 1)) return;
        if (!t(0).is_array()) return bad("first operand must be an array");
        if (ins && t(1) != t(0).element()) return bad("element must match array element");
        if (i.agg_index >= t(0).count()) {
          report(ViolationKind::BadIndex, b, pos, "aggregate index out of range");
          return;
        }
        if (i.type != (ins ? t(0) : t(0).element())) return bad("result type");
        return;
      }
      case Opcode::GetElementPtr:
        if (!arity(2)) return;
        if (i.aux_type.is_void() || !i.aux_type.valid()) return bad("element type must be sized");
        if (!t(0).is_addr()) return bad("base must be ptr");
        if (!t(1).is_int()) return bad("index must be an integer");
        if (!i.type.is_addr()) return bad("result type");
        return;
      case Opcode::ICmp:
      case Opcode::FCmp: {
        if (!arity(2)) return;
        bool icmp = op == Opcode::ICmp;
        if (icmp ? !is_icmp_predicate(i.predicate) : !is_fcmp_predicate(i.predicate))
          return bad("bad predicate");
        if (icmp ? !t(0).is_int_or_int_vector() : !t(0).is_fp_or_fp_vector())
          return bad("first operand class");
        if (t(1) != t(0)) return bad("second operand must match first");
        if (i.type != t(0).with_scalar(Type::i1())) return bad("result type");
        return;
      }
      case Opcode::Select:
        if (!arity(3)) return;
        if (!t(0).is_bool_or_bool_vector()) return bad("condition must be i1 or vector of i1");
        if (t(1).is_void()) return bad("value type");
        if (t(0).is_vector() && (!t(1).is_vector() || t(1).lanes() != t(0).lanes()))
          return bad("value lane count must match condition");
        if (t(2) != t(1)) return bad("third operand must match second");
        if (i.type != t(1)) return bad("result type");
        return;
      case Opcode::Alloca:
        if (!arity(0)) return;
        if (i.aux_type.is_void() || !i.aux_type.valid()) return bad("allocated type");
        if (!i.type.is_addr()) return bad("result type");
        return;
      case Opcode::Load:
        if (!arity(1)) return;
        if (!t(0).is_addr()) return bad("address operand must be ptr");
        if (i.type.is_void()) return bad("result type");
        return;
      case Opcode::Store:
        if (!arity(2)) return;
        if (t(0).is_void()) return bad("stored value type");
        if (!t(1).is_addr()) return bad("address operand must be ptr");
        if (!i.type.is_void()) return bad("store has no result");
        return;
      case Opcode::Call: {
        std::vector<Type> params;
        Type ret;
        if (const FunctionDef* fn = m_.find_function(i.callee)) {
          for (const auto& p : fn->params) params.push_back(p.type);
          ret = fn->ret;
        } else if (const IntrinsicDecl* d = m_.find_decl(i.callee)) {
          params = d->params;
          ret = d->ret;
        } else {
          return bad("unknown callee @" + i.callee);
        }
        if (!arity(params.size())) return;
        for (std::size_t k = 0; k < params.size(); ++k)
          if (t(k) != params[k]) return bad("argument " + std::to_string(k) + " type");
        if (i.type != ret) return bad("result type");
        return;
      }
      default:
        return bad("unexpected opcode");
    }
  }

  void check_terminator(std::uint32_t b, std::uint32_t pos, const Terminator& term) {
    std::uint32_t n = static_cast<std::uint32_t>(f_.blocks.size());
    auto target_ok = [&](std::uint32_t s) {
      if (s >= n) {
        report(ViolationKind::BadTerminator, b, pos, "branch target out of range");
        return false;
      }
      if (s == 0) {
        report(ViolationKind::BadTerminator, b, pos, "branch to entry block");
        return false;
      }
      return true;
    };
    switch (term.kind) {
      case Terminator::Kind::Ret:
        if (!term.targets.empty() || !term.cases.empty())
          report(ViolationKind::BadTerminator, b, pos, "ret with targets");
        if (f_.ret.is_void()) {
          if (term.value) report(ViolationKind::BadTerminator, b, pos, "ret value in void function");
          return;
        }
        if (!term.value) {
          report(ViolationKind::BadTerminator, b, pos, "ret missing value");
          return;
        }
        if (term.value->type != f_.ret) {
          report(ViolationKind::TypeMismatch, b, pos, "ret type mismatch");
          return;
        }
        check_ref(*term.value, b, pos, std::nullopt);
        return;
      case Terminator::Kind::Br:
        if (term.targets.size() != 1 || term.value || !term.cases.empty()) {
          report(ViolationKind::BadTerminator, b, pos, "malformed br");
          return;
        }
        target_ok(term.targets[0]);
        return;
      case Terminator::Kind::CondBr:
        if (term.targets.size() != 2 || !term.value || !term.cases.empty()) {
          report(ViolationKind::BadTerminator, b, pos, "malformed conditional br");
          return;
        }
        target_ok(term.targets[0]);
        target_ok(term.targets[1]);
        if (term.value->type != Type::i1()) {
          report(ViolationKind::TypeMismatch, b, pos, "branch condition must be i1");
          return;
        }
        check_ref(*term.value, b, pos, std::nullopt);
        return;
      case Terminator::Kind::Switch: {
        if (term.targets.size() != 1 || !term.value) {
          report(ViolationKind::BadTerminator, b, pos, "malformed switch");
          return;
        }
        target_ok(term.targets[0]);
        Type st = term.value->type;
        if (!st.is_int()) {
          report(ViolationKind::TypeMismatch, b, pos, "switch scrutinee must be an integer");
          return;
        }
        std::set<u128> values;
        for (const auto& c : term.cases) {
          target_ok(c.target);
          if (c.value != (c.value & width_mask(st.scalar_bits())))
            report(ViolationKind::BadTerminator, b, pos, "case value wider than scrutinee");
          if (!values.insert(c.value).second)
            report(ViolationKind::BadTerminator, b, pos, "duplicate case value");
        }
        check_ref(*term.value, b, pos, std::nullopt);
        return;
      }
    }
  }

  const ModuleUnit& m_;
  const FunctionDef& f_;
  std::vector<Violation>& out_;
  DomTree dom_;
  std::vector<Def> defs_;  // by value id; block == kNoBlock when undefined
};

}  // namespace

std::vector<Violation> verify_module(const ModuleUnit& m) {
  std::vector<Violation> out;
  auto module_issue = [&](ViolationKind k, std::string msg) {
    out.push_back({k, "", 0, 0, std::move(msg)});
  };
  std::unordered_set<std::string> symbols;
  for (const auto& g : m.globals) {
    if (!symbols.insert(g.name).second) module_issue(ViolationKind::NameClash, "duplicate symbol @" + g.name);
    if (!g.type.valid() || g.type.is_void())
      module_issue(ViolationKind::TypeMismatch, "bad type for global @" + g.name);
    else if (g.init && !constant_fits(g.type, *g.init))
      module_issue(ViolationKind::TypeMismatch, "initializer of @" + g.name + " does not fit");
  }
  for (const auto& d : m.decls) {
    if (!symbols.insert(d.name).second) module_issue(ViolationKind::NameClash, "duplicate symbol @" + d.name);
    bool ok = d.ret.valid() && !d.ret.is_array();
    for (Type p : d.params) ok &= p.valid() && !p.is_void();
    if (!ok) module_issue(ViolationKind::TypeMismatch, "bad signature for @" + d.name);
  }
  for (const auto& f : m.functions)
    if (!symbols.insert(f.name).second) module_issue(ViolationKind::NameClash, "duplicate symbol @" + f.name);
  for (const auto& f : m.functions) FunctionVerifier(m, f, out).run();
  return out;
}

}  // namespace matchfuzz
