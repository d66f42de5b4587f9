#include "matchfuzz/target.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <set>
#include <sstream>

#include "matchfuzz/ir_text.hpp"

namespace matchfuzz {

namespace {

bool parse_uint(std::string_view s, unsigned& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

bool parse_i64(std::string_view s, std::int64_t& out) {
  if (s.empty()) return false;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && p == s.data() + s.size();
}

std::vector<std::string> split_ws(std::string_view line) {
  std::vector<std::string> out;
  std::istringstream in{std::string(line)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// TypeClass

bool TypeClass::matches(Type t) const {
  switch (family) {
    case TypeFamily::Any:
      if (lanes == 0) return !t.is_void();
      return t.is_vector();
    case TypeFamily::Array:
      return t.is_array();
    default:
      break;
  }
  TypeKind want = family == TypeFamily::Int    ? TypeKind::Int
                  : family == TypeFamily::Float ? TypeKind::Float
                                                : TypeKind::Addr;
  if (lanes == 0) {
    if (t.kind() != want) return false;
  } else {
    if (!t.is_vector() || t.scalar_kind() != want) return false;
    if (lanes != kAnyLanes && t.lanes() != lanes) return false;
  }
  return bits == 0 || t.scalar_bits() == bits;
}

std::string TypeClass::str() const {
  if (family == TypeFamily::Any) return lanes == 0 ? "any" : "vec";
  if (family == TypeFamily::Array) return "array";
  std::string scalar;
  if (family == TypeFamily::Addr) {
    scalar = "ptr";
  } else {
    scalar = family == TypeFamily::Int ? "i" : "f";
    scalar += bits ? std::to_string(bits) : std::string("*");
  }
  if (lanes == 0) {
    if (family == TypeFamily::Int && bits == 0) return "int";
    if (family == TypeFamily::Float && bits == 0) return "fp";
    return scalar;
  }
  return "v" + (lanes == kAnyLanes ? std::string("*") : std::to_string(lanes)) + scalar;
}

TypeClass TypeClass::parse(std::string_view s) {
  auto bad = [&]() -> ConfigError { return ConfigError("bad type class '" + std::string(s) + "'"); };
  TypeClass c;
  if (s == "any") return c;
  if (s == "vec") {
    c.lanes = kAnyLanes;
    return c;
  }
  if (s == "array") {
    c.family = TypeFamily::Array;
    return c;
  }
  if (s == "int") {
    c.family = TypeFamily::Int;
    return c;
  }
  if (s == "fp") {
    c.family = TypeFamily::Float;
    return c;
  }
  std::string_view rest = s;
  if (!rest.empty() && rest[0] == 'v' && rest != "vec") {
    rest.remove_prefix(1);
    std::size_t k = 0;
    while (k < rest.size() && (std::isdigit(static_cast<unsigned char>(rest[k])) || rest[k] == '*')) ++k;
    std::string_view lanes = rest.substr(0, k);
    rest.remove_prefix(k);
    unsigned n = 0;
    if (lanes == "*") {
      c.lanes = kAnyLanes;
    } else if (parse_uint(lanes, n) && (n == 2 || n == 4 || n == 8 || n == 16)) {
      c.lanes = static_cast<std::uint8_t>(n);
    } else {
      throw bad();
    }
  }
  if (rest == "ptr") {
    c.family = TypeFamily::Addr;
    return c;
  }
  if (rest.size() < 2 || (rest[0] != 'i' && rest[0] != 'f')) throw bad();
  c.family = rest[0] == 'i' ? TypeFamily::Int : TypeFamily::Float;
  std::string_view w = rest.substr(1);
  unsigned bits = 0;
  if (w == "*") {
    c.bits = 0;
  } else if (parse_uint(w, bits) && bits >= 1 && bits <= 128 &&
             (c.family == TypeFamily::Int || bits == 32 || bits == 64)) {
    c.bits = static_cast<std::uint8_t>(bits);
  } else {
    throw bad();
  }
  return c;
}

// ---------------------------------------------------------------------------
// OperandCheck

std::string OperandCheck::str() const {
  std::string s = slot == kResultSlot ? "res" : "op" + std::to_string(slot);
  switch (kind) {
    case Kind::Type: return s + ":" + cls.str();
    case Kind::IsConst: return s + ":const";
    case Kind::ConstRange:
      return s + ":range(" + std::to_string(lo) + "," + std::to_string(hi) + ")";
  }
  return s;
}

OperandCheck OperandCheck::parse(std::string_view s) {
  auto bad = [&]() -> ConfigError { return ConfigError("bad operand check '" + std::string(s) + "'"); };
  auto colon = s.find(':');
  if (colon == std::string_view::npos) throw bad();
  std::string_view slot = s.substr(0, colon);
  std::string_view what = s.substr(colon + 1);
  OperandCheck c;
  if (slot == "res") {
    c.slot = kResultSlot;
  } else if (slot.size() > 2 && slot.substr(0, 2) == "op") {
    unsigned n = 0;
    if (!parse_uint(slot.substr(2), n) || n >= kResultSlot) throw bad();
    c.slot = static_cast<std::uint8_t>(n);
  } else {
    throw bad();
  }
  if (what == "const") {
    c.kind = Kind::IsConst;
  } else if (what.substr(0, 6) == "range(" && what.back() == ')') {
    std::string_view inner = what.substr(6, what.size() - 7);
    auto comma = inner.find(',');
    if (comma == std::string_view::npos) throw bad();
    c.kind = Kind::ConstRange;
    if (!parse_i64(inner.substr(0, comma), c.lo) || !parse_i64(inner.substr(comma + 1), c.hi) ||
        c.lo > c.hi)
      throw bad();
  } else {
    c.kind = Kind::Type;
    c.cls = TypeClass::parse(what);
  }
  return c;
}

// ---------------------------------------------------------------------------
// TargetSpec

std::optional<std::size_t> TargetSpec::feature_index(std::string_view n) const {
  for (std::size_t i = 0; i < features.size(); ++i)
    if (features[i].name == n) return i;
  return std::nullopt;
}

FeatureSet TargetSpec::default_features() const {
  FeatureSet fs;
  for (const auto& f : features) fs.push_back(f.default_on);
  return fs;
}

FeatureSet TargetSpec::with_settings(const std::vector<std::string>& settings) const {
  FeatureSet fs = default_features();
  for (const auto& s : settings) {
    auto eq = s.find('=');
    std::string n = s.substr(0, eq);
    std::string v = eq == std::string::npos ? "on" : s.substr(eq + 1);
    auto idx = feature_index(n);
    if (!idx) throw UnknownFeature("unknown feature '" + n + "' for target " + name);
    if (v == "on" || v == "1" || v == "true") {
      fs[*idx] = true;
    } else if (v == "off" || v == "0" || v == "false") {
      fs[*idx] = false;
    } else {
      throw ConfigError("bad feature value '" + s + "'");
    }
  }
  return fs;
}

bool TargetSpec::enabled(const FeatureSet& fs, const std::vector<std::string>& names) const {
  for (const auto& n : names) {
    auto idx = feature_index(n);
    if (!idx || *idx >= fs.size() || !fs[*idx]) return false;
  }
  return true;
}

bool TargetSpec::vectors_enabled(const FeatureSet& fs) const {
  if (vectors_always) return true;
  return vector_feature && enabled(fs, {*vector_feature});
}

const IntrinsicDef* TargetSpec::find_intrinsic(std::string_view n) const {
  for (const auto& i : intrinsics)
    if (i.decl.name == n) return &i;
  return nullptr;
}

void validate_target(const TargetSpec& t) {
  if (t.name.empty()) throw ConfigError("target has no name");
  if (t.features.size() > 255) throw ConfigError("too many features");
  std::set<std::string> fnames;
  for (const auto& f : t.features)
    if (!fnames.insert(f.name).second) throw ConfigError("duplicate feature " + f.name);
  auto check_features = [&](const std::vector<std::string>& names) {
    for (const auto& n : names)
      if (!fnames.count(n)) throw UnknownFeature("unknown feature '" + n + "'");
  };
  if (t.vector_feature) check_features({*t.vector_feature});
  for (unsigned w : t.widths)
    if (w < 1 || w > 128) throw ConfigError("bad width " + std::to_string(w));
  std::set<std::string> inames;
  for (const auto& i : t.intrinsics) {
    if (!inames.insert(i.decl.name).second) throw ConfigError("duplicate intrinsic " + i.decl.name);
    check_features(i.features);
  }
  std::set<std::uint16_t> ids;
  std::map<std::string, std::set<int>> prios;
  for (const auto& p : t.patterns) {
    if (!ids.insert(p.id).second) throw ConfigError("duplicate pattern id " + std::to_string(p.id));
    if (p.root.empty()) throw ConfigError("pattern without root");
    if (p.emits.empty()) throw ConfigError("pattern " + std::to_string(p.id) + " emits nothing");
    check_features(p.features);
    if (!prios[p.root].insert(p.priority).second)
      throw DuplicatePriority("duplicate priority " + std::to_string(p.priority) + " for root " +
                              p.root);
  }
  if (prios.size() > 0xFFFF) throw ConfigError("too many roots");
}

// ---------------------------------------------------------------------------
// Text format

TargetSpec parse_target(std::string_view text) {
  TargetSpec t;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) -> ConfigError {
    return ConfigError("line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    auto words = split_ws(line);
    if (words.empty()) continue;
    const std::string& kw = words[0];
    if (kw == "target") {
      if (words.size() != 2) throw fail("usage: target <name>");
      t.name = words[1];
    } else if (kw == "feature") {
      if (words.size() != 3 || (words[2] != "on" && words[2] != "off"))
        throw fail("usage: feature <name> on|off");
      t.features.push_back({words[1], words[2] == "on"});
    } else if (kw == "widths") {
      for (std::size_t k = 1; k < words.size(); ++k) {
        unsigned w = 0;
        if (!parse_uint(words[k], w)) throw fail("bad width " + words[k]);
        t.widths.push_back(w);
      }
    } else if (kw == "vectors") {
      if (words.size() != 2) throw fail("usage: vectors always|<feature>");
      if (words[1] == "always")
        t.vectors_always = true;
      else
        t.vector_feature = words[1];
    } else if (kw == "intrinsic") {
      std::string body = line.substr(line.find("intrinsic") + 9);
      IntrinsicDef def;
      if (auto r = body.find(" requires "); r != std::string::npos) {
        auto feats = split_ws(body.substr(r + 10));
        def.features = feats;
        body.erase(r);
      }
      try {
        def.decl = parse_decl(body);
      } catch (const SyntaxError& e) {
        throw fail(std::string("bad intrinsic declaration: ") + e.what());
      }
      t.intrinsics.push_back(std::move(def));
    } else if (kw == "pattern") {
      if (words.size() < 6) throw fail("usage: pattern <id> <prio> <root> [checks] [requires f] emits <mop>");
      PatternDef p;
      unsigned id = 0;
      std::int64_t prio = 0;
      if (!parse_uint(words[1], id) || id > 0xFFFF) throw fail("bad pattern id");
      if (!parse_i64(words[2], prio)) throw fail("bad priority");
      p.id = static_cast<std::uint16_t>(id);
      p.priority = static_cast<int>(prio);
      p.root = words[3];
      std::size_t k = 4;
      bool in_requires = false;
      for (; k < words.size() && words[k] != "emits"; ++k) {
        if (words[k] == "requires") {
          in_requires = true;
        } else if (in_requires) {
          p.features.push_back(words[k]);
        } else {
          try {
            p.checks.push_back(OperandCheck::parse(words[k]));
          } catch (const ConfigError& e) {
            throw fail(e.what());
          }
        }
      }
      if (k + 2 != words.size()) throw fail("expected 'emits <mop>' at end of pattern");
      p.emits = words[k + 1];
      t.patterns.push_back(std::move(p));
    } else if (kw == "fault") {
      FaultSpec f;
      if (words.size() < 4) throw fail("usage: fault abort|hang [opcode <root>] type <class>");
      if (words[1] == "abort")
        f.effect = FaultEffect::Abort;
      else if (words[1] == "hang")
        f.effect = FaultEffect::Hang;
      else
        throw fail("bad fault effect " + words[1]);
      std::size_t k = 2;
      if (words[k] == "opcode") {
        if (k + 1 >= words.size()) throw fail("missing opcode");
        f.root = words[k + 1];
        k += 2;
      }
      if (k + 2 != words.size() || words[k] != "type") throw fail("expected 'type <class>'");
      try {
        f.type = TypeClass::parse(words[k + 1]);
      } catch (const ConfigError& e) {
        throw fail(e.what());
      }
      t.faults.push_back(std::move(f));
    } else {
      throw fail("unknown directive '" + kw + "'");
    }
  }
  validate_target(t);
  return t;
}

std::string print_target(const TargetSpec& t) {
  std::string out = "target " + t.name + "\n";
  for (const auto& f : t.features) out += "feature " + f.name + (f.default_on ? " on\n" : " off\n");
  out += "widths";
  for (unsigned w : t.widths) out += " " + std::to_string(w);
  out += "\n";
  if (t.vectors_always) out += "vectors always\n";
  else if (t.vector_feature) out += "vectors " + *t.vector_feature + "\n";
  for (const auto& i : t.intrinsics) {
    out += "intrinsic " + print_decl(i.decl);
    if (!i.features.empty()) {
      out += " requires";
      for (const auto& f : i.features) out += " " + f;
    }
    out += "\n";
  }
  for (const auto& p : t.patterns) {
    out += "pattern " + std::to_string(p.id) + " " + std::to_string(p.priority) + " " + p.root;
    for (const auto& c : p.checks) out += " " + c.str();
    if (!p.features.empty()) {
      out += " requires";
      for (const auto& f : p.features) out += " " + f;
    }
    out += " emits " + p.emits + "\n";
  }
  for (const auto& f : t.faults) {
    out += std::string("fault ") + (f.effect == FaultEffect::Abort ? "abort" : "hang");
    if (f.root) out += " opcode " + *f.root;
    out += " type " + f.type.str() + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// Built-in targets

namespace {

class Builder {
 public:
  explicit Builder(TargetSpec& t) : t_(t) {
    for (const auto& p : t_.patterns) next_id_ = std::max<unsigned>(next_id_, p.id + 1u);
  }

  // Adds one pattern. Checks are whitespace-separated tokens.
  void add(const std::string& root, int prio, std::string_view checks, const std::string& mop,
           std::vector<std::string> features = {}) {
    PatternDef p;
    p.id = static_cast<std::uint16_t>(next_id_++);
    p.priority = prio;
    p.root = root;
    for (const auto& tok : split_ws(checks)) p.checks.push_back(OperandCheck::parse(tok));
    p.features = std::move(features);
    p.emits = mop;
    t_.patterns.push_back(std::move(p));
  }

 private:
  TargetSpec& t_;
  unsigned next_id_ = 0;
};

// Descending priority counter per root.
struct Prio {
  int next = 1000;
  int operator()() { return next--; }
};

const std::vector<unsigned> kScalarWidths = {8, 16, 32, 64};

std::string w(unsigned bits) { return std::to_string(bits); }

// Strength-reduced forms for particular immediates.
template <typename P>
void add_immediate_forms(Builder& b, P& p, std::string_view op, unsigned bits) {
  const std::string res = "res:i" + w(bits);
  auto imm = [&](long long v, const std::string& mop) {
    b.add(std::string(op), p(), res + " op1:range(" + std::to_string(v) + "," + std::to_string(v) + ")", mop + w(bits));
  };
  if (op == "add") imm(-1, "DEC_ADD");
  if (op == "sub") imm(-1, "INC_SUB");
  if (op == "mul" && bits >= 16) {
    imm(3, "LEA_X3_");
    imm(5, "LEA_X5_");
    imm(9, "LEA_X9_");
    imm(2, "ADD_SELF");
  }
  if (op == "and" && bits >= 16) imm(255, "MOVZX8_AND");
  if (op == "and" && bits >= 32) imm(65535, "MOVZX16_AND");
  if (op == "and" && bits == 64) imm(4294967295LL, "MOV32_ZEXT");
  if (op == "shl") imm(1, "ADD_SELF_SHL");
  if (op == "shl" && bits >= 32) {
    imm(2, "LEA_SCALE4_");
    imm(3, "LEA_SCALE8_");
  }
  if (op == "udiv" || op == "urem") {
    for (long long v : {2LL, 4LL, 8LL}) imm(v, std::string(op == "udiv" ? "SHR_DIV" : "AND_REM") + std::to_string(v) + "_");
  }
  if (op == "sdiv") imm(-1, "NEG_SDIV");
  if (op == "srem") imm(1, "ZERO_SREM");
}

void add_scalar_patterns(Builder& b) {
  struct IntOp {
    const char* op;
    const char* mop;
    bool imm8;
    bool shift;
    bool logic;
  };
  const IntOp int_ops[] = {
      {"add", "ADD", true, false, false},  {"sub", "SUB", true, false, false},
      {"mul", "IMUL", true, false, false}, {"sdiv", "IDIV", false, false, false},
      {"udiv", "DIV", false, false, false}, {"srem", "IREM", false, false, false},
      {"urem", "UREM", false, false, false}, {"shl", "SHL", false, true, false},
      {"lshr", "SHR", false, true, false}, {"ashr", "SAR", false, true, false},
      {"and", "AND", true, false, true},   {"or", "OR", true, false, true},
      {"xor", "XOR", true, false, true},
  };
  for (const auto& o : int_ops) {
    Prio p;
    for (unsigned bits : kScalarWidths) {
      std::string mop = std::string(o.mop) + w(bits);
      std::string res = "res:i" + w(bits);
      add_immediate_forms(b, p, o.op, bits);
      if (std::string(o.op) == "add") b.add(o.op, p(), res + " op1:range(1,1)", "INC" + w(bits) + "r");
      if (std::string(o.op) == "sub") b.add(o.op, p(), res + " op1:range(1,1)", "DEC" + w(bits) + "r");
      if (std::string(o.op) == "xor") b.add(o.op, p(), res + " op1:range(-1,-1)", "NOT" + w(bits) + "r");
      if (o.imm8) b.add(o.op, p(), res + " op1:range(-128,127)", mop + "ri8");
      if (o.imm8 && bits >= 32) b.add(o.op, p(), res + " op1:const", mop + "ri32");
      if (o.shift) b.add(o.op, p(), res + " op1:const", mop + "ri");
      b.add(o.op, p(), res, mop + "rr");
    }
    if (o.logic) b.add(o.op, p(), "res:i1", std::string(o.mop) + "1rr");
    b.add(o.op, 0, "", std::string(o.mop) + "_EXPAND");
  }

  struct FpOp {
    const char* op;
    const char* mop;
  };
  const FpOp fp_ops[] = {{"fadd", "ADDS"}, {"fsub", "SUBS"}, {"fmul", "MULS"}, {"fdiv", "DIVS"}};
  for (const auto& o : fp_ops) {
    Prio p;
    for (auto [bits, sfx] : {std::pair{32u, "S"}, std::pair{64u, "D"}}) {
      b.add(o.op, p(), "res:f" + w(bits) + " op1:const", std::string(o.mop) + sfx + "rm");
      b.add(o.op, p(), "res:f" + w(bits), std::string(o.mop) + sfx + "rr");
    }
    b.add(o.op, 0, "", std::string(o.mop) + "_LIBCALL");
  }
  {
    Prio p;
    b.add("frem", p(), "res:f32", "FMODF_CALL");
    b.add("frem", p(), "res:f64", "FMOD_CALL");
    b.add("frem", 0, "", "FREM_LIBCALL");
  }
  {
    Prio p;
    b.add("fneg", p(), "res:f32", "XORPSrm");
    b.add("fneg", p(), "res:f64", "XORPDrm");
    b.add("fneg", 0, "", "FNEG_EXPAND");
  }

  // Integer casts over every ordered width pair.
  const std::vector<unsigned> cast_widths = {1, 8, 16, 32, 64};
  for (const char* op : {"trunc", "zext", "sext"}) {
    Prio p;
    bool narrowing = std::string(op) == "trunc";
    for (unsigned s : cast_widths) {
      for (unsigned d : cast_widths) {
        if (narrowing ? d >= s : d <= s) continue;
        std::string mop = narrowing ? "TRUNC" + w(s) + "to" + w(d)
                          : std::string(op) == "zext" ? "MOVZX" + w(d) + "rr" + w(s)
                                                       : "MOVSX" + w(d) + "rr" + w(s);
        b.add(op, p(), "op0:i" + w(s) + " res:i" + w(d), mop);
      }
    }
    b.add(op, 0, "", std::string(op) == "trunc" ? "TRUNC_EXPAND" : std::string(op) == "zext" ? "ZEXT_EXPAND" : "SEXT_EXPAND");
  }
  {
    Prio p;
    b.add("fptrunc", p(), "op0:f64 res:f32", "CVTSD2SSrr");
    b.add("fptrunc", 0, "", "FPTRUNC_EXPAND");
  }
  for (auto [op, u] : {std::pair{"fptoui", "U"}, std::pair{"fptosi", ""}}) {
    Prio p;
    for (auto [fb, fs] : {std::pair{32u, "SS"}, std::pair{64u, "SD"}})
      for (unsigned ib : kScalarWidths)
        b.add(op, p(), "op0:f" + w(fb) + " res:i" + w(ib), std::string("CVTT") + fs + "2" + u + "SI" + w(ib) + "rr");
    b.add(op, 0, "", std::string(op) == "fptoui" ? "FPTOUI_EXPAND" : "FPTOSI_EXPAND");
  }
  for (auto [op, u] : {std::pair{"uitofp", "U"}, std::pair{"sitofp", ""}}) {
    Prio p;
    for (auto [fb, fs] : {std::pair{32u, "SS"}, std::pair{64u, "SD"}})
      for (unsigned ib : kScalarWidths)
        b.add(op, p(), "op0:i" + w(ib) + " res:f" + w(fb), std::string("CVT") + u + "SI2" + fs + w(ib) + "rr");
    b.add(op, 0, "", std::string(op) == "uitofp" ? "UITOFP_EXPAND" : "SITOFP_EXPAND");
  }
  {
    Prio p;
    for (unsigned ib : kScalarWidths) b.add("ptrtoint", p(), "res:i" + w(ib), "PTR2INT" + w(ib));
    b.add("ptrtoint", 0, "", "PTRTOINT_EXPAND");
  }
  {
    Prio p;
    for (unsigned ib : kScalarWidths) b.add("inttoptr", p(), "op0:i" + w(ib), "INT2PTR" + w(ib));
    b.add("inttoptr", 0, "", "INTTOPTR_EXPAND");
  }
  {
    Prio p;
    b.add("bitcast", p(), "op0:f32 res:i32", "MOVSS2DIrr");
    b.add("bitcast", p(), "op0:i32 res:f32", "MOVDI2SSrr");
    b.add("bitcast", p(), "op0:f64 res:i64", "MOVSDto64rr");
    b.add("bitcast", p(), "op0:i64 res:f64", "MOV64toSDrr");
    b.add("bitcast", p(), "op0:ptr res:ptr", "COPY_PTR");
    b.add("bitcast", 0, "", "BITCAST_COPY");
  }
  {
    Prio p;
    for (unsigned bits : kScalarWidths) {
      std::string op0 = "op0:i" + w(bits);
      b.add("icmp", p(), op0 + " op1:range(0,0)", "TEST" + w(bits) + "rr");
      b.add("icmp", p(), op0 + " op1:range(-128,127)", "CMP" + w(bits) + "ri8");
      b.add("icmp", p(), op0, "CMP" + w(bits) + "rr");
    }
    b.add("icmp", p(), "op0:i1", "CMP1rr");
    b.add("icmp", 0, "", "ICMP_EXPAND");
  }
  {
    Prio p;
    b.add("fcmp", p(), "op0:f32", "UCOMISSrr");
    b.add("fcmp", p(), "op0:f64", "UCOMISDrr");
    b.add("fcmp", 0, "", "FCMP_EXPAND");
  }
  {
    Prio p;
    b.add("select", p(), "op0:const", "SELECT_FOLD");
    for (unsigned bits : kScalarWidths) b.add("select", p(), "res:i" + w(bits), "CMOV" + w(bits) + "rr");
    b.add("select", p(), "res:i1", "SELECT_I1");
    b.add("select", p(), "res:f32", "SELECT_FR32");
    b.add("select", p(), "res:f64", "SELECT_FR64");
    b.add("select", p(), "res:ptr", "CMOV64rr_ptr");
    b.add("select", p(), "res:array", "SELECT_AGG");
    b.add("select", 0, "", "SELECT_EXPAND");
  }
  for (const char* op : {"extractvalue", "insertvalue"}) {
    Prio p;
    std::string up = std::string(op) == "extractvalue" ? "EXTRACTVALUE" : "INSERTVALUE";
    std::string slot = std::string(op) == "extractvalue" ? "res" : "op1";
    b.add(op, p(), slot + ":int", up + "_GPR");
    b.add(op, p(), slot + ":fp", up + "_FPR");
    b.add(op, p(), slot + ":ptr", up + "_PTR");
    b.add(op, 0, "", up + "_MEM");
  }
  {
    Prio p;
    b.add("getelementptr", p(), "op1:range(0,0)", "LEA64r");
    b.add("getelementptr", p(), "op1:range(-2147483648,2147483647)", "LEA64ri32");
    b.add("getelementptr", p(), "op1:i64", "LEA64rr");
    b.add("getelementptr", p(), "op1:i32", "LEA64rr32");
    b.add("getelementptr", 0, "", "GEP_EXPAND");
  }
  {
    Prio p;
    b.add("alloca", p(), "", "FRAME_INDEX");
  }
  {
    Prio p;
    for (unsigned bits : kScalarWidths) b.add("load", p(), "res:i" + w(bits), "MOV" + w(bits) + "rm");
    b.add("load", p(), "res:i1", "MOV8rm_i1");
    b.add("load", p(), "res:f32", "MOVSSrm");
    b.add("load", p(), "res:f64", "MOVSDrm");
    b.add("load", p(), "res:ptr", "MOV64rm_ptr");
    b.add("load", p(), "res:array", "LOAD_AGG");
    b.add("load", 0, "", "LOAD_EXPAND");
  }
  {
    Prio p;
    for (unsigned bits : kScalarWidths) {
      b.add("store", p(), "op0:i" + w(bits) + " op0:const", "MOV" + w(bits) + "mi");
      b.add("store", p(), "op0:i" + w(bits), "MOV" + w(bits) + "mr");
    }
    b.add("store", p(), "op0:f32", "MOVSSmr");
    b.add("store", p(), "op0:f64", "MOVSDmr");
    b.add("store", p(), "op0:ptr", "MOV64mr_ptr");
    b.add("store", p(), "op0:array", "STORE_AGG");
    b.add("store", 0, "", "STORE_EXPAND");
  }
  {
    Prio p;
    b.add("call", p(), "res:int", "CALL64pcrel32_gpr");
    b.add("call", p(), "res:fp", "CALL64pcrel32_fpr");
    b.add("call", 0, "", "CALL64pcrel32");
  }
  {
    Prio p;
    b.add("phi", p(), "res:int", "PHI_GPR");
    b.add("phi", p(), "res:fp", "PHI_FPR");
    b.add("phi", p(), "res:ptr", "PHI_PTR");
    b.add("phi", 0, "", "PHI");
  }
  {
    Prio p;
    b.add("ret", p(), "op0:int", "RET_GPR");
    b.add("ret", p(), "op0:fp", "RET_FPR");
    b.add("ret", p(), "op0:ptr", "RET_PTR");
    b.add("ret", p(), "op0:array", "RET_AGG");
    b.add("ret", 0, "", "RET");
  }
  {
    Prio p;
    b.add("br", 0, "", "JMP_1");
    b.add("br-cond", p(), "op0:const", "JMP_FOLD");
    b.add("br-cond", 0, "", "JCC_1");
    b.add("switch", p(), "op0:i8", "JUMP_TABLE8");
    b.add("switch", p(), "op0:i32", "JUMP_TABLE32");
    b.add("switch", p(), "op0:const", "SWITCH_FOLD");
    b.add("switch", 0, "", "SWITCH_EXPAND");
  }
}

void add_vector_patterns(Builder& b) {
  const std::vector<std::string> simd = {"simd"};
  struct Shape {
    const char* cls;
    const char* sfx;
  };
  const Shape ints[] = {{"v16i8", "B"}, {"v8i16", "W"}, {"v4i32", "D"}, {"v2i64", "Q"}};
  const Shape fps[] = {{"v4f32", "PS"}, {"v2f64", "PD"}};

  struct VecOp {
    const char* op;
    const char* mop;
    std::vector<int> shapes;  // indices into ints that have a native form
  };
  const VecOp vops[] = {
      {"add", "PADD", {0, 1, 2, 3}}, {"sub", "PSUB", {0, 1, 2, 3}}, {"mul", "PMULL", {1, 2}},
      {"sdiv", "", {}},              {"udiv", "", {}},              {"srem", "", {}},
      {"urem", "", {}},              {"shl", "PSLL", {1, 2, 3}},    {"lshr", "PSRL", {1, 2, 3}},
      {"ashr", "PSRA", {1, 2}},      {"and", "PAND", {0, 1, 2, 3}}, {"or", "POR", {0, 1, 2, 3}},
      {"xor", "PXOR", {0, 1, 2, 3}},
  };
  for (const auto& o : vops) {
    Prio p;
    std::string root = std::string(o.op) + "-vector";
    for (int s : o.shapes) {
      if (std::string(o.op) == "shl" || std::string(o.op) == "lshr" || std::string(o.op) == "ashr")
        b.add(root, p(), std::string("res:") + ints[s].cls + " op1:const", std::string(o.mop) + ints[s].sfx + "ri", simd);
      b.add(root, p(), std::string("res:") + ints[s].cls, std::string(o.mop) + ints[s].sfx + "rr", simd);
    }
    std::string up = std::string(o.op);
    std::transform(up.begin(), up.end(), up.begin(), ::toupper);
    b.add(root, 0, "", up + "_VSCALARIZE", simd);
  }
  for (const char* op : {"fadd", "fsub", "fmul", "fdiv", "frem", "fneg"}) {
    Prio p;
    std::string root = std::string(op) + "-vector";
    std::string up = std::string(op).substr(1);
    std::transform(up.begin(), up.end(), up.begin(), ::toupper);
    if (std::string(op) != "frem")
      for (const auto& s : fps) b.add(root, p(), std::string("res:") + s.cls, up + s.sfx + "rr", simd);
    b.add(root, 0, "", "F" + up + "_VSCALARIZE", simd);
  }
  {
    Prio p;
    b.add("extractelement", p(), "op0:v4i32 op1:range(0,0)", "MOVPDI2DIrr", simd);
    for (const auto& s : ints)
      b.add("extractelement", p(), std::string("op0:") + s.cls + " op1:const", std::string("PEXTR") + s.sfx + "rri", simd);
    b.add("extractelement", p(), "op0:v4f32 op1:range(0,0)", "COPY_SS", simd);
    b.add("extractelement", p(), "op0:v4f32 op1:const", "EXTRACTPSrri", simd);
    b.add("extractelement", p(), "op0:v2f64 op1:const", "UNPCKHPDrr", simd);
    b.add("extractelement", p(), "op1:const", "EXTRACT_CONST_IDX", simd);
    b.add("extractelement", 0, "", "EXTRACT_VAR_IDX", simd);
  }
  {
    Prio p;
    for (const auto& s : ints)
      b.add("insertelement", p(), std::string("op0:") + s.cls + " op2:const", std::string("PINSR") + s.sfx + "rri", simd);
    b.add("insertelement", p(), "op0:v4f32 op2:range(0,0)", "MOVSSrr", simd);
    b.add("insertelement", p(), "op0:v4f32 op2:const", "INSERTPSrri", simd);
    b.add("insertelement", p(), "op2:const", "INSERT_CONST_IDX", simd);
    b.add("insertelement", 0, "", "INSERT_VAR_IDX", simd);
  }
  {
    Prio p;
    b.add("shufflevector", p(), "res:v4i32 op1:const", "PSHUFDri", simd);
    b.add("shufflevector", p(), "res:v16i8", "PSHUFBrr", simd);
    b.add("shufflevector", p(), "res:v8i16", "PSHUFLWri", simd);
    b.add("shufflevector", p(), "res:v4i32", "PUNPCKLDQrr", simd);
    b.add("shufflevector", p(), "res:v4f32", "SHUFPSrri", simd);
    b.add("shufflevector", p(), "res:v2f64", "SHUFPDrri", simd);
    b.add("shufflevector", 0, "", "SHUFFLE_EXPAND", simd);
  }
  {
    Prio p;
    b.add("trunc-vector", p(), "op0:v8i16 res:v8i8", "PACKUSWBrr", simd);
    b.add("trunc-vector", p(), "op0:v4i32 res:v4i16", "PACKUSDWrr", simd);
    b.add("trunc-vector", 0, "", "TRUNC_VEXPAND", simd);
    Prio q;
    b.add("zext-vector", q(), "op0:v8i8 res:v8i16", "PMOVZXBWrr", simd);
    b.add("zext-vector", q(), "op0:v4i16 res:v4i32", "PMOVZXWDrr", simd);
    b.add("zext-vector", q(), "op0:v2i32 res:v2i64", "PMOVZXDQrr", simd);
    b.add("zext-vector", 0, "", "ZEXT_VEXPAND", simd);
    Prio r;
    b.add("sext-vector", r(), "op0:v8i8 res:v8i16", "PMOVSXBWrr", simd);
    b.add("sext-vector", r(), "op0:v4i16 res:v4i32", "PMOVSXWDrr", simd);
    b.add("sext-vector", r(), "op0:v2i32 res:v2i64", "PMOVSXDQrr", simd);
    b.add("sext-vector", 0, "", "SEXT_VEXPAND", simd);
  }
  for (auto [op, mop] : {std::pair{"fptrunc", "CVTPD2PSrr"}, std::pair{"fptoui", "CVTTPS2UDQrr"},
                         std::pair{"fptosi", "CVTTPS2DQrr"}, std::pair{"uitofp", "CVTUDQ2PSrr"},
                         std::pair{"sitofp", "CVTDQ2PSrr"}, std::pair{"ptrtoint", "VPTR2INT"},
                         std::pair{"inttoptr", "VINT2PTR"}}) {
    Prio p;
    std::string root = std::string(op) + "-vector";
    std::string up = op;
    std::transform(up.begin(), up.end(), up.begin(), ::toupper);
    if (std::string(op) == "fptrunc")
      b.add(root, p(), "op0:v2f64", mop, simd);
    else if (std::string(op) == "fptoui" || std::string(op) == "fptosi")
      b.add(root, p(), "op0:v4f32 res:v4i32", mop, simd);
    else if (std::string(op) == "uitofp" || std::string(op) == "sitofp")
      b.add(root, p(), "op0:v4i32 res:v4f32", mop, simd);
    else
      b.add(root, p(), "res:v2i64", mop, simd);
    b.add(root, 0, "", up + "_VEXPAND", simd);
  }
  {
    Prio p;
    b.add("bitcast-vector", p(), "op0:v4i32 res:v4f32", "COPY_V4I32_V4F32", simd);
    b.add("bitcast-vector", p(), "op0:v2i64 res:v2f64", "COPY_V2I64_V2F64", simd);
    b.add("bitcast-vector", p(), "res:v16i8", "COPY_TO_V16I8", simd);
    b.add("bitcast-vector", 0, "", "BITCAST_VCOPY", simd);
  }
  {
    Prio p;
    b.add("icmp-vector", p(), "op0:v16i8", "PCMPB", simd);
    b.add("icmp-vector", p(), "op0:v8i16", "PCMPW", simd);
    b.add("icmp-vector", p(), "op0:v4i32", "PCMPD", simd);
    b.add("icmp-vector", p(), "op0:v2i64", "PCMPQ", simd);
    b.add("icmp-vector", 0, "", "ICMP_VEXPAND", simd);
    Prio q;
    b.add("fcmp-vector", q(), "op0:v4f32", "CMPPSrri", simd);
    b.add("fcmp-vector", q(), "op0:v2f64", "CMPPDrri", simd);
    b.add("fcmp-vector", 0, "", "FCMP_VEXPAND", simd);
    Prio r;
    b.add("select-vector", r(), "res:v16i8", "PBLENDVBrr", simd);
    b.add("select-vector", r(), "res:v4f32", "BLENDVPSrr", simd);
    b.add("select-vector", r(), "res:v2f64", "BLENDVPDrr", simd);
    b.add("select-vector", 0, "", "SELECT_VEXPAND", simd);
  }
  {
    Prio p;
    for (const auto& s : ints) b.add("load-vector", p(), std::string("res:") + s.cls, std::string("MOVDQA") + s.sfx + "rm", simd);
    for (const auto& s : fps) b.add("load-vector", p(), std::string("res:") + s.cls, std::string("MOVA") + s.sfx + "rm", simd);
    b.add("load-vector", 0, "", "LOAD_VEXPAND", simd);
    Prio q;
    for (const auto& s : ints) b.add("store-vector", q(), std::string("op0:") + s.cls, std::string("MOVDQA") + s.sfx + "mr", simd);
    for (const auto& s : fps) b.add("store-vector", q(), std::string("op0:") + s.cls, std::string("MOVA") + s.sfx + "mr", simd);
    b.add("store-vector", 0, "", "STORE_VEXPAND", simd);
    Prio r;
    b.add("phi-vector", r(), "res:v*i*", "PHI_VR128I", simd);
    b.add("phi-vector", 0, "", "PHI_VR128", simd);
    b.add("ret", 900, "op0:vec", "RET_VR128", simd);
  }
}

void add_vex_intrinsics(TargetSpec& t, Builder& b) {
  auto decl = [](const char* text) { return parse_decl(text); };
  t.intrinsics.push_back({decl("declare i64 @llvm.smax.i64(i64, i64)"), {}});
  t.intrinsics.push_back({decl("declare i32 @llvm.umin.i32(i32, i32)"), {}});
  t.intrinsics.push_back({decl("declare i32 @llvm.ctpop.i32(i32)"), {}});
  t.intrinsics.push_back({decl("declare i32 @llvm.bswap.i32(i32)"), {}});
  t.intrinsics.push_back({decl("declare f64 @llvm.fma.f64(f64, f64, f64)"), {}});
  t.intrinsics.push_back({decl("declare <4 x i32> @llvm.vex.pmaddwd(<8 x i16>, <8 x i16>)"), {"simd"}});
  t.intrinsics.push_back({decl("declare <2 x i64> @llvm.vex.psadbw(<16 x i8>, <16 x i8>)"), {"simd"}});

  Prio p;
  b.add("llvm.smax.i64", p(), "op1:range(0,0)", "SMAX64r0");
  b.add("llvm.smax.i64", p(), "op1:const", "SMAX64ri");
  b.add("llvm.smax.i64", p(), "", "CMOVL64rr_smax");
  Prio q;
  b.add("llvm.umin.i32", q(), "op1:const", "UMIN32ri");
  b.add("llvm.umin.i32", q(), "", "CMOVB32rr_umin");
  Prio r;
  b.add("llvm.ctpop.i32", r(), "op0:const", "CTPOP_FOLD");
  b.add("llvm.ctpop.i32", r(), "", "POPCNT32rr", {"popcnt"});
  b.add("llvm.ctpop.i32", 0, "", "CTPOP_EXPAND");
  Prio s;
  b.add("llvm.bswap.i32", s(), "", "BSWAP32r");
  Prio u;
  b.add("llvm.fma.f64", u(), "op2:const", "VFMADD213SDm", {"simd"});
  b.add("llvm.fma.f64", u(), "", "VFMADD231SDr", {"simd"});
  b.add("llvm.fma.f64", 0, "", "FMA_LIBCALL");
  Prio v;
  b.add("llvm.vex.pmaddwd", v(), "op1:const", "PMADDWDrm", {"simd"});
  b.add("llvm.vex.pmaddwd", v(), "", "PMADDWDrr", {"simd"});
  Prio x;
  b.add("llvm.vex.psadbw", x(), "", "PSADBWrr", {"simd"});
}

std::vector<TargetSpec> make_builtins() {
  TargetSpec alpha;
  alpha.name = "alpha";
  alpha.widths = {1, 8, 16, 32, 64};
  {
    Builder b(alpha);
    add_scalar_patterns(b);
  }

  TargetSpec vex = alpha;
  vex.name = "vex";
  vex.features = {{"simd", true}, {"popcnt", true}};
  vex.vector_feature = "simd";
  {
    Builder b(vex);
    add_vector_patterns(b);
    add_vex_intrinsics(vex, b);
  }

  TargetSpec i20 = vex;
  i20.name = "vex-i20";
  i20.widths = {1, 8, 16, 20, 32, 64};
  {
    Builder b(i20);
    Prio p;
    p.next = 2000;
    b.add("add", p(), "res:i20", "ADD20rr_promote");
    b.add("mul", p(), "res:i20", "IMUL20rr_promote");
  }
  // First matching fault wins.
  i20.faults.push_back({FaultEffect::Hang, std::string("udiv"), TypeClass::parse("i20")});
  i20.faults.push_back({FaultEffect::Abort, std::nullopt, TypeClass::parse("i20")});

  for (const auto& t : {alpha, vex, i20}) validate_target(t);
  return {alpha, vex, i20};
}

}  // namespace

const std::vector<TargetSpec>& builtin_targets() {
  static const std::vector<TargetSpec> targets = make_builtins();
  return targets;
}

const TargetSpec* find_builtin_target(std::string_view name) {
  for (const auto& t : builtin_targets())
    if (t.name == name) return &t;
  return nullptr;
}

}  // namespace matchfuzz
