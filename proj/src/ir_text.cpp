#include "matchfuzz/ir_text.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <unordered_map>
#include <utility>

namespace matchfuzz {

namespace {

std::string to_decimal(u128 v) {
  if (v == 0) return "0";
  std::string out;
  while (v) {
    out.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string to_hex(u128 v, unsigned bits) {
  static constexpr char kDigits[] = "0123456789ABCDEF";
  std::string out = "0x";
  for (int nib = static_cast<int>(bits / 4) - 1; nib >= 0; --nib)
    out.push_back(kDigits[static_cast<int>((v >> (nib * 4)) & 0xF)]);
  return out;
}

// ---------------------------------------------------------------------------
// Lexer

enum class Tok { Ident, Local, Global, Int, Hex, Punct, End };

struct Token {
  Tok kind = Tok::End;
  std::string text;
  int line = 1;
  int col = 1;
};

bool name_char(char c) {
  return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' ||
         c == '$' || c == '-';
}

std::vector<Token> lex(std::string_view src) {
  std::vector<Token> out;
  int line = 1, col = 1;
  std::size_t i = 0;
  auto advance = [&](std::size_t n) {
    for (std::size_t k = 0; k < n && i < src.size(); ++k, ++i) {
      if (src[i] == '\n') {
        ++line;
        col = 1;
      } else {
        ++col;
      }
    }
  };
  while (i < src.size()) {
    char c = src[i];
    if (std::isspace(static_cast<unsigned char>(c))) {
      advance(1);
      continue;
    }
    if (c == ';') {
      while (i < src.size() && src[i] != '\n') advance(1);
      continue;
    }
    Token t;
    t.line = line;
    t.col = col;
    std::size_t start = i;
    if (c == '%' || c == '@') {
      std::size_t j = i + 1;
      while (j < src.size() && name_char(src[j])) ++j;
      if (j == i + 1) throw SyntaxError(line, col, "empty value name");
      t.kind = c == '%' ? Tok::Local : Tok::Global;
      t.text = std::string(src.substr(i + 1, j - i - 1));
      advance(j - start);
    } else if (std::isdigit(static_cast<unsigned char>(c)) ||
               (c == '-' && i + 1 < src.size() &&
                std::isdigit(static_cast<unsigned char>(src[i + 1])))) {
      std::size_t j = i + 1;
      if (c == '0' && j < src.size() && (src[j] == 'x' || src[j] == 'X')) {
        ++j;
        while (j < src.size() && std::isxdigit(static_cast<unsigned char>(src[j]))) ++j;
        t.kind = Tok::Hex;
      } else {
        while (j < src.size() && std::isdigit(static_cast<unsigned char>(src[j]))) ++j;
        t.kind = Tok::Int;
      }
      t.text = std::string(src.substr(i, j - i));
      advance(j - start);
    } else if (std::isalpha(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '$') {
      std::size_t j = i + 1;
      while (j < src.size() && name_char(src[j]) && src[j] != '-') ++j;
      t.kind = Tok::Ident;
      t.text = std::string(src.substr(i, j - i));
      advance(j - start);
    } else if (std::string_view("=,()[]{}<>:").find(c) != std::string_view::npos) {
      t.kind = Tok::Punct;
      t.text = std::string(1, c);
      advance(1);
    } else {
      throw SyntaxError(line, col, std::string("unexpected character '") + c + "'");
    }
    out.push_back(std::move(t));
  }
  Token end;
  end.line = line;
  end.col = col;
  out.push_back(end);
  return out;
}

// ---------------------------------------------------------------------------
// Parser

class Parser {
 public:
  explicit Parser(std::string_view text) : toks_(lex(text)) {}

  ModuleUnit module() {
    prescan_globals();
    while (!at_end()) {
      const Token& t = peek();
      if (t.kind == Tok::Global) {
        parse_global();
      } else if (is_ident("declare")) {
        next();
        module_.decls.push_back(parse_decl_rest());
      } else if (is_ident("define")) {
        parse_define();
      } else {
        fail(t, "expected 'define', 'declare' or a global definition");
      }
    }
    return std::move(module_);
  }

  Type type() {
    const Token& t = peek();
    if (is_punct("<")) {
      next();
      unsigned n = count_token("vector lane count");
      expect_ident("x");
      Type lane = type();
      expect_punct(">");
      if (!lane.is_scalar()) fail(t, "vector lanes must be scalar");
      Type v = Type::vector(lane, n);
      if (!v.valid()) fail(t, "invalid vector type " + v.str());
      return v;
    }
    if (is_punct("[")) {
      next();
      unsigned n = count_token("array length");
      expect_ident("x");
      Type elem = type();
      expect_punct("]");
      if (elem.is_void() || elem.is_array()) fail(t, "invalid array element type");
      Type a = Type::array(elem, n);
      if (!a.valid()) fail(t, "invalid array type " + a.str());
      return a;
    }
    if (t.kind != Tok::Ident) fail(t, "expected a type");
    std::string s = t.text;
    next();
    if (s == "void") return Type::void_type();
    if (s == "ptr") return Type::addr();
    if (s == "f32") return Type::float_type(32);
    if (s == "f64") return Type::float_type(64);
    if (s.size() > 1 && s[0] == 'i' &&
        std::all_of(s.begin() + 1, s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      unsigned w = static_cast<unsigned>(std::stoul(s.substr(1)));
      if (w < 1 || w > 128) fail(t, "integer width out of range: " + s);
      return Type::int_type(w);
    }
    fail(t, "unknown type '" + s + "'");
  }

  IntrinsicDecl parse_decl_rest() {
    IntrinsicDecl d;
    d.ret = type();
    const Token& name = peek();
    if (name.kind != Tok::Global) fail(name, "expected intrinsic name");
    d.name = name.text;
    next();
    expect_punct("(");
    if (!is_punct(")")) {
      do {
        d.params.push_back(type());
      } while (accept_punct(","));
    }
    expect_punct(")");
    return d;
  }

  bool at_end() const { return toks_[pos_].kind == Tok::End; }

 private:
  [[noreturn]] void fail(const Token& t, const std::string& msg) const {
    throw SyntaxError(t.line, t.col, msg);
  }

  const Token& peek(std::size_t ahead = 0) const {
    return toks_[std::min(pos_ + ahead, toks_.size() - 1)];
  }
  const Token& next() {
    const Token& t = toks_[pos_];
    if (pos_ + 1 < toks_.size()) ++pos_;
    return t;
  }
  bool is_punct(std::string_view p, std::size_t ahead = 0) const {
    const Token& t = peek(ahead);
    return t.kind == Tok::Punct && t.text == p;
  }
  bool is_ident(std::string_view s) const {
    return peek().kind == Tok::Ident && peek().text == s;
  }
  bool accept_punct(std::string_view p) {
    if (!is_punct(p)) return false;
    next();
    return true;
  }
  bool accept_ident(std::string_view s) {
    if (!is_ident(s)) return false;
    next();
    return true;
  }
  void expect_punct(std::string_view p) {
    if (!accept_punct(p)) fail(peek(), "expected '" + std::string(p) + "'");
  }
  void expect_ident(std::string_view s) {
    if (!accept_ident(s)) fail(peek(), "expected '" + std::string(s) + "'");
  }
  unsigned count_token(const char* what) {
    const Token& t = peek();
    if (t.kind != Tok::Int || t.text[0] == '-') fail(t, std::string("expected ") + what);
    next();
    return static_cast<unsigned>(std::stoul(t.text));
  }

  u128 parse_int_text(const Token& t) {
    bool neg = t.text[0] == '-';
    u128 v = 0;
    for (std::size_t k = neg ? 1 : 0; k < t.text.size(); ++k) {
      u128 nv = v * 10 + static_cast<unsigned>(t.text[k] - '0');
      if (nv / 10 != v) fail(t, "integer literal too large");
      v = nv;
    }
    return neg ? (~v + 1) : v;
  }

  u128 parse_hex_text(const Token& t) {
    if (t.text.size() <= 2 || t.text.size() > 34) fail(t, "bad hex literal");
    u128 v = 0;
    for (std::size_t k = 2; k < t.text.size(); ++k) {
      char c = static_cast<char>(std::tolower(static_cast<unsigned char>(t.text[k])));
      v = (v << 4) | static_cast<unsigned>(std::isdigit(static_cast<unsigned char>(c)) ? c - '0' : c - 'a' + 10);
    }
    return v;
  }

  Constant constant(Type t) {
    const Token& tok = peek();
    if (accept_ident("undef")) return Constant::undef();
    if (accept_ident("poison")) return Constant::poison();
    if (accept_ident("zeroinitializer") || accept_ident("null")) return Constant::zero();
    if (t.is_int()) {
      if (accept_ident("true")) return Constant::integer(1);
      if (accept_ident("false")) return Constant::integer(0);
      if (tok.kind == Tok::Int) {
        next();
        return Constant::integer(parse_int_text(tok) & width_mask(t.scalar_bits()));
      }
      if (tok.kind == Tok::Hex) {
        next();
        return Constant::integer(parse_hex_text(tok) & width_mask(t.scalar_bits()));
      }
      fail(tok, "expected integer constant");
    }
    if (t.is_float()) {
      if (tok.kind != Tok::Hex) fail(tok, "expected hex float constant");
      next();
      return Constant::fp(parse_hex_text(tok) & width_mask(t.scalar_bits()));
    }
    if (t.is_vector() || t.is_array()) {
      bool vec = t.is_vector();
      expect_punct(vec ? "<" : "[");
      std::vector<Constant> elems;
      unsigned n = vec ? t.lanes() : t.count();
      Type et = t.element();
      for (unsigned k = 0; k < n; ++k) {
        if (k) expect_punct(",");
        const Token& at = peek();
        Type got = type();
        if (got != et) fail(at, "element type mismatch in constant");
        elems.push_back(constant(et));
      }
      expect_punct(vec ? ">" : "]");
      return Constant::aggregate(std::move(elems));
    }
    fail(tok, "no literal syntax for type " + t.str());
  }

  // --- module level -------------------------------------------------------

  void prescan_globals() {
    int depth = 0;
    std::uint32_t idx = 0;
    for (std::size_t k = 0; k + 1 < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.kind == Tok::Punct && t.text == "{") ++depth;
      if (t.kind == Tok::Punct && t.text == "}") --depth;
      if (depth == 0 && t.kind == Tok::Global && toks_[k + 1].kind == Tok::Punct &&
          toks_[k + 1].text == "=") {
        globals_.emplace(t.text, idx++);
      }
    }
  }

  void parse_global() {
    GlobalVar g;
    g.name = next().text;
    expect_punct("=");
    bool external = accept_ident("external");
    expect_ident("global");
    g.type = type();
    if (g.type.is_void()) fail(peek(), "global of void type");
    if (!external) g.init = constant(g.type);
    module_.globals.push_back(std::move(g));
  }

  // --- functions ------------------------------------------------------------

  void parse_define() {
    next();  // define
    FunctionDef f;
    f.ret = type();
    const Token& nt = peek();
    if (nt.kind != Tok::Global) fail(nt, "expected function name");
    f.name = nt.text;
    next();
    locals_.clear();
    labels_.clear();
    expect_punct("(");
    if (!is_punct(")")) {
      do {
        Param p;
        p.type = type();
        const Token& pn = peek();
        if (pn.kind != Tok::Local) fail(pn, "expected parameter name");
        p.name = pn.text;
        next();
        if (!locals_.emplace(p.name, Local{true, static_cast<std::uint32_t>(f.params.size())}).second)
          fail(pn, "duplicate name %" + p.name);
        f.params.push_back(std::move(p));
      } while (accept_punct(","));
    }
    expect_punct(")");
    const Token& brace = peek();
    expect_punct("{");
    prescan_body(f, brace);
    while (!is_punct("}")) {
      if (at_end()) fail(peek(), "unterminated function body");
      parse_block(f);
    }
    next();
    if (f.blocks.empty()) fail(brace, "function has no blocks");
    module_.functions.push_back(std::move(f));
  }

  void prescan_body(FunctionDef& f, const Token& brace) {
    std::uint32_t next_id = 0;
    std::uint32_t block = 0;
    bool first = true;
    for (std::size_t k = pos_; k < toks_.size(); ++k) {
      const Token& t = toks_[k];
      if (t.kind == Tok::End) fail(brace, "unterminated function body");
      if (t.kind == Tok::Punct && t.text == "}") break;
      const Token& n = toks_[k + 1];
      bool label = t.kind == Tok::Ident && n.kind == Tok::Punct && n.text == ":";
      if (label) {
        if (!labels_.emplace(t.text, block++).second) fail(t, "duplicate label " + t.text);
        first = false;
      } else if (first) {
        labels_.emplace("entry", block++);
        first = false;
      }
      if (t.kind == Tok::Local && n.kind == Tok::Punct && n.text == "=") {
        if (!locals_.emplace(t.text, Local{false, next_id++}).second)
          fail(t, "duplicate name %" + t.text);
      }
    }
    f.next_value_id = next_id;
  }

  std::uint32_t label_ref() {
    const Token& t = peek();
    if (t.kind != Tok::Local) fail(t, "expected block label");
    auto it = labels_.find(t.text);
    if (it == labels_.end()) fail(t, "unknown label %" + t.text);
    next();
    return it->second;
  }

  ValueRef value(Type t) {
    const Token& tok = peek();
    if (tok.kind == Tok::Local) {
      next();
      auto it = locals_.find(tok.text);
      if (it == locals_.end()) fail(tok, "undefined value %" + tok.text);
      return it->second.is_arg ? ValueRef::arg(it->second.index, t)
                               : ValueRef::instr(it->second.index, t);
    }
    if (tok.kind == Tok::Global) {
      next();
      auto it = globals_.find(tok.text);
      if (it == globals_.end()) fail(tok, "undefined global @" + tok.text);
      ValueRef v = ValueRef::global(it->second);
      v.type = t;
      return v;
    }
    if (t.is_void()) fail(tok, "value of void type");
    return ValueRef::constant_of(t, constant(t));
  }

  ValueRef typed_value() {
    Type t = type();
    return value(t);
  }

  // Pointer operand; the `ptr` spelling is optional.
  ValueRef pointer_value() {
    accept_ident("ptr");
    return value(Type::addr());
  }

  void parse_block(FunctionDef& f) {
    BasicBlock b;
    if (peek().kind == Tok::Ident && is_punct(":", 1)) {
      b.label = next().text;
      next();
    } else if (f.blocks.empty()) {
      b.label = "entry";
    } else {
      fail(peek(), "expected block label");
    }
    while (true) {
      const Token& t = peek();
      if (t.kind == Tok::Local && is_punct("=", 1)) {
        Instruction inst = defining_instruction();
        if (inst.opcode == Opcode::Phi) {
          if (!b.body.empty()) fail(t, "phi after non-phi instruction");
          b.phis.push_back(std::move(inst));
        } else {
          b.body.push_back(std::move(inst));
        }
        continue;
      }
      if (t.kind != Tok::Ident) fail(t, "expected instruction or terminator");
      if (t.text == "store") {
        next();
        Instruction inst;
        inst.opcode = Opcode::Store;
        inst.operands.push_back(typed_value());
        expect_punct(",");
        inst.operands.push_back(pointer_value());
        b.body.push_back(std::move(inst));
        continue;
      }
      if (t.text == "call") {
        Instruction inst = call_instruction();
        if (inst.has_result()) fail(t, "non-void call result must be named");
        b.body.push_back(std::move(inst));
        continue;
      }
      b.term = terminator();
      break;
    }
    f.blocks.push_back(std::move(b));
  }

  Terminator terminator() {
    const Token& t = peek();
    if (accept_ident("ret")) {
      if (accept_ident("void")) return Terminator::ret();
      Type rt = type();
      if (rt.is_void()) fail(t, "ret operand missing");
      return Terminator::ret(value(rt));
    }
    if (accept_ident("br")) {
      if (accept_ident("label")) return Terminator::br(label_ref());
      ValueRef cond = typed_value();
      expect_punct(",");
      expect_ident("label");
      std::uint32_t a = label_ref();
      expect_punct(",");
      expect_ident("label");
      std::uint32_t b = label_ref();
      return Terminator::cond_br(std::move(cond), a, b);
    }
    if (accept_ident("switch")) {
      Terminator term;
      term.kind = Terminator::Kind::Switch;
      Type st = type();
      term.value = value(st);
      expect_punct(",");
      expect_ident("label");
      term.targets.push_back(label_ref());
      expect_punct("[");
      while (!accept_punct("]")) {
        const Token& ct = peek();
        Type cty = type();
        if (!cty.is_int()) fail(ct, "switch case must be an integer");
        const Token& vt = peek();
        Constant c = constant(cty);
        if (c.kind != Constant::Kind::Int) fail(vt, "switch case must be an integer literal");
        expect_punct(",");
        expect_ident("label");
        term.cases.push_back({c.bits, label_ref()});
      }
      return term;
    }
    fail(t, "expected terminator, got '" + t.text + "'");
  }

  Instruction call_instruction() {
    expect_ident("call");
    Instruction inst;
    inst.opcode = Opcode::Call;
    inst.type = type();
    const Token& ct = peek();
    if (ct.kind != Tok::Global) fail(ct, "expected callee");
    inst.callee = ct.text;
    next();
    expect_punct("(");
    if (!is_punct(")")) {
      do {
        inst.operands.push_back(typed_value());
      } while (accept_punct(","));
    }
    expect_punct(")");
    return inst;
  }

  Instruction defining_instruction() {
    const Token& nt = next();
    std::string name = nt.text;
    next();  // '='
    const Token& ot = peek();
    Instruction inst;
    if (ot.kind != Tok::Ident) fail(ot, "expected opcode");
    if (ot.text == "call") {
      inst = call_instruction();
      if (!inst.has_result()) fail(nt, "void call cannot define a value");
    } else {
      auto op = opcode_from_name(ot.text);
      if (!op || *op == Opcode::Store || *op == Opcode::Call) fail(ot, "unknown opcode '" + ot.text + "'");
      next();
      inst.opcode = *op;
      operands(inst, ot);
    }
    inst.name = name;
    inst.id = locals_.at(name).index;
    return inst;
  }

  void operands(Instruction& inst, const Token& ot) {
    Opcode op = inst.opcode;
    if (op == Opcode::FNeg) {
      inst.operands.push_back(typed_value());
      inst.type = inst.operands[0].type;
    } else if (is_int_binary(op) || is_fp_binary(op)) {
      Type t = type();
      inst.operands.push_back(value(t));
      expect_punct(",");
      inst.operands.push_back(value(t));
      inst.type = t;
    } else if (op == Opcode::ICmp || op == Opcode::FCmp) {
      const Token& pt = peek();
      if (pt.kind != Tok::Ident) fail(pt, "expected predicate");
      auto pred = op == Opcode::ICmp ? icmp_predicate_from_name(pt.text)
                                     : fcmp_predicate_from_name(pt.text);
      if (!pred) fail(pt, "unknown predicate '" + pt.text + "'");
      next();
      inst.predicate = *pred;
      Type t = type();
      inst.operands.push_back(value(t));
      expect_punct(",");
      inst.operands.push_back(value(t));
      inst.type = t.is_vector() ? Type::vector(Type::i1(), t.lanes()) : Type::i1();
    } else if (op == Opcode::Select) {
      inst.operands.push_back(typed_value());
      expect_punct(",");
      inst.operands.push_back(typed_value());
      expect_punct(",");
      inst.operands.push_back(typed_value());
      inst.type = inst.operands[1].type;
    } else if (is_cast(op)) {
      inst.operands.push_back(typed_value());
      expect_ident("to");
      inst.type = type();
    } else if (op == Opcode::ExtractElement) {
      inst.operands.push_back(typed_value());
      expect_punct(",");
      inst.operands.push_back(typed_value());
      inst.type = inst.operands[0].type.is_vector() ? inst.operands[0].type.element()
                                                    : Type::void_type();
      if (inst.type.is_void()) fail(ot, "extractelement needs a vector operand");
    } else if (op == Opcode::InsertElement) {
      for (int k = 0; k < 3; ++k) {
        if (k) expect_punct(",");
        inst.operands.push_back(typed_value());
      }
      inst.type = inst.operands[0].type;
    } else if (op == Opcode::ShuffleVector) {
      inst.operands.push_back(typed_value());
      expect_punct(",");
      inst.operands.push_back(typed_value());
      expect_punct(",");
      const Token& mt = peek();
      Type mty = type();
      if (!mty.is_vector() || mty.element() != Type::int_type(32))
        fail(mt, "shufflevector mask must be a vector of i32");
      Constant mc = constant(mty);
      if (mc.kind == Constant::Kind::Zero) {
        inst.mask.assign(mty.lanes(), 0);
      } else if (mc.kind == Constant::Kind::Aggregate) {
        for (const auto& e : mc.elements) {
          if (e.kind == Constant::Kind::Int)
            inst.mask.push_back(static_cast<std::int32_t>(static_cast<std::uint32_t>(e.bits)));
          else if (e.kind == Constant::Kind::Undef)
            inst.mask.push_back(-1);
          else
            fail(mt, "bad shufflevector mask element");
        }
      } else {
        fail(mt, "shufflevector mask must be a constant vector");
      }
      Type a = inst.operands[0].type;
      if (!a.is_vector()) fail(ot, "shufflevector needs vector operands");
      inst.type = Type::vector(a.element(), mty.lanes());
    } else if (op == Opcode::ExtractValue || op == Opcode::InsertValue) {
      inst.operands.push_back(typed_value());
      expect_punct(",");
      if (op == Opcode::InsertValue) {
        inst.operands.push_back(typed_value());
        expect_punct(",");
      }
      inst.agg_index = count_token("aggregate index");
      Type a = inst.operands[0].type;
      if (op == Opcode::ExtractValue) {
        if (!a.is_array()) fail(ot, "extractvalue needs an array operand");
        inst.type = a.element();
      } else {
        inst.type = a;
      }
    } else if (op == Opcode::GetElementPtr) {
      inst.aux_type = type();
      expect_punct(",");
      inst.operands.push_back(pointer_value());
      expect_punct(",");
      inst.operands.push_back(typed_value());
      inst.type = Type::addr();
    } else if (op == Opcode::Alloca) {
      inst.aux_type = type();
      inst.type = Type::addr();
    } else if (op == Opcode::Load) {
      inst.type = type();
      expect_punct(",");
      inst.operands.push_back(pointer_value());
    } else if (op == Opcode::Phi) {
      inst.type = type();
      do {
        expect_punct("[");
        inst.operands.push_back(value(inst.type));
        expect_punct(",");
        inst.incoming.push_back(label_ref());
        expect_punct("]");
      } while (accept_punct(","));
    } else {
      fail(ot, "unsupported opcode");
    }
    if (inst.type.is_void() && op != Opcode::Store) fail(ot, "instruction yields void");
  }

  struct Local {
    bool is_arg;
    std::uint32_t index;
  };

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
  ModuleUnit module_;
  std::unordered_map<std::string, std::uint32_t> globals_;
  std::unordered_map<std::string, Local> locals_;
  std::unordered_map<std::string, std::uint32_t> labels_;
};

// ---------------------------------------------------------------------------
// Printer

class Printer {
 public:
  Printer(const ModuleUnit& m, const FunctionDef& f) : m_(m), f_(f) {
    for (const auto& b : f.blocks) {
      for (const auto& i : b.phis) add(i);
      for (const auto& i : b.body) add(i);
    }
  }

  std::string value(const ValueRef& v) const {
    switch (v.source) {
      case ValueSource::Const: return print_constant(v.type, v.constant);
      case ValueSource::Arg:
        return v.index < f_.params.size() ? "%" + f_.params[v.index].name
                                          : "%arg." + std::to_string(v.index);
      case ValueSource::Global:
        return v.index < m_.globals.size() ? "@" + m_.globals[v.index].name
                                           : "@global." + std::to_string(v.index);
      case ValueSource::Instr: {
        auto it = names_.find(v.index);
        return "%" + (it != names_.end() ? it->second : "undefined." + std::to_string(v.index));
      }
    }
    return "?";
  }

  std::string typed(const ValueRef& v) const { return v.type.str() + " " + value(v); }

  std::string label(std::uint32_t b) const {
    return "%" + (b < f_.blocks.size() ? f_.blocks[b].label : "bb." + std::to_string(b));
  }

  std::string instruction(const Instruction& i) const {
    std::string s;
    if (i.has_result()) s = "%" + names_.at(i.id) + " = ";
    const auto& ops = i.operands;
    auto op_at = [&](std::size_t k) -> const ValueRef& { return ops.at(k); };
    std::string name(opcode_name(i.opcode));
    switch (i.opcode) {
      case Opcode::FNeg:
        return s + name + " " + typed(op_at(0));
      case Opcode::ICmp:
      case Opcode::FCmp:
        return s + name + " " + std::string(predicate_name(i.predicate)) + " " +
               typed(op_at(0)) + ", " + value(op_at(1));
      case Opcode::Select:
        return s + name + " " + typed(op_at(0)) + ", " + typed(op_at(1)) + ", " +
               typed(op_at(2));
      case Opcode::ExtractElement:
        return s + name + " " + typed(op_at(0)) + ", " + typed(op_at(1));
      case Opcode::InsertElement:
        return s + name + " " + typed(op_at(0)) + ", " + typed(op_at(1)) + ", " +
               typed(op_at(2));
      case Opcode::ShuffleVector: {
        std::string m = "<" + std::to_string(i.mask.size()) + " x i32> <";
        for (std::size_t k = 0; k < i.mask.size(); ++k) {
          if (k) m += ", ";
          m += i.mask[k] < 0 ? "i32 undef" : "i32 " + std::to_string(i.mask[k]);
        }
        m += ">";
        return s + name + " " + typed(op_at(0)) + ", " + typed(op_at(1)) + ", " + m;
      }
      case Opcode::ExtractValue:
        return s + name + " " + typed(op_at(0)) + ", " + std::to_string(i.agg_index);
      case Opcode::InsertValue:
        return s + name + " " + typed(op_at(0)) + ", " + typed(op_at(1)) + ", " +
               std::to_string(i.agg_index);
      case Opcode::GetElementPtr:
        return s + name + " " + i.aux_type.str() + ", " + typed(op_at(0)) + ", " +
               typed(op_at(1));
      case Opcode::Alloca:
        return s + name + " " + i.aux_type.str();
      case Opcode::Load:
        return s + name + " " + i.type.str() + ", " + typed(op_at(0));
      case Opcode::Store:
        return name + " " + typed(op_at(0)) + ", " + typed(op_at(1));
      case Opcode::Call: {
        std::string args;
        for (std::size_t k = 0; k < ops.size(); ++k) {
          if (k) args += ", ";
          args += typed(ops[k]);
        }
        return s + name + " " + i.type.str() + " @" + i.callee + "(" + args + ")";
      }
      case Opcode::Phi: {
        std::string in;
        for (std::size_t k = 0; k < ops.size(); ++k) {
          if (k) in += ", ";
          in += "[ " + value(ops[k]) + ", " +
                label(k < i.incoming.size() ? i.incoming[k] : 0xFFFFFFFFu) + " ]";
        }
        return s + name + " " + i.type.str() + " " + in;
      }
      default:
        break;
    }
    if (is_cast(i.opcode)) return s + name + " " + typed(op_at(0)) + " to " + i.type.str();
    // binary
    return s + name + " " + typed(op_at(0)) + ", " + value(op_at(1));
  }

  std::string terminator(const Terminator& t) const {
    switch (t.kind) {
      case Terminator::Kind::Ret:
        return t.value ? "ret " + typed(*t.value) : "ret void";
      case Terminator::Kind::Br:
        return "br label " + label(t.targets.at(0));
      case Terminator::Kind::CondBr:
        return "br " + typed(*t.value) + ", label " + label(t.targets.at(0)) +
               ", label " + label(t.targets.at(1));
      case Terminator::Kind::Switch: {
        std::string s = "switch " + typed(*t.value) + ", label " + label(t.targets.at(0)) + " [";
        for (const auto& c : t.cases)
          s += "\n    " + t.value->type.str() + " " + to_decimal(c.value) + ", label " +
               label(c.target);
        return s + "\n  ]";
      }
    }
    return "?";
  }

 private:
  void add(const Instruction& i) {
    if (i.has_result() && i.id != kNoValue)
      names_.emplace(i.id, i.name.empty() ? "v" + std::to_string(i.id) : i.name);
  }

  const ModuleUnit& m_;
  const FunctionDef& f_;
  std::unordered_map<std::uint32_t, std::string> names_;
};

}  // namespace

ModuleUnit parse_module(std::string_view text) { return Parser(text).module(); }

Type parse_type(std::string_view text) {
  Parser p(text);
  Type t = p.type();
  if (!p.at_end()) throw SyntaxError(1, 1, "trailing text after type");
  return t;
}

IntrinsicDecl parse_decl(std::string_view text) {
  std::string_view rest = text;
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  if (rest.substr(0, 7) == "declare") rest.remove_prefix(7);
  Parser p(rest);
  IntrinsicDecl d = p.parse_decl_rest();
  if (!p.at_end()) throw SyntaxError(1, 1, "trailing text after declaration");
  return d;
}

std::string print_constant(Type t, const Constant& c) {
  switch (c.kind) {
    case Constant::Kind::Undef: return "undef";
    case Constant::Kind::Poison: return "poison";
    case Constant::Kind::Zero: return t.is_addr() ? "null" : "zeroinitializer";
    case Constant::Kind::Int: return to_decimal(c.bits);
    case Constant::Kind::Float: return to_hex(c.bits, t.scalar_bits());
    case Constant::Kind::Aggregate: {
      Type et = t.element();
      std::string s = t.is_vector() ? "<" : "[";
      for (std::size_t k = 0; k < c.elements.size(); ++k) {
        if (k) s += ", ";
        s += et.str() + " " + print_constant(et, c.elements[k]);
      }
      return s + (t.is_vector() ? ">" : "]");
    }
  }
  return "?";
}

std::string print_value(const ModuleUnit& m, const FunctionDef& f, const ValueRef& v) {
  return Printer(m, f).value(v);
}

std::string print_instruction(const ModuleUnit& m, const FunctionDef& f,
                              const Instruction& inst) {
  return Printer(m, f).instruction(inst);
}

std::string print_decl(const IntrinsicDecl& d) {
  std::string s = "declare " + d.ret.str() + " @" + d.name + "(";
  for (std::size_t k = 0; k < d.params.size(); ++k) {
    if (k) s += ", ";
    s += d.params[k].str();
  }
  return s + ")";
}

std::string print_module(const ModuleUnit& m) {
  std::string out;
  for (const auto& g : m.globals) {
    out += "@" + g.name + " = ";
    if (g.init)
      out += "global " + g.type.str() + " " + print_constant(g.type, *g.init);
    else
      out += "external global " + g.type.str();
    out += "\n";
  }
  if (!m.globals.empty() && !m.decls.empty()) out += "\n";
  for (const auto& d : m.decls) out += print_decl(d) + "\n";
  for (const auto& f : m.functions) {
    if (!out.empty()) out += "\n";
    Printer p(m, f);
    out += "define " + f.ret.str() + " @" + f.name + "(";
    for (std::size_t k = 0; k < f.params.size(); ++k) {
      if (k) out += ", ";
      out += f.params[k].type.str() + " %" + f.params[k].name;
    }
    out += ") {\n";
    for (const auto& b : f.blocks) {
      out += b.label + ":\n";
      for (const auto& i : b.phis) out += "  " + p.instruction(i) + "\n";
      for (const auto& i : b.body) out += "  " + p.instruction(i) + "\n";
      out += "  " + p.terminator(b.term) + "\n";
    }
    out += "}\n";
  }
  return out;
}

}  // namespace matchfuzz
