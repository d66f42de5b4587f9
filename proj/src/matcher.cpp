#include "matchfuzz/matcher.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace matchfuzz {

std::size_t entry_size(std::uint8_t op) {
  switch (static_cast<MatcherOp>(op)) {
    case MatcherOp::Scope: return 5;
    case MatcherOp::CheckOpcode: return 3;
    case MatcherOp::CheckType: return 5;
    case MatcherOp::CheckFeature: return 2;
    case MatcherOp::CheckIsConst: return 2;
    case MatcherOp::CheckConstRange: return 18;
    case MatcherOp::Emit: return 3;
    case MatcherOp::Fail: return 1;
  }
  return 0;
}

std::string_view matcher_op_name(MatcherOp op) {
  switch (op) {
    case MatcherOp::Scope: return "SCOPE";
    case MatcherOp::CheckOpcode: return "CHECK_OPCODE";
    case MatcherOp::CheckType: return "CHECK_TYPE";
    case MatcherOp::CheckFeature: return "CHECK_FEATURE";
    case MatcherOp::CheckIsConst: return "CHECK_IS_CONST";
    case MatcherOp::CheckConstRange: return "CHECK_CONST_RANGE";
    case MatcherOp::Emit: return "EMIT";
    case MatcherOp::Fail: return "FAIL";
  }
  return "?";
}

std::uint16_t MatcherProgram::root_id(std::string_view key) const {
  auto it = root_ids.find(std::string(key));
  return it == root_ids.end() ? 0xFFFF : it->second;
}

const LookupRow* LookupTable::find(std::uint16_t pattern) const {
  for (const auto& r : rows)
    if (r.pattern == pattern) return &r;
  return nullptr;
}

namespace {

class Emitter {
 public:
  std::vector<std::uint8_t> bytes;

  std::size_t pos() const { return bytes.size(); }
  void u8(std::uint8_t v) { bytes.push_back(v); }
  void u16(std::uint16_t v) {
    u8(static_cast<std::uint8_t>(v));
    u8(static_cast<std::uint8_t>(v >> 8));
  }
  void u32(std::uint32_t v) {
    for (int k = 0; k < 4; ++k) u8(static_cast<std::uint8_t>(v >> (8 * k)));
  }
  void i64(std::int64_t v) {
    auto u = static_cast<std::uint64_t>(v);
    for (int k = 0; k < 8; ++k) u8(static_cast<std::uint8_t>(u >> (8 * k)));
  }
  void op(MatcherOp o) { u8(static_cast<std::uint8_t>(o)); }

  std::size_t open_scope() {
    std::size_t at = pos();
    op(MatcherOp::Scope);
    u32(0);
    return at;
  }
  void close_scope(std::size_t at) {
    auto skip = static_cast<std::uint32_t>(pos() - at);
    for (int k = 0; k < 4; ++k) bytes[at + 1 + k] = static_cast<std::uint8_t>(skip >> (8 * k));
  }
};

std::uint16_t rd16(const std::vector<std::uint8_t>& b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}
std::uint32_t rd32(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint32_t v = 0;
  for (int k = 0; k < 4; ++k) v |= std::uint32_t{b[at + k]} << (8 * k);
  return v;
}
std::int64_t rd64(const std::vector<std::uint8_t>& b, std::size_t at) {
  std::uint64_t v = 0;
  for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[at + k]} << (8 * k);
  return static_cast<std::int64_t>(v);
}

}  // namespace

CompiledTable compile_patterns(const TargetSpec& t) {
  validate_target(t);
  CompiledTable out;
  MatcherProgram& prog = out.program;

  std::vector<std::vector<const PatternDef*>> groups;
  for (const auto& p : t.patterns) {
    auto [it, fresh] = prog.root_ids.emplace(p.root, static_cast<std::uint16_t>(prog.roots.size()));
    if (fresh) {
      prog.roots.push_back(p.root);
      groups.emplace_back();
    }
    groups[it->second].push_back(&p);
  }
  for (auto& g : groups)
    std::stable_sort(g.begin(), g.end(),
                     [](const PatternDef* a, const PatternDef* b) { return a->priority > b->priority; });

  Emitter e;
  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    bool last_group = gi + 1 == groups.size();
    std::size_t gscope = last_group ? 0 : e.open_scope();
    e.op(MatcherOp::CheckOpcode);
    e.u16(static_cast<std::uint16_t>(gi));
    const auto& g = groups[gi];
    for (std::size_t pi = 0; pi < g.size(); ++pi) {
      const PatternDef& p = *g[pi];
      bool last = pi + 1 == g.size();
      std::size_t pscope = last ? 0 : e.open_scope();
      for (const auto& c : p.checks) {
        switch (c.kind) {
          case OperandCheck::Kind::Type:
            e.op(MatcherOp::CheckType);
            e.u8(c.slot);
            e.u8(static_cast<std::uint8_t>(c.cls.family));
            e.u8(c.cls.lanes);
            e.u8(c.cls.bits);
            break;
          case OperandCheck::Kind::IsConst:
            e.op(MatcherOp::CheckIsConst);
            e.u8(c.slot);
            break;
          case OperandCheck::Kind::ConstRange:
            e.op(MatcherOp::CheckConstRange);
            e.u8(c.slot);
            e.i64(c.lo);
            e.i64(c.hi);
            break;
        }
      }
      for (const auto& f : p.features) {
        e.op(MatcherOp::CheckFeature);
        e.u8(static_cast<std::uint8_t>(*t.feature_index(f)));
      }
      auto emit_at = static_cast<std::uint32_t>(e.pos());
      e.op(MatcherOp::Emit);
      e.u16(p.id);
      LookupRow row;
      row.begin = emit_at;
      row.end = static_cast<std::uint32_t>(e.pos());
      row.pattern = p.id;
      row.kind = t.find_intrinsic(p.root) ? PatternKind::Intrinsic : PatternKind::Instruction;
      row.root = p.root;
      out.lut.rows.push_back(std::move(row));
      if (!last) e.close_scope(pscope);
    }
    if (!last_group) e.close_scope(gscope);
  }
  prog.bytes = std::move(e.bytes);
  out.lut.program_size = static_cast<std::uint32_t>(prog.bytes.size());
  std::sort(out.lut.rows.begin(), out.lut.rows.end(),
            [](const LookupRow& a, const LookupRow& b) { return a.begin < b.begin; });
  return out;
}

std::vector<DecodedEntry> decode_program(const MatcherProgram& prog) {
  const auto& b = prog.bytes;
  std::vector<DecodedEntry> out;
  std::set<std::uint32_t> boundaries;
  std::vector<std::uint32_t> scope_ends;
  std::vector<std::uint32_t> open;
  std::size_t at = 0;
  while (at < b.size()) {
    std::size_t sz = entry_size(b[at]);
    if (sz == 0) throw MalformedTable("unknown entry opcode at " + std::to_string(at));
    if (at + sz > b.size()) throw MalformedTable("entry runs off the table at " + std::to_string(at));
    while (!open.empty() && open.back() <= at) {
      if (open.back() != at) throw MalformedTable("scope end inside an entry");
      open.pop_back();
    }
    DecodedEntry d;
    d.offset = static_cast<std::uint32_t>(at);
    d.op = static_cast<MatcherOp>(b[at]);
    d.size = static_cast<std::uint32_t>(sz);
    d.depth = static_cast<std::uint32_t>(open.size());
    switch (d.op) {
      case MatcherOp::Scope: {
        d.a = rd32(b, at + 1);
        std::uint64_t end = at + d.a;
        if (d.a <= sz || end > b.size()) throw MalformedTable("bad scope skip at " + std::to_string(at));
        if (!open.empty() && end > open.back()) throw MalformedTable("scope overlaps its parent");
        scope_ends.push_back(static_cast<std::uint32_t>(end));
        open.push_back(static_cast<std::uint32_t>(end));
        break;
      }
      case MatcherOp::CheckOpcode:
      case MatcherOp::Emit:
        d.a = rd16(b, at + 1);
        break;
      case MatcherOp::CheckType:
        d.a = b[at + 1];
        d.cls = {static_cast<TypeFamily>(b[at + 2]), b[at + 3], b[at + 4]};
        break;
      case MatcherOp::CheckFeature:
      case MatcherOp::CheckIsConst:
        d.a = b[at + 1];
        break;
      case MatcherOp::CheckConstRange:
        d.a = b[at + 1];
        d.lo = rd64(b, at + 2);
        d.hi = rd64(b, at + 10);
        break;
      case MatcherOp::Fail:
        break;
    }
    boundaries.insert(d.offset);
    out.push_back(d);
    at += sz;
  }
  boundaries.insert(static_cast<std::uint32_t>(b.size()));
  for (auto e : scope_ends)
    if (!boundaries.count(e)) throw MalformedTable("scope target is not an entry boundary");
  return out;
}

std::string disassemble(const MatcherProgram& prog) {
  std::string out;
  for (const auto& d : decode_program(prog)) {
    out += std::to_string(d.offset) + ": " + std::string(d.depth * 2, ' ') +
           std::string(matcher_op_name(d.op));
    switch (d.op) {
      case MatcherOp::Scope: out += " +" + std::to_string(d.a); break;
      case MatcherOp::CheckOpcode:
        out += " " + (d.a < prog.roots.size() ? prog.roots[d.a] : std::to_string(d.a));
        break;
      case MatcherOp::CheckType:
        out += " " + (d.a == kResultSlot ? std::string("res") : "op" + std::to_string(d.a)) + " " +
               d.cls.str();
        break;
      case MatcherOp::CheckFeature:
      case MatcherOp::CheckIsConst:
      case MatcherOp::Emit: out += " " + std::to_string(d.a); break;
      case MatcherOp::CheckConstRange:
        out += " op" + std::to_string(d.a) + " [" + std::to_string(d.lo) + ", " + std::to_string(d.hi) + "]";
        break;
      case MatcherOp::Fail: break;
    }
    out += "\n";
  }
  return out;
}

}  // namespace matchfuzz
