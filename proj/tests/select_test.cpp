#include <gtest/gtest.h>

#include <set>

#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/matcher.hpp"
#include "matchfuzz/rng.hpp"
#include "matchfuzz/select.hpp"

using namespace matchfuzz;

namespace {

const TargetSpec& builtin(std::string_view name) { return *find_builtin_target(name); }

// Post-mutation program from the smax example: switch-based sCFG, an
// intrinsic call, a zext and a phi that stores through the placeholder slot.
constexpr const char* kSmaxModule = R"(
declare i64 @llvm.smax.i64(i64, i64)

define i64 @f(i32 %a) {
EntrySrc:
  %m = alloca i64
  switch i32 %a, label %sCFG_Default [
    i32 1, label %sCFG_1
    i32 42, label %sCFG_42
  ]
sCFG_Default:
  %z = zext i32 %a to i64
  br label %EntrySink
sCFG_1:
  %L = load i64, ptr %m
  %s = call i64 @llvm.smax.i64(i64 %L, i64 %z0)
  br label %EntrySink
sCFG_42:
  %z0 = zext i32 %a to i64
  br label %EntrySink
EntrySink:
  %PHI = phi i64 [ %z, %sCFG_Default ], [ 1, %sCFG_1 ], [ %z0, %sCFG_42 ]
  store i64 %PHI, ptr %m
  %L2 = load i64, ptr %m
  ret i64 %L2
}
)";

// Same shape with the intrinsic operand defined in the calling block.
constexpr const char* kSmaxValid = R"(
declare i64 @llvm.smax.i64(i64, i64)

define i64 @f(i32 %a) {
EntrySrc:
  %m = alloca i64
  switch i32 %a, label %sCFG_Default [
    i32 1, label %sCFG_1
    i32 42, label %sCFG_42
  ]
sCFG_Default:
  br label %EntrySink
sCFG_1:
  %L = load i64, ptr %m
  %z = zext i32 %a to i64
  %s = call i64 @llvm.smax.i64(i64 %L, i64 %z)
  br label %EntrySink
sCFG_42:
  br label %EntrySink
EntrySink:
  %PHI = phi i64 [ 0, %sCFG_Default ], [ %s, %sCFG_1 ], [ 42, %sCFG_42 ]
  store i64 %PHI, ptr %m
  %L2 = load i64, ptr %m
  ret i64 %L2
}
)";

SelectionResult run(const Selector& sel, std::string_view text, SelectOptions opts = {}) {
  CoverageState cov(sel.table_size());
  return sel.select_text(text, cov, opts);
}

// Brute-force applicability of one pattern to one instruction.
bool applies(const TargetSpec& t, const FeatureSet& fs, const PatternDef& p, const Instruction& inst) {
  if (!t.enabled(fs, p.features)) return false;
  for (const auto& c : p.checks) {
    const ValueRef* v = c.slot == kResultSlot ? nullptr
                        : c.slot < inst.operands.size() ? &inst.operands[c.slot]
                                                         : nullptr;
    switch (c.kind) {
      case OperandCheck::Kind::Type:
        if (c.slot == kResultSlot) {
          if (inst.type.is_void() || !c.cls.matches(inst.type)) return false;
        } else if (!v || !c.cls.matches(v->type)) {
          return false;
        }
        break;
      case OperandCheck::Kind::IsConst:
        if (!v || !v->is_const() || v->constant.is_special()) return false;
        break;
      case OperandCheck::Kind::ConstRange: {
        if (!v || !v->is_const() || !v->type.is_int()) return false;
        if (v->constant.kind != Constant::Kind::Int && v->constant.kind != Constant::Kind::Zero) return false;
        unsigned w = v->type.scalar_bits();
        if (w > 64) return false;  // keep the oracle simple; corpus stays within 64 bits
        std::uint64_t raw = static_cast<std::uint64_t>(v->constant.bits);
        std::int64_t val = w == 64 ? static_cast<std::int64_t>(raw)
                                   : static_cast<std::int64_t>(raw << (64 - w)) >> (64 - w);
        if (val < c.lo || val > c.hi) return false;
        break;
      }
    }
  }
  return true;
}

}  // namespace

TEST(Select, EmptyModule) {
  Selector sel(builtin("alpha"));
  auto r = run(sel, "");
  EXPECT_TRUE(r.ok());
  EXPECT_EQ(r.instructions, 0u);
}

TEST(Select, ScalarAddOnAlpha) {
  Selector sel(builtin("alpha"));
  SelectOptions o;
  o.collect = true;
  auto r = run(sel, "define i32 @f(i32 %a, i32 %b) { entry: %x = add i32 %a, %b  ret i32 %x }", o);
  ASSERT_TRUE(r.ok());
  ASSERT_EQ(r.selected.size(), 2u);
  EXPECT_EQ(r.selected[0].root, "add");
  EXPECT_EQ(r.selected[0].machine_op, "ADD32rr");
  EXPECT_EQ(r.selected[1].machine_op, "RET_GPR");
}

TEST(Select, ConstantOperandsPickImmediateForms) {
  Selector sel(builtin("alpha"));
  SelectOptions o;
  o.collect = true;
  auto r = run(sel,
               "define i32 @f(i32 %a) { entry: %x = add i32 %a, 1  %y = add i32 %x, 100  "
               "%z = add i32 %y, 100000  %u = add i32 %z, undef  ret i32 %u }",
               o);
  ASSERT_TRUE(r.ok());
  EXPECT_EQ(r.selected[0].machine_op, "INC32r");
  EXPECT_EQ(r.selected[1].machine_op, "ADD32ri8");
  EXPECT_EQ(r.selected[2].machine_op, "ADD32ri32");
  EXPECT_EQ(r.selected[3].machine_op, "ADD32rr");  // undef never satisfies a const check
}

TEST(Select, VectorAddOnAlphaIsMissingPattern) {
  Selector sel(builtin("alpha"));
  auto r = run(sel,
               "define <4 x i32> @f(<4 x i32> %a) { entry: %x = add <4 x i32> %a, %a  ret <4 x i32> %x }");
  ASSERT_TRUE(r.finding);
  EXPECT_EQ(r.finding->kind, FindingKind::MissingPattern);
  EXPECT_EQ(r.finding->root, "add-vector");
  EXPECT_EQ(r.finding->types, "<4_x_i32>,<4_x_i32>-><4_x_i32>");
  EXPECT_EQ(r.finding->target, "alpha");
}

TEST(Select, VexSimdOffFailsFeatureCheck) {
  const TargetSpec& vex = builtin("vex");
  const char* text = "define <4 x i32> @f(<4 x i32> %a) { entry: %x = add <4 x i32> %a, %a  ret <4 x i32> %x }";
  Selector on(vex);
  EXPECT_TRUE(run(on, text).ok());
  Selector off(vex, vex.with_settings({"simd=off"}));
  std::vector<TraceEvent> trace;
  SelectOptions o;
  o.trace = &trace;
  auto r = run(off, text, o);
  ASSERT_TRUE(r.finding);
  EXPECT_EQ(r.finding->kind, FindingKind::MissingPattern);
  EXPECT_EQ(r.finding->root, "add-vector");
  bool saw_feature = false;
  for (const auto& e : trace) saw_feature |= e.kind == MatcherOp::CheckFeature;
  EXPECT_TRUE(saw_feature);
}

TEST(Select, I20InjectedAbort) {
  Selector sel(builtin("vex-i20"));
  std::vector<TraceEvent> trace;
  SelectOptions o;
  o.trace = &trace;
  auto r = run(sel, "define i20 @f(i20 %a) { entry: %x = add i20 %a, %a  ret i20 %x }", o);
  ASSERT_TRUE(r.finding);
  EXPECT_EQ(r.finding->kind, FindingKind::InjectedAbort);
  EXPECT_EQ(r.finding->root, "add");
  EXPECT_EQ(r.finding->types, "i20,i20->i20");
  // The fault fires at the EMIT of the selected pattern, last entry read.
  ASSERT_FALSE(trace.empty());
  EXPECT_EQ(trace.back().kind, MatcherOp::Emit);
  EXPECT_EQ(sel.table().program.bytes[r.finding->byte_index], static_cast<std::uint8_t>(MatcherOp::Emit));
  const LookupRow* row = nullptr;
  for (const auto& rw : sel.table().lut.rows)
    if (r.finding->byte_index >= rw.begin && r.finding->byte_index < rw.end) row = &rw;
  ASSERT_NE(row, nullptr);
  EXPECT_EQ(sel.target().patterns[row->pattern].emits, "ADD20rr_promote");
  // Same program on plain vex selects fine.
  Selector vex(builtin("vex"));
  EXPECT_TRUE(run(vex, "define i20 @f(i20 %a) { entry: %x = add i20 %a, %a  ret i20 %x }").ok());
}

TEST(Select, I20UdivHangs) {
  Selector sel(builtin("vex-i20"));
  auto r = run(sel, "define i20 @f(i20 %a) { entry: %x = udiv i20 %a, %a  ret i20 %x }");
  ASSERT_TRUE(r.finding);
  EXPECT_EQ(r.finding->kind, FindingKind::HangSentinel);
  EXPECT_EQ(r.finding->root, "udiv");
}

TEST(Select, VerifierReject) {
  Selector sel(builtin("alpha"));
  auto r = run(sel, "define i32 @f(i8 %a, i16 %b) { entry: %x = add i8 %a, %b  ret i32 0 }");
  ASSERT_TRUE(r.finding);
  EXPECT_EQ(r.finding->kind, FindingKind::VerifierReject);
  EXPECT_EQ(r.finding->root, "TypeMismatch");
}

TEST(Select, ParseErrorFlagged) {
  Selector sel(builtin("alpha"));
  auto r = run(sel, "define i32 @f( {");
  EXPECT_TRUE(r.parse_error);
  EXPECT_FALSE(r.finding);
}

TEST(Select, SmaxModuleOnVexAndAlpha) {
  // The raw listing uses a value from a sibling block; the verifier catches it.
  Selector vex(builtin("vex"));
  auto bad = run(vex, kSmaxModule);
  ASSERT_TRUE(bad.finding);
  EXPECT_EQ(bad.finding->kind, FindingKind::VerifierReject);

  SelectOptions o;
  o.collect = true;
  auto r = run(vex, kSmaxValid, o);
  ASSERT_TRUE(r.ok()) << r.finding->str();
  bool saw = false;
  for (const auto& s : r.selected) {
    EXPECT_TRUE(s.pattern.has_value());
    if (s.root == "llvm.smax.i64") {
      saw = true;
      EXPECT_EQ(s.machine_op, "CMOVL64rr_smax");
    }
  }
  EXPECT_TRUE(saw);
  EXPECT_EQ(r.selected.size(), r.instructions);

  Selector alpha(builtin("alpha"));
  auto a = run(alpha, kSmaxValid);
  ASSERT_TRUE(a.finding);
  EXPECT_EQ(a.finding->kind, FindingKind::MissingPattern);
  EXPECT_EQ(a.finding->root, "llvm.smax.i64");
  EXPECT_EQ(a.finding->types, "i64,i64->i64");
}

TEST(Select, TraceSoundness) {
  Selector sel(builtin("vex"));
  CoverageState cov(sel.table_size());
  std::vector<TraceEvent> trace;
  SelectOptions o;
  o.trace = &trace;
  cov.begin_run();
  auto r = sel.select_text(kSmaxValid, cov, o);
  ASSERT_TRUE(r.ok());
  std::set<std::uint32_t> visited;
  for (const auto& e : trace) {
    visited.insert(e.index);
    EXPECT_EQ(entry_size(static_cast<std::uint8_t>(e.kind)) > 0, true);
  }
  std::set<std::uint32_t> bits;
  for (std::size_t i = 0; i < cov.run_matcher().size(); ++i)
    if (cov.run_matcher().test(i)) bits.insert(static_cast<std::uint32_t>(i));
  EXPECT_EQ(visited, bits);
}

TEST(Select, PriorityRespected) {
  // Enumerate a small corpus of single instructions and compare the
  // interpreter's pick against the applicable pattern of highest priority.
  const TargetSpec& vex = builtin("vex");
  Selector sel(vex);
  const FeatureSet& fs = sel.features();
  std::vector<std::string> lines;
  for (const char* op : {"add", "sub", "mul", "xor", "shl", "and", "udiv"})
    for (const char* ty : {"i1", "i8", "i16", "i32", "i64", "<4 x i32>", "<8 x i16>", "<2 x i64>"})
      for (const char* rhs : {"%a", "1", "-1", "100", "70000", "undef", "0"})
        lines.push_back(std::string("define void @f(") + ty + " %a) { entry: %x = " + op + " " + ty +
                        " %a, " + (std::string(ty)[0] == '<' && rhs[0] != '%' && std::string(rhs) != "undef"
                                       ? std::string("zeroinitializer")
                                       : std::string(rhs)) +
                        "  ret void }");
  for (const char* ty : {"i8", "i32", "i64"})
    for (const char* rhs : {"%a", "0", "5", "-200"})
      lines.push_back(std::string("define void @f(") + ty + " %a) { entry: %x = icmp slt " + ty + " %a, " +
                      rhs + "  ret void }");
  std::size_t checked = 0;
  for (const auto& text : lines) {
    ModuleUnit m = parse_module(text);
    const Instruction& inst = m.functions[0].blocks[0].body[0];
    std::string root = root_key(m, inst);
    const PatternDef* best = nullptr;
    for (const auto& p : vex.patterns)
      if (p.root == root && applies(vex, fs, p, inst) && (!best || p.priority > best->priority)) best = &p;
    CoverageState cov(sel.table_size());
    auto out = sel.select_instruction(m, inst, cov);
    if (!best) {
      EXPECT_EQ(out.failure, FindingKind::MissingPattern) << text;
      continue;
    }
    ASSERT_TRUE(out.pattern) << text;
    EXPECT_EQ(*out.pattern, best->id) << text;
    ++checked;
  }
  EXPECT_GT(checked, 300u);
}

TEST(Select, NeverHangsOnBuiltins) {
  // Step budget never trips without an injected hang.
  for (const char* name : {"alpha", "vex"}) {
    Selector sel(builtin(name));
    auto r = run(sel, kSmaxValid);
    if (r.finding) {
      EXPECT_NE(r.finding->kind, FindingKind::HangSentinel);
    }
  }
}

TEST(Signature, RoundTripAndHash) {
  FailureSignature s{FindingKind::InjectedAbort, "add", "i20,i20->i20", 1234, "vex-i20"};
  EXPECT_EQ(s.str(), "InjectedAbort add i20,i20->i20 1234 vex-i20");
  EXPECT_EQ(FailureSignature::parse(s.str()), s);
  // FNV-1a 64 oracle.
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s.str()) {
    h ^= c;
    h *= 1099511628211ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  EXPECT_EQ(s.hash(), buf);
  EXPECT_EQ(s.hash().size(), 16u);
  FailureSignature empty{FindingKind::VerifierReject, "NameClash", "", 0, "alpha"};
  EXPECT_EQ(FailureSignature::parse(empty.str()), empty);
  EXPECT_THROW(FailureSignature::parse("Bogus a b 1 t"), std::invalid_argument);
}

TEST(Probes, Stable) {
  EXPECT_EQ(probe_id(1), probe_id(1));
  std::set<std::uint16_t> ids;
  for (std::uint32_t s = 0; s < 256; ++s) ids.insert(probe_id(s));
  EXPECT_GT(ids.size(), 250u);
}
