#include <gtest/gtest.h>

#include <functional>

#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/verifier.hpp"

using namespace matchfuzz;

namespace {

constexpr const char* kParams =
    "i8 %a8, i16 %a16, i32 %a32, i64 %a64, i1 %c, f32 %f, f64 %d, <4 x i32> %v4, "
    "<4 x i1> %vc, <4 x f32> %vf, ptr %p, [4 x i32] %arr, <4 x ptr> %vp, <2 x i64> %v2";

enum Arg { A8, A16, A32, A64, C, F, D, V4, VC, VF, P, ARR, VP, V2 };

Type arg_type(Arg a) {
  static const Type kTypes[] = {
      Type::int_type(8),  Type::int_type(16), Type::int_type(32), Type::int_type(64),
      Type::i1(),         Type::float_type(32), Type::float_type(64),
      Type::vector(Type::int_type(32), 4), Type::vector(Type::i1(), 4),
      Type::vector(Type::float_type(32), 4), Type::addr(), Type::array(Type::int_type(32), 4),
      Type::vector(Type::addr(), 4), Type::vector(Type::int_type(64), 2)};
  return kTypes[a];
}

ValueRef arg(Arg a) { return ValueRef::arg(a, arg_type(a)); }

ModuleUnit wrap(const std::string& line) {
  return parse_module("declare i64 @llvm.smax.i64(i64, i64)\n"
                      "define void @t(" + std::string(kParams) + ") {\nentry:\n  " + line +
                      "\n  ret void\n}\n");
}

Instruction& first(ModuleUnit& m) { return m.functions[0].blocks[0].body[0]; }

bool has_kind(const std::vector<Violation>& vs, ViolationKind k) {
  for (const auto& v : vs)
    if (v.kind == k) return true;
  return false;
}

struct Row {
  const char* name;
  const char* accept;
  std::function<void(Instruction&)> reject;
  ViolationKind expected = ViolationKind::TypeMismatch;
};

std::vector<Row> rows() {
  return {
      {"fneg", "%x = fneg f32 %f", [](Instruction& i) { i.operands[0] = arg(A32); i.type = arg_type(A32); }},
      {"add", "%x = add i32 %a32, 1", [](Instruction& i) { i.operands[1] = arg(A16); }},
      {"sub", "%x = sub <4 x i32> %v4, %v4", [](Instruction& i) { i.operands = {arg(VF), arg(VF)}; i.type = arg_type(VF); }},
      {"mul", "%x = mul i64 %a64, %a64", [](Instruction& i) { i.operands[0] = arg(A32); }},
      {"sdiv", "%x = sdiv i8 %a8, 3", [](Instruction& i) { i.operands = {arg(D), arg(D)}; i.type = arg_type(D); }},
      {"urem", "%x = urem i16 %a16, %a16", [](Instruction& i) { i.type = arg_type(A32); }},
      {"fadd", "%x = fadd f64 %d, %d", [](Instruction& i) { i.operands[1] = arg(F); }},
      {"frem", "%x = frem <4 x f32> %vf, %vf", [](Instruction& i) { i.operands = {arg(V4), arg(V4)}; i.type = arg_type(V4); }},
      {"shl", "%x = shl i32 %a32, 2", [](Instruction& i) { i.operands = {arg(P), arg(P)}; i.type = arg_type(P); }},
      {"xor", "%x = xor i1 %c, true", [](Instruction& i) { i.operands[1] = arg(A8); }},
      {"extractelement", "%x = extractelement <4 x i32> %v4, i8 %a8",
       [](Instruction& i) { i.operands[1] = arg(D); }},
      {"extractelement-vec", "%x = extractelement <4 x i32> %v4, i32 0",
       [](Instruction& i) { i.operands[0] = arg(ARR); }},
      {"insertelement", "%x = insertelement <4 x i32> %v4, i32 %a32, i64 %a64",
       [](Instruction& i) { i.operands[1] = arg(A64); }},
      {"shufflevector", "%x = shufflevector <4 x i32> %v4, <4 x i32> %v4, <2 x i32> <i32 7, i32 0>",
       [](Instruction& i) { i.operands[1] = arg(VF); }},
      {"shufflevector-mask", "%x = shufflevector <4 x i32> %v4, <4 x i32> undef, <4 x i32> zeroinitializer",
       [](Instruction& i) { i.mask[2] = 8; }, ViolationKind::BadIndex},
      {"extractvalue", "%x = extractvalue [4 x i32] %arr, 3",
       [](Instruction& i) { i.agg_index = 4; }, ViolationKind::BadIndex},
      {"extractvalue-type", "%x = extractvalue [4 x i32] %arr, 0",
       [](Instruction& i) { i.operands[0] = arg(V4); }},
      {"insertvalue", "%x = insertvalue [4 x i32] %arr, i32 %a32, 1",
       [](Instruction& i) { i.operands[1] = arg(A8); }},
      {"getelementptr", "%x = getelementptr i32, ptr %p, i64 %a64",
       [](Instruction& i) { i.operands[0] = arg(A64); }},
      {"trunc", "%x = trunc i32 %a32 to i8", [](Instruction& i) { i.type = Type::int_type(32); }},
      {"trunc-bool", "%x = trunc i16 %a16 to i1", [](Instruction& i) { i.operands[0] = arg(C); }},
      {"zext", "%x = zext <4 x i1> %vc to <4 x i32>", [](Instruction& i) { i.type = Type::int_type(32); }},
      {"sext", "%x = sext i8 %a8 to i20", [](Instruction& i) { i.type = Type::int_type(8); }},
      {"fptrunc", "%x = fptrunc f64 %d to f32", [](Instruction& i) { i.operands[0] = arg(F); }},
      {"fptoui", "%x = fptoui <4 x f32> %vf to <4 x i32>", [](Instruction& i) { i.type = arg_type(V2); }},
      {"fptosi", "%x = fptosi f32 %f to i64", [](Instruction& i) { i.operands[0] = arg(A32); }},
      {"uitofp", "%x = uitofp i8 %a8 to f64", [](Instruction& i) { i.type = arg_type(VF); }},
      {"sitofp", "%x = sitofp <4 x i32> %v4 to <4 x f32>", [](Instruction& i) { i.operands[0] = arg(VF); }},
      {"ptrtoint", "%x = ptrtoint <4 x ptr> %vp to <4 x i32>", [](Instruction& i) { i.type = Type::int_type(32); }},
      {"inttoptr", "%x = inttoptr i64 %a64 to ptr", [](Instruction& i) { i.operands[0] = arg(P); }},
      {"bitcast", "%x = bitcast <4 x i32> %v4 to <2 x i64>", [](Instruction& i) { i.type = arg_type(A64); }},
      {"icmp", "%x = icmp ugt i32 %a32, 5", [](Instruction& i) { i.operands[1] = arg(A64); }},
      {"icmp-pred", "%x = icmp eq i32 %a32, 5", [](Instruction& i) { i.predicate = CmpPredicate::Oeq; }},
      {"fcmp", "%x = fcmp olt <4 x f32> %vf, %vf", [](Instruction& i) { i.type = Type::i1(); }},
      {"select", "%x = select <4 x i1> %vc, <4 x i32> %v4, <4 x i32> %v4",
       [](Instruction& i) { i.operands[1] = arg(V2); i.type = arg_type(V2); }},
      {"select-cond", "%x = select i1 %c, [4 x i32] %arr, [4 x i32] zeroinitializer",
       [](Instruction& i) { i.operands[0] = arg(A8); }},
      {"alloca", "%x = alloca <4 x f32>", [](Instruction& i) { i.aux_type = Type{}; }},
      {"load", "%x = load [4 x i32], ptr %p", [](Instruction& i) { i.operands[0] = arg(A64); }},
      {"store", "store i32 %a32, ptr %p", [](Instruction& i) { i.operands[1] = arg(A32); }},
      {"call", "%x = call i64 @llvm.smax.i64(i64 %a64, i64 7)", [](Instruction& i) { i.operands[1] = arg(A32); }},
  };
}

}  // namespace

TEST(Verifier, InstructionTableAcceptsAndRejects) {
  for (const Row& row : rows()) {
    SCOPED_TRACE(row.name);
    ModuleUnit ok = wrap(row.accept);
    auto vs = verify_module(ok);
    EXPECT_TRUE(vs.empty()) << (vs.empty() ? "" : vs[0].str());
    ModuleUnit bad = ok;
    row.reject(first(bad));
    auto rejected = verify_module(bad);
    EXPECT_TRUE(has_kind(rejected, row.expected))
        << (rejected.empty() ? "accepted" : rejected[0].str());
  }
}

TEST(Verifier, Listing2IsClean) {
  ModuleUnit m = parse_module(
      "define i64 @f(i32 %a) { Entry: %m = alloca i64  %L = load i64, %m  ret i64 %L }");
  EXPECT_TRUE(verify_module(m).empty());
}

TEST(Verifier, AddOfMixedWidthsIsTypeMismatch) {
  ModuleUnit m = wrap("%x = add i8 %a8, %a8");
  first(m).operands[1] = arg(A16);
  auto vs = verify_module(m);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].kind, ViolationKind::TypeMismatch);
  EXPECT_EQ(vs[0].function, "t");
  EXPECT_EQ(vs[0].block, 0u);
  EXPECT_EQ(vs[0].index, 0u);
}

TEST(Verifier, SiblingUseIsDominanceViolation) {
  ModuleUnit m = parse_module(R"(
define i32 @f(i1 %c) {
A:
  br i1 %c, label %B, label %C
B:
  %y = add i32 %x, 1
  br label %D
C:
  %x = add i32 1, 2
  br label %D
D:
  ret i32 0
}
)");
  auto vs = verify_module(m);
  ASSERT_EQ(vs.size(), 1u);
  EXPECT_EQ(vs[0].kind, ViolationKind::DominanceViolation);
  EXPECT_EQ(vs[0].block, 1u);
}

TEST(Verifier, UndefExtractIndexIsLegal) {
  EXPECT_TRUE(verify_module(wrap("%x = extractelement <4 x i32> %v4, i32 undef")).empty());
  EXPECT_TRUE(verify_module(wrap("%x = extractelement <4 x i32> %v4, i8 poison")).empty());
}

TEST(Verifier, UseBeforeDefInBlock) {
  ModuleUnit m = parse_module("define i32 @f() { e: %a = add i32 %b, 1 %b = add i32 1, 1 ret i32 %a }");
  auto vs = verify_module(m);
  ASSERT_FALSE(vs.empty());
  EXPECT_EQ(vs[0].kind, ViolationKind::UseBeforeDef);
}

TEST(Verifier, PhiChecks) {
  const char* loop = R"(
define i32 @f(i1 %c) {
entry:
  br label %loop
loop:
  %i = phi i32 [ 0, %entry ], [ %n, %loop ]
  %s = phi i32 [ 0, %entry ], [ %s, %loop ]
  %n = add i32 %i, 1
  br i1 %c, label %loop, label %exit
exit:
  ret i32 %n
}
)";
  ModuleUnit m = parse_module(loop);
  EXPECT_TRUE(verify_module(m).empty());  // self-loop phi accepted

  ModuleUnit missing = m;
  auto& phi = missing.functions[0].blocks[1].phis[0];
  phi.operands.pop_back();
  phi.incoming.pop_back();
  EXPECT_TRUE(has_kind(verify_module(missing), ViolationKind::PhiArity));

  ModuleUnit dup = m;
  dup.functions[0].blocks[1].phis[0].incoming[1] = 0;
  EXPECT_TRUE(has_kind(verify_module(dup), ViolationKind::PhiArity));

  // Incoming value along the entry edge must dominate entry's end.
  ModuleUnit bad_edge = m;
  bad_edge.functions[0].blocks[1].phis[0].operands[0] = ValueRef::instr(2, Type::int_type(32));
  EXPECT_TRUE(has_kind(verify_module(bad_edge), ViolationKind::DominanceViolation));
}

TEST(Verifier, Terminators) {
  EXPECT_TRUE(has_kind(verify_module(parse_module("define i32 @f() { e: ret void }")),
                       ViolationKind::BadTerminator));
  ModuleUnit m = parse_module("define void @f(i8 %x) { e: switch i8 %x, label %a [ i8 1, label %a ] a: ret void }");
  EXPECT_TRUE(verify_module(m).empty());
  ModuleUnit dup = m;
  dup.functions[0].blocks[0].term.cases.push_back({1, 1});
  EXPECT_TRUE(has_kind(verify_module(dup), ViolationKind::BadTerminator));
  ModuleUnit wide = m;
  wide.functions[0].blocks[0].term.cases[0].value = 300;
  EXPECT_TRUE(has_kind(verify_module(wide), ViolationKind::BadTerminator));
  ModuleUnit range = m;
  range.functions[0].blocks[0].term.targets[0] = 9;
  EXPECT_TRUE(has_kind(verify_module(range), ViolationKind::BadTerminator));
  ModuleUnit to_entry = parse_module("define void @f() { e: br label %a a: br label %e }");
  EXPECT_TRUE(has_kind(verify_module(to_entry), ViolationKind::BadTerminator));
  ModuleUnit cond = parse_module("define void @f(i8 %x) { e: br i8 %x, label %a, label %a a: ret void }");
  EXPECT_TRUE(has_kind(verify_module(cond), ViolationKind::TypeMismatch));
}

TEST(Verifier, NameClash) {
  ModuleUnit m = parse_module("@f = global i8 0\ndefine void @f() { e: ret void }");
  EXPECT_TRUE(has_kind(verify_module(m), ViolationKind::NameClash));
  ModuleUnit ok = parse_module("define void @f() { e: %x = add i8 1, 1 ret void }");
  ok.functions[0].blocks[0].body.push_back(ok.functions[0].blocks[0].body[0]);
  EXPECT_TRUE(has_kind(verify_module(ok), ViolationKind::NameClash));
}

TEST(Verifier, UnreachableBlocksAreTolerated) {
  ModuleUnit m = parse_module(R"(
define i32 @f() {
e:
  ret i32 0
dead:
  %x = add i32 %y, 1
  br label %dead2
dead2:
  %y = add i32 %x, 1
  br label %dead
}
)");
  EXPECT_TRUE(verify_module(m).empty());
}

TEST(Verifier, IsPure) {
  ModuleUnit m = wrap("%x = add i8 %a8, %a8");
  first(m).operands[1] = arg(A16);
  auto a = verify_module(m);
  auto b = verify_module(m);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k].str(), b[k].str());
}
