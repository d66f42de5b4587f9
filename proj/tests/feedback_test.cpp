#include <gtest/gtest.h>

#include <set>

#include "matchfuzz/feedback.hpp"
#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/mutate.hpp"
#include "matchfuzz/select.hpp"

using namespace matchfuzz;

namespace {

const TargetSpec& builtin(std::string_view name) { return *find_builtin_target(name); }

// Pattern ids whose EMIT was executed according to a trace.
std::set<std::uint16_t> emitted(const std::vector<TraceEvent>& trace, const LookupTable& lut) {
  std::set<std::uint16_t> out;
  for (const auto& e : trace) {
    if (e.kind != MatcherOp::Emit) continue;
    for (const auto& r : lut.rows)
      if (e.index >= r.begin && e.index < r.end) out.insert(r.pattern);
  }
  return out;
}

std::set<std::uint16_t> covered(const std::vector<DecodedPattern>& d) {
  std::set<std::uint16_t> out;
  for (const auto& p : d)
    if (p.covered) out.insert(p.pattern);
  return out;
}

const char* kScalarAdd = "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %x = add i32 %a, %b\n  ret i32 %x\n}\n";

const char* kSmax =
    "declare i64 @llvm.smax.i64(i64, i64)\n"
    "define i64 @f(i64 %a, i64 %b) {\nentry:\n  %m = call i64 @llvm.smax.i64(i64 %a, i64 %b)\n  ret i64 %m\n}\n";

}  // namespace

TEST(Decode, AllZeroAndFull) {
  for (const auto& t : builtin_targets()) {
    Selector sel(t);
    const LookupTable& lut = sel.table().lut;
    MatcherBitmap empty(sel.table_size());
    auto d = decode_coverage(empty, lut);
    ASSERT_EQ(d.size(), lut.rows.size());
    for (const auto& p : d) EXPECT_FALSE(p.covered);
    MatcherBitmap full(sel.table_size());
    for (std::size_t i = 0; i < full.size(); ++i) full.set(i);
    d = decode_coverage(full, lut);
    std::set<std::uint16_t> ids;
    for (const auto& p : d) {
      EXPECT_TRUE(p.covered);
      ids.insert(p.pattern);
    }
    EXPECT_EQ(ids.size(), t.patterns.size());
    EXPECT_TRUE(build_report(d, lut, t).empty()) << t.name;
  }
}

TEST(Decode, SizeMismatch) {
  Selector sel(builtin("vex"));
  EXPECT_THROW(decode_coverage(MatcherBitmap(sel.table_size() + 1), sel.table().lut), SizeMismatch);
}

TEST(Decode, ScalarAddOnly) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  CoverageState cov(sel.table_size());
  std::vector<TraceEvent> trace;
  SelectOptions opts;
  opts.trace = &trace;
  opts.collect = true;
  cov.begin_run();
  auto r = sel.select_module(parse_module(kScalarAdd), cov, opts);
  ASSERT_TRUE(r.ok());
  auto d = decode_coverage(cov.run_matcher(), sel.table().lut);
  auto got = covered(d);
  EXPECT_EQ(got, emitted(trace, sel.table().lut));
  // The selected add pattern is covered; every vector pattern is not.
  ASSERT_TRUE(r.selected[0].pattern);
  EXPECT_TRUE(got.count(*r.selected[0].pattern));
  for (const auto& row : sel.table().lut.rows)
    if (row.root.find("-vector") != std::string::npos) EXPECT_FALSE(got.count(row.pattern)) << row.root;
  EXPECT_EQ(got.size(), 2u);  // the add and the ret
}

TEST(Decode, MatchesTraceOnRandomModules) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  Mutator mu(MutatorConfig::for_target(t, t.default_features()));
  Rng rng(2024);
  for (int k = 0; k < 40; ++k) {
    ModuleUnit m;
    for (int s = 0; s < 40; ++s) mu.mutate_step(m, rng);
    CoverageState cov(sel.table_size());
    std::vector<TraceEvent> trace;
    SelectOptions opts;
    opts.trace = &trace;
    cov.begin_run();
    sel.select_module(m, cov, opts);
    auto d = decode_coverage(cov.run_matcher(), sel.table().lut);
    EXPECT_EQ(covered(d), emitted(trace, sel.table().lut));
  }
}

TEST(Report, FreshVexListsEveryIntrinsic) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  auto d = decode_coverage(MatcherBitmap(sel.table_size()), sel.table().lut);
  GuidanceReport r = build_report(d, sel.table().lut, t);
  ASSERT_EQ(r.intrinsics.size(), t.intrinsics.size());
  EXPECT_GE(r.intrinsics.size(), 4u);
  for (const auto& i : t.intrinsics)
    EXPECT_NE(std::find(r.intrinsics.begin(), r.intrinsics.end(), i.decl), r.intrinsics.end()) << i.decl.name;
  // Weights are uncovered-pattern counts per root.
  std::map<std::string, unsigned> want;
  for (const auto& row : sel.table().lut.rows)
    if (row.kind == PatternKind::Instruction) ++want[row.root];
  ASSERT_EQ(r.opcodes.size(), want.size());
  for (const auto& o : r.opcodes) EXPECT_EQ(o.weight, want[o.root]) << o.root;
}

TEST(Report, CoveredIntrinsicDisappears) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  CoverageState cov(sel.table_size());
  auto before = build_report(decode_coverage(cov.virgin_matcher(), sel.table().lut), sel.table().lut, t);
  ModuleUnit m = parse_module(kSmax);
  cov.begin_run();
  ASSERT_TRUE(sel.select_module(m, cov).ok());
  cov.is_interesting();
  auto after = build_report(decode_coverage(cov.virgin_matcher(), sel.table().lut), sel.table().lut, t);
  auto has = [](const GuidanceReport& r, std::string_view name) {
    for (const auto& d : r.intrinsics)
      if (d.name == name) return true;
    return false;
  };
  EXPECT_TRUE(has(before, "llvm.smax.i64"));
  EXPECT_FALSE(has(after, "llvm.smax.i64"));
  EXPECT_EQ(after.intrinsics.size() + 1, before.intrinsics.size());
  // ret i64 was selected too, so its root lost weight.
  EXPECT_LT(after.weight_of("ret"), before.weight_of("ret"));
}

TEST(Report, FreshnessAcrossEpochs) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  Mutator mu(MutatorConfig::for_target(t, t.default_features()));
  CoverageState cov(sel.table_size());
  Rng rng(8);
  GuidanceReport prev = build_report(decode_coverage(cov.virgin_matcher(), sel.table().lut), sel.table().lut, t);
  for (int epoch = 1; epoch <= 5; ++epoch) {
    for (int k = 0; k < 30; ++k) {
      ModuleUnit m;
      for (int s = 0; s < 30; ++s) mu.mutate_step(m, rng);
      cov.begin_run();
      sel.select_module(m, cov);
      cov.is_interesting();
    }
    GuidanceReport next = build_report(decode_coverage(cov.virgin_matcher(), sel.table().lut), sel.table().lut, t);
    // Weights never grow and covered roots never come back.
    for (const auto& o : next.opcodes) EXPECT_LE(o.weight, prev.weight_of(o.root)) << o.root;
    for (const auto& d : next.intrinsics)
      EXPECT_NE(std::find(prev.intrinsics.begin(), prev.intrinsics.end(), d), prev.intrinsics.end());
    prev = next;
  }
}

TEST(Report, TextRoundTrip) {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  auto r = build_report(decode_coverage(MatcherBitmap(sel.table_size()), sel.table().lut), sel.table().lut, t);
  r.epoch = 3;
  std::string text = r.str();
  EXPECT_EQ(text.rfind("# epoch 3\n", 0), 0u);
  EXPECT_NE(text.find("uncovered add weight="), std::string::npos);
  EXPECT_NE(text.find("uncovered-intrinsic declare i64 @llvm.smax.i64(i64, i64)"), std::string::npos);
  EXPECT_EQ(GuidanceReport::parse(text), r);
  EXPECT_THROW(GuidanceReport::parse("uncovered add\n"), ConfigError);
  EXPECT_THROW(GuidanceReport::parse("bogus line\n"), ConfigError);
  EXPECT_THROW(GuidanceReport::parse("uncovered-intrinsic declare @x(\n"), ConfigError);
}

TEST(Epoch, Schedule) {
  EpochSchedule one(1);
  for (std::uint64_t e = 1; e < 20; ++e) EXPECT_TRUE(one.fires(e));
  EXPECT_FALSE(one.fires(0));
  EpochSchedule s;
  EXPECT_EQ(s.every(), 10000u);
  std::vector<std::uint64_t> fired;
  for (std::uint64_t e = 1; e <= 25000; ++e)
    if (s.fires(e)) fired.push_back(e);
  EXPECT_EQ(fired, (std::vector<std::uint64_t>{10000, 20000}));
  EXPECT_THROW(EpochSchedule(0), ConfigError);
}
