#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <set>
#include <sstream>

#include "matchfuzz/campaign.hpp"
#include "matchfuzz/ir_text.hpp"

using namespace matchfuzz;
namespace fs = std::filesystem;

namespace {

const TargetSpec& builtin(std::string_view name) { return *find_builtin_target(name); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Fresh scratch directory per test.
fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("matchfuzz_campaign_" + name);
  fs::remove_all(p);
  return p;
}

CampaignConfig budget(std::uint64_t seed, std::uint64_t execs) {
  CampaignConfig c;
  c.seed = seed;
  c.max_execs = execs;
  return c;
}

}  // namespace

TEST(Config, Validation) {
  CampaignConfig c;
  EXPECT_THROW(c.validate(), ConfigError);  // no budget
  c.max_execs = 10;
  EXPECT_NO_THROW(c.validate());
  c.min_steps = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.min_steps = 6;
  EXPECT_THROW(c.validate(), ConfigError);
  c.min_steps = 1;
  c.stats_every = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.stats_every = 1;
  c.epoch_every = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c.epoch_every = 1;
  c.max_seconds = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  const TargetSpec& t = builtin("alpha");
  EXPECT_THROW(Campaign(t, t.default_features(), CampaignConfig{}), ConfigError);
}

TEST(Campaign, SmallAlphaRun) {
  const TargetSpec& t = builtin("alpha");
  Campaign c(t, t.default_features(), budget(1, 1000));
  c.run();
  EXPECT_EQ(c.executions(), 1000u);
  EXPECT_FALSE(c.corpus().empty());
  ASSERT_EQ(c.stats().timeline.size(), 1u);
  EXPECT_EQ(c.stats().last().executions, 1000u);
  EXPECT_EQ(c.stats().last().corpus, c.corpus().size());
  EXPECT_GT(c.stats().last().matcher_bits, 0u);
  EXPECT_EQ(c.stats().parse_errors, 0u);
  for (const auto& f : c.findings().records()) EXPECT_NE(f.signature.kind, FindingKind::VerifierReject);
  // Every stored entry is valid IR that selects cleanly on its own.
  for (const auto& e : c.corpus()) {
    auto r = replay(c.selector(), e.text);
    EXPECT_TRUE(r.ok()) << e.text;
    if (e.parent) EXPECT_LT(*e.parent, e.id);
  }
}

TEST(Campaign, TimelineRows) {
  const TargetSpec& t = builtin("alpha");
  CampaignConfig cfg = budget(3, 2500);
  cfg.stats_every = 1000;
  Campaign c(t, t.default_features(), cfg);
  c.run();
  std::vector<std::uint64_t> at;
  for (const auto& r : c.stats().timeline) at.push_back(r.executions);
  EXPECT_EQ(at, (std::vector<std::uint64_t>{1000, 2000, 2500}));
  for (std::size_t k = 1; k < c.stats().timeline.size(); ++k) {
    EXPECT_GE(c.stats().timeline[k].matcher_bits, c.stats().timeline[k - 1].matcher_bits);
    EXPECT_GE(c.stats().timeline[k].corpus, c.stats().timeline[k - 1].corpus);
  }
  std::string csv = c.stats().csv();
  EXPECT_EQ(csv.rfind("executions,corpus,edge_buckets,matcher_bits,findings\n", 0), 0u);
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
}

TEST(Campaign, Deterministic) {
  const TargetSpec& t = builtin("vex");
  auto run = [&] {
    Campaign c(t, t.default_features(), budget(7, 1500));
    c.run();
    std::vector<std::string> texts;
    for (const auto& e : c.corpus()) texts.push_back(e.text);
    return std::pair{c.stats().csv(), texts};
  };
  auto a = run();
  auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
}

TEST(Campaign, StoredInputsWereNovel) {
  const TargetSpec& t = builtin("vex");
  Campaign c(t, t.default_features(), budget(11, 800));
  std::uint64_t stored = 0;
  c.on_exec([&](const ExecEvent& e) {
    if (e.stored) {
      ++stored;
      EXPECT_TRUE(e.novelty.interesting());
      EXPECT_EQ(e.finding, nullptr);
    }
  });
  c.run();
  EXPECT_EQ(stored, c.corpus().size());
}

TEST(Findings, DedupAndReplay) {
  const TargetSpec& t = builtin("vex-i20");
  Campaign c(t, t.default_features(), budget(5, 4000));
  std::set<std::string> seen;
  std::uint64_t failing = 0;
  c.on_exec([&](const ExecEvent& e) {
    if (!e.finding) return;
    ++failing;
    bool fresh = seen.insert(e.finding->str()).second;
    EXPECT_EQ(fresh, e.new_finding);
  });
  c.run();
  EXPECT_GT(c.findings().size(), 0u);
  EXPECT_GT(failing, c.findings().size());  // repeats were folded
  EXPECT_EQ(c.findings().size(), seen.size());
  std::set<std::string> keys;
  for (const auto& f : c.findings().records()) {
    EXPECT_TRUE(keys.insert(f.signature.str()).second);
    auto r = replay(c.selector(), f.reproducer);
    ASSERT_TRUE(r.finding) << f.reproducer;
    EXPECT_EQ(*r.finding, f.signature);
  }
  // Findings never enter the corpus.
  for (const auto& e : c.corpus()) EXPECT_TRUE(replay(c.selector(), e.text).ok());
}

TEST(Findings, StoreRejectsDuplicates) {
  FindingStore s;
  FailureSignature a{FindingKind::InjectedAbort, "add", "i20,i20->i20", 18, "vex-i20"};
  FailureSignature b = a;
  b.byte_index = 19;
  EXPECT_TRUE(s.insert({a, "x", 1}));
  EXPECT_FALSE(s.insert({a, "y", 2}));
  EXPECT_TRUE(s.insert({b, "z", 3}));
  EXPECT_EQ(s.size(), 2u);
  EXPECT_EQ(s.records()[0].reproducer, "x");
  EXPECT_TRUE(s.contains(b));
}

TEST(Output, Layout) {
  const TargetSpec& t = builtin("vex-i20");
  fs::path dir = scratch("layout");
  CampaignConfig cfg = budget(2, 3000);
  cfg.out_dir = dir;
  cfg.epoch_every = 1000;
  Campaign c(t, t.default_features(), cfg);
  c.run();
  EXPECT_EQ(slurp(dir / "stats.csv"), c.stats().csv());
  EXPECT_TRUE(fs::exists(dir / "coverage.dump"));
  CoverageState back = CoverageState::load_dump(dir / "coverage.dump");
  EXPECT_EQ(back.matcher_bits_covered(), c.coverage().matcher_bits_covered());
  EXPECT_EQ(back.edge_buckets_covered(), c.coverage().edge_buckets_covered());
  ASSERT_TRUE(fs::exists(dir / "guidance.txt"));
  EXPECT_EQ(GuidanceReport::parse(slurp(dir / "guidance.txt")).epoch, 3u);
  EXPECT_EQ(c.stats().epochs, 3u);
  for (const auto& e : c.corpus()) {
    char name[32];
    std::snprintf(name, sizeof name, "%06llu.ir", static_cast<unsigned long long>(e.id));
    EXPECT_EQ(slurp(dir / "corpus" / name), e.text);
  }
  std::size_t files = 0;
  for (const auto& p : fs::directory_iterator(dir / "corpus")) files += p.is_regular_file();
  EXPECT_EQ(files, c.corpus().size());
  for (const auto& f : c.findings().records()) {
    std::string h = f.signature.hash();
    EXPECT_EQ(slurp(dir / "findings" / (h + ".ir")), f.reproducer);
    EXPECT_EQ(slurp(dir / "findings" / (h + ".txt")), f.signature.str() + "\n");
  }
  fs::remove_all(dir);
}

TEST(Output, EnvironmentOverride) {
  ::unsetenv("MATCHFUZZ_OUT");
  EXPECT_EQ(default_out_dir("fallback"), fs::path("fallback"));
  ::setenv("MATCHFUZZ_OUT", "/tmp/elsewhere", 1);
  EXPECT_EQ(default_out_dir("fallback"), fs::path("/tmp/elsewhere"));
  ::setenv("MATCHFUZZ_OUT", "", 1);
  EXPECT_EQ(default_out_dir("fallback"), fs::path("fallback"));
  ::unsetenv("MATCHFUZZ_OUT");
}

TEST(Seeds, ImportAndReject) {
  const TargetSpec& t = builtin("alpha");
  fs::path dir = scratch("seeds");
  fs::create_directories(dir);
  {
    std::ofstream(dir / "b.ir") << "define i32 @g(i32 %a) {\nentry:\n  %x = mul i32 %a, 3\n  ret i32 %x\n}\n";
    std::ofstream(dir / "a.ir") << "define i32 @f(i32 %a, i32 %b) {\nentry:\n  %x = add i32 %a, %b\n  ret i32 %x\n}\n";
    std::ofstream(dir / "ignored.txt") << "not a seed";
  }
  auto texts = load_seed_dir(dir);
  ASSERT_EQ(texts.size(), 2u);
  EXPECT_NE(texts[0].find("@f"), std::string::npos);

  CampaignConfig cfg = budget(1, 2);
  cfg.seeds_dir = dir;
  Campaign c(t, t.default_features(), cfg);
  c.run();
  EXPECT_EQ(c.executions(), 2u);
  ASSERT_EQ(c.corpus().size(), 2u);
  EXPECT_EQ(c.corpus()[0].text, print_module(parse_module(texts[0])));

  std::ofstream(dir / "c.ir") << "define broken";
  Campaign bad(t, t.default_features(), cfg);
  EXPECT_THROW(bad.run(), ConfigError);
  EXPECT_THROW(load_seed_dir(dir / "missing"), ConfigError);
  fs::remove_all(dir);
}

TEST(ByteHavoc, Baseline) {
  const TargetSpec& t = builtin("vex");
  CampaignConfig cfg = budget(4, 5000);
  cfg.mode = InputMode::ByteHavoc;
  cfg.max_text_bytes = 64;
  Campaign c(t, t.default_features(), cfg);
  c.run();
  EXPECT_EQ(c.executions(), 5000u);
  EXPECT_GT(c.stats().parse_errors, 0u);
  EXPECT_EQ(c.stats().epochs, 0u);
  for (const auto& e : c.corpus()) EXPECT_LE(e.text.size(), 64u);
}
