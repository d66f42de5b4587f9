// Acceptance suite: one PASS/FAIL line per criterion.
// Usage: acceptance [criterion...]   (default: all)

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "matchfuzz/campaign.hpp"
#include "matchfuzz/feedback.hpp"
#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/mutate.hpp"
#include "matchfuzz/verifier.hpp"
#include "oracles.hpp"

using namespace matchfuzz;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

struct Verdict {
  bool pass = false;
  std::string detail;
};

const TargetSpec& builtin(std::string_view name) { return *find_builtin_target(name); }

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// 1. Chained mutation never produces invalid IR.
Verdict mutator_validity() {
  const TargetSpec& t = builtin("vex");
  Mutator mu(MutatorConfig::for_target(t, t.default_features()));
  const auto t0 = Clock::now();
  std::size_t violations = 0, instrs = 0;
  std::string first;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    ModuleUnit m;
    for (int k = 0; k < 10000; ++k) {
      mu.mutate_step(m, rng);
      auto v = verify_module(m);
      if (!v.empty() && first.empty()) first = v[0].str();
      violations += v.size();
    }
    instrs += m.instruction_count();
  }
  const double dt = seconds_since(t0);
  Verdict r;
  r.pass = violations == 0 && dt < 60.0;
  r.detail = fmt("violations=%zu final_instrs=%zu time=%.1fs (limit 60s)", violations, instrs, dt);
  if (!first.empty()) r.detail += " first: " + first;
  return r;
}

// 2. insert_scfg keeps the dominance relation among existing blocks.
Verdict dominance_preservation() {
  const TargetSpec& t = builtin("alpha");
  MutatorConfig c = MutatorConfig::for_target(t, t.default_features());
  c.max_blocks = 64;
  Mutator mu(c);
  Rng rng(2);
  int ok = 0, applied = 0;
  const int trials = 1000;
  for (int k = 0; k < trials; ++k) {
    ModuleUnit m = oracle::random_cfg(rng, 50);
    auto before = oracle::dom_sets(m.functions[0]);
    const std::size_t n0 = m.functions[0].blocks.size();
    if (mu.insert_scfg(m, rng) != MutationStatus::Applied) continue;
    ++applied;
    auto after = oracle::dom_sets(m.functions[0]);
    bool same = verify_module(m).empty();
    for (std::size_t a = 0; a < n0 && same; ++a)
      for (std::size_t b = 0; b < n0 && same; ++b)
        same = before[b].count(static_cast<std::uint32_t>(a)) == after[b].count(static_cast<std::uint32_t>(a));
    ok += same;
  }
  return {ok == trials, fmt("identical=%d/%d applied=%d", ok, trials, applied)};
}

// 3. Bitmap packing: ceil(N/8) bytes, and setting one bit touches only it.
Verdict bit_packing() {
  std::vector<std::size_t> sizes;
  for (std::size_t n = 1; n <= 64; ++n) sizes.push_back(n);
  sizes.push_back(489789);
  std::size_t bad_len = 0, bad_iso = 0, checked = 0;
  for (std::size_t n : sizes) {
    MatcherBitmap bm(n);
    if (bm.bytes().size() != (n + 7) / 8 || bm.size() != n) ++bad_len;
    const bool small = n <= 64;
    for (std::size_t i = 0; i < n; ++i) {
      bm.set(i);
      auto bytes = bm.bytes();
      bool iso = bm.test(i) && bytes[i / 8] == (1u << (i % 8));
      // Full scan for small maps and a sample of the large one.
      if (small || i % 997 == 0 || i + 64 >= n) {
        std::size_t ones = 0;
        for (std::size_t j = 0; j < bytes.size(); ++j) ones += std::popcount(static_cast<unsigned>(bytes[j]));
        iso = iso && ones == 1;
        for (std::size_t j = 0; j < n && (small || j < 16); ++j)
          if (j != i && bm.test(j)) iso = false;
      } else {
        iso = iso && (i % 8 == 0 || !bm.test(i - 1)) && (i + 1 >= n || !bm.test(i + 1));
      }
      bad_iso += !iso;
      ++checked;
      bm.clear();
      if (bm.bytes()[i / 8] != 0) ++bad_iso;
    }
    // Indices at or past N are rejected.
    try {
      bm.set(n);
      ++bad_iso;
    } catch (const IndexOutOfRange&) {
    }
  }
  return {bad_len == 0 && bad_iso == 0,
          fmt("sizes=%zu bad_lengths=%zu bad_isolation=%zu bits_checked=%zu len(489789)=%zu", sizes.size(), bad_len,
              bad_iso, checked, MatcherBitmap(489789).bytes().size())};
}

// 4. A run that only adds matcher bits is interesting; its repeat is not.
Verdict dual_interestingness() {
  TargetSpec t = parse_target(
      "target dual\n"
      "widths 1 32\n"
      "intrinsic declare void @llvm.dual.a()\n"
      "intrinsic declare void @llvm.dual.b()\n"
      "pattern 0 1 llvm.dual.a emits CALL_A\n"
      "pattern 1 1 llvm.dual.b emits CALL_B\n"
      "pattern 2 1 ret emits RET\n");
  validate_target(t);
  auto module = [](const char* callee) {
    return std::string("declare void @") + callee + "()\ndefine void @f() {\nentry:\n  call void @" + callee +
           "()\n  ret void\n}\n";
  };
  Selector sel(t);
  CoverageState cov(sel.table_size());
  auto run = [&](const std::string& text) {
    cov.begin_run();
    SelectionResult r = sel.select_text(text, cov);
    Novelty n = cov.is_interesting();
    return std::pair{r.ok(), n};
  };
  auto [ok_a, first] = run(module("llvm.dual.a"));
  auto [ok_b, second] = run(module("llvm.dual.b"));
  auto [ok_c, repeat] = run(module("llvm.dual.b"));
  bool pass = ok_a && ok_b && ok_c && first.interesting() && second.new_edge_buckets == 0 &&
              second.new_matcher_bits > 0 && second.interesting() && !repeat.interesting();
  return {pass, fmt("matcher-only run: edges+%zu bits+%zu interesting=%d; repeat: edges+%zu bits+%zu interesting=%d",
                    second.new_edge_buckets, second.new_matcher_bits, int(second.interesting()),
                    repeat.new_edge_buckets, repeat.new_matcher_bits, int(repeat.interesting()))};
}

// 5. Decoded coverage equals the EMITs seen in the trace.
Verdict decoder_soundness() {
  const TargetSpec& t = builtin("vex");
  Selector sel(t);
  const LookupTable& lut = sel.table().lut;
  Mutator mu(MutatorConfig::for_target(t, t.default_features()));
  Rng rng(5);
  int exact = 0;
  std::size_t patterns = 0;
  for (int k = 0; k < 100; ++k) {
    ModuleUnit m;
    for (int s = 0; s < 40; ++s) mu.mutate_step(m, rng);
    CoverageState cov(sel.table_size());
    std::vector<TraceEvent> trace;
    SelectOptions opts;
    opts.trace = &trace;
    cov.begin_run();
    sel.select_module(m, cov, opts);
    // Trace side: pattern owning each executed EMIT, by linear row search.
    std::set<std::uint16_t> want;
    for (const auto& e : trace) {
      if (e.kind != MatcherOp::Emit) continue;
      for (const auto& row : lut.rows)
        if (e.index >= row.begin && e.index < row.end) want.insert(row.pattern);
    }
    std::set<std::uint16_t> got;
    for (const auto& d : decode_coverage(cov.run_matcher(), lut))
      if (d.covered) got.insert(d.pattern);
    exact += got == want && !want.empty();
    patterns += want.size();
  }
  return {exact == 100, fmt("exact=%d/100 covered_patterns_total=%zu", exact, patterns)};
}

// 6. Matcher bits keep arriving after edge novelty has stalled.
Verdict saturation_divergence() {
  const TargetSpec& t = builtin("vex");
  constexpr std::uint64_t kStall = 10000, kWindow = 50000, kCap = 400000;
  int good = 0;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    CampaignConfig cfg;
    cfg.seed = seed;
    cfg.max_execs = kCap;
    Campaign c(t, t.default_features(), cfg);
    std::uint64_t last_edge = 0, stall_at = 0, bit_at = 0;
    std::size_t bits_at_stall = 0;
    c.on_exec([&](const ExecEvent& e) {
      if (e.novelty.new_edge_buckets && !e.finding) last_edge = e.execution;
      if (!stall_at && e.execution - last_edge >= kStall) {
        stall_at = e.execution;
        bits_at_stall = c.coverage().matcher_bits_covered();
      }
      if (stall_at && !bit_at && c.coverage().matcher_bits_covered() > bits_at_stall) bit_at = e.execution;
    });
    while (c.executions() < kCap && !bit_at && !(stall_at && c.executions() >= stall_at + kWindow)) c.step();
    bool ok = stall_at && bit_at && bit_at <= stall_at + kWindow;
    good += ok;
    detail += fmt(" [seed %llu: stall@%llu new_bit@%llu]", static_cast<unsigned long long>(seed),
                  static_cast<unsigned long long>(stall_at), static_cast<unsigned long long>(bit_at));
  }
  return {good >= 4, fmt("seeds_ok=%d/5 (need 4)", good) + detail};
}

// 7. Guidance does not hurt; byte havoc is far behind.
Verdict ablation() {
  const TargetSpec& t = builtin("vex");
  const auto t0 = Clock::now();
  std::vector<std::size_t> guided, bare, bytes;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    for (int mode = 0; mode < 3; ++mode) {
      CampaignConfig cfg;
      cfg.seed = seed;
      cfg.max_execs = 200000;
      cfg.guidance = mode == 0;
      if (mode == 2) cfg.mode = InputMode::ByteHavoc;
      Campaign c(t, t.default_features(), cfg);
      c.run();
      std::size_t b = c.coverage().matcher_bits_covered();
      (mode == 0 ? guided : mode == 1 ? bare : bytes).push_back(b);
    }
  }
  const double dt = seconds_since(t0);
  auto median = [](std::vector<std::size_t> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  bool baseline_low = true;
  for (std::size_t k = 0; k < guided.size(); ++k) baseline_low = baseline_low && bytes[k] * 20 < guided[k];
  const std::size_t mg = median(guided), mb = median(bare), mh = median(bytes);
  bool pass = mg >= mb && baseline_low && dt < 600.0;
  std::string runs;
  for (std::size_t k = 0; k < guided.size(); ++k) runs += fmt(" %zu/%zu/%zu", guided[k], bare[k], bytes[k]);
  return {pass, fmt("median guided=%zu unguided=%zu byte=%zu (%.2f%% of guided) time=%.0fs (limit 600s) runs g/u/b:",
                    mg, mb, mh, 100.0 * double(mh) / double(std::max<std::size_t>(mg, 1)), dt) +
                    runs};
}

// 8. One record per distinct signature; replay reproduces each.
Verdict finding_pipeline() {
  const TargetSpec& t = builtin("vex-i20");
  CampaignConfig cfg;
  cfg.seed = 8;
  cfg.max_execs = 100000;
  Campaign c(t, t.default_features(), cfg);
  std::set<std::string> seen;
  std::uint64_t failing = 0;
  bool flags_ok = true;
  c.on_exec([&](const ExecEvent& e) {
    if (!e.finding) return;
    ++failing;
    flags_ok = flags_ok && (seen.insert(e.finding->str()).second == e.new_finding);
  });
  c.run();
  std::set<std::string> keys;
  std::map<FindingKind, std::size_t> kinds;
  std::size_t reproduced = 0;
  for (const auto& f : c.findings().records()) {
    keys.insert(f.signature.str());
    ++kinds[f.signature.kind];
    SelectionResult r = replay(c.selector(), f.reproducer);
    reproduced += r.finding && *r.finding == f.signature;
  }
  const std::size_t n = c.findings().size();
  bool pass = n > 0 && keys.size() == n && seen.size() == n && flags_ok && reproduced == n &&
              kinds[FindingKind::InjectedAbort] > 0 && kinds[FindingKind::HangSentinel] > 0;
  return {pass, fmt("failing_execs=%llu distinct=%zu records=%zu replayed=%zu/%zu abort=%zu hang=%zu",
                    static_cast<unsigned long long>(failing), seen.size(), n, reproduced, n,
                    kinds[FindingKind::InjectedAbort], kinds[FindingKind::HangSentinel])};
}

// 9. Two CLI runs with the same seed give identical outputs.
Verdict determinism() {
  fs::path base = fs::temp_directory_path() / "matchfuzz_acceptance_det";
  fs::remove_all(base);
  std::vector<std::string> csv, ids, texts;
  for (const char* d : {"a", "b"}) {
    fs::path out = base / d;
    std::string cmd = std::string("\"") + MATCHFUZZ_CLI + "\" fuzz --seed 7 --execs 1000 -q --out \"" + out.string() +
                      "\" > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    if (rc != 0) return {false, fmt("cli exited with status %d", rc)};
    csv.push_back(slurp(out / "stats.csv"));
    std::vector<std::string> names;
    for (const auto& e : fs::directory_iterator(out / "corpus")) names.push_back(e.path().filename().string());
    std::sort(names.begin(), names.end());
    std::string all_ids, all_text;
    for (const auto& n : names) {
      all_ids += n + "\n";
      all_text += slurp(out / "corpus" / n);
    }
    ids.push_back(all_ids);
    texts.push_back(all_text);
  }
  fs::remove_all(base);
  bool pass = !csv[0].empty() && csv[0] == csv[1] && ids[0] == ids[1] && texts[0] == texts[1];
  return {pass, fmt("stats_identical=%d corpus_ids_identical=%d corpus_text_identical=%d stats_bytes=%zu",
                    int(csv[0] == csv[1]), int(ids[0] == ids[1]), int(texts[0] == texts[1]), csv[0].size())};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"mutator validity", mutator_validity},
      {"dominance preservation", dominance_preservation},
      {"bit-packing exactness", bit_packing},
      {"dual interestingness", dual_interestingness},
      {"decoder soundness", decoder_soundness},
      {"saturation divergence", saturation_divergence},
      {"ablation direction", ablation},
      {"finding pipeline", finding_pipeline},
      {"determinism", determinism},
  };
  std::set<int> only;
  for (int k = 1; k < argc; ++k) only.insert(std::atoi(argv[k]));
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const int id = static_cast<int>(k + 1);
    if (!only.empty() && !only.count(id)) continue;
    const auto t0 = Clock::now();
    Verdict v;
    try {
      v = criteria[k].second();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    failed += !v.pass;
    std::printf("criterion %d (%s): %s  %s  [%.1fs]\n", id, criteria[k].first, v.pass ? "PASS" : "FAIL",
                v.detail.c_str(), seconds_since(t0));
    std::fflush(stdout);
  }
  return failed ? 1 : 0;
}
