// matchfuzz command suite.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "matchfuzz/campaign.hpp"
#include "matchfuzz/feedback.hpp"
#include "matchfuzz/ir_text.hpp"
#include "matchfuzz/verifier.hpp"

using namespace matchfuzz;
namespace fs = std::filesystem;

namespace {

constexpr int kOk = 0;
constexpr int kFindings = 1;
constexpr int kUsage = 2;

// Bad input that is the caller's fault; reported like a usage error.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ModuleUnit read_module(const std::string& path) {
  try {
    return parse_module(read_file(path));
  } catch (const SyntaxError& e) {
    throw UsageError(path + ": " + e.what());
  }
}

// Built-in name or path to a target description file.
struct TargetChoice {
  std::string name = "vex";
  std::vector<std::string> settings;
  TargetSpec spec;
  FeatureSet features;

  void add_flags(CLI::App* app) {
    app->add_option("--target", name, "built-in target name or target file")->capture_default_str();
    app->add_option("--feature", settings, "feature setting name=on|off (repeatable)");
  }

  void resolve() {
    if (const TargetSpec* t = find_builtin_target(name)) {
      spec = *t;
    } else if (fs::is_regular_file(name)) {
      spec = parse_target(read_file(name));
      validate_target(spec);
    } else {
      throw UsageError("unknown target " + name);
    }
    features = spec.with_settings(settings);
  }
};

void print_finding(const SelectionResult& r) {
  if (r.parse_error) {
    std::cout << "parse-error\n";
  } else if (r.finding) {
    std::cout << r.finding->str() << "\n";
  } else {
    std::cout << "ok\n";
  }
}

int cmd_targets() {
  for (const auto& t : builtin_targets()) {
    Selector sel(t);
    std::cout << t.name << " patterns=" << t.patterns.size() << " table=" << sel.table_size()
              << " intrinsics=" << t.intrinsics.size() << " features=";
    for (std::size_t k = 0; k < t.features.size(); ++k)
      std::cout << (k ? "," : "") << t.features[k].name << "=" << (t.features[k].default_on ? "on" : "off");
    if (t.features.empty()) std::cout << "-";
    std::cout << "\n";
  }
  return kOk;
}

int cmd_verify(const std::string& path) {
  auto v = verify_module(read_module(path));
  for (const auto& x : v) std::cout << x.str() << "\n";
  return v.empty() ? kOk : kFindings;
}

int cmd_mutate(const TargetChoice& tc, const std::string& in, std::uint64_t seed, unsigned steps,
               const std::string& out) {
  ModuleUnit m = in.empty() ? ModuleUnit{} : read_module(in);
  Mutator mu(MutatorConfig::for_target(tc.spec, tc.features));
  Rng rng(seed);
  for (unsigned s = 0; s < steps; ++s) mu.mutate_step(m, rng);
  std::string text = print_module(m);
  if (out.empty()) {
    std::cout << text;
  } else {
    std::ofstream f(out, std::ios::binary | std::ios::trunc);
    if (!f) throw UsageError("cannot write " + out);
    f << text;
  }
  return kOk;
}

int cmd_select(const TargetChoice& tc, const std::string& path, bool trace) {
  Selector sel(tc.spec, tc.features);
  CoverageState cov(sel.table_size());
  std::vector<TraceEvent> events;
  SelectOptions opts;
  opts.collect = true;
  if (trace) opts.trace = &events;
  cov.begin_run();
  SelectionResult r = sel.select_text(read_file(path), cov, opts);
  if (trace) {
    for (const auto& e : events) std::cout << e.index << "," << matcher_op_name(e.kind) << "\n";
  } else {
    for (const auto& s : r.selected) {
      std::cout << s.function << " " << s.block << ":" << s.index << " " << s.root << " -> ";
      if (s.pattern)
        std::cout << s.machine_op << " #" << *s.pattern << "\n";
      else
        std::cout << "<none>\n";
    }
  }
  if (r.parse_error) throw UsageError(path + ": does not parse");
  if (r.finding) {
    std::cerr << "finding: " << r.finding->str() << "\n";
    return kFindings;
  }
  return kOk;
}

int cmd_cov_report(const std::string& path) {
  CoverageState cov = CoverageState::load_dump(path);
  const std::size_t n = cov.virgin_matcher().size();
  const std::size_t bits = cov.matcher_bits_covered();
  auto pct = [](double a, double b) { return b == 0 ? 0.0 : 100.0 * a / b; };
  std::printf("matcher_bits %zu/%zu %.2f%%\n", bits, n, pct(double(bits), double(n)));
  std::printf("edges %zu/%zu %.2f%%\n", cov.edges_covered(), EdgeMap::kSize,
              pct(double(cov.edges_covered()), double(EdgeMap::kSize)));
  std::printf("edge_buckets %zu\n", cov.edge_buckets_covered());
  return kOk;
}

int cmd_decode(const TargetChoice& tc, const std::string& path) {
  Selector sel(tc.spec, tc.features);
  CoverageState cov = CoverageState::load_dump(path);
  const LookupTable& lut = sel.table().lut;
  GuidanceReport r = build_report(decode_coverage(cov.virgin_matcher(), lut), lut, tc.spec);
  std::cout << r.str();
  return kOk;
}

int cmd_replay(const TargetChoice& tc, const std::vector<std::string>& paths) {
  Selector sel(tc.spec, tc.features);
  int rc = kOk;
  for (const auto& p : paths) {
    // A findings/<hash>.txt sibling holds the expected signature.
    SelectionResult r = replay(sel, read_file(p));
    if (paths.size() > 1) std::cout << p << ": ";
    print_finding(r);
    if (r.finding) rc = kFindings;
    fs::path expect = fs::path(p).replace_extension(".txt");
    if (r.finding && fs::is_regular_file(expect)) {
      FailureSignature want = FailureSignature::parse(read_file(expect.string()));
      if (!(want == *r.finding)) {
        std::cerr << p << ": signature differs from " << expect.string() << "\n";
        rc = kUsage;
      }
    }
  }
  return rc;
}

struct FuzzFlags {
  std::uint64_t seed = 0;
  std::uint64_t execs = 0;
  double seconds = 0;
  bool no_guidance = false;
  bool byte_havoc = false;
  std::uint64_t epoch_every = EpochSchedule::kDefaultEvery;
  std::string seeds;
  std::string out;
  bool quiet = false;
};

int cmd_fuzz(const TargetChoice& tc, const FuzzFlags& f) {
  CampaignConfig cfg;
  cfg.seed = f.seed;
  cfg.max_execs = f.execs;
  cfg.max_seconds = f.seconds;
  cfg.guidance = !f.no_guidance;
  cfg.epoch_every = f.epoch_every;
  cfg.mode = f.byte_havoc ? InputMode::ByteHavoc : InputMode::Structured;
  if (!f.seeds.empty()) cfg.seeds_dir = f.seeds;
  cfg.out_dir = f.out.empty() ? default_out_dir("matchfuzz-out") : fs::path(f.out);
  Campaign c(tc.spec, tc.features, cfg);
  c.run();
  const StatsRow& r = c.stats().last();
  if (!f.quiet) {
    std::printf("execs=%llu corpus=%zu edge_buckets=%zu matcher_bits=%zu/%zu findings=%zu out=%s\n",
                static_cast<unsigned long long>(r.executions), r.corpus, r.edge_buckets, r.matcher_bits,
                c.selector().table_size(), r.findings, cfg.out_dir->string().c_str());
    for (const auto& rec : c.findings().records()) std::printf("  %s\n", rec.signature.str().c_str());
  }
  return c.findings().size() ? kFindings : kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"matchfuzz: coverage-guided fuzzing of a table-driven instruction selector"};
  app.require_subcommand(1);

  app.add_subcommand("targets", "list built-in targets");

  auto* verify = app.add_subcommand("verify", "check an IR file; one violation per line");
  std::string verify_in;
  verify->add_option("file", verify_in)->required();

  auto* mutate = app.add_subcommand("mutate", "apply K mutation steps and print the result");
  TargetChoice mutate_t;
  mutate_t.add_flags(mutate);
  std::uint64_t mutate_seed = 0;
  unsigned mutate_steps = 1;
  std::string mutate_in, mutate_out;
  mutate->add_option("--seed", mutate_seed)->capture_default_str();
  mutate->add_option("--steps", mutate_steps)->capture_default_str();
  mutate->add_option("input", mutate_in, "input IR (omit to start from an empty module)");
  mutate->add_option("-o,--output", mutate_out);

  auto* select = app.add_subcommand("select", "run the selector over an IR file");
  TargetChoice select_t;
  select_t.add_flags(select);
  std::string select_in;
  bool select_trace = false;
  select->add_option("file", select_in)->required();
  select->add_flag("--trace", select_trace, "print every table byte read as idx,kind");

  auto* covrep = app.add_subcommand("cov-report", "summarise a coverage dump");
  std::string cov_in;
  covrep->add_option("dump", cov_in)->required();

  auto* decode = app.add_subcommand("decode", "print the guidance report for a coverage dump");
  TargetChoice decode_t;
  decode_t.add_flags(decode);
  std::string decode_in;
  decode->add_option("dump", decode_in)->required();

  auto* rep = app.add_subcommand("replay", "re-run stored inputs and print their verdicts");
  TargetChoice replay_t;
  replay_t.add_flags(rep);
  std::vector<std::string> replay_in;
  rep->add_option("files", replay_in)->required();

  auto* fuzz = app.add_subcommand("fuzz", "run a fuzzing campaign");
  TargetChoice fuzz_t;
  fuzz_t.add_flags(fuzz);
  FuzzFlags ff;
  fuzz->add_option("--seed", ff.seed)->capture_default_str();
  auto* execs = fuzz->add_option("--execs", ff.execs, "execution budget");
  auto* secs = fuzz->add_option("--seconds", ff.seconds, "time budget");
  execs->excludes(secs);
  fuzz->add_flag("--no-guidance", ff.no_guidance, "disable matcher-table feedback to the mutator");
  fuzz->add_flag("--byte-havoc", ff.byte_havoc, "byte-level havoc on IR text instead of IR mutation");
  fuzz->add_option("--epoch-every", ff.epoch_every, "executions between guidance updates")->capture_default_str();
  fuzz->add_option("--seeds", ff.seeds, "directory of *.ir seeds");
  fuzz->add_option("--out", ff.out, "output directory (default: $MATCHFUZZ_OUT or ./matchfuzz-out)");
  fuzz->add_flag("-q,--quiet", ff.quiet);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (app.got_subcommand("targets")) return cmd_targets();
    if (*verify) return cmd_verify(verify_in);
    if (*mutate) {
      mutate_t.resolve();
      return cmd_mutate(mutate_t, mutate_in, mutate_seed, mutate_steps, mutate_out);
    }
    if (*select) {
      select_t.resolve();
      return cmd_select(select_t, select_in, select_trace);
    }
    if (*covrep) return cmd_cov_report(cov_in);
    if (*decode) {
      decode_t.resolve();
      return cmd_decode(decode_t, decode_in);
    }
    if (*rep) {
      replay_t.resolve();
      return cmd_replay(replay_t, replay_in);
    }
    if (*fuzz) {
      if (ff.execs == 0 && ff.seconds <= 0) throw UsageError("fuzz needs --execs or --seconds");
      fuzz_t.resolve();
      return cmd_fuzz(fuzz_t, ff);
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n" << app.help();
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
