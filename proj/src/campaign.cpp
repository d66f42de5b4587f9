#include "matchfuzz/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "matchfuzz/ir_text.hpp"

namespace matchfuzz {

namespace fs = std::filesystem;

MutatorConfig CampaignConfig::campaign_mutator_defaults() {
  // Smaller than the mutator's own caps: campaign inputs stay cheap to
  // execute, and every corpus entry is a parent for more growth.
  MutatorConfig c;
  c.max_functions = 3;
  c.max_blocks = 24;
  c.max_instrs_per_block = 24;
  c.max_instrs_per_function = 96;
  c.max_globals = 8;
  return c;
}

void CampaignConfig::validate() const {
  if (max_execs == 0 && max_seconds <= 0) throw ConfigError("campaign needs an execution or time budget");
  if (max_seconds < 0) throw ConfigError("negative time budget");
  if (min_steps < 1 || min_steps > max_steps) throw ConfigError("bad mutation step range");
  if (epoch_every == 0) throw ConfigError("epoch interval must be at least 1");
  if (stats_every == 0) throw ConfigError("stats interval must be at least 1");
  if (max_text_bytes == 0) throw ConfigError("text size cap must be positive");
}

std::string CampaignStats::csv() const {
  std::string out = "executions,corpus,edge_buckets,matcher_bits,findings\n";
  for (const auto& r : timeline)
    out += std::to_string(r.executions) + "," + std::to_string(r.corpus) + "," + std::to_string(r.edge_buckets) +
           "," + std::to_string(r.matcher_bits) + "," + std::to_string(r.findings) + "\n";
  return out;
}

bool FindingStore::insert(FindingRecord r) {
  std::string key = r.signature.str();
  if (by_key_.count(key)) return false;
  by_key_.emplace(std::move(key), records_.size());
  records_.push_back(std::move(r));
  return true;
}

namespace {

void write_file(const fs::path& p, std::string_view data) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + p.string());
  out.write(data.data(), static_cast<std::streamsize>(data.size()));
}

std::string corpus_name(std::uint64_t id) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06llu.ir", static_cast<unsigned long long>(id));
  return buf;
}

MutatorConfig with_universe(MutatorConfig c, const TargetSpec& t, const FeatureSet& fs) {
  c.universe = TypeUniverse::for_target(t, fs);
  c.guidance.reset();
  return c;
}

}  // namespace

Campaign::Campaign(const TargetSpec& t, FeatureSet features, CampaignConfig cfg)
    : cfg_(std::move(cfg)),
      selector_(t, features),
      mutator_(with_universe(cfg_.mutator, t, features)),
      cov_(selector_.table_size()),
      rng_(cfg_.seed),
      epochs_(cfg_.epoch_every) {
  cfg_.validate();
  if (cfg_.out_dir) {
    fs::create_directories(*cfg_.out_dir / "corpus");
    fs::create_directories(*cfg_.out_dir / "findings");
  }
}

void Campaign::run() {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto spent = [&] {
    if (cfg_.max_execs && stats_.executions >= cfg_.max_execs) return true;
    if (cfg_.max_seconds > 0 && std::chrono::duration<double>(clock::now() - start).count() >= cfg_.max_seconds)
      return true;
    return false;
  };
  if (cfg_.seeds_dir) {
    auto texts = load_seed_dir(*cfg_.seeds_dir);
    if (cfg_.mode == InputMode::ByteHavoc) {
      for (const auto& text : texts) {
        if (spent()) break;
        execute_text(text, std::nullopt);
      }
    } else {
      // Reject a bad seed directory before spending any budget.
      std::vector<ModuleUnit> seeds;
      for (const auto& text : texts) {
        try {
          seeds.push_back(parse_module(text));
        } catch (const SyntaxError& e) {
          throw ConfigError(std::string("seed does not parse: ") + e.what());
        }
      }
      for (const auto& m : seeds) {
        if (spent()) break;
        execute_module(m, std::nullopt);
      }
    }
  }
  while (!spent()) step();
  if (stats_.timeline.empty() || stats_.timeline.back().executions != stats_.executions) add_row();
  flush();
}

void Campaign::step() {
  std::optional<std::uint64_t> parent;
  if (cfg_.mode == InputMode::ByteHavoc) {
    std::string base;
    if (!corpus_.empty()) {
      std::size_t k = rng_.below(corpus_.size());
      base = corpus_[k].text;
      parent = corpus_[k].id;
    }
    execute_text(havoc(base), parent);
    return;
  }
  ModuleUnit m;
  if (corpus_.empty()) {
    // No seed: start from a fresh function.
    mutator_.generate_function(m, rng_);
  } else {
    std::size_t k = rng_.below(modules_.size());
    m = modules_[k];
    parent = corpus_[k].id;
  }
  auto steps = static_cast<unsigned>(rng_.range(cfg_.min_steps, cfg_.max_steps));
  for (unsigned s = 0; s < steps; ++s) mutator_.mutate_step(m, rng_);
  execute_module(m, parent);
}

bool Campaign::execute_text(const std::string& text, std::optional<std::uint64_t> parent) {
  cov_.begin_run();
  SelectionResult r = selector_.select_text(text, cov_);
  if (cfg_.mode == InputMode::Structured && !r.parse_error) {
    // Keep the parsed module so it can be mutated later.
    ModuleUnit m = parse_module(text);
    return finish_execution(r, &text, &m, parent);
  }
  return finish_execution(r, &text, nullptr, parent);
}

bool Campaign::execute_module(const ModuleUnit& m, std::optional<std::uint64_t> parent) {
  cov_.begin_run();
  SelectionResult r = selector_.select_module(m, cov_);
  return finish_execution(r, nullptr, &m, parent);
}

bool Campaign::finish_execution(const SelectionResult& r, const std::string* text, const ModuleUnit* m,
                                std::optional<std::uint64_t> parent) {
  ExecEvent ev;
  ev.execution = ++stats_.executions;
  ev.parse_error = r.parse_error;
  if (r.parse_error) ++stats_.parse_errors;
  if (r.finding) {
    // Failing runs go to the finding store, not the corpus, and their
    // coverage is not folded in.
    ev.novelty = cov_.evaluate();
    FindingRecord rec{*r.finding, text ? *text : print_module(*m), ev.execution};
    ev.new_finding = findings_.insert(rec);
    if (ev.new_finding && cfg_.out_dir) {
      std::string h = r.finding->hash();
      write_file(*cfg_.out_dir / "findings" / (h + ".ir"), rec.reproducer);
      write_file(*cfg_.out_dir / "findings" / (h + ".txt"), r.finding->str() + "\n");
    }
    for (const auto& f : findings_.records())
      if (f.signature == *r.finding) ev.finding = &f.signature;
  } else {
    ev.novelty = cov_.is_interesting();
    if (ev.novelty.interesting()) {
      // Only valid modules enter a structured corpus.
      bool storable = cfg_.mode == InputMode::ByteHavoc || m != nullptr;
      if (storable) {
        CorpusEntry e;
        e.id = corpus_.size();
        e.text = text ? *text : print_module(*m);
        e.found_at = ev.execution;
        e.parent = parent;
        e.novelty = ev.novelty;
        if (cfg_.out_dir) write_file(*cfg_.out_dir / "corpus" / corpus_name(e.id), e.text);
        corpus_.push_back(std::move(e));
        if (cfg_.mode == InputMode::Structured) modules_.push_back(*m);
        ev.stored = true;
      }
    }
  }
  if (stats_.executions % cfg_.stats_every == 0) add_row();
  maybe_epoch();
  if (observer_) observer_(ev);
  return ev.stored;
}

void Campaign::add_row() {
  stats_.timeline.push_back(
      {stats_.executions, corpus_.size(), cov_.edge_buckets_covered(), cov_.matcher_bits_covered(), findings_.size()});
}

void Campaign::maybe_epoch() {
  if (!cfg_.guidance || cfg_.mode != InputMode::Structured || !epochs_.fires(stats_.executions)) return;
  const LookupTable& lut = selector_.table().lut;
  GuidanceReport report = build_report(decode_coverage(cov_.virgin_matcher(), lut), lut, selector_.target());
  report.epoch = ++stats_.epochs;
  if (cfg_.out_dir) write_file(*cfg_.out_dir / "guidance.txt", report.str());
  mutator_.set_guidance(std::move(report));
}

std::string Campaign::havoc(const std::string& base) {
  static const std::uint8_t kInteresting[] = {0x00, 0x01, 0x7F, 0x80, 0xFF, '0', '1', ' ', '\n', '%', '@', ','};
  std::string s = base;
  std::size_t ops = std::size_t{1} << rng_.range(0, 4);  // 1..16 stacked edits
  for (std::size_t k = 0; k < ops; ++k) {
    switch (rng_.below(s.empty() ? 2 : 7)) {
      case 0:  // insert a random byte
        s.insert(s.begin() + static_cast<long>(rng_.below(s.size() + 1)), static_cast<char>(rng_.below(256)));
        break;
      case 1:  // insert an interesting byte
        s.insert(s.begin() + static_cast<long>(rng_.below(s.size() + 1)),
                 static_cast<char>(kInteresting[rng_.below(std::size(kInteresting))]));
        break;
      case 2:  // flip a bit
        s[rng_.below(s.size())] ^= static_cast<char>(1u << rng_.below(8));
        break;
      case 3:  // overwrite a byte
        s[rng_.below(s.size())] = static_cast<char>(rng_.below(256));
        break;
      case 4: {  // delete a block
        std::size_t at = rng_.below(s.size());
        std::size_t len = 1 + rng_.below(std::min<std::size_t>(s.size() - at, 32));
        s.erase(at, len);
        break;
      }
      case 5: {  // duplicate a block
        std::size_t at = rng_.below(s.size());
        std::size_t len = 1 + rng_.below(std::min<std::size_t>(s.size() - at, 32));
        std::string chunk = s.substr(at, len);
        s.insert(rng_.below(s.size() + 1), chunk);
        break;
      }
      default: {  // splice a block from another corpus entry
        if (corpus_.empty()) break;
        const std::string& o = corpus_[rng_.below(corpus_.size())].text;
        if (o.empty()) break;
        std::size_t at = rng_.below(o.size());
        std::size_t len = 1 + rng_.below(std::min<std::size_t>(o.size() - at, 64));
        s.insert(rng_.below(s.size() + 1), o.substr(at, len));
        break;
      }
    }
  }
  if (s.size() > cfg_.max_text_bytes) s.resize(cfg_.max_text_bytes);
  return s;
}

void Campaign::flush() const {
  if (!cfg_.out_dir) return;
  write_file(*cfg_.out_dir / "stats.csv", stats_.csv());
  cov_.save_dump(*cfg_.out_dir / "coverage.dump");
}

SelectionResult replay(const Selector& sel, std::string_view text) {
  CoverageState cov(sel.table_size());
  cov.begin_run();
  return sel.select_text(text, cov);
}

std::vector<std::string> load_seed_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw ConfigError("seed directory not found: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".ir") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::vector<std::string> out;
  for (const auto& p : files) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out.push_back(ss.str());
  }
  return out;
}

fs::path default_out_dir(const fs::path& fallback) {
  if (const char* env = std::getenv("MATCHFUZZ_OUT"); env && *env) return env;
  return fallback;
}

}  // namespace matchfuzz
