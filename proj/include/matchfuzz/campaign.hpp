#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "matchfuzz/coverage.hpp"
#include "matchfuzz/feedback.hpp"
#include "matchfuzz/ir.hpp"
#include "matchfuzz/mutate.hpp"
#include "matchfuzz/rng.hpp"
#include "matchfuzz/select.hpp"
#include "matchfuzz/target.hpp"

namespace matchfuzz {

// How new inputs are produced.
enum class InputMode : std::uint8_t {
  Structured,  // IR-level mutation strategies
  ByteHavoc,   // byte-level havoc on the textual form (baseline)
};

struct CampaignConfig {
  std::uint64_t seed = 0;
  std::uint64_t max_execs = 0;  // 0 = unbounded (then max_seconds must be set)
  double max_seconds = 0;       // 0 = unbounded
  bool guidance = true;
  std::uint64_t epoch_every = EpochSchedule::kDefaultEvery;
  std::uint64_t stats_every = 1000;
  unsigned min_steps = 1;  // mutation steps per execution, drawn uniformly
  unsigned max_steps = 5;
  InputMode mode = InputMode::Structured;
  std::size_t max_text_bytes = 4096;  // byte mode only
  std::optional<std::filesystem::path> seeds_dir;
  std::optional<std::filesystem::path> out_dir;
  // Mutator caps and weights; the universe is filled in from the target.
  MutatorConfig mutator = campaign_mutator_defaults();

  static MutatorConfig campaign_mutator_defaults();
  void validate() const;  // throws ConfigError
};

struct CorpusEntry {
  std::uint64_t id = 0;
  std::string text;
  std::uint64_t found_at = 0;           // execution index
  std::optional<std::uint64_t> parent;  // corpus id of the mutated entry
  Novelty novelty;
};

struct FindingRecord {
  FailureSignature signature;
  std::string reproducer;
  std::uint64_t first_seen = 0;
};

struct StatsRow {
  std::uint64_t executions = 0;
  std::size_t corpus = 0;
  std::size_t edge_buckets = 0;
  std::size_t matcher_bits = 0;
  std::size_t findings = 0;

  friend bool operator==(const StatsRow&, const StatsRow&) = default;
};

struct CampaignStats {
  std::vector<StatsRow> timeline;
  std::uint64_t executions = 0;
  std::uint64_t parse_errors = 0;
  std::uint64_t epochs = 0;

  const StatsRow& last() const { return timeline.back(); }
  std::string csv() const;  // header + one line per row
};

// Deduplicating finding store keyed by signature.
class FindingStore {
 public:
  // False iff a record with the same signature is already present.
  bool insert(FindingRecord r);
  bool contains(const FailureSignature& s) const { return by_key_.count(s.str()) != 0; }
  std::size_t size() const { return records_.size(); }
  const std::vector<FindingRecord>& records() const { return records_; }

 private:
  std::vector<FindingRecord> records_;
  std::map<std::string, std::size_t> by_key_;
};

// Per-execution notification, mainly for experiments.
struct ExecEvent {
  std::uint64_t execution = 0;  // 1-based
  Novelty novelty;
  bool stored = false;
  bool parse_error = false;
  const FailureSignature* finding = nullptr;
  bool new_finding = false;
};

class Campaign {
 public:
  Campaign(const TargetSpec& t, FeatureSet features, CampaignConfig cfg);

  // Loads seeds (if configured) and runs until the budget is spent.
  void run();
  // One execute-evaluate-store cycle.
  void step();
  // Executes `text` as-is (seed import); returns whether it was stored.
  bool execute_text(const std::string& text, std::optional<std::uint64_t> parent);
  // Executes an in-memory module.
  bool execute_module(const ModuleUnit& m, std::optional<std::uint64_t> parent);

  void on_exec(std::function<void(const ExecEvent&)> fn) { observer_ = std::move(fn); }

  const CampaignStats& stats() const { return stats_; }
  const std::vector<CorpusEntry>& corpus() const { return corpus_; }
  const FindingStore& findings() const { return findings_; }
  const CoverageState& coverage() const { return cov_; }
  const Selector& selector() const { return selector_; }
  const Mutator& mutator() const { return mutator_; }
  const CampaignConfig& config() const { return cfg_; }
  std::uint64_t executions() const { return stats_.executions; }

  // Writes stats.csv and coverage.dump to the output directory (if any).
  void flush() const;

 private:
  bool finish_execution(const SelectionResult& r, const std::string* text, const ModuleUnit* m,
                        std::optional<std::uint64_t> parent);
  void add_row();
  void maybe_epoch();
  std::string havoc(const std::string& base);

  CampaignConfig cfg_;
  Selector selector_;
  Mutator mutator_;
  CoverageState cov_;
  Rng rng_;
  EpochSchedule epochs_;
  std::vector<CorpusEntry> corpus_;
  std::vector<ModuleUnit> modules_;  // parallel to corpus_ in structured mode
  FindingStore findings_;
  CampaignStats stats_;
  std::function<void(const ExecEvent&)> observer_;
};

// Re-executes a stored input on a fresh coverage state.
SelectionResult replay(const Selector& sel, std::string_view text);

// Contents of every *.ir file in `dir`, in file-name order.
std::vector<std::string> load_seed_dir(const std::filesystem::path& dir);

// Output directory from MATCHFUZZ_OUT, else `fallback`.
std::filesystem::path default_out_dir(const std::filesystem::path& fallback);

}  // namespace matchfuzz
