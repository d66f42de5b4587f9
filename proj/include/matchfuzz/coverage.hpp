#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

namespace matchfuzz {

class IndexOutOfRange : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

class CorruptDump : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Hit-count class bit for a raw counter: 1, 2, 3, 4-7, 8-15, 16-31, 32-127,
// 128-255 map to bits 0..7; zero maps to 0.
std::uint8_t bucket_of(std::uint8_t count);

// AFL-style edge counters over 16-bit probe ids.
class EdgeMap {
 public:
  static constexpr std::size_t kSize = 65536;

  EdgeMap() : counts_(kSize, 0) {}

  void record(std::uint16_t probe) {
    std::uint16_t idx = static_cast<std::uint16_t>((prev_ >> 1) ^ probe);
    std::uint8_t& c = counts_[idx];
    if (c == 0) touched_.push_back(idx);
    if (c != 255) ++c;
    prev_ = probe;
  }

  // Clears counters and the previous-probe register.
  void reset();

  std::uint8_t at(std::size_t i) const { return counts_[i]; }
  std::uint16_t prev() const { return prev_; }
  const std::vector<std::uint16_t>& touched() const { return touched_; }
  std::span<const std::uint8_t> data() const { return counts_; }

 private:
  std::vector<std::uint8_t> counts_;
  std::uint16_t prev_ = 0;
  std::vector<std::uint16_t> touched_;
};

// One bit per matcher-table entry, packed eight to a byte (LSB first).
class MatcherBitmap {
 public:
  explicit MatcherBitmap(std::size_t entries = 0)
      : size_(entries), bytes_(byte_length(entries), 0) {}

  static std::size_t byte_length(std::size_t entries) { return (entries + 7) / 8; }

  std::size_t size() const { return size_; }
  std::span<const std::uint8_t> bytes() const { return bytes_; }

  // Returns true when the bit was previously clear.
  bool set(std::size_t idx) {
    if (idx >= size_) throw IndexOutOfRange("matcher index out of range");
    std::uint8_t& b = bytes_[idx >> 3];
    std::uint8_t mask = static_cast<std::uint8_t>(1u << (idx & 7));
    if (b & mask) return false;
    if (b == 0) touched_.push_back(static_cast<std::uint32_t>(idx >> 3));
    b |= mask;
    return true;
  }
  bool test(std::size_t idx) const {
    return idx < size_ && (bytes_[idx >> 3] >> (idx & 7)) & 1;
  }
  std::size_t popcount() const;
  void clear();
  // Byte indices that became non-zero since the last clear().
  const std::vector<std::uint32_t>& touched() const { return touched_; }

  void assign_bytes(std::span<const std::uint8_t> bytes);
  void merge(const MatcherBitmap& other);

  friend bool operator==(const MatcherBitmap& a, const MatcherBitmap& b) {
    return a.size_ == b.size_ && a.bytes_ == b.bytes_;
  }

 private:
  std::size_t size_;
  std::vector<std::uint8_t> bytes_;
  std::vector<std::uint32_t> touched_;
};

struct Novelty {
  std::size_t new_edge_buckets = 0;
  std::size_t new_matcher_bits = 0;
  bool interesting() const { return new_edge_buckets > 0 || new_matcher_bits > 0; }
};

// Per-run maps plus the campaign-wide virgin (cumulative) maps.
class CoverageState {
 public:
  explicit CoverageState(std::size_t matcher_size = 0);

  void record_probe_edge(std::uint16_t probe) { edges_.record(probe); }
  void record_table_access(std::size_t idx) { matcher_.set(idx); }

  // Starts a fresh run: clears per-run maps, keeps virgin maps.
  void begin_run();

  // Novelty of the current run against the virgin maps, without updating.
  Novelty evaluate() const;
  // Evaluates and, only if something is new, folds the run into the virgin
  // maps.
  Novelty is_interesting();

  const EdgeMap& run_edges() const { return edges_; }
  const MatcherBitmap& run_matcher() const { return matcher_; }
  const std::vector<std::uint8_t>& virgin_edges() const { return virgin_edges_; }
  const MatcherBitmap& virgin_matcher() const { return virgin_matcher_; }
  std::size_t matcher_size() const { return matcher_.size(); }

  std::size_t edge_buckets_covered() const;
  std::size_t edges_covered() const;
  std::size_t matcher_bits_covered() const { return virgin_matcher_.popcount(); }

  // Union of cumulative maps; sizes must agree.
  void merge(const CoverageState& other);

  std::vector<std::uint8_t> serialize() const;
  static CoverageState deserialize(std::span<const std::uint8_t> bytes);
  void save_dump(const std::filesystem::path& path) const;
  static CoverageState load_dump(const std::filesystem::path& path);

 private:
  EdgeMap edges_;
  MatcherBitmap matcher_;
  std::vector<std::uint8_t> virgin_edges_;
  MatcherBitmap virgin_matcher_;
};

}  // namespace matchfuzz
