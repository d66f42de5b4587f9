#include "matchfuzz/coverage.hpp"

#include <bit>
#include <fstream>
#include <iterator>

namespace matchfuzz {

namespace {
constexpr char kMagic[4] = {'M', 'F', 'C', 'V'};
constexpr std::uint8_t kVersion = 1;
}  // namespace

std::uint8_t bucket_of(std::uint8_t c) {
  if (c == 0) return 0;
  if (c == 1) return 1;
  if (c == 2) return 2;
  if (c == 3) return 4;
  if (c <= 7) return 8;
  if (c <= 15) return 16;
  if (c <= 31) return 32;
  if (c <= 127) return 64;
  return 128;
}

void EdgeMap::reset() {
  for (auto idx : touched_) counts_[idx] = 0;
  touched_.clear();
  prev_ = 0;
}

std::size_t MatcherBitmap::popcount() const {
  std::size_t n = 0;
  for (auto b : bytes_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

void MatcherBitmap::clear() {
  for (auto i : touched_) bytes_[i] = 0;
  touched_.clear();
}

void MatcherBitmap::assign_bytes(std::span<const std::uint8_t> bytes) {
  if (bytes.size() != bytes_.size()) throw CorruptDump("matcher bitmap length mismatch");
  std::copy(bytes.begin(), bytes.end(), bytes_.begin());
  touched_.clear();
  for (std::uint32_t i = 0; i < bytes_.size(); ++i)
    if (bytes_[i]) touched_.push_back(i);
}

void MatcherBitmap::merge(const MatcherBitmap& other) {
  if (other.size_ != size_) throw std::invalid_argument("matcher bitmap size mismatch");
  for (std::size_t i = 0; i < bytes_.size(); ++i) {
    if (!bytes_[i] && other.bytes_[i]) touched_.push_back(static_cast<std::uint32_t>(i));
    bytes_[i] |= other.bytes_[i];
  }
}

CoverageState::CoverageState(std::size_t matcher_size)
    : matcher_(matcher_size), virgin_edges_(EdgeMap::kSize, 0), virgin_matcher_(matcher_size) {}

void CoverageState::begin_run() {
  edges_.reset();
  matcher_.clear();
}

Novelty CoverageState::evaluate() const {
  Novelty n;
  for (auto idx : edges_.touched()) {
    std::uint8_t b = bucket_of(edges_.at(idx));
    if (b & ~virgin_edges_[idx]) ++n.new_edge_buckets;
  }
  auto run = matcher_.bytes();
  auto seen = virgin_matcher_.bytes();
  for (auto i : matcher_.touched())
    n.new_matcher_bits += static_cast<std::size_t>(std::popcount(
        static_cast<std::uint8_t>(run[i] & ~seen[i])));
  return n;
}

Novelty CoverageState::is_interesting() {
  Novelty n = evaluate();
  if (!n.interesting()) return n;
  for (auto idx : edges_.touched()) virgin_edges_[idx] |= bucket_of(edges_.at(idx));
  virgin_matcher_.merge(matcher_);
  return n;
}

std::size_t CoverageState::edge_buckets_covered() const {
  std::size_t n = 0;
  for (auto b : virgin_edges_) n += static_cast<std::size_t>(std::popcount(b));
  return n;
}

std::size_t CoverageState::edges_covered() const {
  std::size_t n = 0;
  for (auto b : virgin_edges_) n += b != 0;
  return n;
}

void CoverageState::merge(const CoverageState& other) {
  virgin_matcher_.merge(other.virgin_matcher_);
  for (std::size_t i = 0; i < virgin_edges_.size(); ++i) virgin_edges_[i] |= other.virgin_edges_[i];
}

std::vector<std::uint8_t> CoverageState::serialize() const {
  std::vector<std::uint8_t> out(kMagic, kMagic + 4);
  out.push_back(kVersion);
  auto n = static_cast<std::uint32_t>(virgin_matcher_.size());
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(n >> (8 * k)));
  auto bits = virgin_matcher_.bytes();
  out.insert(out.end(), bits.begin(), bits.end());
  out.insert(out.end(), virgin_edges_.begin(), virgin_edges_.end());
  return out;
}

CoverageState CoverageState::deserialize(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 9 || !std::equal(kMagic, kMagic + 4, bytes.begin()))
    throw CorruptDump("bad coverage dump header");
  if (bytes[4] != kVersion) throw CorruptDump("unsupported coverage dump version");
  std::uint32_t n = 0;
  for (int k = 0; k < 4; ++k) n |= std::uint32_t{bytes[5 + k]} << (8 * k);
  std::size_t mlen = MatcherBitmap::byte_length(n);
  if (bytes.size() != 9 + mlen + EdgeMap::kSize) throw CorruptDump("coverage dump has wrong length");
  CoverageState cov(n);
  cov.virgin_matcher_.assign_bytes(bytes.subspan(9, mlen));
  auto edges = bytes.subspan(9 + mlen);
  std::copy(edges.begin(), edges.end(), cov.virgin_edges_.begin());
  return cov;
}

void CoverageState::save_dump(const std::filesystem::path& path) const {
  auto data = serialize();
  std::ofstream out(path, std::ios::binary);
  out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!out) throw std::runtime_error("cannot write " + path.string());
}

CoverageState CoverageState::load_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CorruptDump("cannot open " + path.string());
  std::vector<std::uint8_t> data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize(data);
}

}  // namespace matchfuzz
