#include "matchfuzz/feedback.hpp"

#include <map>
#include <sstream>

#include "matchfuzz/ir_text.hpp"

namespace matchfuzz {

std::vector<DecodedPattern> decode_coverage(const MatcherBitmap& bitmap, const LookupTable& lut) {
  if (bitmap.size() != lut.program_size)
    throw SizeMismatch("bitmap has " + std::to_string(bitmap.size()) + " entries, table has " +
                       std::to_string(lut.program_size));
  std::vector<DecodedPattern> out;
  out.reserve(lut.rows.size());
  for (const auto& row : lut.rows) {
    bool hit = false;
    for (std::uint32_t i = row.begin; i < row.end && !hit; ++i) hit = bitmap.test(i);
    out.push_back({row.pattern, hit});
  }
  return out;
}

unsigned GuidanceReport::weight_of(std::string_view root) const {
  for (const auto& o : opcodes)
    if (o.root == root) return o.weight;
  return 0;
}

std::string GuidanceReport::str() const {
  std::string out = "# epoch " + std::to_string(epoch) + "\n";
  for (const auto& o : opcodes) out += "uncovered " + o.root + " weight=" + std::to_string(o.weight) + "\n";
  for (const auto& d : intrinsics) out += "uncovered-intrinsic " + print_decl(d) + "\n";
  return out;
}

GuidanceReport GuidanceReport::parse(std::string_view text) {
  GuidanceReport r;
  std::istringstream in{std::string(text)};
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fail = [&](const std::string& msg) {
      return ConfigError("report line " + std::to_string(lineno) + ": " + msg);
    };
    if (line.empty()) continue;
    if (line.rfind("# epoch ", 0) == 0) {
      try {
        r.epoch = std::stoull(line.substr(8));
      } catch (const std::exception&) {
        throw fail("bad epoch");
      }
      continue;
    }
    if (line[0] == '#') continue;
    if (line.rfind("uncovered-intrinsic ", 0) == 0) {
      try {
        r.intrinsics.push_back(parse_decl(line.substr(20)));
      } catch (const SyntaxError& e) {
        throw fail(e.what());
      }
      continue;
    }
    if (line.rfind("uncovered ", 0) == 0) {
      std::istringstream ws(line.substr(10));
      std::string root, w;
      ws >> root >> w;
      if (root.empty() || w.rfind("weight=", 0) != 0) throw fail("expected 'uncovered <root> weight=K'");
      try {
        r.opcodes.push_back({root, static_cast<unsigned>(std::stoul(w.substr(7)))});
      } catch (const std::exception&) {
        throw fail("bad weight");
      }
      continue;
    }
    throw fail("unrecognised line");
  }
  return r;
}

GuidanceReport build_report(const std::vector<DecodedPattern>& decoded, const LookupTable& lut,
                            const TargetSpec& t) {
  std::map<std::uint16_t, bool> covered;
  for (const auto& d : decoded) covered[d.pattern] = d.covered;

  GuidanceReport r;
  std::map<std::string, std::size_t> slot;
  std::map<std::string, bool> intrinsic_hit;
  std::vector<std::string> intrinsic_order;
  for (const auto& row : lut.rows) {
    bool hit = covered[row.pattern];
    if (row.kind == PatternKind::Intrinsic) {
      auto [it, fresh] = intrinsic_hit.emplace(row.root, false);
      if (fresh) intrinsic_order.push_back(row.root);
      it->second = it->second || hit;
      continue;
    }
    if (hit) continue;
    auto [it, fresh] = slot.emplace(row.root, r.opcodes.size());
    if (fresh) r.opcodes.push_back({row.root, 0});
    ++r.opcodes[it->second].weight;
  }
  for (const auto& name : intrinsic_order)
    if (!intrinsic_hit[name])
      if (const IntrinsicDef* def = t.find_intrinsic(name)) r.intrinsics.push_back(def->decl);
  return r;
}

EpochSchedule::EpochSchedule(std::uint64_t every) : every_(every) {
  if (every == 0) throw ConfigError("epoch length must be at least 1");
}

}  // namespace matchfuzz
