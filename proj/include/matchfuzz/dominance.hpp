#pragma once

#include <cstdint>
#include <vector>

#include "matchfuzz/ir.hpp"

namespace matchfuzz {

// Predecessor lists per block; an edge appears once per distinct
// (pred, succ) pair, in order of first occurrence.
std::vector<std::vector<std::uint32_t>> predecessors(const FunctionDef& f);

// Immediate-dominator tree. Unreachable blocks are their own idom and are
// dominated only by themselves.
class DomTree {
 public:
  DomTree() = default;
  explicit DomTree(const FunctionDef& f);

  std::size_t size() const { return idom_.size(); }
  std::uint32_t idom(std::uint32_t b) const { return idom_[b]; }
  bool reachable(std::uint32_t b) const { return reachable_[b]; }
  // a dominates b (reflexive).
  bool dominates(std::uint32_t a, std::uint32_t b) const;
  const std::vector<std::uint32_t>& unreachable_blocks() const { return unreachable_; }
  const std::vector<std::vector<std::uint32_t>>& preds() const { return preds_; }
  // Reverse post-order of reachable blocks.
  const std::vector<std::uint32_t>& rpo() const { return rpo_; }

 private:
  std::vector<std::uint32_t> idom_;
  std::vector<bool> reachable_;
  std::vector<std::uint32_t> unreachable_;
  std::vector<std::vector<std::uint32_t>> preds_;
  std::vector<std::uint32_t> rpo_;
  std::vector<std::uint32_t> pre_;
  std::vector<std::uint32_t> post_;
};

DomTree compute_dominators(const FunctionDef& f);

}  // namespace matchfuzz
