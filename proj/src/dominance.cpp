#include "matchfuzz/dominance.hpp"

#include <algorithm>

namespace matchfuzz {

std::vector<std::vector<std::uint32_t>> predecessors(const FunctionDef& f) {
  const std::size_t n = f.blocks.size();
  std::vector<std::vector<std::uint32_t>> preds(n);
  // last[s] == b + 1 when edge b->s was already recorded.
  std::vector<std::uint32_t> last(n, 0), count(n, 0);
  for (std::uint32_t b = 0; b < n; ++b)
    f.blocks[b].term.for_each_successor([&](std::uint32_t s) {
      if (s < n && last[s] != b + 1) {
        last[s] = b + 1;
        ++count[s];
      }
    });
  for (std::uint32_t s = 0; s < n; ++s) preds[s].reserve(count[s]);
  std::fill(last.begin(), last.end(), 0);
  for (std::uint32_t b = 0; b < n; ++b)
    f.blocks[b].term.for_each_successor([&](std::uint32_t s) {
      if (s < n && last[s] != b + 1) {
        last[s] = b + 1;
        preds[s].push_back(b);
      }
    });
  return preds;
}

DomTree::DomTree(const FunctionDef& f) {
  const std::size_t n = f.blocks.size();
  idom_.assign(n, 0);
  reachable_.assign(n, false);
  preds_ = predecessors(f);
  if (n == 0) return;

  // Flat successor lists (CSR) keep this allocation-light; it runs once per
  // function per verification.
  std::vector<std::uint32_t> succ_begin(n + 1, 0);
  std::vector<std::uint32_t> succ;
  for (std::uint32_t b = 0; b < n; ++b) {
    succ_begin[b] = static_cast<std::uint32_t>(succ.size());
    f.blocks[b].term.for_each_successor([&](std::uint32_t s) {
      if (s < n) succ.push_back(s);
    });
  }
  succ_begin[n] = static_cast<std::uint32_t>(succ.size());

  // Iterative DFS for post-order.
  std::vector<std::uint32_t> order;
  order.reserve(n);
  std::vector<std::uint32_t> po_index(n, 0);
  std::vector<std::pair<std::uint32_t, std::uint32_t>> stack;
  stack.reserve(n);
  stack.push_back({0, succ_begin[0]});
  reachable_[0] = true;
  while (!stack.empty()) {
    auto& top = stack.back();
    std::uint32_t b = top.first;
    if (top.second < succ_begin[b + 1]) {
      std::uint32_t s = succ[top.second++];
      if (!reachable_[s]) {
        reachable_[s] = true;
        stack.push_back({s, succ_begin[s]});
      }
    } else {
      po_index[b] = static_cast<std::uint32_t>(order.size());
      order.push_back(b);
      stack.pop_back();
    }
  }
  rpo_.assign(order.rbegin(), order.rend());

  // Cooper, Harvey, Kennedy: "A Simple, Fast Dominance Algorithm".
  constexpr std::uint32_t kUndef = 0xFFFFFFFFu;
  std::vector<std::uint32_t> doms(n, kUndef);
  doms[0] = 0;
  auto intersect = [&](std::uint32_t a, std::uint32_t b) {
    while (a != b) {
      while (po_index[a] < po_index[b]) a = doms[a];
      while (po_index[b] < po_index[a]) b = doms[b];
    }
    return a;
  };
  for (bool changed = true; changed;) {
    changed = false;
    for (std::uint32_t b : rpo_) {
      if (b == 0) continue;
      std::uint32_t nd = kUndef;
      for (std::uint32_t p : preds_[b]) {
        if (doms[p] == kUndef) continue;
        nd = nd == kUndef ? p : intersect(p, nd);
      }
      if (doms[b] != nd) {
        doms[b] = nd;
        changed = true;
      }
    }
  }
  for (std::uint32_t b = 0; b < n; ++b) {
    if (reachable_[b]) {
      idom_[b] = doms[b];
    } else {
      idom_[b] = b;
      unreachable_.push_back(b);
    }
  }

  // Pre/post numbering of the dominator tree for O(1) queries. Children are
  // linked through first_kid/next_sibling.
  std::vector<std::uint32_t> first_kid(n, kUndef), next_sibling(n, kUndef);
  for (auto it = rpo_.rbegin(); it != rpo_.rend(); ++it) {
    std::uint32_t b = *it;
    if (b == 0) continue;
    next_sibling[b] = first_kid[idom_[b]];
    first_kid[idom_[b]] = b;
  }
  pre_.assign(n, 0);
  post_.assign(n, 0);
  std::uint32_t clock = 0;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> walk;
  walk.reserve(n);
  walk.push_back({0, first_kid[0]});
  pre_[0] = clock++;
  while (!walk.empty()) {
    auto& top = walk.back();
    if (top.second != kUndef) {
      std::uint32_t c = top.second;
      top.second = next_sibling[c];
      pre_[c] = clock++;
      walk.push_back({c, first_kid[c]});
    } else {
      post_[top.first] = clock++;
      walk.pop_back();
    }
  }
}

bool DomTree::dominates(std::uint32_t a, std::uint32_t b) const {
  if (a == b) return true;
  if (!reachable_[a] || !reachable_[b]) return false;
  return pre_[a] <= pre_[b] && post_[b] <= post_[a];
}

DomTree compute_dominators(const FunctionDef& f) { return DomTree(f); }

}  // namespace matchfuzz
