#pragma once

#include <deque>
#include <limits>
#include <map>
#include <queue>
#include <set>
#include <vector>

namespace lta::testing {

using Word = std::vector<int>;

// Edit-script search where every symbol of `a` and `b` takes part in exactly
// one operation (match, substitute, delete, insert, swap of an adjacent pair).
// States are positions (i, j); 0-1 BFS since matches are free.
inline std::size_t script_search_distance(const Word& a, const Word& b) {
  const std::size_t n = a.size(), m = b.size();
  const std::size_t inf = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> dist((n + 1) * (m + 1), inf);
  std::deque<std::pair<std::size_t, std::size_t>> queue;
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return dist[i * (m + 1) + j]; };
  at(0, 0) = 0;
  queue.emplace_back(0, 0);
  while (!queue.empty()) {
    const auto [i, j] = queue.front();
    queue.pop_front();
    const std::size_t d = at(i, j);
    const auto relax = [&](std::size_t ni, std::size_t nj, std::size_t cost) {
      if (d + cost < at(ni, nj)) {
        at(ni, nj) = d + cost;
        if (cost == 0) queue.emplace_front(ni, nj);
        else queue.emplace_back(ni, nj);
      }
    };
    if (i < n && j < m) relax(i + 1, j + 1, a[i] == b[j] ? 0 : 1);
    if (i < n) relax(i + 1, j, 1);
    if (j < m) relax(i, j + 1, 1);
    if (i + 1 < n && j + 1 < m && a[i] == b[j + 1] && a[i + 1] == b[j]) relax(i + 2, j + 2, 1);
  }
  return at(n, m);
}

// Unrestricted distance: BFS over strings, one operation per edge, so a
// transposed pair may be edited again later.
inline std::size_t rewrite_search_distance(const Word& a, const Word& b, int alphabet) {
  const std::size_t max_len = std::max(a.size(), b.size()) + 1;
  std::map<Word, std::size_t> seen{{a, 0}};
  std::queue<Word> queue;
  queue.push(a);
  while (!queue.empty()) {
    const Word w = queue.front();
    queue.pop();
    const std::size_t d = seen[w];
    if (w == b) return d;
    std::vector<Word> next;
    for (std::size_t p = 0; p < w.size(); ++p) {
      Word del = w;
      del.erase(del.begin() + static_cast<long>(p));
      next.push_back(del);
      for (int s = 0; s < alphabet; ++s) {
        if (s == w[p]) continue;
        Word sub = w;
        sub[p] = s;
        next.push_back(sub);
      }
      if (p + 1 < w.size()) {
        Word swp = w;
        std::swap(swp[p], swp[p + 1]);
        next.push_back(swp);
      }
    }
    if (w.size() < max_len) {
      for (std::size_t p = 0; p <= w.size(); ++p)
        for (int s = 0; s < alphabet; ++s) {
          Word ins = w;
          ins.insert(ins.begin() + static_cast<long>(p), s);
          next.push_back(ins);
        }
    }
    for (auto& x : next)
      if (seen.emplace(x, d + 1).second) queue.push(std::move(x));
  }
  return std::numeric_limits<std::size_t>::max();
}

// Every word over {0..alphabet-1} of length <= max_len.
inline std::vector<Word> all_words(int alphabet, std::size_t max_len) {
  std::vector<Word> out{{}};
  std::vector<Word> frontier{{}};
  for (std::size_t len = 1; len <= max_len; ++len) {
    std::vector<Word> grown;
    for (const auto& w : frontier)
      for (int s = 0; s < alphabet; ++s) {
        Word x = w;
        x.push_back(s);
        grown.push_back(x);
      }
    out.insert(out.end(), grown.begin(), grown.end());
    frontier = std::move(grown);
  }
  return out;
}

}  // namespace lta::testing
