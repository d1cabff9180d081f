#pragma once

// Slow, obviously-correct reference implementations used to check the
// library. Kept independent of the code under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace qapg::testing {

using Words = std::vector<std::string>;

// LCS by memoized recursion on suffixes.
inline std::size_t lcs_oracle(const Words& a, const Words& b) {
  std::map<std::pair<std::size_t, std::size_t>, std::size_t> memo;
  std::function<std::size_t(std::size_t, std::size_t)> rec = [&](std::size_t i, std::size_t j) -> std::size_t {
    if (i == a.size() || j == b.size()) return 0;
    const auto key = std::make_pair(i, j);
    if (auto it = memo.find(key); it != memo.end()) return it->second;
    std::size_t best = a[i] == b[j] ? 1 + rec(i + 1, j + 1) : std::max(rec(i + 1, j), rec(i, j + 1));
    memo[key] = best;
    return best;
  };
  return rec(0, 0);
}

inline double rouge_l_oracle(const Words& cand, const Words& ref, double beta = 1.2) {
  const double l = static_cast<double>(lcs_oracle(cand, ref));
  if (l == 0.0) return 0.0;
  const double p = l / static_cast<double>(cand.size());
  const double r = l / static_cast<double>(ref.size());
  return 100.0 * (1 + beta * beta) * p * r / (r + beta * beta * p);
}

struct AlignmentOracle {
  std::size_t matches = 0;
  std::size_t chunks = 0;
};

// Enumerates every one-to-one exact-match alignment; returns the maximum
// match count and the fewest chunks among alignments reaching it.
inline AlignmentOracle meteor_alignment_oracle(const Words& cand, const Words& ref) {
  AlignmentOracle best;
  bool any = false;
  std::vector<int> map(cand.size(), -1);
  std::vector<bool> used(ref.size(), false);
  std::function<void(std::size_t)> rec = [&](std::size_t i) {
    if (i == cand.size()) {
      std::vector<std::pair<int, int>> pairs;
      for (std::size_t k = 0; k < cand.size(); ++k) {
        if (map[k] >= 0) pairs.emplace_back(static_cast<int>(k), map[k]);
      }
      std::size_t chunks = 0;
      for (std::size_t k = 0; k < pairs.size(); ++k) {
        if (k == 0 || pairs[k].first != pairs[k - 1].first + 1 || pairs[k].second != pairs[k - 1].second + 1) ++chunks;
      }
      const auto m = pairs.size();
      if (!any || m > best.matches || (m == best.matches && chunks < best.chunks)) best = {m, chunks};
      any = true;
      return;
    }
    rec(i + 1);
    for (std::size_t j = 0; j < ref.size(); ++j) {
      if (!used[j] && ref[j] == cand[i]) {
        used[j] = true;
        map[i] = static_cast<int>(j);
        rec(i + 1);
        map[i] = -1;
        used[j] = false;
      }
    }
  };
  rec(0);
  return best;
}

inline double meteor_oracle(const Words& cand, const Words& ref) {
  const auto a = meteor_alignment_oracle(cand, ref);
  if (a.matches == 0) return 0.0;
  const double m = static_cast<double>(a.matches);
  const double p = m / static_cast<double>(cand.size());
  const double r = m / static_cast<double>(ref.size());
  const double f = 10 * p * r / (r + 9 * p);
  return 100.0 * f * (1.0 - 0.5 * std::pow(static_cast<double>(a.chunks) / m, 3));
}

inline Words random_words(std::mt19937_64& rng, std::size_t max_len, std::size_t alphabet, std::size_t min_len = 1) {
  const auto n = min_len + rng() % (max_len - min_len + 1);
  Words w;
  for (std::size_t i = 0; i < n; ++i) w.push_back(std::string(1, static_cast<char>('a' + rng() % alphabet)));
  return w;
}

}  // namespace qapg::testing
