#pragma once

// Brute-force reference implementations used only by tests. Nothing here
// calls the DP code it is used to check.

#include "wepr/common.hpp"
#include "wepr/phonetic_align.hpp"

#include <algorithm>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

namespace oracle {

using wepr::Rational;

inline std::size_t naive_levenshtein(const std::string& a, const std::string& b) {
  if (a.empty()) return b.size();
  if (b.empty()) return a.size();
  std::string at = a.substr(1), bt = b.substr(1);
  std::size_t best = std::min(naive_levenshtein(at, b), naive_levenshtein(a, bt)) + 1;
  return std::min(best, naive_levenshtein(at, bt) + (a[0] == b[0] ? 0 : 1));
}

/// Substitution price from the cost model, computed without the library's DP.
inline Rational sub_cost(const std::string& r, const std::string& h, const wepr::AlignCosts& costs) {
  if (r == h) return 0;
  auto kr = wepr::phonetic_key(r).key, kh = wepr::phonetic_key(h).key;
  std::size_t longest = std::max(kr.size(), kh.size());
  Rational c = longest ? Rational(naive_levenshtein(kr, kh), longest) : Rational(0);
  if (c < costs.min_substitution) c = costs.min_substitution;
  if (c > 1) c = 1;
  return c;
}

/// Path move: 'M' (match/substitute), 'D' (delete ref), 'I' (insert hyp).
struct PathResult {
  Rational best;
  std::size_t optimal_paths = 0;
  std::string any_optimal;  // one optimal move string
};

/// Enumerates every monotone alignment path.
inline PathResult enumerate_alignments(const std::vector<std::string>& ref, const std::vector<std::string>& hyp,
                                       const wepr::AlignCosts& costs = {}) {
  PathResult out;
  bool have = false;
  std::vector<std::vector<Rational>> sub(ref.size(), std::vector<Rational>(hyp.size()));
  for (std::size_t i = 0; i < ref.size(); ++i)
    for (std::size_t j = 0; j < hyp.size(); ++j) sub[i][j] = sub_cost(ref[i], hyp[j], costs);
  std::string moves;
  std::function<void(std::size_t, std::size_t, Rational)> walk = [&](std::size_t i, std::size_t j, Rational acc) {
    if (i == ref.size() && j == hyp.size()) {
      if (!have || acc < out.best) {
        out.best = acc;
        out.optimal_paths = 1;
        out.any_optimal = moves;
        have = true;
      } else if (acc == out.best) {
        ++out.optimal_paths;
      }
      return;
    }
    if (i < ref.size() && j < hyp.size()) {
      moves.push_back('M');
      walk(i + 1, j + 1, acc + sub[i][j]);
      moves.pop_back();
    }
    if (i < ref.size()) {
      moves.push_back('D');
      walk(i + 1, j, acc + costs.gap);
      moves.pop_back();
    }
    if (j < hyp.size()) {
      moves.push_back('I');
      walk(i, j + 1, acc + costs.gap);
      moves.pop_back();
    }
  };
  walk(0, 0, Rational(0));
  return out;
}

/// Minimum unit-cost edit distance by enumerating all monotone alignments.
template <class Seq>
std::size_t enumerate_edit_distance(const Seq& ref, const Seq& hyp) {
  std::size_t best = ref.size() + hyp.size();
  std::function<void(std::size_t, std::size_t, std::size_t)> walk = [&](std::size_t i, std::size_t j, std::size_t acc) {
    if (acc >= best) return;  // cannot improve
    if (i == ref.size() && j == hyp.size()) {
      best = acc;
      return;
    }
    if (i < ref.size() && j < hyp.size()) walk(i + 1, j + 1, acc + (ref[i] == hyp[j] ? 0 : 1));
    if (i < ref.size()) walk(i + 1, j, acc + 1);
    if (j < hyp.size()) walk(i, j + 1, acc + 1);
  };
  walk(0, 0, 0);
  return best;
}

/// chrF by listing every n-gram and intersecting multisets with std::count.
/// Byte-level; inputs must be ASCII.
inline double chrf(const std::vector<std::string>& refs, const std::vector<std::string>& hyps, int max_n = 6,
                   double beta = 3.0) {
  double p_sum = 0, r_sum = 0;
  int orders = 0;
  for (int n = 1; n <= max_n; ++n) {
    std::size_t match = 0, hyp_total = 0, ref_total = 0;
    for (std::size_t s = 0; s < refs.size(); ++s) {
      std::vector<std::string> rg, hg;
      for (std::size_t i = 0; i + n <= refs[s].size(); ++i) rg.push_back(refs[s].substr(i, n));
      for (std::size_t i = 0; i + n <= hyps[s].size(); ++i) hg.push_back(hyps[s].substr(i, n));
      std::vector<std::string> distinct = hg;
      std::sort(distinct.begin(), distinct.end());
      distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
      for (const auto& g : distinct)
        match += static_cast<std::size_t>(
            std::min(std::count(rg.begin(), rg.end(), g), std::count(hg.begin(), hg.end(), g)));
      hyp_total += hg.size();
      ref_total += rg.size();
    }
    if (hyp_total == 0 && ref_total == 0) continue;
    ++orders;
    if (hyp_total) p_sum += double(match) / double(hyp_total);
    if (ref_total) r_sum += double(match) / double(ref_total);
  }
  if (orders == 0) return 1.0;
  double p = p_sum / orders, r = r_sum / orders;
  if (p == 0 && r == 0) return 0.0;
  double b2 = beta * beta;
  return (1 + b2) * p * r / (b2 * p + r);
}

/// Number names for 0..10,000 composed from a digit decomposition:
/// [x thousand] [y hundred] [and] [rest], "and" whenever n >= 100 and rest > 0.
inline std::string number_name(int n) {
  static const char* small[] = {"zero",    "one",     "two",       "three",    "four",     "five",    "six",
                                "seven",   "eight",   "nine",      "ten",      "eleven",   "twelve",  "thirteen",
                                "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static const char* tens[] = {"", "", "twenty", "thirty", "forty", "fifty", "sixty", "seventy", "eighty", "ninety"};
  auto below_100 = [&](int v) -> std::string {
    if (v < 20) return small[v];
    return std::string(tens[v / 10]) + (v % 10 ? std::string(" ") + small[v % 10] : "");
  };
  if (n < 100) return below_100(n);
  int thousands = n / 1000, hundreds = (n / 100) % 10, rest = n % 100;
  std::vector<std::string> parts;
  if (thousands) parts.push_back(below_100(thousands) + " thousand");
  if (hundreds) parts.push_back(std::string(small[hundreds]) + " hundred");
  if (rest) parts.push_back("and " + below_100(rest));
  std::string out;
  for (const auto& p : parts) out += (out.empty() ? "" : " ") + p;
  return out;
}

}  // namespace oracle
