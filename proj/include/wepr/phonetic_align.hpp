#pragma once

// Word-level alignment of a reference against ASR hypotheses, with
// substitutions priced by the distance between phonetic keys.

#include "wepr/common.hpp"

#include <algorithm>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wepr {

/// Reduced consonant/vowel-class encoding of a word.
struct PhoneticKey {
  std::string key;
  bool operator==(const PhoneticKey&) const = default;
};

/// Version of the key rule table; scores are only comparable within a version.
inline constexpr int kPhoneticRulesVersion = 1;

/// Metaphone-style folding of a lowercase word:
///   doubled letters collapse; b,p->B  d,t->T  g,k,q,hard c->K  f,v->F
///   s,z,soft c->S  th->0  sh,ch->X  m,n->N  l,r->R  w->W  j,y->J  x->KS
///   h is kept (H) only word-initially; every vowel run becomes one A.
/// Apostrophes and other non-alphanumerics are ignored; digits pass through.
/// Throws Error for an empty word.
inline PhoneticKey phonetic_key(std::string_view word) {
  if (word.empty()) throw Error("phonetic_key: empty word");
  std::string letters;
  for (char c : word) {
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    if ((c >= 'a' && c <= 'z') || (c >= '0' && c <= '9')) {
      if (letters.empty() || letters.back() != c) letters += c;
    }
  }
  auto is_vowel = [](char c) { return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u'; };
  std::string key;
  for (std::size_t i = 0; i < letters.size(); ++i) {
    char c = letters[i];
    char next = i + 1 < letters.size() ? letters[i + 1] : '\0';
    if (is_vowel(c)) {
      if (key.empty() || key.back() != 'A') key += 'A';
      continue;
    }
    switch (c) {
      case 'b': case 'p': key += 'B'; break;
      case 'd': key += 'T'; break;
      case 't':
        if (next == 'h') {
          key += '0';
          ++i;
        } else {
          key += 'T';
        }
        break;
      case 's':
        if (next == 'h') {
          key += 'X';
          ++i;
        } else {
          key += 'S';
        }
        break;
      case 'c':
        if (next == 'h') {
          key += 'X';
          ++i;
        } else if (next == 'e' || next == 'i' || next == 'y') {
          key += 'S';
        } else {
          key += 'K';
        }
        break;
      case 'g': case 'k': case 'q': key += 'K'; break;
      case 'f': case 'v': key += 'F'; break;
      case 'z': key += 'S'; break;
      case 'm': case 'n': key += 'N'; break;
      case 'l': case 'r': key += 'R'; break;
      case 'w': key += 'W'; break;
      case 'j': case 'y': key += 'J'; break;
      case 'x': key += "KS"; break;
      case 'h':
        if (i == 0) key += 'H';
        break;
      default: key += c;  // digits
    }
  }
  return {key};
}

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({up + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

/// Cost model constants. Defaults: gap 0.8, substitution floor 0.05.
struct AlignCosts {
  Rational gap{4, 5};
  Rational min_substitution{1, 20};
  bool operator==(const AlignCosts&) const = default;
};

/// 0 for identical words; otherwise the key edit distance over the longer key
/// length, clamped to [min_substitution, 1].
inline Rational substitution_cost(std::string_view ref, std::string_view hyp, const PhoneticKey& ref_key,
                                  const PhoneticKey& hyp_key, const AlignCosts& costs) {
  if (ref == hyp) return 0;
  std::size_t longest = std::max(ref_key.key.size(), hyp_key.key.size());
  Rational cost = longest == 0 ? Rational(0) : Rational(levenshtein(ref_key.key, hyp_key.key), longest);
  return std::clamp(cost, costs.min_substitution, Rational(1));
}

inline Rational substitution_cost(std::string_view ref, std::string_view hyp, const AlignCosts& costs = {}) {
  if (ref == hyp) return 0;
  return substitution_cost(ref, hyp, phonetic_key(ref), phonetic_key(hyp), costs);
}

enum class StepKind { Correct, Substitution, Insertion, Deletion };

inline std::string_view step_kind_name(StepKind k) {
  switch (k) {
    case StepKind::Correct: return "correct";
    case StepKind::Substitution: return "substitution";
    case StepKind::Insertion: return "insertion";
    case StepKind::Deletion: return "deletion";
  }
  return "?";
}

struct AlignmentStep {
  StepKind kind = StepKind::Correct;
  std::optional<std::size_t> ref_index;
  std::optional<std::size_t> hyp_index;
  std::optional<std::string> ref_word;
  std::optional<std::string> hyp_word;
  Rational cost;

  bool operator==(const AlignmentStep&) const = default;
};

struct Alignment {
  std::vector<AlignmentStep> steps;
  Rational total_cost;

  std::size_t count(StepKind k) const {
    return static_cast<std::size_t>(std::count_if(steps.begin(), steps.end(), [k](const auto& s) { return s.kind == k; }));
  }

  /// Step that consumed reference word `ref_index`, if any.
  const AlignmentStep* step_for_ref(std::size_t ref_index) const {
    for (const auto& s : steps)
      if (s.ref_index == ref_index) return &s;
    return nullptr;
  }

  bool operator==(const Alignment&) const = default;
};

/// Minimal-cost monotone alignment. Among optimal predecessors the backtrace
/// prefers Correct/Substitution, then Deletion, then Insertion.
inline Alignment align(std::span<const std::string> ref, std::span<const std::string> hyp,
                       const AlignCosts& costs = {}) {
  const std::size_t n = ref.size(), m = hyp.size();
  std::vector<PhoneticKey> ref_keys, hyp_keys;
  for (const auto& w : ref) ref_keys.push_back(w.empty() ? PhoneticKey{} : phonetic_key(w));
  for (const auto& w : hyp) hyp_keys.push_back(w.empty() ? PhoneticKey{} : phonetic_key(w));

  std::vector<Rational> sub(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) sub[i * m + j] = substitution_cost(ref[i], hyp[j], ref_keys[i], hyp_keys[j], costs);

  const std::size_t w = m + 1;
  std::vector<Rational> dp((n + 1) * w);
  for (std::size_t i = 1; i <= n; ++i) dp[i * w] = dp[(i - 1) * w] + costs.gap;
  for (std::size_t j = 1; j <= m; ++j) dp[j] = dp[j - 1] + costs.gap;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      Rational best = dp[(i - 1) * w + (j - 1)] + sub[(i - 1) * m + (j - 1)];
      Rational del = dp[(i - 1) * w + j] + costs.gap;
      Rational ins = dp[i * w + (j - 1)] + costs.gap;
      if (del < best) best = del;
      if (ins < best) best = ins;
      dp[i * w + j] = std::move(best);
    }
  }

  Alignment out;
  out.total_cost = dp[n * w + m];
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    const Rational& here = dp[i * w + j];
    AlignmentStep step;
    if (i > 0 && j > 0 && dp[(i - 1) * w + (j - 1)] + sub[(i - 1) * m + (j - 1)] == here) {
      step.cost = sub[(i - 1) * m + (j - 1)];
      step.kind = ref[i - 1] == hyp[j - 1] ? StepKind::Correct : StepKind::Substitution;
      step.ref_index = i - 1;
      step.hyp_index = j - 1;
      --i;
      --j;
    } else if (i > 0 && dp[(i - 1) * w + j] + costs.gap == here) {
      step.kind = StepKind::Deletion;
      step.cost = costs.gap;
      step.ref_index = --i;
    } else {
      step.kind = StepKind::Insertion;
      step.cost = costs.gap;
      step.hyp_index = --j;
    }
    if (step.ref_index) step.ref_word = ref[*step.ref_index];
    if (step.hyp_index) step.hyp_word = hyp[*step.hyp_index];
    out.steps.push_back(std::move(step));
  }
  std::reverse(out.steps.begin(), out.steps.end());
  return out;
}

/// One alignment per hypothesis, each pivoted on the same reference positions.
inline std::vector<Alignment> align_multi(std::span<const std::string> ref,
                                          std::span<const std::vector<std::string>> hyps,
                                          const AlignCosts& costs = {}) {
  if (hyps.empty()) throw Error("align_multi: no hypotheses");
  std::vector<Alignment> out;
  out.reserve(hyps.size());
  for (const auto& h : hyps) out.push_back(align(ref, h, costs));
  return out;
}

}  // namespace wepr
