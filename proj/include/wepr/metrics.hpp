#pragma once

// WEPR over annotated reference words, plus WER, CER and chrF, and the
// fold-level mean/std aggregation.

#include "wepr/common.hpp"
#include "wepr/phonetic_align.hpp"
#include "wepr/transcript.hpp"
#include "wepr/utf8.hpp"

#include <array>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace wepr {

// ---------------------------------------------------------------------------
// WEPR

struct WeprCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t correct = 0;
  std::size_t annotated = 0;  // N
  TagSet annotation_set;

  WeprCounts& operator+=(const WeprCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    correct += o.correct;
    annotated += o.annotated;
    annotation_set = annotation_set | o.annotation_set;
    return *this;
  }

  /// (S + D) / N; undefined when no annotated word was seen.
  MaybeRational rate() const {
    if (annotated == 0) return std::nullopt;
    return Rational(substitutions + deletions, annotated);
  }

  bool operator==(const WeprCounts&) const = default;
};

/// Splits "word@!@g" into its body and tag set.
inline std::pair<std::string, TagSet> split_tagged(std::string_view token) {
  TagSet tags;
  while (token.size() > 2) {
    auto tag = tag_from_code(token.substr(token.size() - 2));
    if (!tag) break;
    tags.insert(*tag);
    token.remove_suffix(2);
  }
  return {std::string(token), tags};
}

/// Counts the alignment outcome of every reference word whose tags intersect
/// `annotation_set`. `nr1` is the tagged normalized reference; the alignment
/// must have been computed on the same tokens with tags removed.
inline WeprCounts wepr_counts(std::span<const std::string> nr1, const Alignment& alignment, TagSet annotation_set) {
  WeprCounts counts;
  counts.annotation_set = annotation_set;
  std::size_t ref_positions = 0;
  for (const auto& step : alignment.steps) {
    if (!step.ref_index) continue;
    ++ref_positions;
    if (*step.ref_index >= nr1.size())
      throw StructuralError("alignment references word " + std::to_string(*step.ref_index) + " but tagged reference has " +
                            std::to_string(nr1.size()) + " words");
    auto [body, tags] = split_tagged(nr1[*step.ref_index]);
    if (step.ref_word && *step.ref_word != body)
      throw StructuralError("tagged reference word '" + nr1[*step.ref_index] + "' does not match aligned word '" +
                            *step.ref_word + "'");
    if (!tags.intersects(annotation_set)) continue;
    ++counts.annotated;
    switch (step.kind) {
      case StepKind::Correct: ++counts.correct; break;
      case StepKind::Substitution: ++counts.substitutions; break;
      case StepKind::Deletion: ++counts.deletions; break;
      case StepKind::Insertion: break;
    }
  }
  if (ref_positions != nr1.size())
    throw StructuralError("tagged reference has " + std::to_string(nr1.size()) + " words but alignment covers " +
                          std::to_string(ref_positions));
  return counts;
}

/// WEPR of a single alignment; nullopt when N == 0.
inline MaybeRational wepr(std::span<const std::string> nr1, const Alignment& alignment, TagSet annotation_set) {
  return wepr_counts(nr1, alignment, annotation_set).rate();
}

// ---------------------------------------------------------------------------
// Unit-cost edit distance (WER / CER)

struct EditCounts {
  std::size_t substitutions = 0;
  std::size_t deletions = 0;
  std::size_t insertions = 0;
  std::size_t reference_length = 0;

  std::size_t errors() const { return substitutions + deletions + insertions; }

  EditCounts& operator+=(const EditCounts& o) {
    substitutions += o.substitutions;
    deletions += o.deletions;
    insertions += o.insertions;
    reference_length += o.reference_length;
    return *this;
  }

  /// errors / reference length; undefined for an empty reference.
  MaybeRational rate() const {
    if (reference_length == 0) return std::nullopt;
    return Rational(errors(), reference_length);
  }
};

template <class T>
EditCounts edit_counts(std::span<const T> ref, std::span<const T> hyp) {
  const std::size_t n = ref.size(), m = hyp.size(), w = m + 1;
  std::vector<std::size_t> dp((n + 1) * w);
  for (std::size_t i = 0; i <= n; ++i) dp[i * w] = i;
  for (std::size_t j = 0; j <= m; ++j) dp[j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      dp[i * w + j] = std::min({dp[(i - 1) * w + (j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u),
                                dp[(i - 1) * w + j] + 1, dp[i * w + (j - 1)] + 1});
  EditCounts c;
  c.reference_length = n;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && dp[(i - 1) * w + (j - 1)] + (ref[i - 1] == hyp[j - 1] ? 0u : 1u) == dp[i * w + j]) {
      if (ref[i - 1] != hyp[j - 1]) ++c.substitutions;
      --i;
      --j;
    } else if (i > 0 && dp[(i - 1) * w + j] + 1 == dp[i * w + j]) {
      ++c.deletions;
      --i;
    } else {
      ++c.insertions;
      --j;
    }
  }
  return c;
}

inline EditCounts word_edit_counts(std::span<const std::string> ref, std::span<const std::string> hyp) {
  return edit_counts<std::string>(ref, hyp);
}

/// Code points, spaces included.
inline EditCounts char_edit_counts(std::string_view ref, std::string_view hyp) {
  auto r = utf8::decode(ref), h = utf8::decode(hyp);
  return edit_counts<char32_t>(std::span<const char32_t>(r), std::span<const char32_t>(h));
}

inline MaybeRational wer(std::span<const std::string> ref, std::span<const std::string> hyp) {
  return word_edit_counts(ref, hyp).rate();
}

inline MaybeRational wer(std::string_view ref, std::string_view hyp) {
  auto r = split_words(ref), h = split_words(hyp);
  return wer(std::span<const std::string>(r), std::span<const std::string>(h));
}

inline MaybeRational cer(std::string_view ref, std::string_view hyp) { return char_edit_counts(ref, hyp).rate(); }

// ---------------------------------------------------------------------------
// chrF

inline constexpr std::size_t kChrfMaxOrder = 6;
inline constexpr int kChrfBeta = 3;

/// Per-order character n-gram totals; additive across sentences.
struct ChrfStats {
  std::array<std::size_t, kChrfMaxOrder> matches{};
  std::array<std::size_t, kChrfMaxOrder> hyp_total{};
  std::array<std::size_t, kChrfMaxOrder> ref_total{};

  ChrfStats& operator+=(const ChrfStats& o) {
    for (std::size_t n = 0; n < kChrfMaxOrder; ++n) {
      matches[n] += o.matches[n];
      hyp_total[n] += o.hyp_total[n];
      ref_total[n] += o.ref_total[n];
    }
    return *this;
  }
};

inline ChrfStats chrf_stats(std::string_view ref, std::string_view hyp) {
  auto r = utf8::decode(ref), h = utf8::decode(hyp);
  ChrfStats s;
  for (std::size_t n = 1; n <= kChrfMaxOrder; ++n) {
    std::map<std::u32string, std::size_t> ref_grams;
    for (std::size_t i = 0; i + n <= r.size(); ++i) ++ref_grams[r.substr(i, n)];
    std::size_t matched = 0;
    for (std::size_t i = 0; i + n <= h.size(); ++i) {
      auto it = ref_grams.find(h.substr(i, n));
      if (it != ref_grams.end() && it->second > 0) {
        --it->second;
        ++matched;
      }
    }
    s.matches[n - 1] = matched;
    s.ref_total[n - 1] = r.size() >= n ? r.size() - n + 1 : 0;
    s.hyp_total[n - 1] = h.size() >= n ? h.size() - n + 1 : 0;
  }
  return s;
}

/// Precision and recall averaged over the orders that occur on either side,
/// then F_beta. Both sides empty scores 1; no overlap scores 0.
inline Rational chrf_score(const ChrfStats& s, int beta = kChrfBeta) {
  Rational precision = 0, recall = 0;
  std::size_t orders = 0;
  for (std::size_t n = 0; n < kChrfMaxOrder; ++n) {
    if (s.hyp_total[n] == 0 && s.ref_total[n] == 0) continue;
    ++orders;
    if (s.hyp_total[n]) precision += Rational(s.matches[n], s.hyp_total[n]);
    if (s.ref_total[n]) recall += Rational(s.matches[n], s.ref_total[n]);
  }
  if (orders == 0) return 1;
  precision /= orders;
  recall /= orders;
  Rational b2 = beta * beta;
  Rational denom = b2 * precision + recall;
  if (denom == 0) return 0;
  return (1 + b2) * precision * recall / denom;
}

/// Corpus-level chrF over parallel lists. Throws StructuralError on length mismatch.
inline Rational chrf(std::span<const std::string> refs, std::span<const std::string> hyps) {
  if (refs.size() != hyps.size())
    throw StructuralError("chrf: " + std::to_string(refs.size()) + " references but " + std::to_string(hyps.size()) +
                          " hypotheses");
  ChrfStats total;
  for (std::size_t i = 0; i < refs.size(); ++i) total += chrf_stats(refs[i], hyps[i]);
  return chrf_score(total);
}

// ---------------------------------------------------------------------------
// Fold aggregation

enum class Metric { Wer, Cer, Chrf, Wepr };
inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::Wer, Metric::Cer, Metric::Chrf, Metric::Wepr};

inline std::string_view metric_name(Metric m) {
  switch (m) {
    case Metric::Wer: return "wer";
    case Metric::Cer: return "cer";
    case Metric::Chrf: return "chrf";
    case Metric::Wepr: return "wepr";
  }
  return "?";
}

struct FoldScores {
  int fold = 0;
  std::map<Metric, MaybeRational> values;
};

struct MetricAggregate {
  MaybeRational mean;           // nullopt when every fold is undefined
  std::optional<double> stddev;  // population std over defined folds
  std::size_t defined_folds = 0;
  std::vector<int> undefined_folds;
};

struct ScoreReport {
  std::string system;
  std::vector<FoldScores> folds;
  std::map<Metric, MetricAggregate> aggregate;
};

inline MetricAggregate aggregate_metric(const std::vector<FoldScores>& folds, Metric m) {
  MetricAggregate agg;
  std::vector<Rational> vals;
  for (const auto& f : folds) {
    auto it = f.values.find(m);
    if (it == f.values.end() || !it->second)
      agg.undefined_folds.push_back(f.fold);
    else
      vals.push_back(*it->second);
  }
  agg.defined_folds = vals.size();
  if (vals.empty()) return agg;
  Rational sum = 0;
  for (const auto& v : vals) sum += v;
  Rational mean = sum / static_cast<long>(vals.size());
  Rational var = 0;
  for (const auto& v : vals) var += (v - mean) * (v - mean);
  var /= static_cast<long>(vals.size());
  agg.mean = mean;
  agg.stddev = std::sqrt(to_double(var));
  return agg;
}

/// Mean and population std per metric over folds; undefined folds are
/// excluded and listed. Throws Error when there are no folds.
inline ScoreReport aggregate_folds(std::string system, std::vector<FoldScores> per_fold) {
  if (per_fold.empty()) throw Error("aggregate_folds: no folds for system '" + system + "'");
  ScoreReport report;
  report.system = std::move(system);
  report.folds = std::move(per_fold);
  for (auto m : kAllMetrics) report.aggregate[m] = aggregate_metric(report.folds, m);
  return report;
}

}  // namespace wepr
