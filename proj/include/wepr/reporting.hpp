#pragma once

// Per-target confusion and preservation tables across ASR systems.

#include "wepr/common.hpp"
#include "wepr/metrics.hpp"
#include "wepr/phonetic_align.hpp"
#include "wepr/transcript.hpp"

#include <json.hpp>

#include <algorithm>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace wepr {

/// Rendering of a deleted target.
inline constexpr const char* kDeletionMarker = "_";

/// One utterance's tagged normalized reference and its alignment for one system.
struct AlignedUtterance {
  std::string utterance_id;
  std::vector<std::string> nr1;
  Alignment alignment;
};

/// system -> aligned utterances
using SystemAlignments = std::map<std::string, std::vector<AlignedUtterance>>;

enum class ConfusionMode { Incorrect, Preserved };

inline std::string_view confusion_mode_name(ConfusionMode m) {
  return m == ConfusionMode::Incorrect ? "incorrect" : "preserved";
}

struct ConfusionEntry {
  std::string target;      // e.g. "have@!"
  std::string prediction;  // hypothesis word or "_"
  std::map<std::string, Rational> fractions;  // per system
  std::size_t support = 0;                    // occurrences of target
  std::set<std::string> flagged;              // best system(s) of the row
};

struct ConfusionTable {
  ConfusionMode mode = ConfusionMode::Incorrect;
  std::vector<std::string> systems;
  std::vector<ConfusionEntry> rows;
  std::map<std::string, Rational> mean;  // empty when there are no rows
  std::set<std::string> mean_flagged;
};

/// target -> outcome -> count, for one system.
using OutcomeCounts = std::map<std::string, std::map<std::string, std::size_t>>;

/// Counts how each annotated reference word (tags intersecting `annotation_set`)
/// came out: itself when correct, the substituted word, or "_" when deleted.
inline OutcomeCounts count_outcomes(const std::vector<AlignedUtterance>& utterances, TagSet annotation_set) {
  OutcomeCounts counts;
  for (const auto& au : utterances) {
    for (const auto& step : au.alignment.steps) {
      if (!step.ref_index) continue;
      if (*step.ref_index >= au.nr1.size())
        throw StructuralError("utterance '" + au.utterance_id + "': alignment longer than tagged reference");
      auto [body, tags] = split_tagged(au.nr1[*step.ref_index]);
      TagSet relevant = tags & annotation_set;
      if (relevant.empty()) continue;
      std::string target = body + relevant.suffix();
      std::string outcome = step.kind == StepKind::Deletion ? kDeletionMarker : *step.hyp_word;
      ++counts[target][outcome];
    }
  }
  return counts;
}

/// Per system and target: fraction of occurrences per outcome.
inline std::map<std::string, std::map<std::string, std::map<std::string, Rational>>> outcome_fractions(
    const SystemAlignments& alignments, TagSet annotation_set) {
  std::map<std::string, std::map<std::string, std::map<std::string, Rational>>> out;
  for (const auto& [system, utts] : alignments) {
    for (const auto& [target, outcomes] : count_outcomes(utts, annotation_set)) {
      std::size_t support = 0;
      for (const auto& [_, n] : outcomes) support += n;
      for (const auto& [outcome, n] : outcomes) out[system][target][outcome] = Rational(n, support);
    }
  }
  return out;
}

/// Unweighted mean of the per-system fractions over `entries`.
inline std::map<std::string, Rational> mean_row(const std::vector<ConfusionEntry>& entries) {
  std::map<std::string, Rational> sum;
  if (entries.empty()) return sum;
  for (const auto& e : entries)
    for (const auto& [system, f] : e.fractions) sum[system] += f;
  for (auto& [_, v] : sum) v /= static_cast<long>(entries.size());
  return sum;
}

namespace detail {

inline std::set<std::string> flag_best(const std::map<std::string, Rational>& values, ConfusionMode mode) {
  std::set<std::string> out;
  if (values.empty()) return out;
  auto cmp = [](const auto& a, const auto& b) { return a.second < b.second; };
  const Rational& best = mode == ConfusionMode::Incorrect ? std::min_element(values.begin(), values.end(), cmp)->second
                                                          : std::max_element(values.begin(), values.end(), cmp)->second;
  for (const auto& [system, v] : values)
    if (v == best) out.insert(system);
  return out;
}

}  // namespace detail

/// Top-k rows of either the most frequent mis-transcriptions of annotated
/// words (ranked by summed count across systems) or the most frequently
/// preserved annotated words, with per-system fractions, the best system per
/// row flagged, and a mean row. Ties rank by target, then prediction.
/// Throws Error when a system lacks alignments for some utterance in `utterance_ids`.
inline ConfusionTable confusion_table(const std::vector<std::string>& utterance_ids, const SystemAlignments& alignments,
                                      TagSet annotation_set, std::size_t top_k, ConfusionMode mode) {
  ConfusionTable table;
  table.mode = mode;
  std::map<std::string, OutcomeCounts> per_system;
  for (const auto& [system, utts] : alignments) {
    std::set<std::string> covered;
    for (const auto& au : utts) covered.insert(au.utterance_id);
    for (const auto& id : utterance_ids)
      if (!covered.count(id)) throw Error("system '" + system + "' has no alignment for utterance '" + id + "'");
    table.systems.push_back(system);
    per_system[system] = count_outcomes(utts, annotation_set);
  }

  // (target, prediction) -> summed count across systems
  std::map<std::pair<std::string, std::string>, std::size_t> totals;
  std::map<std::string, std::size_t> support;
  for (const auto& [system, counts] : per_system) {
    for (const auto& [target, outcomes] : counts) {
      std::string body = split_tagged(target).first;
      std::size_t n_target = 0;
      for (const auto& [outcome, n] : outcomes) {
        n_target += n;
        bool correct = outcome == body;
        if ((mode == ConfusionMode::Incorrect) != correct) totals[{target, outcome}] += n;
      }
      support[target] = std::max(support[target], n_target);
    }
  }

  std::vector<std::pair<std::pair<std::string, std::string>, std::size_t>> ranked(totals.begin(), totals.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  if (ranked.size() > top_k) ranked.resize(top_k);

  for (const auto& [key, _] : ranked) {
    ConfusionEntry e;
    e.target = key.first;
    e.prediction = key.second;
    e.support = support[e.target];
    for (const auto& system : table.systems) {
      const auto& counts = per_system[system];
      auto t = counts.find(e.target);
      std::size_t n_target = 0, n_pred = 0;
      if (t != counts.end()) {
        for (const auto& [outcome, n] : t->second) n_target += n;
        if (auto p = t->second.find(e.prediction); p != t->second.end()) n_pred = p->second;
      }
      e.fractions[system] = n_target ? Rational(n_pred, n_target) : Rational(0);
    }
    e.flagged = detail::flag_best(e.fractions, mode);
    table.rows.push_back(std::move(e));
  }
  table.mean = mean_row(table.rows);
  table.mean_flagged = detail::flag_best(table.mean, mode);
  return table;
}

// ---------------------------------------------------------------------------
// Rendering

/// Aligned text table; flagged cells end in '*'.
inline std::string render_text(const ConfusionTable& t, int decimals = 3) {
  std::vector<std::vector<std::string>> cells;
  std::vector<std::string> head = {"TARGET", "PREDICTION"};
  head.insert(head.end(), t.systems.begin(), t.systems.end());
  cells.push_back(head);
  auto cell = [&](const Rational& v, bool flag) { return format_fixed(to_double(v), decimals) + (flag ? "*" : ""); };
  for (const auto& r : t.rows) {
    std::vector<std::string> row = {r.target, r.prediction};
    for (const auto& s : t.systems) row.push_back(cell(r.fractions.at(s), r.flagged.count(s) > 0));
    cells.push_back(row);
  }
  if (!t.rows.empty()) {
    std::vector<std::string> row = {"Mean (n=" + std::to_string(t.rows.size()) + ")", ""};
    for (const auto& s : t.systems) row.push_back(cell(t.mean.at(s), t.mean_flagged.count(s) > 0));
    cells.push_back(row);
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& row : cells)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
  std::string out;
  for (std::size_t r = 0; r < cells.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < cells[r].size(); ++c) {
      if (c) line += "  ";
      line += cells[r][c] + std::string(width[c] - cells[r][c].size(), ' ');
    }
    line.erase(line.find_last_not_of(' ') + 1);
    out += line + '\n';
    if (r == 0 || r + 2 == cells.size()) {
      std::size_t total = 0;
      for (auto w : width) total += w;
      if (r == 0 || !t.rows.empty()) out += std::string(total + 2 * (width.size() - 1), '-') + '\n';
    }
  }
  return out;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace detail

inline std::string render_csv(const ConfusionTable& t, int decimals = 6) {
  std::string out = "target,prediction,support";
  for (const auto& s : t.systems) out += "," + detail::csv_field(s);
  out += '\n';
  for (const auto& r : t.rows) {
    out += detail::csv_field(r.target) + "," + detail::csv_field(r.prediction) + "," + std::to_string(r.support);
    for (const auto& s : t.systems) out += "," + format_fixed(to_double(r.fractions.at(s)), decimals);
    out += '\n';
  }
  if (!t.rows.empty()) {
    out += "mean,,";
    for (const auto& s : t.systems) out += "," + format_fixed(to_double(t.mean.at(s)), decimals);
    out += '\n';
  }
  return out;
}

/// One JSON object per row, then a mean record.
inline std::string render_records(const ConfusionTable& t) {
  std::string out;
  auto fractions = [](const std::map<std::string, Rational>& f) {
    nlohmann::ordered_json j = nlohmann::ordered_json::object();
    for (const auto& [s, v] : f) j[s] = {{"value", to_double(v)}, {"exact", to_exact_string(v)}};
    return j;
  };
  for (const auto& r : t.rows) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(confusion_mode_name(t.mode));
    j["target"] = r.target;
    j["prediction"] = r.prediction;
    j["support"] = r.support;
    j["fractions"] = fractions(r.fractions);
    j["flagged"] = r.flagged;
    out += j.dump() + '\n';
  }
  if (!t.rows.empty()) {
    nlohmann::ordered_json j;
    j["mode"] = std::string(confusion_mode_name(t.mode));
    j["mean_over"] = t.rows.size();
    j["fractions"] = fractions(t.mean);
    j["flagged"] = t.mean_flagged;
    out += j.dump() + '\n';
  }
  return out;
}

}  // namespace wepr
