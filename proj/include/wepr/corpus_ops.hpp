#pragma once

// Corpus engineering on word timestamps: recording segmentation, utterance
// filtering, training chunks, class-disjoint folds and corpus statistics.

#include "wepr/common.hpp"
#include "wepr/normalizer.hpp"
#include "wepr/transcript.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

namespace wepr {

// ---------------------------------------------------------------------------
// Segmentation

struct RecordingWord {
  AnnotatedToken token;
  std::string speaker_id;
};

/// A whole recording: metadata plus a speaker-labelled, time-ordered word stream.
struct Recording {
  std::string recording_id;
  std::string class_id;
  Grade grade = Grade::G4;
  bool background_noise = false;
  std::string device;
  std::string activity;
  std::optional<int> area;
  std::map<std::string, bool> speaker_is_adult;
  std::vector<RecordingWord> words;
};

inline constexpr std::int64_t kDefaultPauseSplitMs = 2000;

/// Maximal same-speaker runs, split again wherever the silence between two
/// words exceeds `pause_split_ms`. Ids are `<recording_id>_<nnnn>`.
/// Throws StructuralError when word start times decrease.
inline std::vector<Utterance> segment(const Recording& rec, std::int64_t pause_split_ms = kDefaultPauseSplitMs) {
  std::vector<Utterance> out;
  for (std::size_t i = 1; i < rec.words.size(); ++i)
    if (rec.words[i].token.start_ms < rec.words[i - 1].token.start_ms)
      throw StructuralError("recording '" + rec.recording_id + "': word '" + rec.words[i].token.surface +
                            "' starts before its predecessor");
  auto start_utterance = [&](const RecordingWord& w) {
    Utterance u;
    char id[16];
    std::snprintf(id, sizeof id, "_%04zu", out.size());
    u.utterance_id = rec.recording_id + id;
    u.recording_id = rec.recording_id;
    u.speaker_id = w.speaker_id;
    auto adult = rec.speaker_is_adult.find(w.speaker_id);
    u.speaker_is_adult = adult != rec.speaker_is_adult.end() && adult->second;
    u.class_id = rec.class_id;
    u.grade = rec.grade;
    u.background_noise = rec.background_noise;
    u.device = rec.device;
    u.activity = rec.activity;
    u.area = rec.area;
    out.push_back(std::move(u));
  };
  for (std::size_t i = 0; i < rec.words.size(); ++i) {
    const auto& w = rec.words[i];
    bool boundary = i == 0 || w.speaker_id != rec.words[i - 1].speaker_id ||
                    w.token.start_ms - rec.words[i - 1].token.end_ms > pause_split_ms;
    if (boundary) start_utterance(w);
    out.back().tokens.push_back(w.token);
  }
  return out;
}

/// Recording file: one JSON object per line,
/// `{recording_id, class_id, grade, background_noise, device, activity, area?,
///   speakers: [{speaker_id, is_adult}], words: [{w, s, e, tags, rep, speaker}]}`.
inline std::vector<Recording> parse_recordings(std::istream& in) {
  std::vector<Recording> out;
  detail::for_each_record(in, [&](const nlohmann::json& j, std::size_t line) {
    if (!j.is_object()) throw ParseError("record is not an object", line);
    Recording rec;
    rec.recording_id = detail::required(j, "recording_id", line).get<std::string>();
    rec.class_id = detail::required(j, "class_id", line).get<std::string>();
    auto grade_json = detail::required(j, "grade", line);
    std::string grade_text =
        grade_json.is_number() ? std::to_string(grade_json.get<int>()) : grade_json.get<std::string>();
    auto grade = parse_grade(grade_text);
    if (!grade) throw ParseError("unknown grade '" + grade_text + "'", line);
    rec.grade = *grade;
    rec.background_noise = detail::get_or<bool>(j, "background_noise", false);
    rec.device = detail::get_or<std::string>(j, "device", "");
    rec.activity = detail::get_or<std::string>(j, "activity", "");
    if (auto it = j.find("area"); it != j.end() && !it->is_null()) rec.area = it->get<int>();
    if (auto it = j.find("speakers"); it != j.end())
      for (const auto& s : *it)
        rec.speaker_is_adult[detail::required(s, "speaker_id", line).get<std::string>()] =
            detail::get_or<bool>(s, "is_adult", false);
    for (const auto& wrec : detail::required(j, "words", line)) {
      if (is_disfluency_record(wrec)) {
        if (rec.words.empty()) throw ParseError("disfluency marker before any word", line);
        rec.words.back().token.disfluency_repeat = true;
        continue;
      }
      RecordingWord w;
      w.token = parse_word(wrec, line);
      w.speaker_id = detail::required(wrec, "speaker", line).get<std::string>();
      rec.words.push_back(std::move(w));
    }
    out.push_back(std::move(rec));
  });
  return out;
}

inline std::vector<Recording> parse_recordings(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  return parse_recordings(in);
}

// ---------------------------------------------------------------------------
// Filtering

inline constexpr std::int64_t kDefaultMinDurationMs = 500;

enum class RemovalReason { TooShort, Adult };

inline std::string_view removal_reason_name(RemovalReason r) { return r == RemovalReason::Adult ? "adult" : "too_short"; }

struct Removal {
  std::string utterance_id;
  RemovalReason reason;
};

struct FilterResult {
  std::vector<Utterance> kept;
  std::vector<Removal> removed;

  std::size_t removed_count(RemovalReason r) const {
    return static_cast<std::size_t>(
        std::count_if(removed.begin(), removed.end(), [r](const Removal& x) { return x.reason == r; }));
  }
};

/// Keeps child utterances of at least `min_duration_ms` (inclusive). Adult
/// speech is reported as "adult" even when it is also too short.
inline FilterResult filter_utterances(std::vector<Utterance> us, std::int64_t min_duration_ms = kDefaultMinDurationMs) {
  FilterResult r;
  for (auto& u : us) {
    if (u.speaker_is_adult)
      r.removed.push_back({u.utterance_id, RemovalReason::Adult});
    else if (u.duration_ms() < min_duration_ms)
      r.removed.push_back({u.utterance_id, RemovalReason::TooShort});
    else
      r.kept.push_back(std::move(u));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Training chunks

inline constexpr std::int64_t kDefaultMaxChunkMs = 12000;

struct Chunk {
  Utterance utterance;  // spans first word start .. last word end
  bool oversized = false;  // a single word longer than the limit
};

/// Greedy left-to-right packing of whole words into chunks of at most
/// `max_ms` from first word start to last word end. Chunk ids are
/// `<utterance_id>-c<nn>`.
inline std::vector<Chunk> chunk_for_training(const Utterance& u, std::int64_t max_ms = kDefaultMaxChunkMs) {
  std::vector<Chunk> out;
  auto open_chunk = [&](const AnnotatedToken& t) {
    Chunk c;
    c.utterance = u;
    c.utterance.tokens.clear();
    char id[16];
    std::snprintf(id, sizeof id, "-c%02zu", out.size());
    c.utterance.utterance_id = u.utterance_id + id;
    c.utterance.tokens.push_back(t);
    c.oversized = t.end_ms - t.start_ms > max_ms;
    out.push_back(std::move(c));
  };
  for (const auto& t : u.tokens) {
    if (out.empty() || out.back().oversized || t.end_ms - out.back().utterance.start_ms() > max_ms)
      open_chunk(t);
    else
      out.back().utterance.tokens.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Folds

struct FoldTotals {
  std::int64_t duration_ms = 0;
  std::size_t utterances = 0;
  std::map<Grade, std::size_t> grades;  // utterance count per grade

  bool operator==(const FoldTotals&) const = default;
};

struct FoldManifest {
  int num_folds = 5;
  std::map<std::string, int> assignments;  // class_id -> fold
  std::vector<FoldTotals> per_fold;

  int fold_of_class(const std::string& class_id) const {
    auto it = assignments.find(class_id);
    if (it == assignments.end()) throw StructuralError("class '" + class_id + "' is not assigned to a fold");
    return it->second;
  }

  std::int64_t spread_ms() const {
    if (per_fold.empty()) return 0;
    auto [lo, hi] = std::minmax_element(per_fold.begin(), per_fold.end(),
                                        [](const auto& a, const auto& b) { return a.duration_ms < b.duration_ms; });
    return hi->duration_ms - lo->duration_ms;
  }

  bool operator==(const FoldManifest&) const = default;
};

/// Recomputes per-fold totals of `manifest` from the corpus.
inline void tally_folds(const Corpus& c, FoldManifest& manifest) {
  manifest.per_fold.assign(static_cast<std::size_t>(manifest.num_folds), FoldTotals{});
  for (const auto& u : c.utterances()) {
    auto& f = manifest.per_fold[static_cast<std::size_t>(manifest.fold_of_class(u.class_id))];
    f.duration_ms += u.duration_ms();
    ++f.utterances;
    ++f.grades[u.grade];
  }
}

/// Longest-processing-time assignment of whole classes: classes by total
/// duration descending (ties by class_id), each to the currently lightest
/// fold (ties by lowest index). Throws Error when there are fewer classes than folds.
inline FoldManifest make_folds(const Corpus& c, int k = 5) {
  if (k < 1) throw Error("number of folds must be positive");
  std::map<std::string, std::int64_t> class_duration;
  for (const auto& u : c.utterances()) class_duration[u.class_id] += u.duration_ms();
  if (class_duration.size() < static_cast<std::size_t>(k))
    throw Error("cannot build " + std::to_string(k) + " folds from " + std::to_string(class_duration.size()) +
                " classes");
  std::vector<std::pair<std::string, std::int64_t>> classes(class_duration.begin(), class_duration.end());
  std::stable_sort(classes.begin(), classes.end(), [](const auto& a, const auto& b) { return a.second > b.second; });

  FoldManifest m;
  m.num_folds = k;
  std::vector<std::int64_t> load(static_cast<std::size_t>(k), 0);
  for (const auto& [cls, dur] : classes) {
    auto lightest = static_cast<int>(std::min_element(load.begin(), load.end()) - load.begin());
    m.assignments[cls] = lightest;
    load[static_cast<std::size_t>(lightest)] += dur;
  }
  tally_folds(c, m);
  return m;
}

inline nlohmann::ordered_json to_json(const FoldManifest& m) {
  nlohmann::ordered_json j;
  j["num_folds"] = m.num_folds;
  j["assignments"] = nlohmann::ordered_json::object();
  for (const auto& [cls, fold] : m.assignments) j["assignments"][cls] = fold;
  j["per_fold"] = nlohmann::ordered_json::array();
  for (std::size_t f = 0; f < m.per_fold.size(); ++f) {
    nlohmann::ordered_json grades = nlohmann::ordered_json::object();
    for (const auto& [g, n] : m.per_fold[f].grades) grades[std::string(grade_name(g))] = n;
    j["per_fold"].push_back({{"fold", f},
                             {"duration_ms", m.per_fold[f].duration_ms},
                             {"utterances", m.per_fold[f].utterances},
                             {"grades", grades}});
  }
  return j;
}

inline FoldManifest fold_manifest_from_json(const nlohmann::json& j) {
  try {
    FoldManifest m;
    m.num_folds = j.at("num_folds").get<int>();
    if (m.num_folds < 1) throw ParseError("num_folds must be positive");
    for (const auto& [cls, fold] : j.at("assignments").items()) {
      int f = fold.get<int>();
      if (f < 0 || f >= m.num_folds)
        throw ParseError("class '" + cls + "' assigned to fold " + std::to_string(f) + " outside [0, " +
                         std::to_string(m.num_folds) + ")");
      m.assignments[cls] = f;
    }
    if (auto it = j.find("per_fold"); it != j.end()) {
      for (const auto& pf : *it) {
        FoldTotals t;
        t.duration_ms = pf.at("duration_ms").get<std::int64_t>();
        t.utterances = pf.at("utterances").get<std::size_t>();
        for (const auto& [g, n] : pf.at("grades").items()) {
          auto grade = parse_grade(g);
          if (!grade) throw ParseError("unknown grade '" + g + "' in fold manifest");
          t.grades[*grade] = n.get<std::size_t>();
        }
        m.per_fold.push_back(std::move(t));
      }
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fold manifest: ") + e.what());
  }
}

inline FoldManifest parse_fold_manifest(std::istream& in) {
  std::stringstream ss;
  ss << in.rdbuf();
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("fold manifest: invalid JSON: ") + e.what());
  }
  return fold_manifest_from_json(j);
}

// ---------------------------------------------------------------------------
// Statistics

inline constexpr std::size_t kDurationBins = 30;  // 1 s bins over [0, 30 s), plus overflow

struct Rollup {
  std::size_t utterances = 0;
  std::int64_t duration_ms = 0;
  std::size_t tokens = 0;

  bool operator==(const Rollup&) const = default;
};

struct CorpusStats {
  std::size_t utterances = 0;
  std::size_t speakers = 0;
  std::size_t classes = 0;
  std::size_t recordings = 0;
  std::int64_t duration_ms = 0;
  std::size_t tokens = 0;
  std::size_t types = 0;
  std::size_t annotated_tokens = 0;
  std::size_t annotated_types = 0;
  std::map<Grade, Rollup> per_grade;
  std::map<int, Rollup> per_area;  // -1 = unknown area
  std::array<std::size_t, kDurationBins + 1> duration_histogram{};

  bool operator==(const CorpusStats&) const = default;
};

/// Token and type counts are taken over normalized words; annotated counts
/// over words carrying any tag, typed by their tagged form ("have@!").
inline CorpusStats stats(const Corpus& c) {
  CorpusStats s;
  std::set<std::string> types, annotated_types, speakers;
  s.utterances = c.size();
  s.classes = c.by_class().size();
  s.recordings = c.by_recording().size();
  s.speakers = c.by_speaker().size();
  const auto profile = NormalizationProfile::reference_with_tags();
  for (const auto& u : c.utterances()) {
    auto words = split_words(normalize(render_reference(u, true), profile));
    std::int64_t dur = u.duration_ms();
    s.duration_ms += dur;
    s.tokens += words.size();
    for (const auto& w : words) {
      std::string body = w;
      TagSet tags;
      body = detail::detach_tags(w, tags);
      types.insert(body);
      if (!tags.empty()) {
        ++s.annotated_tokens;
        annotated_types.insert(w);
      }
    }
    auto add = [&](Rollup& r) {
      ++r.utterances;
      r.duration_ms += dur;
      r.tokens += words.size();
    };
    add(s.per_grade[u.grade]);
    add(s.per_area[u.area.value_or(-1)]);
    auto bin = static_cast<std::size_t>(dur / 1000);
    ++s.duration_histogram[std::min(bin, kDurationBins)];
  }
  s.types = types.size();
  s.annotated_types = annotated_types.size();
  return s;
}

inline nlohmann::ordered_json to_json(const CorpusStats& s) {
  nlohmann::ordered_json j;
  j["utterances"] = s.utterances;
  j["speakers"] = s.speakers;
  j["classes"] = s.classes;
  j["recordings"] = s.recordings;
  j["duration_ms"] = s.duration_ms;
  j["tokens"] = s.tokens;
  j["types"] = s.types;
  j["annotated_tokens"] = s.annotated_tokens;
  j["annotated_types"] = s.annotated_types;
  auto rollup = [](const Rollup& r) {
    return nlohmann::ordered_json{{"utterances", r.utterances}, {"duration_ms", r.duration_ms}, {"tokens", r.tokens}};
  };
  j["per_grade"] = nlohmann::ordered_json::object();
  for (const auto& [g, r] : s.per_grade) j["per_grade"][std::string(grade_name(g))] = rollup(r);
  j["per_area"] = nlohmann::ordered_json::object();
  for (const auto& [a, r] : s.per_area) j["per_area"][a < 0 ? "unknown" : std::to_string(a)] = rollup(r);
  j["duration_histogram_s"] = s.duration_histogram;
  return j;
}

}  // namespace wepr
