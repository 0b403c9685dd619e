#pragma once

// In-memory corpus model for error-annotated verbatim transcripts, and the
// line-delimited JSON interchange format for corpora and ASR hypotheses.

#include "wepr/common.hpp"

#include <json.hpp>

#include <algorithm>
#include <array>
#include <cstdint>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace wepr {

enum class AnnotationTag : std::uint8_t { Error = 0, German = 1 };

inline constexpr std::array<AnnotationTag, 2> kAllTags = {AnnotationTag::Error, AnnotationTag::German};

inline std::string_view tag_code(AnnotationTag t) { return t == AnnotationTag::Error ? "@!" : "@g"; }
inline std::string_view tag_name(AnnotationTag t) { return t == AnnotationTag::Error ? "error" : "german"; }

inline std::optional<AnnotationTag> tag_from_code(std::string_view code) {
  if (code == "@!") return AnnotationTag::Error;
  if (code == "@g") return AnnotationTag::German;
  return std::nullopt;
}

/// Small bitset over AnnotationTag. Serialized order is always `@!` then `@g`.
class TagSet {
 public:
  constexpr TagSet() = default;
  constexpr TagSet(std::initializer_list<AnnotationTag> tags) {
    for (auto t : tags) insert(t);
  }

  static constexpr TagSet all() { return TagSet{AnnotationTag::Error, AnnotationTag::German}; }

  constexpr void insert(AnnotationTag t) { bits_ |= bit(t); }
  constexpr void erase(AnnotationTag t) { bits_ &= static_cast<std::uint8_t>(~bit(t)); }
  constexpr bool contains(AnnotationTag t) const { return bits_ & bit(t); }
  constexpr bool empty() const { return bits_ == 0; }
  constexpr std::size_t size() const { return (bits_ & 1) + ((bits_ >> 1) & 1); }
  constexpr bool intersects(TagSet o) const { return (bits_ & o.bits_) != 0; }
  constexpr TagSet operator&(TagSet o) const { return from_bits(bits_ & o.bits_); }
  constexpr TagSet operator|(TagSet o) const { return from_bits(bits_ | o.bits_); }
  constexpr bool operator==(const TagSet&) const = default;
  constexpr auto operator<=>(const TagSet&) const = default;

  /// "@!", "@g", "@!@g" or "".
  std::string suffix() const {
    std::string s;
    for (auto t : kAllTags)
      if (contains(t)) s += tag_code(t);
    return s;
  }

  /// "error,german" style list; used for CLI flags and output headers.
  std::string names() const {
    std::string s;
    for (auto t : kAllTags)
      if (contains(t)) {
        if (!s.empty()) s += ',';
        s += tag_name(t);
      }
    return s;
  }

  /// Accepts names ("error", "german") or codes ("@!", "@g"), comma separated.
  static TagSet parse_list(std::string_view list) {
    TagSet out;
    std::string item;
    std::stringstream ss{std::string(list)};
    while (std::getline(ss, item, ',')) {
      item.erase(0, item.find_first_not_of(" \t"));
      item.erase(item.find_last_not_of(" \t") + 1);
      if (item.empty()) continue;
      if (item == "error" || item == "@!")
        out.insert(AnnotationTag::Error);
      else if (item == "german" || item == "@g")
        out.insert(AnnotationTag::German);
      else
        throw ParseError("unknown annotation tag '" + item + "'");
    }
    return out;
  }

 private:
  static constexpr std::uint8_t bit(AnnotationTag t) {
    return static_cast<std::uint8_t>(1u << static_cast<unsigned>(t));
  }
  static constexpr TagSet from_bits(unsigned b) {
    TagSet s;
    s.bits_ = static_cast<std::uint8_t>(b);
    return s;
  }
  std::uint8_t bits_ = 0;
};

struct AnnotatedToken {
  std::string surface;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
  TagSet tags;
  bool disfluency_repeat = false;

  bool operator==(const AnnotatedToken&) const = default;
};

enum class Grade : std::uint8_t { G4, G5, G6, G4_5, G5_6, G4_6 };

inline constexpr std::array<Grade, 6> kAllGrades = {Grade::G4, Grade::G5, Grade::G6,
                                                    Grade::G4_5, Grade::G5_6, Grade::G4_6};

inline std::string_view grade_name(Grade g) {
  switch (g) {
    case Grade::G4: return "4";
    case Grade::G5: return "5";
    case Grade::G6: return "6";
    case Grade::G4_5: return "4/5";
    case Grade::G5_6: return "5/6";
    case Grade::G4_6: return "4/6";
  }
  return "?";
}

/// Accepts "4", "4gr", "4/5", "5/6gr", ...
inline std::optional<Grade> parse_grade(std::string_view s) {
  std::string g(s);
  if (g.size() > 2 && g.ends_with("gr")) g.resize(g.size() - 2);
  for (auto grade : kAllGrades)
    if (grade_name(grade) == g) return grade;
  return std::nullopt;
}

struct Utterance {
  std::string utterance_id;
  std::string recording_id;
  std::string speaker_id;
  bool speaker_is_adult = false;
  std::string class_id;
  Grade grade = Grade::G4;
  std::vector<AnnotatedToken> tokens;
  bool background_noise = false;
  std::string device;
  std::string activity;
  std::optional<int> area;  // school area code, when known

  std::int64_t start_ms() const { return tokens.empty() ? 0 : tokens.front().start_ms; }
  std::int64_t end_ms() const { return tokens.empty() ? 0 : tokens.back().end_ms; }
  std::int64_t duration_ms() const { return end_ms() - start_ms(); }

  bool operator==(const Utterance&) const = default;
};

// Throws StructuralError when an utterance breaks its own invariants.
inline void validate_utterance(const Utterance& u) {
  if (u.utterance_id.empty()) throw StructuralError("utterance with empty utterance_id");
  if (u.tokens.empty()) throw StructuralError("utterance '" + u.utterance_id + "' has no tokens");
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    const auto& t = u.tokens[i];
    if (t.surface.empty()) throw StructuralError("utterance '" + u.utterance_id + "': empty token");
    if (t.surface.find('@') != std::string::npos)
      throw StructuralError("utterance '" + u.utterance_id + "': token '" + t.surface + "' contains '@'");
    if (t.start_ms < 0 || t.end_ms <= t.start_ms)
      throw StructuralError("utterance '" + u.utterance_id + "': token '" + t.surface + "' has invalid span [" +
                            std::to_string(t.start_ms) + "," + std::to_string(t.end_ms) + "]");
    if (i > 0 && t.start_ms < u.tokens[i - 1].start_ms)
      throw StructuralError("utterance '" + u.utterance_id + "': token start times decrease at '" + t.surface + "'");
  }
  if (u.duration_ms() <= 0) throw StructuralError("utterance '" + u.utterance_id + "' has non-positive duration");
}

/// Immutable set of utterances with lookup indices.
class Corpus {
 public:
  Corpus() = default;
  explicit Corpus(std::vector<Utterance> utterances) : utterances_(std::move(utterances)) {
    std::map<std::string, std::string> speaker_class;
    for (std::size_t i = 0; i < utterances_.size(); ++i) {
      const auto& u = utterances_[i];
      validate_utterance(u);
      if (!by_id_.emplace(u.utterance_id, i).second)
        throw StructuralError("duplicate utterance_id '" + u.utterance_id + "'");
      auto [it, inserted] = speaker_class.emplace(u.speaker_id, u.class_id);
      if (!inserted && it->second != u.class_id)
        throw StructuralError("speaker '" + u.speaker_id + "' appears in classes '" + it->second + "' and '" +
                              u.class_id + "'");
      by_recording_[u.recording_id].push_back(i);
      by_class_[u.class_id].push_back(i);
      by_speaker_[u.speaker_id].push_back(i);
    }
  }

  const std::vector<Utterance>& utterances() const { return utterances_; }
  std::size_t size() const { return utterances_.size(); }
  bool empty() const { return utterances_.empty(); }

  const Utterance* find(const std::string& utterance_id) const {
    auto it = by_id_.find(utterance_id);
    return it == by_id_.end() ? nullptr : &utterances_[it->second];
  }

  using Index = std::map<std::string, std::vector<std::size_t>>;
  const Index& by_recording() const { return by_recording_; }
  const Index& by_class() const { return by_class_; }
  const Index& by_speaker() const { return by_speaker_; }

  bool operator==(const Corpus& o) const { return utterances_ == o.utterances_; }

 private:
  std::vector<Utterance> utterances_;
  std::map<std::string, std::size_t> by_id_;
  Index by_recording_, by_class_, by_speaker_;
};

namespace detail {

inline bool is_disfluency_marker(std::string_view w) {
  return w == "-" || w == "--" || w == "\xE2\x80\x93" || w == "\xE2\x80\x94";  // en/em dash
}

struct RawWord {
  std::string surface;
  TagSet tags;
  bool repeat = false;
};

// Peels `@!`/`@g` suffixes and trailing repetition hyphens off a raw word.
inline RawWord split_raw_word(std::string w, std::size_t line) {
  RawWord out;
  for (;;) {
    if (w.size() > 2) {
      if (auto tag = tag_from_code(std::string_view(w).substr(w.size() - 2))) {
        out.tags.insert(*tag);
        w.resize(w.size() - 2);
        continue;
      }
    }
    if (w.size() > 1 && w.back() == '-') {
      out.repeat = true;
      w.pop_back();
      continue;
    }
    break;
  }
  if (auto at = w.find('@'); at != std::string::npos) {
    std::string code = w.substr(at, at + 1 < w.size() ? 2 : 1);
    if (tag_from_code(code))
      throw ParseError("annotation code '" + code + "' must be a word suffix in '" + w + "'", line);
    throw ParseError("unknown annotation code '" + code + "'", line);
  }
  if (w.empty()) throw ParseError("empty word surface", line);
  for (char c : w)
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r')
      throw ParseError("word surface '" + w + "' contains whitespace", line);
  out.surface = std::move(w);
  return out;
}

template <class J>
J required(const J& rec, const char* key, std::size_t line) {
  auto it = rec.find(key);
  if (it == rec.end()) throw ParseError(std::string("missing field '") + key + "'", line);
  return *it;
}

template <class T, class J>
T get_or(const J& rec, const char* key, T fallback) {
  auto it = rec.find(key);
  if (it == rec.end() || it->is_null()) return fallback;
  return it->template get<T>();
}

}  // namespace detail

/// Parses one word record `{w, s, e, tags, rep}` that is not a disfluency marker.
inline AnnotatedToken parse_word(const nlohmann::json& wrec, std::size_t line) {
  if (!wrec.is_object()) throw ParseError("word record is not an object", line);
  auto raw = detail::required(wrec, "w", line).get<std::string>();
  auto word = detail::split_raw_word(raw, line);
  AnnotatedToken tok;
  tok.surface = std::move(word.surface);
  tok.tags = word.tags;
  tok.disfluency_repeat = word.repeat || detail::get_or<bool>(wrec, "rep", false);
  tok.start_ms = detail::required(wrec, "s", line).get<std::int64_t>();
  tok.end_ms = detail::required(wrec, "e", line).get<std::int64_t>();
  if (tok.start_ms < 0) throw ParseError("negative start time for '" + raw + "'", line);
  if (tok.end_ms <= tok.start_ms)
    throw ParseError("malformed timestamp for '" + raw + "': end " + std::to_string(tok.end_ms) + " <= start " +
                         std::to_string(tok.start_ms),
                     line);
  if (auto it = wrec.find("tags"); it != wrec.end() && !it->is_null()) {
    for (const auto& code : *it) {
      auto c = code.get<std::string>();
      auto tag = tag_from_code(c);
      if (!tag) throw ParseError("unknown annotation code '" + c + "'", line);
      tok.tags.insert(*tag);
    }
  }
  return tok;
}

inline bool is_disfluency_record(const nlohmann::json& wrec) {
  auto it = wrec.find("w");
  return it != wrec.end() && it->is_string() && detail::is_disfluency_marker(it->get<std::string>());
}

/// Parses one words array into tokens. Standalone "--" records mark the
/// previous token as a verbatim repetition and are not kept as tokens.
inline std::vector<AnnotatedToken> parse_words(const nlohmann::json& words, std::size_t line) {
  if (!words.is_array()) throw ParseError("'words' must be an array", line);
  std::vector<AnnotatedToken> tokens;
  for (const auto& wrec : words) {
    if (is_disfluency_record(wrec)) {
      if (tokens.empty()) throw ParseError("disfluency marker before any word", line);
      tokens.back().disfluency_repeat = true;
      continue;
    }
    tokens.push_back(parse_word(wrec, line));
  }
  return tokens;
}

inline Utterance parse_utterance_record(const nlohmann::json& rec, std::size_t line) {
  if (!rec.is_object()) throw ParseError("record is not an object", line);
  Utterance u;
  u.utterance_id = detail::required(rec, "utterance_id", line).get<std::string>();
  u.recording_id = detail::required(rec, "recording_id", line).get<std::string>();
  u.speaker_id = detail::required(rec, "speaker_id", line).get<std::string>();
  u.class_id = detail::required(rec, "class_id", line).get<std::string>();
  u.speaker_is_adult = detail::get_or<bool>(rec, "speaker_is_adult", false);
  auto grade_json = detail::required(rec, "grade", line);
  std::string grade_text = grade_json.is_number() ? std::to_string(grade_json.get<int>()) : grade_json.get<std::string>();
  auto grade = parse_grade(grade_text);
  if (!grade) throw ParseError("unknown grade '" + grade_text + "'", line);
  u.grade = *grade;
  u.background_noise = detail::get_or<bool>(rec, "background_noise", false);
  u.device = detail::get_or<std::string>(rec, "device", "");
  u.activity = detail::get_or<std::string>(rec, "activity", "");
  if (auto it = rec.find("area"); it != rec.end() && !it->is_null()) u.area = it->get<int>();
  u.tokens = parse_words(detail::required(rec, "words", line), line);
  if (u.tokens.empty()) throw ParseError("utterance '" + u.utterance_id + "' has no words", line);
  for (std::size_t i = 1; i < u.tokens.size(); ++i)
    if (u.tokens[i].start_ms < u.tokens[i - 1].start_ms)
      throw ParseError("word start times decrease at '" + u.tokens[i].surface + "'", line);
  return u;
}

namespace detail {

// Calls fn(json, line_no) for each non-blank line. Artifact header lines
// (`{"header": {...}}`) are skipped so tool outputs can be read back.
template <class Fn>
void for_each_record(std::istream& in, Fn&& fn) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("invalid JSON: ") + e.what(), line_no);
    }
    if (rec.is_object() && rec.size() == 1 && rec.contains("header")) continue;
    try {
      fn(rec, line_no);
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad field type: ") + e.what(), line_no);
    }
  }
}

}  // namespace detail

inline Corpus parse_transcript(std::istream& in) {
  std::vector<Utterance> utterances;
  std::map<std::string, std::size_t> seen;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    auto u = parse_utterance_record(rec, line);
    if (auto [it, inserted] = seen.emplace(u.utterance_id, line); !inserted)
      throw StructuralError("duplicate utterance_id '" + u.utterance_id + "' (lines " + std::to_string(it->second) +
                            " and " + std::to_string(line) + ")");
    utterances.push_back(std::move(u));
  });
  return Corpus(std::move(utterances));
}

inline Corpus parse_transcript(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  return parse_transcript(in);
}

inline nlohmann::ordered_json to_json(const AnnotatedToken& t) {
  nlohmann::ordered_json tags = nlohmann::ordered_json::array();
  for (auto tag : kAllTags)
    if (t.tags.contains(tag)) tags.push_back(std::string(tag_code(tag)));
  return {{"w", t.surface + t.tags.suffix()}, {"s", t.start_ms}, {"e", t.end_ms}, {"tags", tags},
          {"rep", t.disfluency_repeat}};
}

inline nlohmann::ordered_json to_json(const Utterance& u) {
  nlohmann::ordered_json rec;
  rec["utterance_id"] = u.utterance_id;
  rec["recording_id"] = u.recording_id;
  rec["speaker_id"] = u.speaker_id;
  rec["speaker_is_adult"] = u.speaker_is_adult;
  rec["class_id"] = u.class_id;
  rec["grade"] = std::string(grade_name(u.grade));
  rec["background_noise"] = u.background_noise;
  rec["device"] = u.device;
  rec["activity"] = u.activity;
  if (u.area) rec["area"] = *u.area;
  auto& words = rec["words"] = nlohmann::ordered_json::array();
  for (const auto& t : u.tokens) words.push_back(to_json(t));
  return rec;
}

inline std::string serialize(const Corpus& c) {
  std::string out;
  for (const auto& u : c.utterances()) {
    out += to_json(u).dump();
    out += '\n';
  }
  return out;
}

/// Space-joined token surfaces; with keep_tags each tagged token is re-suffixed.
inline std::string render_reference(const Utterance& u, bool keep_tags) {
  std::string out;
  for (const auto& t : u.tokens) {
    if (!out.empty()) out += ' ';
    out += t.surface;
    if (keep_tags) out += t.tags.suffix();
  }
  return out;
}

struct Hypothesis {
  std::string utterance_id;
  std::string system;
  std::string text;
};

/// system -> utterance_id -> hypothesis text.
class HypothesisSet {
 public:
  void add(Hypothesis h, std::size_t line = 0) {
    auto& per_system = texts_[h.system];
    if (!per_system.emplace(h.utterance_id, std::move(h.text)).second)
      throw StructuralError((line ? "line " + std::to_string(line) + ": " : std::string()) +
                            "duplicate hypothesis for utterance '" + h.utterance_id + "' in system '" + h.system + "'");
  }

  void merge(const HypothesisSet& other) {
    for (const auto& [system, texts] : other.texts_)
      for (const auto& [utt, text] : texts) add({utt, system, text});
  }

  std::vector<std::string> systems() const {
    std::vector<std::string> out;
    for (const auto& [s, _] : texts_) out.push_back(s);
    return out;
  }

  const std::string* find(const std::string& system, const std::string& utterance_id) const {
    auto s = texts_.find(system);
    if (s == texts_.end()) return nullptr;
    auto u = s->second.find(utterance_id);
    return u == s->second.end() ? nullptr : &u->second;
  }

  bool empty() const { return texts_.empty(); }

 private:
  std::map<std::string, std::map<std::string, std::string>> texts_;
};

inline HypothesisSet parse_hypotheses(std::istream& in) {
  HypothesisSet set;
  detail::for_each_record(in, [&](const nlohmann::json& rec, std::size_t line) {
    if (!rec.is_object()) throw ParseError("record is not an object", line);
    Hypothesis h;
    h.utterance_id = detail::required(rec, "utterance_id", line).get<std::string>();
    h.system = detail::required(rec, "system", line).get<std::string>();
    h.text = detail::required(rec, "text", line).get<std::string>();
    set.add(std::move(h), line);
  });
  return set;
}

inline HypothesisSet parse_hypotheses(std::string_view raw) {
  std::istringstream in{std::string(raw)};
  return parse_hypotheses(in);
}

}  // namespace wepr
