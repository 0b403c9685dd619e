#pragma once

// Seeded random inputs for property tests.

#include "wepr/transcript.hpp"
#include "wepr/corpus_ops.hpp"

#include <random>
#include <string>
#include <vector>

namespace gen {

using Rng = std::mt19937_64;

inline std::size_t uniform(Rng& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

inline bool coin(Rng& rng, double p = 0.5) { return std::bernoulli_distribution(p)(rng); }

template <class T>
const T& pick(Rng& rng, const std::vector<T>& v) {
  return v[uniform(rng, 0, v.size() - 1)];
}

inline const std::vector<std::string>& learner_vocab() {
  static const std::vector<std::string> v = {"the", "de",  "a",   "an",  "have", "has", "is",   "it's", "it",
                                             "you", "your", "dis", "this", "he",  "she", "in",  "on",   "of",
                                             "are", "do",  "make", "much", "not", "at",  "don't", "tvshow"};
  return v;
}

/// Word list over a small alphabet of words.
inline std::vector<std::string> word_list(Rng& rng, const std::vector<std::string>& vocab, std::size_t max_len) {
  std::vector<std::string> out(uniform(rng, 0, max_len));
  for (auto& w : out) w = pick(rng, vocab);
  return out;
}

/// Random string over a small alphabet that includes the space.
inline std::string short_string(Rng& rng, std::string_view alphabet, std::size_t max_len) {
  std::string s(uniform(rng, 0, max_len), ' ');
  for (auto& c : s) c = alphabet[uniform(rng, 0, alphabet.size() - 1)];
  return s;
}

/// Transcript-like noise: words, tags, punctuation, digits, brackets,
/// apostrophes, accents and curly quotes.
inline std::string messy_text(Rng& rng) {
  static const std::vector<std::string> pieces = {
      "The", "beach", "it's", "It\xE2\x80\x99s", "don't", "a@!", "of@!", "you@!", "Haus@g", "sch\xC3\xB6n@g",
      "TV-show", "well-", "--", "(laughs)", "[noise]", ",", ".", "?", "!", "2", "12", "1,000", "3.5", "'quote'",
      "caf\xC3\xA9", "na\xC3\xAFve", "\xE2\x80\x9Cword\xE2\x80\x9D", "x'", "'y", "rock'n'roll", "42nd", "@!", "e-mail@!",
      "it", "'s", "ok...", "A", "B12", "\xC3\x9F", "\xE2\x82\xAC", "hmm;", "\"hi\"", "one's@!", "10@!"};
  std::string out;
  std::size_t n = uniform(rng, 0, 12);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += coin(rng, 0.9) ? " " : "  ";
    out += pick(rng, pieces);
    if (coin(rng, 0.15)) out += pick(rng, pieces);  // glued pieces
  }
  return out;
}

/// Like messy_text, but each tag suffixes a word with at least one
/// alphanumeric character, appears once per word, and brackets are balanced
/// within a token and never carry tags.
inline std::string tagged_text(Rng& rng) {
  static const std::vector<std::string> words = {
      "The", "beach,", "it's", "It\xE2\x80\x99s", "don't", "a", "of", "you", "Haus", "sch\xC3\xB6n", "TV-show",
      "well-", "2", "12", "1,000", "3.5", "'quote'", "caf\xC3\xA9", "x'", "'y", "rock'n'roll", "42nd", "e-mail",
      "ok...", "B12", "\"hi\"", "one's", "21", "dis.", "?why"};
  static const std::vector<std::string> extras = {"--", "(laughs)", "[noise]", ",", "!", "\xE2\x82\xAC"};
  static const std::vector<std::string> codes = {"@!", "@g", "@!@g"};
  std::string out;
  std::size_t n = uniform(rng, 0, 12);
  for (std::size_t i = 0; i < n; ++i) {
    if (i) out += ' ';
    if (coin(rng, 0.15)) {
      out += pick(rng, extras);
      continue;
    }
    out += pick(rng, words);
    if (coin(rng, 0.4)) out += pick(rng, codes);
  }
  return out;
}

inline wepr::AnnotatedToken token(Rng& rng, const std::string& surface, std::int64_t& clock) {
  wepr::AnnotatedToken t;
  t.surface = surface;
  clock += static_cast<std::int64_t>(uniform(rng, 0, 300));
  t.start_ms = clock;
  clock += static_cast<std::int64_t>(uniform(rng, 80, 900));
  t.end_ms = clock;
  if (coin(rng, 0.3)) t.tags.insert(wepr::AnnotationTag::Error);
  if (coin(rng, 0.05)) t.tags.insert(wepr::AnnotationTag::German);
  t.disfluency_repeat = coin(rng, 0.03);
  return t;
}

inline wepr::Utterance utterance(Rng& rng, std::string id, std::string cls, std::string speaker,
                                 std::size_t max_words = 10) {
  wepr::Utterance u;
  u.utterance_id = std::move(id);
  u.recording_id = "rec_" + cls;
  u.speaker_id = std::move(speaker);
  u.class_id = std::move(cls);
  u.grade = wepr::kAllGrades[uniform(rng, 0, 2)];
  u.background_noise = coin(rng, 0.2);
  u.device = coin(rng) ? "tablet" : "phone";
  u.activity = coin(rng) ? "picture" : "free";
  if (coin(rng, 0.7)) u.area = static_cast<int>(uniform(rng, 1, 3));
  std::int64_t clock = static_cast<std::int64_t>(uniform(rng, 0, 5000));
  std::size_t n = uniform(rng, 1, max_words);
  for (std::size_t i = 0; i < n; ++i) u.tokens.push_back(token(rng, pick(rng, learner_vocab()), clock));
  return u;
}

/// Corpus with `classes` classes of 1..3 speakers each.
inline wepr::Corpus corpus(Rng& rng, std::size_t classes, std::size_t max_utts_per_speaker = 4) {
  std::vector<wepr::Utterance> us;
  for (std::size_t c = 0; c < classes; ++c) {
    std::string cls = "c" + std::to_string(c);
    std::size_t speakers = uniform(rng, 1, 3);
    for (std::size_t s = 0; s < speakers; ++s) {
      std::string spk = cls + "s" + std::to_string(s);
      std::size_t n = uniform(rng, 1, max_utts_per_speaker);
      for (std::size_t k = 0; k < n; ++k)
        us.push_back(utterance(rng, spk + "u" + std::to_string(k), cls, spk));
    }
  }
  return wepr::Corpus(std::move(us));
}

/// Recording with speaker turns and pauses, some longer than the split threshold.
inline wepr::Recording recording(Rng& rng, std::string id) {
  wepr::Recording r;
  r.recording_id = std::move(id);
  r.class_id = "c0";
  r.speaker_is_adult = {{"teacher", true}, {"k1", false}, {"k2", false}};
  std::vector<std::string> speakers = {"teacher", "k1", "k2"};
  std::int64_t clock = 0;
  std::string speaker = pick(rng, speakers);
  std::size_t n = uniform(rng, 0, 40);
  for (std::size_t i = 0; i < n; ++i) {
    if (coin(rng, 0.2)) speaker = pick(rng, speakers);
    if (coin(rng, 0.1)) clock += static_cast<std::int64_t>(uniform(rng, 1500, 4000));
    wepr::RecordingWord w;
    w.token = token(rng, pick(rng, learner_vocab()), clock);
    if (coin(rng, 0.03)) w.token.end_ms = w.token.start_ms + static_cast<std::int64_t>(uniform(rng, 11000, 15000));
    clock = w.token.end_ms;
    w.speaker_id = speaker;
    r.words.push_back(std::move(w));
  }
  return r;
}

}  // namespace gen
