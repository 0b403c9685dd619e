#pragma once

// English text normalization for scoring (reference with/without tags and
// hypothesis views) and the cleanup applied to training transcripts.
//
// Rule order (frozen; changing it changes scores):
//   detach-tags, drop-bracketed, fold-case, strip-punct, join-hyphens,
//   contractions, numbers, attach-tags, collapse-space

#include "wepr/common.hpp"
#include "wepr/transcript.hpp"
#include "wepr/utf8.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace wepr {

struct NormalizationProfile {
  bool retain_contractions = true;
  bool retain_annotations = false;
  bool expand_numbers = false;

  /// Normalized reference keeping `@!`/`@g` suffixes.
  static NormalizationProfile reference_with_tags() { return {true, true, false}; }
  /// Normalized reference with suffixes removed; also used for hypotheses.
  static NormalizationProfile plain() { return {true, false, false}; }

  std::vector<std::string> rule_trace() const {
    std::vector<std::string> rules = {"detach-tags", "drop-bracketed", "fold-case", "strip-punct", "join-hyphens"};
    rules.push_back(retain_contractions ? "keep-contractions" : "drop-apostrophes");
    rules.push_back(expand_numbers ? "expand-numbers" : "keep-digits");
    rules.push_back(retain_annotations ? "attach-tags" : "drop-tags");
    rules.push_back("collapse-space");
    return rules;
  }

  bool operator==(const NormalizationProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Number names

/// Largest integer the number expander accepts.
inline constexpr std::uint64_t kMaxNumberWords = 999'999'999;

/// English number name in the British "and" style, hyphens replaced by spaces:
/// 21 -> "twenty one", 101 -> "one hundred and one", 1005 -> "one thousand and five".
inline std::string number_to_words(std::uint64_t n) {
  static constexpr const char* kOnes[] = {"zero",    "one",     "two",       "three",    "four",
                                          "five",    "six",     "seven",     "eight",    "nine",
                                          "ten",     "eleven",  "twelve",    "thirteen", "fourteen",
                                          "fifteen", "sixteen", "seventeen", "eighteen", "nineteen"};
  static constexpr const char* kTens[] = {"",      "",      "twenty",  "thirty", "forty",
                                          "fifty", "sixty", "seventy", "eighty", "ninety"};
  if (n > kMaxNumberWords) throw Error("number " + std::to_string(n) + " out of range for word conversion");
  if (n < 20) return kOnes[n];
  if (n < 100) return std::string(kTens[n / 10]) + (n % 10 ? std::string(" ") + kOnes[n % 10] : "");
  if (n < 1000) {
    std::string s = std::string(kOnes[n / 100]) + " hundred";
    return n % 100 ? s + " and " + number_to_words(n % 100) : s;
  }
  std::uint64_t scale = n >= 1'000'000 ? 1'000'000 : 1'000;
  std::string s = number_to_words(n / scale) + (scale == 1'000'000 ? " million" : " thousand");
  std::uint64_t low = n % scale;
  if (low == 0) return s;
  return s + (low < 100 ? " and " : " ") + number_to_words(low);
}

namespace detail {

inline std::string digits_to_words(std::string_view digits) {
  std::string out;
  for (char d : digits) {
    if (!out.empty()) out += ' ';
    out += number_to_words(static_cast<std::uint64_t>(d - '0'));
  }
  return out;
}

// Integer part in full words; falls back to digit-by-digit past the supported range
// unless `strict`, in which case it throws.
inline std::string integer_words(std::string_view digits, bool strict) {
  std::size_t first = digits.find_first_not_of('0');
  std::string_view sig = first == std::string_view::npos ? std::string_view("0") : digits.substr(first);
  if (sig.size() > 9) {
    if (strict) throw Error("number '" + std::string(digits) + "' out of range for word conversion");
    return digits_to_words(digits);
  }
  return number_to_words(std::stoull(std::string(sig)));
}

// ASCII replacement for a code point after case folding; empty when the
// character is dropped. Covers Latin-1 and Latin Extended-A.
inline std::string_view fold_char(char32_t c) {
  static constexpr const char* kLatin1[64] = {
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
      "d", "n", "o", "o", "o", "o", "o",  "",  "o", "u", "u", "u", "u", "y", "th", "ss",
      "a", "a", "a", "a", "a", "a", "ae", "c", "e", "e", "e", "e", "i", "i", "i", "i",
      "d", "n", "o", "o", "o", "o", "o",  "",  "o", "u", "u", "u", "u", "y", "th", "y"};
  struct Range {
    char32_t lo, hi;
    const char* ascii;
  };
  static constexpr Range kExtA[] = {
      {0x100, 0x105, "a"}, {0x106, 0x10D, "c"}, {0x10E, 0x111, "d"}, {0x112, 0x11B, "e"}, {0x11C, 0x123, "g"},
      {0x124, 0x127, "h"}, {0x128, 0x131, "i"}, {0x132, 0x133, "ij"}, {0x134, 0x135, "j"}, {0x136, 0x138, "k"},
      {0x139, 0x142, "l"}, {0x143, 0x14B, "n"}, {0x14C, 0x151, "o"}, {0x152, 0x153, "oe"}, {0x154, 0x159, "r"},
      {0x15A, 0x161, "s"}, {0x162, 0x167, "t"}, {0x168, 0x173, "u"}, {0x174, 0x175, "w"}, {0x176, 0x178, "y"},
      {0x179, 0x17E, "z"}, {0x17F, 0x17F, "s"}};
  static constexpr const char* kAscii = "abcdefghijklmnopqrstuvwxyz";
  if (c >= 'A' && c <= 'Z') return std::string_view(kAscii + (c - 'A'), 1);
  if (c < 0x80) {
    static constexpr const char kPrintable[] =
        " !\"#$%&'()*+,-./0123456789:;<=>?@ABCDEFGHIJKLMNOPQRSTUVWXYZ[\\]^_`abcdefghijklmnopqrstuvwxyz{|}~";
    if (c >= 0x20 && c < 0x7F) return std::string_view(kPrintable + (c - 0x20), 1);
    return {};
  }
  if (c == 0x2019 || c == 0x2018 || c == 0x02BC || c == 0x00B4) return "'";
  if (c >= 0xC0 && c <= 0xFF) return kLatin1[c - 0xC0];
  for (const auto& r : kExtA)
    if (c >= r.lo && c <= r.hi) return r.ascii;
  return {};
}

inline bool is_letter(char c) { return c >= 'a' && c <= 'z'; }
inline bool is_digit(char c) { return c >= '0' && c <= '9'; }

inline std::string fold(std::u32string_view s) {
  std::string out;
  for (char32_t c : s) out += fold_char(c);
  return out;
}

// Removes every `@!` / `@g` code from `s`, collecting them into `tags`.
inline std::string detach_tags(std::string_view s, TagSet& tags) {
  std::string out;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '@' && i + 1 < s.size()) {
      if (auto tag = tag_from_code(s.substr(i, 2))) {
        tags.insert(*tag);
        ++i;
        continue;
      }
    }
    out += s[i];
  }
  return out;
}

// Sentinel for a decimal point between two digits.
inline constexpr char kDecimalPoint = '\x01';

// Turns one folded, bracket-free token body into zero or more output words.
inline std::vector<std::string> normalize_body(std::string_view body, const NormalizationProfile& p) {
  // Keep letters, digits, apostrophes and decimal points; everything else
  // (punctuation, hyphens, symbols) is deleted, which joins hyphenated words.
  std::string kept;
  for (std::size_t i = 0; i < body.size(); ++i) {
    char c = body[i];
    if (is_letter(c) || is_digit(c) || c == '\'') {
      kept += c;
    } else if (c == '.' && !kept.empty() && is_digit(kept.back()) && i + 1 < body.size() && is_digit(body[i + 1])) {
      kept += kDecimalPoint;
    }
  }
  // An apostrophe survives only between two letters (contractions).
  std::string word;
  for (std::size_t i = 0; i < kept.size(); ++i) {
    char c = kept[i];
    if (c == '\'') {
      bool inside = p.retain_contractions && !word.empty() && is_letter(word.back()) && i + 1 < kept.size() &&
                    is_letter(kept[i + 1]);
      if (inside) word += c;
      continue;
    }
    word += c;
  }
  // Split into letter/apostrophe runs and numbers; numbers become words or stay digits.
  std::vector<std::string> out;
  std::string pending;
  auto flush = [&] {
    if (!pending.empty()) out.push_back(std::move(pending));
    pending.clear();
  };
  for (std::size_t i = 0; i < word.size();) {
    if (!is_digit(word[i])) {
      if (word[i] == kDecimalPoint) {
        ++i;
        continue;
      }
      pending += word[i++];
      continue;
    }
    std::size_t j = i;
    while (j < word.size() && is_digit(word[j])) ++j;
    std::string int_part = word.substr(i, j - i);
    std::string frac_part;
    if (j + 1 < word.size() && word[j] == kDecimalPoint && is_digit(word[j + 1])) {
      std::size_t k = j + 1;
      while (k < word.size() && is_digit(word[k])) ++k;
      frac_part = word.substr(j + 1, k - j - 1);
      j = k;
    }
    if (p.expand_numbers) {
      flush();
      out.push_back(integer_words(int_part, false));
      if (!frac_part.empty()) {
        out.push_back("point");
        out.push_back(digits_to_words(frac_part));
      }
    } else if (!frac_part.empty()) {
      flush();
      out.push_back(int_part);
      out.push_back("point");
      out.push_back(frac_part);
    } else {
      pending += int_part;
    }
    i = j;
  }
  flush();
  return out;
}

}  // namespace detail

/// Removes every `@!` / `@g` code from text.
inline std::string strip_tags(std::string_view text) {
  TagSet ignored;
  return detail::detach_tags(text, ignored);
}

/// Lowercases, drops bracketed spans and punctuation, joins hyphenated words,
/// keeps contractions (optionally), and keeps or drops annotation suffixes.
/// Annotated words are handled atomically: the suffix is detached before the
/// rules run and re-attached to the last word the token produced.
inline std::string normalize(std::string_view text, const NormalizationProfile& profile) {
  std::u32string chars = utf8::decode(text);
  std::string out;
  int depth = 0;
  std::size_t i = 0;
  while (i < chars.size()) {
    while (i < chars.size() && utf8::is_space(chars[i])) ++i;
    std::size_t j = i;
    while (j < chars.size() && !utf8::is_space(chars[j])) ++j;
    if (i == j) break;

    std::string raw = detail::fold(std::u32string_view(chars).substr(i, j - i));
    i = j;
    TagSet tags;
    raw = detail::detach_tags(raw, tags);

    std::string body;
    for (char c : raw) {
      if (c == '(' || c == '[') {
        ++depth;
      } else if (c == ')' || c == ']') {
        if (depth > 0) --depth;
      } else if (depth == 0) {
        body += c;
      }
    }

    auto words = detail::normalize_body(body, profile);
    for (std::size_t w = 0; w < words.size(); ++w) {
      if (!out.empty()) out += ' ';
      out += words[w];
      if (profile.retain_annotations && w + 1 == words.size()) out += tags.suffix();
    }
  }
  return out;
}

/// Cleanup for fine-tuning transcripts: drops annotations and conventions,
/// lowercases, removes bracketed text, re-attaches split apostrophes, removes
/// digit-group commas and non-decimal periods, and spells out numbers.
/// Throws Error naming the token when a number exceeds kMaxNumberWords.
inline std::string preprocess_for_training(std::string_view text) {
  std::string s = detail::fold(utf8::decode(strip_tags(text)));

  std::string no_brackets;
  int depth = 0;
  for (char c : s) {
    if (c == '(' || c == '[') {
      ++depth;
    } else if (c == ')' || c == ']') {
      if (depth > 0) --depth;
    } else if (depth == 0) {
      no_brackets += c;
    }
  }

  // Characters kept at this stage: letters, digits, apostrophes, periods, commas, space.
  std::string cleaned;
  for (std::size_t k = 0; k < no_brackets.size(); ++k) {
    char c = no_brackets[k];
    if (detail::is_letter(c) || detail::is_digit(c) || c == '\'') {
      cleaned += c;
    } else if (c == ',') {
      bool between_digits = !cleaned.empty() && detail::is_digit(cleaned.back()) && k + 1 < no_brackets.size() &&
                            detail::is_digit(no_brackets[k + 1]);
      if (!between_digits) cleaned += ' ';
    } else if (c == '.') {
      bool before_digit = k + 1 < no_brackets.size() && detail::is_digit(no_brackets[k + 1]);
      cleaned += before_digit ? '.' : ' ';
    } else if (c == '-') {
      // hyphenated words are joined; a free-standing "--" disappears
      continue;
    } else {
      cleaned += ' ';
    }
  }

  std::vector<std::string> tokens;
  {
    std::string cur;
    for (char c : cleaned) {
      if (c == ' ') {
        if (!cur.empty()) tokens.push_back(std::move(cur));
        cur.clear();
      } else {
        cur += c;
      }
    }
    if (!cur.empty()) tokens.push_back(std::move(cur));
  }
  // "it 's" -> "it's"
  std::vector<std::string> joined;
  for (auto& t : tokens) {
    if (t.front() == '\'' && !joined.empty())
      joined.back() += t;
    else
      joined.push_back(std::move(t));
  }

  std::string out;
  auto emit = [&](const std::string& w) {
    if (w.empty()) return;
    if (!out.empty()) out += ' ';
    out += w;
  };
  for (auto& raw_tok : joined) {
    // quotes and dangling apostrophes go; contractions stay
    std::string tok;
    for (std::size_t k = 0; k < raw_tok.size(); ++k) {
      if (raw_tok[k] == '\'' && !(k > 0 && detail::is_letter(raw_tok[k - 1]) && k + 1 < raw_tok.size() &&
                                  detail::is_letter(raw_tok[k + 1])))
        continue;
      tok += raw_tok[k];
    }
    std::string pending;
    for (std::size_t k = 0; k < tok.size();) {
      char c = tok[k];
      if (!detail::is_digit(c) && c != '.') {
        pending += c;
        ++k;
        continue;
      }
      if (c == '.' && !(k + 1 < tok.size() && detail::is_digit(tok[k + 1]))) {
        ++k;
        continue;
      }
      std::size_t e = k;
      while (e < tok.size() && detail::is_digit(tok[e])) ++e;
      std::string int_part = tok.substr(k, e - k);
      std::string frac;
      if (e + 1 < tok.size() && tok[e] == '.' && detail::is_digit(tok[e + 1])) {
        std::size_t f = e + 1;
        while (f < tok.size() && detail::is_digit(tok[f])) ++f;
        frac = tok.substr(e + 1, f - e - 1);
        e = f;
      }
      emit(pending);
      pending.clear();
      try {
        if (!int_part.empty()) emit(detail::integer_words(int_part, true));
      } catch (const Error&) {
        throw Error("cannot convert number '" + tok + "' to words: exceeds " + std::to_string(kMaxNumberWords));
      }
      if (!frac.empty()) {
        emit("point");
        emit(detail::digits_to_words(frac));
      }
      k = e;
    }
    emit(pending);
  }
  return out;
}

}  // namespace wepr
