#include "generators.hpp"
#include "wepr/corpus_ops.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <set>

using namespace wepr;

namespace {

std::vector<AnnotatedToken> concat_tokens(const std::vector<Utterance>& us) {
  std::vector<AnnotatedToken> out;
  for (const auto& u : us) out.insert(out.end(), u.tokens.begin(), u.tokens.end());
  return out;
}

std::vector<AnnotatedToken> stream_tokens(const Recording& r) {
  std::vector<AnnotatedToken> out;
  for (const auto& w : r.words) out.push_back(w.token);
  return out;
}

Utterance timed(std::string id, std::string cls, std::int64_t duration_ms, bool adult = false) {
  Utterance u;
  u.utterance_id = std::move(id);
  u.recording_id = "r";
  u.speaker_id = u.utterance_id + "_spk";
  u.class_id = std::move(cls);
  u.speaker_is_adult = adult;
  u.tokens.push_back({"w", 0, duration_ms, {}, false});
  return u;
}

}  // namespace

TEST(Segment, FixtureRecording) {
  std::ifstream in(std::string(WEPR_FIXTURE_DIR) + "/sample_recordings.jsonl");
  auto recs = parse_recordings(in);
  ASSERT_EQ(recs.size(), 1u);
  auto us = segment(recs[0]);
  // teacher | k1 (pause 2500 ms splits) | k1 | k2
  ASSERT_EQ(us.size(), 4u);
  EXPECT_EQ(us[0].speaker_id, "teacher");
  EXPECT_TRUE(us[0].speaker_is_adult);
  EXPECT_EQ(us[1].utterance_id, "rec1_0001");
  EXPECT_EQ(us[1].tokens.size(), 5u);
  EXPECT_TRUE(us[1].tokens[1].disfluency_repeat);
  EXPECT_EQ(us[2].tokens[0].surface, "ja");
  EXPECT_EQ(us[3].speaker_id, "k2");
  EXPECT_EQ(us[1].grade, Grade::G4_5);
}

TEST(Segment, PartitionOnRandomRecordings) {
  gen::Rng rng(51);
  for (int trial = 0; trial < 1000; ++trial) {
    auto rec = gen::recording(rng, "r" + std::to_string(trial));
    auto us = segment(rec);
    ASSERT_EQ(concat_tokens(us), stream_tokens(rec));
    for (const auto& u : us) {
      ASSERT_FALSE(u.tokens.empty());
      for (std::size_t i = 1; i < u.tokens.size(); ++i)
        ASSERT_LE(u.tokens[i].start_ms - u.tokens[i - 1].end_ms, kDefaultPauseSplitMs);
    }
    auto f = filter_utterances(us);
    for (const auto& u : f.kept) {
      ASSERT_GE(u.duration_ms(), kDefaultMinDurationMs);
      ASSERT_FALSE(u.speaker_is_adult);
    }
    ASSERT_EQ(f.kept.size() + f.removed.size(), us.size());
    // kept is a subsequence of the input, in order
    std::size_t k = 0;
    for (const auto& u : us)
      if (k < f.kept.size() && f.kept[k].utterance_id == u.utterance_id) ++k;
    ASSERT_EQ(k, f.kept.size());
    for (const auto& c : f.kept) {
      auto chunks = chunk_for_training(c);
      std::vector<Utterance> parts;
      for (const auto& ch : chunks) {
        if (!ch.oversized) ASSERT_LE(ch.utterance.duration_ms(), kDefaultMaxChunkMs);
        else ASSERT_EQ(ch.utterance.tokens.size(), 1u);
        parts.push_back(ch.utterance);
      }
      ASSERT_EQ(concat_tokens(parts), c.tokens);
    }
  }
}

TEST(Segment, DecreasingStartRejected) {
  Recording r;
  r.recording_id = "r";
  r.words.push_back({{"a", 500, 600, {}, false}, "k"});
  r.words.push_back({{"b", 100, 200, {}, false}, "k"});
  EXPECT_THROW(segment(r), StructuralError);
}

TEST(Filter, ThresholdAndReasons) {
  std::vector<Utterance> us = {timed("a", "c", 499), timed("b", "c", 500), timed("c", "c", 200, true),
                               timed("d", "c", 5000, true)};
  auto f = filter_utterances(us);
  ASSERT_EQ(f.kept.size(), 1u);
  EXPECT_EQ(f.kept[0].utterance_id, "b");
  EXPECT_EQ(f.removed_count(RemovalReason::TooShort), 1u);
  EXPECT_EQ(f.removed_count(RemovalReason::Adult), 2u);
}

TEST(Chunk, GreedyPackingAndOversize) {
  Utterance u = timed("u", "c", 100);
  u.tokens = {{"a", 0, 5000, {}, false},
              {"b", 5000, 12000, {}, false},
              {"c", 12000, 12500, {}, false},
              {"d", 13000, 30000, {}, false},
              {"e", 30000, 30100, {}, false}};
  auto chunks = chunk_for_training(u);
  ASSERT_EQ(chunks.size(), 4u);
  EXPECT_EQ(chunks[0].utterance.tokens.size(), 2u);
  EXPECT_EQ(chunks[0].utterance.utterance_id, "u-c00");
  EXPECT_EQ(chunks[1].utterance.tokens.size(), 1u);
  EXPECT_TRUE(chunks[2].oversized);
  EXPECT_FALSE(chunks[3].oversized);
}

TEST(Folds, PartitionAndLptBound) {
  gen::Rng rng(52);
  for (int trial = 0; trial < 20; ++trial) {
    auto c = gen::corpus(rng, 50);
    auto m = make_folds(c, 5);
    std::map<std::string, std::int64_t> class_dur;
    for (const auto& u : c.utterances()) class_dur[u.class_id] += u.duration_ms();
    ASSERT_EQ(m.assignments.size(), class_dur.size());
    std::int64_t largest = 0, total = 0;
    for (const auto& [cls, d] : class_dur) {
      largest = std::max(largest, d);
      total += d;
      ASSERT_GE(m.fold_of_class(cls), 0);
      ASSERT_LT(m.fold_of_class(cls), 5);
    }
    std::int64_t fold_total = 0;
    std::size_t utts = 0;
    for (const auto& f : m.per_fold) {
      fold_total += f.duration_ms;
      utts += f.utterances;
    }
    ASSERT_EQ(fold_total, total);
    ASSERT_EQ(utts, c.size());
    std::map<std::string, std::set<int>> speaker_folds;
    for (const auto& u : c.utterances()) speaker_folds[u.speaker_id].insert(m.fold_of_class(u.class_id));
    for (const auto& [spk, folds] : speaker_folds) ASSERT_EQ(folds.size(), 1u) << spk;
    ASSERT_LE(m.spread_ms(), largest);
  }
}

TEST(Folds, EqualClassesZeroSpread) {
  std::vector<Utterance> us;
  for (int i = 0; i < 5; ++i) us.push_back(timed("u" + std::to_string(i), "c" + std::to_string(i), 1000));
  auto m = make_folds(Corpus(us), 5);
  EXPECT_EQ(m.spread_ms(), 0);
  EXPECT_THROW(make_folds(Corpus(us), 6), Error);
}

TEST(Folds, JsonRoundTripAndValidation) {
  gen::Rng rng(53);
  auto c = gen::corpus(rng, 12);
  auto m = make_folds(c, 4);
  std::istringstream in(to_json(m).dump());
  EXPECT_EQ(parse_fold_manifest(in), m);
  EXPECT_THROW(fold_manifest_from_json(nlohmann::json::parse(R"({"num_folds":2,"assignments":{"a":2}})")), ParseError);
  EXPECT_THROW(m.fold_of_class("nope"), StructuralError);
}

TEST(Stats, CountsAndBreakdowns) {
  std::ifstream in(std::string(WEPR_FIXTURE_DIR) + "/sample_corpus.jsonl");
  auto c = parse_transcript(in);
  auto s = stats(c);
  EXPECT_EQ(s.utterances, c.size());
  EXPECT_EQ(s.classes, 6u);
  EXPECT_EQ(s.speakers, 12u);
  std::size_t hist = 0;
  for (auto n : s.duration_histogram) hist += n;
  EXPECT_EQ(hist, c.size());
  std::size_t by_grade = 0;
  for (const auto& [g, r] : s.per_grade) by_grade += r.utterances;
  EXPECT_EQ(by_grade, c.size());
  EXPECT_GT(s.annotated_tokens, 0u);
  EXPECT_LE(s.annotated_types, s.annotated_tokens);
  EXPECT_EQ(to_json(s)["utterances"], c.size());
}
