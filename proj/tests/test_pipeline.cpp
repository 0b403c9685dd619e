#include "wepr/pipeline.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

using namespace wepr;
namespace fs = std::filesystem;

namespace {

std::string fixture(const std::string& name) { return std::string(WEPR_FIXTURE_DIR) + "/" + name; }

RunConfig sample_config(unsigned jobs) {
  RunConfig c;
  c.corpus_path = fixture("sample_corpus.jsonl");
  c.hypothesis_paths = {fixture("sample_hyps_a.jsonl"), fixture("sample_hyps_b.jsonl")};
  c.jobs = jobs;
  return c;
}

fs::path scratch_dir(const std::string& name) {
  auto p = fs::temp_directory_path() / ("wepr_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Pipeline, WorkedExampleFixture) {
  RunConfig c;
  c.corpus_path = fixture("worked_example_corpus.jsonl");
  c.hypothesis_paths = {fixture("worked_example_hyps.jsonl")};
  auto r = run_pipeline(c);
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_EQ(r.reports[0].system, "sys-w");
  EXPECT_EQ(*r.reports[0].aggregate.at(Metric::Wepr).mean, Rational(2, 3));
  EXPECT_NE(r.artifacts.at("score_table.txt").find("0.667"), std::string::npos);
  auto first = r.artifacts.at("alignments.jsonl");
  EXPECT_NE(first.find(R"("target":"you@!")"), std::string::npos);
}

TEST(Pipeline, EveryArtifactNamesConfigHash) {
  auto c = sample_config(1);
  auto r = score_run(c, load_inputs(c));
  auto hash = config_hash(c);
  for (const auto& [name, content] : r.artifacts) EXPECT_NE(content.find(hash), std::string::npos) << name;
  for (auto f : {OutputFormat::Csv, OutputFormat::Records}) {
    c.format = f;
    auto r2 = score_run(c, load_inputs(c));
    for (const auto& [name, content] : r2.artifacts)
      EXPECT_NE(content.find(config_hash(c)), std::string::npos) << name;
  }
}

TEST(Pipeline, DeterministicAcrossJobs) {
  auto a = run_pipeline(sample_config(1)).artifacts;
  auto b = run_pipeline(sample_config(8)).artifacts;
  EXPECT_EQ(a, b);
  EXPECT_EQ(config_hash(sample_config(1)), config_hash(sample_config(8)));
}

TEST(Pipeline, FoldsProduceOneScorePerFold) {
  auto c = sample_config(2);
  auto inputs = load_inputs(c);
  auto m = make_folds(inputs.corpus, 3);
  auto path = scratch_dir("folds");
  fs::create_directories(path);
  std::ofstream(path / "folds.json") << to_json(m).dump();
  c.folds_path = (path / "folds.json").string();
  auto r = run_pipeline(c);
  for (const auto& rep : r.reports) {
    EXPECT_EQ(rep.folds.size(), 3u);
    EXPECT_EQ(rep.aggregate.at(Metric::Wer).defined_folds, 3u);
    EXPECT_TRUE(rep.aggregate.at(Metric::Wer).stddev.has_value());
  }
  fs::remove_all(path);
}

TEST(Pipeline, WritesArtifactsAtomically) {
  auto c = sample_config(1);
  auto dir = scratch_dir("out");
  c.out_dir = dir.string();
  auto r = run_pipeline(c);
  for (const auto& [name, content] : r.artifacts) {
    std::ifstream in(dir / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    EXPECT_EQ(ss.str(), content) << name;
  }
  std::size_t files = 0;
  for (const auto& e : fs::directory_iterator(dir)) {
    EXPECT_EQ(e.path().filename().string().find(".staging"), std::string::npos);
    ++files;
  }
  EXPECT_EQ(files, r.artifacts.size());
  fs::remove_all(dir);

  // a failing run leaves nothing behind
  auto bad = sample_config(1);
  bad.hypothesis_paths = {fixture("worked_example_hyps.jsonl")};
  bad.out_dir = dir.string();
  EXPECT_THROW(run_pipeline(bad), StructuralError);
  EXPECT_FALSE(fs::exists(dir));
}

TEST(Pipeline, ManifestHashesInputs) {
  auto c = sample_config(1);
  auto r = run_pipeline(c);
  auto m = nlohmann::json::parse(r.artifacts.at("run_manifest.json"));
  EXPECT_EQ(m["inputs"].size(), 3u);
  EXPECT_EQ(m["inputs"][0]["sha256"], sha256_hex(detail::read_file(c.corpus_path)));
  EXPECT_EQ(m["version"], kToolVersion);
  EXPECT_EQ(m["artifacts"].size(), r.artifacts.size() - 1);
}

TEST(Pipeline, ConfigJson) {
  RunConfig c;
  c.apply_json(nlohmann::json::parse(R"({"gap_cost":"3/4","min_substitution_cost":0.1,"tags":"error","top_k":5})"));
  EXPECT_EQ(c.costs.gap, Rational(3, 4));
  EXPECT_EQ(c.costs.min_substitution, Rational(1, 10));
  EXPECT_EQ(c.tags, TagSet{AnnotationTag::Error});
  EXPECT_EQ(c.top_k, 5u);
  EXPECT_THROW(c.apply_json(nlohmann::json::parse(R"({"bogus":1})")), ParseError);
  RunConfig d;
  EXPECT_NE(config_hash(c), config_hash(d));
}

TEST(Pipeline, Sha256KnownVector) {
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Pipeline, ParallelForRethrowsFirstByIndex) {
  try {
    parallel_for(20, 4, [](std::size_t i) {
      if (i == 7 || i == 13) throw Error("fail " + std::to_string(i));
    });
    FAIL();
  } catch (const Error& e) {
    EXPECT_STREQ(e.what(), "fail 7");
  }
}
