#pragma once

// End-to-end scoring run: normalize -> align -> score -> report, with a run
// manifest and atomic artifact output.

#include "wepr/common.hpp"
#include "wepr/corpus_ops.hpp"
#include "wepr/metrics.hpp"
#include "wepr/normalizer.hpp"
#include "wepr/phonetic_align.hpp"
#include "wepr/reporting.hpp"
#include "wepr/transcript.hpp"

#include <json.hpp>
#include <openssl/evp.h>

#include <algorithm>
#include <exception>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <unistd.h>
#include <vector>

namespace wepr {

enum class OutputFormat { Records, Csv, Text };

inline std::string_view format_name(OutputFormat f) {
  switch (f) {
    case OutputFormat::Records: return "records";
    case OutputFormat::Csv: return "csv";
    case OutputFormat::Text: return "text";
  }
  return "?";
}

inline OutputFormat parse_format(std::string_view s) {
  if (s == "records" || s == "jsonl" || s == "json") return OutputFormat::Records;
  if (s == "csv") return OutputFormat::Csv;
  if (s == "text" || s == "text-table" || s == "table") return OutputFormat::Text;
  throw ParseError("unknown output format '" + std::string(s) + "'");
}

inline std::string_view format_extension(OutputFormat f) {
  switch (f) {
    case OutputFormat::Records: return ".jsonl";
    case OutputFormat::Csv: return ".csv";
    case OutputFormat::Text: return ".txt";
  }
  return "";
}

inline unsigned default_jobs() { return std::max(1u, std::thread::hardware_concurrency()); }

struct RunConfig {
  std::string corpus_path;
  std::vector<std::string> hypothesis_paths;
  std::string folds_path;  // empty: the whole corpus is one fold
  TagSet tags = TagSet::all();
  NormalizationProfile profile = NormalizationProfile::plain();
  AlignCosts costs;
  std::size_t top_k = 20;
  std::string out_dir;  // empty: nothing written
  OutputFormat format = OutputFormat::Text;
  unsigned jobs = default_jobs();

  /// Everything that can change output bytes. Paths, the output directory
  /// and the parallelism degree are deliberately absent.
  nlohmann::ordered_json scoring_constants() const {
    nlohmann::ordered_json j;
    j["tags"] = tags.names();
    j["retain_contractions"] = profile.retain_contractions;
    j["expand_numbers"] = profile.expand_numbers;
    j["gap_cost"] = to_exact_string(costs.gap);
    j["min_substitution_cost"] = to_exact_string(costs.min_substitution);
    j["phonetic_rules_version"] = kPhoneticRulesVersion;
    j["chrf_max_order"] = kChrfMaxOrder;
    j["chrf_beta"] = kChrfBeta;
    j["std"] = "population";
    j["top_k"] = top_k;
    j["format"] = std::string(format_name(format));
    return j;
  }

  nlohmann::ordered_json to_json() const {
    nlohmann::ordered_json j = scoring_constants();
    j["corpus"] = corpus_path;
    j["hypotheses"] = hypothesis_paths;
    j["folds"] = folds_path;
    j["out"] = out_dir;
    j["jobs"] = jobs;
    return j;
  }

  /// Applies keys present in a JSON config file; unknown keys are rejected.
  void apply_json(const nlohmann::json& j) {
    for (const auto& [key, v] : j.items()) {
      if (key == "corpus") corpus_path = v.get<std::string>();
      else if (key == "hypotheses") hypothesis_paths = v.get<std::vector<std::string>>();
      else if (key == "folds") folds_path = v.get<std::string>();
      else if (key == "tags") tags = TagSet::parse_list(v.get<std::string>());
      else if (key == "retain_contractions") profile.retain_contractions = v.get<bool>();
      else if (key == "expand_numbers") profile.expand_numbers = v.get<bool>();
      else if (key == "gap_cost") costs.gap = v.is_string() ? parse_rational(v.get<std::string>()) : parse_rational(v.dump());
      else if (key == "min_substitution_cost")
        costs.min_substitution = v.is_string() ? parse_rational(v.get<std::string>()) : parse_rational(v.dump());
      else if (key == "top_k") top_k = v.get<std::size_t>();
      else if (key == "out") out_dir = v.get<std::string>();
      else if (key == "format") format = parse_format(v.get<std::string>());
      else if (key == "jobs") jobs = std::max(1u, v.get<unsigned>());
      else throw ParseError("unknown config key '" + key + "'");
    }
  }
};

// ---------------------------------------------------------------------------
// Hashing

inline std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

inline std::string config_hash(const RunConfig& c) { return sha256_hex(c.scoring_constants().dump()).substr(0, 16); }

// ---------------------------------------------------------------------------
// Parallel map

/// Calls fn(i) for i in [0, n) on up to `jobs` threads. The first exception
/// (by index) is rethrown after all threads finish.
template <class Fn>
void parallel_for(std::size_t n, unsigned jobs, Fn&& fn) {
  jobs = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(std::max<std::size_t>(n, 1))));
  if (jobs == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(n);
  std::vector<std::thread> workers;
  for (unsigned t = 0; t < jobs; ++t) {
    workers.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += jobs) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Evaluation

struct UtteranceEval {
  std::string utterance_id;
  int fold = 0;
  std::vector<std::string> nr1, nr2, np;
  Alignment alignment;
  EditCounts words, chars;
  ChrfStats chrf;
  WeprCounts wepr;
};

/// Normalizes reference (with and without tags) and hypothesis, aligns them
/// phonetically and collects every per-utterance count.
inline UtteranceEval evaluate_utterance(const Utterance& u, std::string_view hypothesis, const RunConfig& config) {
  UtteranceEval e;
  e.utterance_id = u.utterance_id;
  NormalizationProfile tagged = config.profile;
  tagged.retain_annotations = true;
  NormalizationProfile plain = config.profile;
  plain.retain_annotations = false;

  e.nr1 = split_words(normalize(render_reference(u, true), tagged));
  e.nr2.reserve(e.nr1.size());
  for (const auto& w : e.nr1) e.nr2.push_back(strip_tags(w));
  e.np = split_words(normalize(hypothesis, plain));

  e.alignment = align(e.nr2, e.np, config.costs);
  e.wepr = wepr_counts(e.nr1, e.alignment, config.tags);
  e.words = word_edit_counts(e.nr2, e.np);
  std::string ref_text = join_words(e.nr2), hyp_text = join_words(e.np);
  e.chars = char_edit_counts(ref_text, hyp_text);
  e.chrf = chrf_stats(ref_text, hyp_text);
  return e;
}

/// Evaluations for one system in corpus order. Throws StructuralError when a
/// hypothesis is missing.
inline std::vector<UtteranceEval> evaluate_system(const Corpus& corpus, const HypothesisSet& hyps,
                                                  const std::string& system, const FoldManifest* folds,
                                                  const RunConfig& config) {
  const auto& utts = corpus.utterances();
  std::vector<const std::string*> texts(utts.size());
  for (std::size_t i = 0; i < utts.size(); ++i) {
    texts[i] = hyps.find(system, utts[i].utterance_id);
    if (!texts[i])
      throw StructuralError("system '" + system + "' has no hypothesis for utterance '" + utts[i].utterance_id + "'");
  }
  std::vector<UtteranceEval> out(utts.size());
  parallel_for(utts.size(), config.jobs, [&](std::size_t i) {
    out[i] = evaluate_utterance(utts[i], *texts[i], config);
    out[i].fold = folds ? folds->fold_of_class(utts[i].class_id) : 0;
  });
  return out;
}

/// Pooled per-fold scores: WER/CER as total edits over total reference
/// length, chrF over the fold's n-gram totals, WEPR as sum(S+D)/sum(N).
inline std::vector<FoldScores> fold_scores(const std::vector<UtteranceEval>& evals, int num_folds) {
  struct Acc {
    EditCounts words, chars;
    ChrfStats chrf;
    WeprCounts wepr;
    std::size_t utterances = 0;
  };
  std::vector<Acc> acc(static_cast<std::size_t>(num_folds));
  for (const auto& e : evals) {
    auto& a = acc[static_cast<std::size_t>(e.fold)];
    a.words += e.words;
    a.chars += e.chars;
    a.chrf += e.chrf;
    a.wepr += e.wepr;
    ++a.utterances;
  }
  std::vector<FoldScores> out;
  for (int f = 0; f < num_folds; ++f) {
    const auto& a = acc[static_cast<std::size_t>(f)];
    FoldScores s;
    s.fold = f;
    s.values[Metric::Wer] = a.words.rate();
    s.values[Metric::Cer] = a.chars.rate();
    s.values[Metric::Chrf] = a.utterances ? MaybeRational(chrf_score(a.chrf)) : std::nullopt;
    s.values[Metric::Wepr] = a.wepr.rate();
    out.push_back(std::move(s));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Artifacts

namespace detail {

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline nlohmann::ordered_json maybe_number(const MaybeRational& v) {
  return v ? nlohmann::ordered_json(to_double(*v)) : nlohmann::ordered_json(nullptr);
}

inline std::string text_header(const RunConfig& c) {
  return "# wepr " + std::string(kToolVersion) + " config_hash=" + config_hash(c) + " " +
         c.scoring_constants().dump() + "\n";
}

inline std::string jsonl_header(const RunConfig& c, std::string_view artifact) {
  nlohmann::ordered_json h;
  h["header"] = {{"tool", "wepr"},
                 {"version", kToolVersion},
                 {"artifact", artifact},
                 {"config_hash", config_hash(c)},
                 {"config", c.scoring_constants()}};
  return h.dump() + "\n";
}

}  // namespace detail

inline nlohmann::ordered_json to_json(const ScoreReport& r, const std::vector<UtteranceEval>* evals = nullptr) {
  nlohmann::ordered_json j;
  j["system"] = r.system;
  j["folds"] = nlohmann::ordered_json::array();
  for (const auto& f : r.folds) {
    nlohmann::ordered_json fj;
    fj["fold"] = f.fold;
    for (auto m : kAllMetrics) fj[std::string(metric_name(m))] = detail::maybe_number(f.values.at(m));
    if (evals) {
      WeprCounts c;
      for (const auto& e : *evals)
        if (e.fold == f.fold) c += e.wepr;
      fj["wepr_counts"] = {{"S", c.substitutions}, {"D", c.deletions}, {"C", c.correct}, {"N", c.annotated}};
    }
    j["folds"].push_back(fj);
  }
  nlohmann::ordered_json agg;
  for (auto m : kAllMetrics) {
    const auto& a = r.aggregate.at(m);
    agg[std::string(metric_name(m))] = {{"mean", detail::maybe_number(a.mean)},
                                        {"std", a.stddev ? nlohmann::ordered_json(*a.stddev) : nullptr},
                                        {"defined_folds", a.defined_folds},
                                        {"undefined_folds", a.undefined_folds}};
  }
  j["aggregate"] = agg;
  return j;
}

/// System | WER | CER | chrF | WEPR with "mean ± std" cells.
inline std::string render_score_table(const std::vector<ScoreReport>& reports, int decimals = 3) {
  std::vector<std::vector<std::string>> rows = {{"System", "WER", "CER", "chrF", "WEPR"}};
  for (const auto& r : reports) {
    std::vector<std::string> row = {r.system};
    for (auto m : kAllMetrics) {
      const auto& a = r.aggregate.at(m);
      if (!a.mean)
        row.push_back("undefined");
      else
        row.push_back(format_fixed(to_double(*a.mean), decimals) + " \xC2\xB1 " + format_fixed(*a.stddev, decimals));
    }
    rows.push_back(row);
  }
  // column widths in code points ("±" is two bytes)
  auto display_width = [](const std::string& s) {
    std::size_t n = 0;
    for (unsigned char c : s)
      if ((c & 0xC0) != 0x80) ++n;
    return n;
  };
  std::vector<std::size_t> width(rows[0].size(), 0);
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], display_width(row[c]));
  std::string out;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    std::string line;
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      if (c) line += " | ";
      line += rows[r][c] + std::string(width[c] - display_width(rows[r][c]), ' ');
    }
    line.erase(line.find_last_not_of(' ') + 1);
    out += line + '\n';
    if (r == 0) {
      std::string rule;
      for (std::size_t c = 0; c < width.size(); ++c) {
        if (c) rule += "-+-";
        rule += std::string(width[c], '-');
      }
      out += rule + '\n';
    }
  }
  return out;
}

inline nlohmann::ordered_json alignment_record(const UtteranceEval& e, const std::string& system, TagSet tags) {
  nlohmann::ordered_json j;
  j["utterance_id"] = e.utterance_id;
  j["system"] = system;
  j["total_cost"] = to_exact_string(e.alignment.total_cost);
  auto& steps = j["steps"] = nlohmann::ordered_json::array();
  for (const auto& s : e.alignment.steps) {
    nlohmann::ordered_json sj;
    sj["kind"] = std::string(step_kind_name(s.kind));
    sj["ref"] = s.ref_word ? nlohmann::ordered_json(*s.ref_word) : nullptr;
    sj["hyp"] = s.hyp_word ? nlohmann::ordered_json(*s.hyp_word) : nullptr;
    sj["cost"] = to_double(s.cost);
    if (s.ref_index) {
      auto [body, t] = split_tagged(e.nr1[*s.ref_index]);
      if (!(t & tags).empty()) sj["target"] = body + (t & tags).suffix();
    }
    steps.push_back(sj);
  }
  return j;
}

struct RunInputs {
  Corpus corpus;
  HypothesisSet hypotheses;
  std::optional<FoldManifest> folds;
  std::vector<std::pair<std::string, std::string>> hashes;  // path -> sha256
};

inline RunInputs load_inputs(const RunConfig& config) {
  RunInputs in;
  if (config.corpus_path.empty()) throw Error("no corpus file given");
  if (config.hypothesis_paths.empty()) throw Error("no hypothesis files given");
  auto corpus_text = detail::read_file(config.corpus_path);
  in.hashes.emplace_back(config.corpus_path, sha256_hex(corpus_text));
  in.corpus = parse_transcript(corpus_text);
  for (const auto& p : config.hypothesis_paths) {
    auto text = detail::read_file(p);
    in.hashes.emplace_back(p, sha256_hex(text));
    in.hypotheses.merge(parse_hypotheses(text));
  }
  if (!config.folds_path.empty()) {
    auto text = detail::read_file(config.folds_path);
    in.hashes.emplace_back(config.folds_path, sha256_hex(text));
    in.folds = fold_manifest_from_json([&] {
      try {
        return nlohmann::json::parse(text);
      } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("fold manifest: invalid JSON: ") + e.what());
      }
    }());
  }
  return in;
}

struct RunResult {
  std::vector<ScoreReport> reports;
  ConfusionTable incorrect, preserved;
  std::map<std::string, std::string> artifacts;  // file name -> contents
};

inline std::string render_confusions(const ConfusionTable& t, const RunConfig& c) {
  std::string name = "confusions_" + std::string(confusion_mode_name(t.mode));
  switch (c.format) {
    case OutputFormat::Records: return detail::jsonl_header(c, name) + render_records(t);
    case OutputFormat::Csv: return detail::text_header(c) + render_csv(t);
    case OutputFormat::Text: return detail::text_header(c) + render_text(t);
  }
  return {};
}

/// Scores every system in memory and renders all artifacts; writes nothing.
inline RunResult score_run(const RunConfig& config, const RunInputs& in) {
  RunResult result;
  auto systems = in.hypotheses.systems();
  if (systems.empty()) throw Error("hypothesis files contain no records");
  int num_folds = in.folds ? in.folds->num_folds : 1;
  const FoldManifest* folds = in.folds ? &*in.folds : nullptr;

  std::vector<std::string> ids;
  for (const auto& u : in.corpus.utterances()) ids.push_back(u.utterance_id);

  SystemAlignments alignments;
  std::string score_records = detail::jsonl_header(config, "score_report");
  std::string alignment_records = detail::jsonl_header(config, "alignments");
  for (const auto& system : systems) {
    auto evals = evaluate_system(in.corpus, in.hypotheses, system, folds, config);
    auto report = aggregate_folds(system, fold_scores(evals, num_folds));
    score_records += to_json(report, &evals).dump() + '\n';
    auto& aligned = alignments[system];
    for (const auto& e : evals) {
      alignment_records += alignment_record(e, system, config.tags).dump() + '\n';
      aligned.push_back({e.utterance_id, e.nr1, e.alignment});
    }
    result.reports.push_back(std::move(report));
  }
  result.incorrect = confusion_table(ids, alignments, config.tags, config.top_k, ConfusionMode::Incorrect);
  result.preserved = confusion_table(ids, alignments, config.tags, config.top_k, ConfusionMode::Preserved);

  std::string ext(format_extension(config.format));
  result.artifacts["score_report.jsonl"] = score_records;
  result.artifacts["score_table.txt"] = detail::text_header(config) + render_score_table(result.reports);
  result.artifacts["alignments.jsonl"] = alignment_records;
  result.artifacts["confusions_incorrect" + ext] = render_confusions(result.incorrect, config);
  result.artifacts["confusions_preserved" + ext] = render_confusions(result.preserved, config);

  nlohmann::ordered_json manifest;
  manifest["tool"] = "wepr";
  manifest["version"] = kToolVersion;
  manifest["config_hash"] = config_hash(config);
  manifest["config"] = config.scoring_constants();
  manifest["inputs"] = nlohmann::ordered_json::array();
  for (const auto& [path, hash] : in.hashes)
    manifest["inputs"].push_back({{"name", std::filesystem::path(path).filename().string()}, {"sha256", hash}});
  manifest["artifacts"] = nlohmann::ordered_json::array();
  for (const auto& [name, content] : result.artifacts)
    manifest["artifacts"].push_back({{"name", name}, {"sha256", sha256_hex(content)}});
  result.artifacts["run_manifest.json"] = manifest.dump(2) + "\n";
  return result;
}

/// Writes all files into `dir` via a staging directory; either every file
/// lands or none does.
inline void write_artifacts(const std::string& dir, const std::map<std::string, std::string>& artifacts) {
  namespace fs = std::filesystem;
  fs::path out(dir);
  fs::create_directories(out);
  fs::path staging = out / (".staging-" + std::to_string(::getpid()));
  fs::remove_all(staging);
  fs::create_directories(staging);
  try {
    for (const auto& [name, content] : artifacts) {
      std::ofstream f(staging / name, std::ios::binary);
      f << content;
      if (!f) throw Error("cannot write '" + (staging / name).string() + "'");
    }
    for (const auto& [name, _] : artifacts) fs::rename(staging / name, out / name);
  } catch (...) {
    std::error_code ec;
    fs::remove_all(staging, ec);
    throw;
  }
  fs::remove_all(staging);
}

/// Loads inputs, scores, and (when out_dir is set) writes the artifacts.
inline RunResult run_pipeline(const RunConfig& config) {
  auto inputs = load_inputs(config);
  auto result = score_run(config, inputs);
  if (!config.out_dir.empty()) write_artifacts(config.out_dir, result.artifacts);
  return result;
}

}  // namespace wepr
