// wepr: transcript parsing, normalization, phonetic alignment and
// error-preservation scoring from the command line.
//
// Exit codes: 0 success, 1 data error, 2 usage error.

#include "wepr/wepr.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

using namespace wepr;
using ojson = nlohmann::ordered_json;

namespace {

class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string slurp(const std::string& path) {
  if (path == "-") {
    std::ostringstream ss;
    ss << std::cin.rdbuf();
    return ss.str();
  }
  return detail::read_file(path);
}

// Global flags; unset optionals fall back to the config file, then defaults.
struct Globals {
  std::string config_file;
  std::optional<std::string> out;
  std::optional<std::string> format;
  std::optional<unsigned> jobs;
  std::optional<std::string> tags;
};

struct ScoreFlags {
  std::optional<std::string> corpus;
  std::vector<std::string> hyps;
  std::optional<std::string> folds;
  std::optional<std::size_t> top;
  std::optional<std::string> gap, min_sub;
  bool no_contractions = false;
  bool expand_numbers = false;
  std::string mode = "incorrect";
};

RunConfig effective_config(const Globals& g, const ScoreFlags* s) {
  RunConfig c;
  if (!g.config_file.empty()) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(detail::read_file(g.config_file));
    } catch (const nlohmann::json::exception& e) {
      throw ParseError("config file: " + std::string(e.what()));
    }
    c.apply_json(j);
  }
  if (g.out) c.out_dir = *g.out;
  if (g.format) c.format = parse_format(*g.format);
  if (g.jobs) c.jobs = std::max(1u, *g.jobs);
  if (g.tags) c.tags = TagSet::parse_list(*g.tags);
  if (s) {
    if (s->corpus) c.corpus_path = *s->corpus;
    if (!s->hyps.empty()) c.hypothesis_paths = s->hyps;
    if (s->folds) c.folds_path = *s->folds;
    if (s->top) c.top_k = *s->top;
    if (s->gap) c.costs.gap = parse_rational(*s->gap);
    if (s->min_sub) c.costs.min_substitution = parse_rational(*s->min_sub);
    if (s->no_contractions) c.profile.retain_contractions = false;
    if (s->expand_numbers) c.profile.expand_numbers = true;
  }
  if (c.tags.empty()) throw UsageError("annotation set is empty");
  return c;
}

void dump_config(const RunConfig& c) {
  std::cerr << "# effective config (hash " << config_hash(c) << "): " << c.to_json().dump() << "\n";
}

// Writes a single artifact to --out/<name>, or to stdout when no --out is set.
void emit(const RunConfig& c, const std::string& name, const std::string& content) {
  if (c.out_dir.empty())
    std::cout << content;
  else
    write_artifacts(c.out_dir, {{name, content}});
}

std::string corpus_records(const RunConfig& c, std::string_view artifact, const std::vector<Utterance>& us,
                           const std::map<std::string, bool>* oversized = nullptr) {
  std::string out = detail::jsonl_header(c, artifact);
  for (const auto& u : us) {
    auto j = to_json(u);
    if (oversized && oversized->at(u.utterance_id)) j["oversized"] = true;
    out += j.dump() + '\n';
  }
  return out;
}

void require_hypotheses(const RunConfig& c) {
  if (c.corpus_path.empty()) throw UsageError("no corpus file given (--corpus)");
  if (c.hypothesis_paths.empty()) throw UsageError("no hypothesis files given (--hyps)");
}

int report_error(const char* kind, const std::string& message, std::size_t line = 0) {
  ojson j;
  j["error"] = {{"type", kind}, {"message", message}};
  if (line) j["error"]["line"] = line;
  std::cerr << j.dump() << "\n";
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Error-preserving ASR evaluation toolkit"};
  app.set_version_flag("--version", std::string(kToolVersion));
  app.require_subcommand(1);
  app.fallthrough();

  Globals g;
  app.add_option("--config", g.config_file, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output directory");
  app.add_option("--format", g.format, "records | csv | text")->check(CLI::IsMember({"records", "csv", "text"}));
  app.add_option("--jobs", g.jobs, "Worker threads (default: available cores)")->check(CLI::PositiveNumber);
  app.add_option("--tags", g.tags, "Annotation set, e.g. error,german");

  // parse
  std::string parse_in = "-";
  auto* parse_cmd = app.add_subcommand("parse", "Validate a transcript file and print it in canonical form");
  parse_cmd->add_option("input", parse_in, "Transcript JSONL (- for stdin)");

  // normalize
  bool keep_tags = false, no_contractions = false, expand = false, training = false;
  std::vector<std::string> norm_text;
  auto* norm_cmd = app.add_subcommand("normalize", "Normalize text given as arguments or stdin lines");
  norm_cmd->add_flag("--keep-tags", keep_tags, "Keep @!/@g suffixes");
  norm_cmd->add_flag("--no-contractions", no_contractions, "Drop apostrophes in contractions");
  norm_cmd->add_flag("--expand-numbers", expand, "Spell out numbers");
  norm_cmd->add_flag("--training", training, "Fine-tuning cleanup instead of scoring normalization");
  norm_cmd->add_option("text", norm_text, "Text (default: read lines from stdin)");

  // segment
  std::string seg_in = "-";
  std::int64_t pause_ms = kDefaultPauseSplitMs, min_ms = kDefaultMinDurationMs;
  bool no_filter = false;
  auto* seg_cmd = app.add_subcommand("segment", "Split recordings into single-speaker utterances and filter them");
  seg_cmd->add_option("input", seg_in, "Recording JSONL (- for stdin)");
  seg_cmd->add_option("--pause-split-ms", pause_ms, "Split at silences longer than this")->check(CLI::NonNegativeNumber);
  seg_cmd->add_option("--min-duration-ms", min_ms, "Drop utterances shorter than this")->check(CLI::NonNegativeNumber);
  seg_cmd->add_flag("--no-filter", no_filter, "Keep short and adult utterances");

  // chunk
  std::string chunk_in = "-";
  std::int64_t max_ms = kDefaultMaxChunkMs;
  auto* chunk_cmd = app.add_subcommand("chunk", "Pack utterances into training chunks");
  chunk_cmd->add_option("input", chunk_in, "Transcript JSONL (- for stdin)");
  chunk_cmd->add_option("--max-ms", max_ms, "Maximum chunk duration")->check(CLI::PositiveNumber);

  // folds
  std::string folds_in = "-";
  int k = 5;
  auto* folds_cmd = app.add_subcommand("folds", "Assign classes to class-disjoint folds of similar duration");
  folds_cmd->add_option("input", folds_in, "Transcript JSONL (- for stdin)");
  folds_cmd->add_option("-k,--folds", k, "Number of folds")->check(CLI::PositiveNumber);

  // align, score, confusions share the scoring flags
  ScoreFlags sf;
  auto add_scoring = [&](CLI::App* cmd) {
    cmd->add_option("--corpus", sf.corpus, "Transcript JSONL");
    cmd->add_option("--hyps", sf.hyps, "Hypothesis JSONL files");
    cmd->add_option("--folds", sf.folds, "Fold manifest JSON");
    cmd->add_option("--gap-cost", sf.gap, "Insertion/deletion cost (e.g. 4/5)");
    cmd->add_option("--min-sub-cost", sf.min_sub, "Substitution cost floor (e.g. 1/20)");
    cmd->add_flag("--no-contractions", sf.no_contractions, "Drop apostrophes in contractions");
    cmd->add_flag("--expand-numbers", sf.expand_numbers, "Spell out numbers before scoring");
  };
  auto* align_cmd = app.add_subcommand("align", "Print phonetic alignments per system and utterance");
  add_scoring(align_cmd);
  auto* score_cmd = app.add_subcommand("score", "Score systems and write all run artifacts");
  add_scoring(score_cmd);
  score_cmd->add_option("--top", sf.top, "Rows per confusion table");
  auto* conf_cmd = app.add_subcommand("confusions", "Print a confusion or preservation table");
  add_scoring(conf_cmd);
  conf_cmd->add_option("--mode", sf.mode, "incorrect | preserved")->check(CLI::IsMember({"incorrect", "preserved"}));
  conf_cmd->add_option("--top", sf.top, "Rows in the table");

  // stats
  std::string stats_in = "-";
  auto* stats_cmd = app.add_subcommand("stats", "Corpus statistics");
  stats_cmd->add_option("input", stats_in, "Transcript JSONL (- for stdin)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*norm_cmd) {
      NormalizationProfile p{!no_contractions, keep_tags, expand};
      auto run = [&](const std::string& line) {
        std::cout << (training ? preprocess_for_training(line) : normalize(line, p)) << "\n";
      };
      if (!norm_text.empty()) {
        std::string joined;
        for (const auto& t : norm_text) joined += (joined.empty() ? "" : " ") + t;
        run(joined);
      } else {
        std::string line;
        while (std::getline(std::cin, line)) run(line);
      }
      return 0;
    }

    bool scoring = *align_cmd || *score_cmd || *conf_cmd;
    RunConfig config = effective_config(g, scoring ? &sf : nullptr);

    if (*parse_cmd) {
      auto corpus = parse_transcript(slurp(parse_in));
      emit(config, "corpus.jsonl", corpus_records(config, "corpus", corpus.utterances()));
      std::cerr << corpus.size() << " utterances, " << corpus.by_speaker().size() << " speakers, "
                << corpus.by_class().size() << " classes\n";
    } else if (*seg_cmd) {
      std::vector<Utterance> all;
      for (const auto& rec : parse_recordings(slurp(seg_in))) {
        auto us = segment(rec, pause_ms);
        all.insert(all.end(), us.begin(), us.end());
      }
      std::size_t segmented = all.size();
      FilterResult f;
      if (no_filter)
        f.kept = std::move(all);
      else
        f = filter_utterances(std::move(all), min_ms);
      Corpus check(f.kept);  // validates speaker/class consistency across recordings
      emit(config, "utterances.jsonl", corpus_records(config, "utterances", f.kept));
      std::cerr << segmented << " segments, " << f.kept.size() << " kept, " << f.removed_count(RemovalReason::TooShort)
                << " too short, " << f.removed_count(RemovalReason::Adult) << " adult\n";
      for (const auto& r : f.removed)
        std::cerr << "removed " << r.utterance_id << " " << removal_reason_name(r.reason) << "\n";
    } else if (*chunk_cmd) {
      auto corpus = parse_transcript(slurp(chunk_in));
      std::vector<Utterance> out;
      std::map<std::string, bool> oversized;
      for (const auto& u : corpus.utterances())
        for (auto& ch : chunk_for_training(u, max_ms)) {
          oversized[ch.utterance.utterance_id] = ch.oversized;
          out.push_back(std::move(ch.utterance));
        }
      emit(config, "chunks.jsonl", corpus_records(config, "chunks", out, &oversized));
    } else if (*folds_cmd) {
      auto m = make_folds(parse_transcript(slurp(folds_in)), k);
      ojson j;
      j["header"] = {{"tool", "wepr"}, {"version", kToolVersion}, {"artifact", "folds"},
                     {"config_hash", config_hash(config)}};
      auto body = to_json(m);
      for (const auto& [key, v] : body.items()) j[key] = v;
      emit(config, "folds.json", j.dump(2) + "\n");
      std::cerr << "fold spread " << m.spread_ms() << " ms\n";
    } else if (*stats_cmd) {
      auto s = stats(parse_transcript(slurp(stats_in)));
      auto j = to_json(s);
      std::string content;
      if (config.format == OutputFormat::Text) {
        content = detail::text_header(config);
        for (const auto& [key, v] : j.items())
          if (!v.is_structured()) content += key + ": " + v.dump() + "\n";
        for (const auto& [grade, r] : j["per_grade"].items())
          content += "grade " + grade + ": " + r.dump() + "\n";
        for (const auto& [area, r] : j["per_area"].items()) content += "area " + area + ": " + r.dump() + "\n";
        content += "duration_histogram_s: " + j["duration_histogram_s"].dump() + "\n";
      } else if (config.format == OutputFormat::Csv) {
        content = detail::text_header(config) + "grade,utterances,duration_ms,tokens\n";
        for (const auto& [grade, r] : j["per_grade"].items())
          content += grade + "," + r["utterances"].dump() + "," + r["duration_ms"].dump() + "," + r["tokens"].dump() +
                     "\n";
      } else {
        ojson out;
        out["header"] = {{"tool", "wepr"}, {"version", kToolVersion}, {"artifact", "stats"},
                         {"config_hash", config_hash(config)}};
        for (const auto& [key, v] : j.items()) out[key] = v;
        content = out.dump() + "\n";
      }
      emit(config, std::string("stats") + std::string(format_extension(config.format)), content);
    } else if (*align_cmd) {
      require_hypotheses(config);
      dump_config(config);
      auto in = load_inputs(config);
      std::string out = detail::jsonl_header(config, "alignments");
      for (const auto& system : in.hypotheses.systems())
        for (const auto& e : evaluate_system(in.corpus, in.hypotheses, system, in.folds ? &*in.folds : nullptr, config))
          out += alignment_record(e, system, config.tags).dump() + "\n";
      emit(config, "alignments.jsonl", out);
    } else if (*score_cmd) {
      require_hypotheses(config);
      dump_config(config);
      auto result = run_pipeline(config);
      std::cout << result.artifacts.at("score_table.txt");
    } else if (*conf_cmd) {
      require_hypotheses(config);
      dump_config(config);
      auto result = score_run(config, load_inputs(config));
      const auto& table = sf.mode == "preserved" ? result.preserved : result.incorrect;
      emit(config, "confusions_" + sf.mode + std::string(format_extension(config.format)),
           render_confusions(table, config));
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    return report_error("parse", e.what(), e.line());
  } catch (const StructuralError& e) {
    return report_error("structural", e.what());
  } catch (const Error& e) {
    return report_error("data", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return report_error("io", e.what());
  } catch (const nlohmann::json::exception& e) {
    return report_error("parse", e.what());
  }
  return 0;
}
