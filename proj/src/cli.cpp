#include "blindeval/cli.hpp"

#include <fmt/format.h>
#include <pthread.h>
#include <signal.h>

#include <CLI11.hpp>
#include <atomic>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "blindeval/analysis.hpp"
#include "blindeval/corpus.hpp"
#include "blindeval/error.hpp"
#include "blindeval/interleaver.hpp"
#include "blindeval/service.hpp"
#include "blindeval/text.hpp"

namespace blindeval::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for conditions that are the operator's mistake rather than bad data.
struct UsageError : Error {
  using Error::Error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(fmt::format("cannot open '{}'", path.string()));
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << content;
  out.flush();
  if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
}

Timestamp modification_time(const fs::path& path) {
  const auto sys = std::chrono::file_clock::to_sys(fs::last_write_time(path));
  return std::chrono::time_point_cast<std::chrono::milliseconds>(sys);
}

metrics::EditThresholds parse_thresholds(const std::string& text) {
  const auto parts = text::split(text, ',');
  if (parts.size() != 2) throw UsageError("--thresholds expects two values, e.g. 0,5");
  metrics::EditThresholds t;
  try {
    const auto to_int = [](std::string_view part) {
      const std::string s(part);
      std::size_t used = 0;
      const int v = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return v;
    };
    t.edited_threshold = to_int(parts[0]);
    t.high_effort_threshold = to_int(parts[1]);
  } catch (const std::logic_error&) {
    throw UsageError(fmt::format("--thresholds: '{}' is not a pair of integers", text));
  }
  try {
    t.check();
  } catch (const PreconditionError& e) {
    throw UsageError(fmt::format("--thresholds: {}", e.what()));
  }
  return t;
}

analysis::ReportOptions report_options(const std::string& format, bool reproducible) {
  analysis::ReportOptions opts;
  opts.reproducible = reproducible;
  opts.csv = format != "json";
  opts.figures = opts.csv;
  opts.json = format != "csv";
  return opts;
}

/// Every annotation id must be in the key; all offenders are reported at once.
void check_ids(const std::vector<AnnotationRecord>& records, const BlindingKey& key,
               std::ostream& err) {
  std::vector<std::string> unknown;
  std::set<std::string> seen;
  for (const auto& r : records) {
    if (!key.find(r.segment_id) && seen.insert(r.segment_id).second) {
      unknown.push_back(r.segment_id);
    }
  }
  if (unknown.empty()) return;
  for (const auto& id : unknown) err << "unknown segment id: " << id << "\n";
  throw Error(fmt::format("{} segment id(s) not in the blinding key", unknown.size()));
}

// prepare

struct PrepareArgs {
  fs::path corpus;
  std::vector<std::string> raters;
  std::size_t segments_per_rater = 150;
  std::optional<std::uint64_t> seed;
  fs::path out;
  std::string balance_scope = "per_section";
  std::string language_pair;
};

int cmd_prepare(const PrepareArgs& a, std::ostream& out, std::ostream& err) {
  if (!a.seed) throw UsageError("--seed is required");
  auto doc = corpus::load_aligned_file(a.corpus);
  if (!a.language_pair.empty()) doc.language_pair = LanguagePair::parse(a.language_pair);
  if (const auto findings = corpus::validate(doc); !findings.empty()) {
    err << corpus::format_findings_text(findings);
    throw Error(fmt::format("{}: {} finding(s)", a.corpus.string(), findings.size()));
  }

  PreparationConfig cfg;
  cfg.seed = *a.seed;
  cfg.raters = a.raters;
  cfg.segments_per_rater = a.segments_per_rater;
  const auto scope = parse_balance_scope(a.balance_scope);
  if (!scope) throw UsageError(fmt::format("unknown balance scope '{}'", a.balance_scope));
  cfg.balance_scope = *scope;
  cfg.check();

  const auto sections = interleaver::partition_sections(doc, cfg);
  const auto prepared = interleaver::interleave(doc, sections, cfg);

  const fs::path prepared_dir = a.out / "prepared";
  const fs::path key_path = a.out / "key" / "blinding_key.tsv";

  json files = json::array();
  for (const auto& d : prepared.documents) {
    std::ostringstream ss;
    interleaver::write_prepared_tsv(d, ss);
    const auto rel = fs::path("prepared") / (d.rater_id + ".tsv");
    write_file(a.out / rel, ss.str());
    files.push_back(rel.generic_string());
  }
  std::ostringstream key_text;
  interleaver::write_key_tsv(prepared.key, key_text);
  write_file(key_path, key_text.str());

  json manifest = {
      {"tool", "blindeval"},
      {"version", BLINDEVAL_VERSION},
      {"seed", cfg.seed},
      {"language_pair", doc.language_pair.str()},
      {"config",
       {{"raters", cfg.raters},
        {"segments_per_rater", cfg.segments_per_rater},
        {"balance_scope", std::string(to_string(cfg.balance_scope))}}},
      {"corpus",
       {{"file", a.corpus.filename().string()},
        {"sha256", text::sha256_hex(read_file(a.corpus))},
        {"segments", doc.size()}}},
      {"sections", json::array()},
      {"prepared", files},
      {"key", "key/blinding_key.tsv"},
  };
  for (const auto& s : sections) {
    manifest["sections"].push_back(
        {{"rater_id", s.rater_id}, {"start_index", s.start_index}, {"count", s.count}});
  }
  write_file(a.out / "manifest.json", manifest.dump(2) + "\n");

  out << fmt::format("prepared {} document(s), {} segments, seed={}, key={}\n",
                     prepared.documents.size(), prepared.key.size(), cfg.seed,
                     key_path.string());
  return kOk;
}

// serve

struct ServeArgs {
  fs::path prepared;
  fs::path journal;
  std::string host = "127.0.0.1";
  int port = 8080;
  int deadline_minutes = 90;
  std::string instructions;
  fs::path instructions_file;
  std::string operator_token;
  fs::path static_dir;
  std::size_t compact_every = 1000;
};

std::vector<PreparedDocument> load_prepared_dir(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw Error(fmt::format("'{}' is not a directory", dir.string()));
  std::vector<fs::path> paths;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".tsv") paths.push_back(e.path());
  }
  std::sort(paths.begin(), paths.end());
  std::vector<PreparedDocument> docs;
  for (const auto& p : paths) {
    const auto text = read_file(p);
    if (text.rfind("# blinding key", 0) == 0) {
      throw UsageError(fmt::format("'{}' is a blinding key; the service must not see it",
                                   p.string()));
    }
    std::istringstream in(text);
    try {
      docs.push_back(interleaver::read_prepared_tsv(in, p.stem().string()));
    } catch (const ParseError& e) {
      throw Error(fmt::format("{}: {}", p.string(), e.what()));
    }
  }
  if (docs.empty()) throw Error(fmt::format("no prepared documents in '{}'", dir.string()));
  return docs;
}

int cmd_serve(const ServeArgs& a, std::ostream& out, std::ostream&) {
  service::SessionConfig cfg;
  cfg.deadline_minutes = a.deadline_minutes;
  cfg.compact_every = a.compact_every;
  if (!a.instructions_file.empty()) {
    cfg.instructions = text::trim(read_file(a.instructions_file));
  } else if (!a.instructions.empty()) {
    cfg.instructions = a.instructions;
  }
  try {
    cfg.check();
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }

  auto documents = load_prepared_dir(a.prepared);
  const std::size_t n_documents = documents.size();
  service::Study study(std::move(documents), cfg, a.journal);
  service::ServerOptions opts;
  opts.operator_token = a.operator_token;
  if (!a.static_dir.empty()) opts.static_dir = a.static_dir;
  service::HttpServer server(study, opts);

  // Signals are taken synchronously by a watcher thread so shutdown goes
  // through HttpServer::stop rather than an async handler.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  sigset_t previous;
  pthread_sigmask(SIG_BLOCK, &signals, &previous);
  std::atomic<bool> done{false};
  std::thread watcher([&] {
    const timespec tick{0, 200'000'000};
    while (!done) {
      if (sigtimedwait(&signals, nullptr, &tick) > 0) {
        server.stop();
        return;
      }
    }
  });

  const int port = a.port == 0 ? server.bind_any_port(a.host) : a.port;
  if (port < 0) {
    done = true;
    watcher.join();
    pthread_sigmask(SIG_SETMASK, &previous, nullptr);
    throw Error(fmt::format("cannot bind {}", a.host));
  }
  out << fmt::format("serving {} document(s) on http://{}:{} journal={}\n",
                     n_documents, a.host, port, a.journal.string())
      << std::flush;
  const bool ok = a.port == 0 ? server.listen_after_bind() : server.listen(a.host, a.port);
  done = true;
  watcher.join();
  pthread_sigmask(SIG_SETMASK, &previous, nullptr);
  if (!ok) throw Error(fmt::format("cannot listen on {}:{}", a.host, a.port));
  out << fmt::format("stopped; {} record(s), {} late\n", study.export_annotations().size(),
                     study.late_submissions());
  return kOk;
}

// ingest

struct IngestArgs {
  std::vector<fs::path> inputs;
  fs::path key;
  fs::path out;
};

int cmd_ingest(const IngestArgs& a, std::ostream& out, std::ostream& err) {
  const auto records = merge_records(load_annotations(a.inputs));

  struct Tally {
    std::size_t completed = 0;
    std::size_t incomplete = 0;
    std::size_t assigned = 0;
  };
  std::map<std::string, Tally> tally;
  if (!a.key.empty()) {
    const auto key = interleaver::read_key_file(a.key);
    check_ids(records, key, err);
    for (const auto& r : records) {
      const auto* e = key.find(r.segment_id);
      if (!r.rater_id.empty() && r.rater_id != e->rater_id) {
        throw Error(fmt::format("segment {} was assigned to {}, not {}", r.segment_id,
                                e->rater_id, r.rater_id));
      }
    }
    for (const auto& e : key.entries()) ++tally[e.rater_id].assigned;
  }
  for (const auto& r : records) {
    auto& t = tally[r.rater_id];
    ++(r.completed ? t.completed : t.incomplete);
  }

  std::ostringstream ss;
  write_jsonl(records, ss);
  write_file(a.out, ss.str());

  std::size_t completed = 0;
  for (const auto& [rater, t] : tally) {
    completed += t.completed;
    if (!a.key.empty()) {
      out << fmt::format("{}: {} completed, {} incomplete, {} assigned\n", rater, t.completed,
                         t.incomplete, t.assigned);
    } else {
      out << fmt::format("{}: {} completed, {} incomplete\n", rater, t.completed, t.incomplete);
    }
  }
  out << fmt::format("ingested {} record(s), {} completed -> {}\n", records.size(), completed,
                     a.out.string());
  return kOk;
}

// analyze and report

struct AnalyzeArgs {
  std::vector<fs::path> annotations;
  fs::path key;
  fs::path corpus;
  double alpha = stats::kDefaultAlpha;
  std::string thresholds = "0,5";
  double ci_level = 0.95;
  bool alternative_tests = false;
  fs::path out;
  std::string format = "all";
  bool reproducible = false;
};

void print_results(const analysis::ResultsTable& r, std::ostream& out) {
  for (const auto& c : r.comparisons) out << analysis::summary_line(r, c) << "\n";
}

int cmd_analyze(const AnalyzeArgs& a, std::ostream& out, std::ostream& err) {
  if (a.key.empty()) throw UsageError("no --key given: refusing to analyze blinded data");
  analysis::AnalysisConfig cfg;
  cfg.alpha = a.alpha;
  cfg.thresholds = parse_thresholds(a.thresholds);
  cfg.ci_level = a.ci_level;
  cfg.alternative_tests = a.alternative_tests;
  try {
    cfg.check();
  } catch (const PreconditionError& e) {
    throw UsageError(e.what());
  }

  const auto key = interleaver::read_key_file(a.key);
  const auto records = load_annotations(a.annotations);
  check_ids(records, key, err);
  std::optional<AlignedDocument> doc;
  if (!a.corpus.empty()) doc = corpus::load_aligned_file(a.corpus);

  const auto ds = analysis::exclude_incomplete(records, key, doc ? &*doc : nullptr);
  for (const auto& c : ds.completion) {
    if (c.excluded) err << fmt::format("rater {} excluded: no completed segments\n", c.rater_id);
  }
  const auto result = analysis::analyze(ds, cfg);
  print_results(result, out);
  if (!a.out.empty()) {
    const auto files = analysis::emit_report(result, ds, a.out,
                                             report_options(a.format, a.reproducible));
    out << fmt::format("wrote {} file(s) to {}\n", files.size(), a.out.string());
  }
  return kOk;
}

struct ReportArgs {
  fs::path results;
  fs::path out;
  std::string format = "all";
  bool reproducible = false;
};

int cmd_report(const ReportArgs& a, std::ostream& out, std::ostream&) {
  json j;
  try {
    j = json::parse(read_file(a.results));
  } catch (const json::parse_error& e) {
    throw Error(fmt::format("{}: {}", a.results.string(), e.what()));
  }
  const auto input = analysis::read_embedded_input(j);
  const auto result = analysis::analyze(input.dataset, input.config);
  if (result.input_digest != input.input_digest) {
    throw Error(fmt::format("{}: input digest mismatch (recorded {}, recomputed {})",
                            a.results.string(), input.input_digest, result.input_digest));
  }
  print_results(result, out);
  const auto files = analysis::emit_report(result, input.dataset, a.out,
                                           report_options(a.format, a.reproducible));
  out << fmt::format("wrote {} file(s) to {}\n", files.size(), a.out.string());
  return kOk;
}

}  // namespace

std::vector<AnnotationRecord> load_annotations(const std::vector<fs::path>& paths) {
  std::vector<AnnotationRecord> all;
  for (const auto& p : paths) {
    std::vector<AnnotationRecord> part;
    try {
      if (p.extension() == ".tsv") {
        std::istringstream in(read_file(p));
        part = read_filled_tsv(in, p.stem().string(), modification_time(p));
      } else {
        part = read_jsonl_file(p);
      }
    } catch (const ParseError& e) {
      throw Error(fmt::format("{}: {}", p.string(), e.what()));
    }
    all.insert(all.end(), std::make_move_iterator(part.begin()),
               std::make_move_iterator(part.end()));
  }
  return all;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Blinded HT/MT post-editing evaluation"};
  app.name("blindeval");
  app.set_version_flag("--version", std::string(BLINDEVAL_VERSION));
  app.require_subcommand(1);

  const std::vector<std::string> formats{"all", "csv", "json"};

  PrepareArgs prep;
  auto* prepare = app.add_subcommand("prepare", "Build blinded per-rater documents and the key");
  prepare->add_option("--corpus", prep.corpus, "Aligned corpus TSV")->required();
  prepare->add_option("--raters", prep.raters, "Rater ids, comma separated")
      ->required()
      ->delimiter(',');
  prepare->add_option("--segments-per-rater", prep.segments_per_rater)->capture_default_str();
  prepare->add_option("--seed", prep.seed, "Random seed (recorded in the manifest)");
  prepare->add_option("--out", prep.out, "Output directory")->required();
  prepare->add_option("--balance-scope", prep.balance_scope, "per_section or whole_document")
      ->capture_default_str();
  prepare->add_option("--language-pair", prep.language_pair, "Overrides the corpus header");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Collect annotations over HTTP");
  serve->add_option("--prepared", serve_args.prepared, "Directory of prepared documents")
      ->required()
      ->envname("BLINDEVAL_PREPARED");
  serve->add_option("--journal", serve_args.journal)->required()->envname("BLINDEVAL_JOURNAL");
  serve->add_option("--host", serve_args.host)->capture_default_str()->envname("BLINDEVAL_HOST");
  serve->add_option("--port", serve_args.port, "0 picks a free port")
      ->capture_default_str()
      ->envname("BLINDEVAL_PORT");
  serve->add_option("--deadline-minutes", serve_args.deadline_minutes)
      ->capture_default_str()
      ->envname("BLINDEVAL_DEADLINE_MINUTES");
  serve->add_option("--instructions", serve_args.instructions, "Task text shown to raters")
      ->envname("BLINDEVAL_INSTRUCTIONS");
  serve->add_option("--instructions-file", serve_args.instructions_file);
  serve->add_option("--operator-token", serve_args.operator_token, "Bearer token for /export")
      ->envname("BLINDEVAL_OPERATOR_TOKEN");
  serve->add_option("--static", serve_args.static_dir, "Static assets mounted at /");
  serve->add_option("--compact-every", serve_args.compact_every)->capture_default_str();

  IngestArgs ing;
  auto* ingest = app.add_subcommand("ingest", "Normalize filled spreadsheets and exports");
  ingest->add_option("inputs", ing.inputs, "*.tsv spreadsheets or *.jsonl exports");
  ingest->add_option("--annotations", ing.inputs)->delimiter(',');
  ingest->add_option("--key", ing.key, "Validate segment ids against the key");
  ingest->add_option("--out", ing.out, "Output JSON-lines file")->required();

  AnalyzeArgs an;
  auto* analyze = app.add_subcommand("analyze", "Unblind, compare HT and MT, write reports");
  analyze->add_option("--annotations", an.annotations)->required()->delimiter(',');
  analyze->add_option("--key", an.key);
  analyze->add_option("--corpus", an.corpus, "Fills in targets missing from records");
  analyze->add_option("--alpha", an.alpha)->capture_default_str();
  analyze->add_option("--thresholds", an.thresholds, "MED bins: edited,high-effort")
      ->capture_default_str();
  analyze->add_option("--ci-level", an.ci_level)->capture_default_str();
  analyze->add_flag("--alternative-tests", an.alternative_tests, "Also run G and chi-square");
  analyze->add_option("--out", an.out, "Report directory");
  analyze->add_option("--format", an.format)->check(CLI::IsMember(formats))->capture_default_str();
  analyze->add_flag("--reproducible", an.reproducible, "Omit wall-clock metadata");

  ReportArgs rep;
  auto* report = app.add_subcommand("report", "Regenerate reports from results.json");
  report->add_option("--results", rep.results)->required();
  report->add_option("--out", rep.out)->required();
  report->add_option("--format", rep.format)->check(CLI::IsMember(formats))->capture_default_str();
  report->add_flag("--reproducible", rep.reproducible);

  std::vector<const char*> argv{"blindeval"};
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::Success& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kUsage;
  }

  try {
    if (*prepare) return cmd_prepare(prep, out, err);
    if (*serve) return cmd_serve(serve_args, out, err);
    if (*ingest) {
      if (ing.inputs.empty()) throw UsageError("no input files");
      return cmd_ingest(ing, out, err);
    }
    if (*analyze) return cmd_analyze(an, out, err);
    if (*report) return cmd_report(rep, out, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kValidation;
  }
  return kUsage;
}

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run(args, std::cout, std::cerr);
}

}  // namespace blindeval::cli
