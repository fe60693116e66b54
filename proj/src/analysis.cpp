#include "blindeval/analysis.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <fstream>
#include <numeric>
#include <unordered_map>

#include "blindeval/error.hpp"
#include "blindeval/text.hpp"

namespace blindeval::analysis {

using nlohmann::json;

void AnalysisConfig::check() const {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw PreconditionError(fmt::format("alpha must lie in (0, 1), got {}", alpha));
  }
  if (!(ci_level > 0.0 && ci_level < 1.0)) {
    throw PreconditionError(fmt::format("ci level must lie in (0, 1), got {}", ci_level));
  }
  thresholds.check();
}

EvalDataset exclude_incomplete(const std::vector<AnnotationRecord>& records,
                               const BlindingKey& key, const AlignedDocument* corpus) {
  std::vector<AnnotationRecord> completed;
  for (auto& r : merge_records(records)) {
    if (r.completed) completed.push_back(std::move(r));
  }
  EvalDataset ds = interleaver::unblind(completed, key, corpus);

  std::vector<RaterCompletion> report;
  std::unordered_map<std::string, std::size_t> slot;
  for (const auto& e : key.entries()) {
    const auto [it, inserted] = slot.try_emplace(e.rater_id, report.size());
    if (inserted) report.push_back({e.rater_id, 0, 0, false});
    ++report[it->second].assigned;
  }
  for (const auto& r : ds.records) ++report[slot.at(r.annotation.rater_id)].completed;
  for (auto& c : report) c.excluded = c.completed == 0;
  ds.completion = std::move(report);
  return ds;
}

stats::ContingencyTable2x2 build_contingency(const EvalDataset& ds, const Property& property) {
  stats::ContingencyTable2x2 t;
  for (const auto& r : ds.records) {
    const bool present = property(r);
    if (r.origin == Origin::HT) {
      (present ? t.a : t.b) += 1;
    } else {
      (present ? t.c : t.d) += 1;
    }
  }
  return t;
}

std::string comparison_key(Comparison c, const metrics::EditThresholds& t) {
  switch (c) {
    case Comparison::terminology: return "terminology";
    case Comparison::omission: return "omission";
    case Comparison::typography: return "typography";
    case Comparison::med_edited: return fmt::format("med_gt_{}", t.edited_threshold);
    case Comparison::med_high_effort: return fmt::format("med_gt_{}", t.high_effort_threshold);
  }
  return "?";
}

std::string comparison_label(Comparison c, const metrics::EditThresholds& t) {
  switch (c) {
    case Comparison::terminology: return "Terminology";
    case Comparison::omission: return "Omission";
    case Comparison::typography: return "Typography";
    case Comparison::med_edited: return fmt::format("MED>{}", t.edited_threshold);
    case Comparison::med_high_effort: return fmt::format("MED>{}", t.high_effort_threshold);
  }
  return "?";
}

const ComparisonResult& ResultsTable::find(Comparison c) const {
  for (const auto& r : comparisons) {
    if (r.comparison == c) return r;
  }
  throw PreconditionError("comparison not present in results");
}

namespace {

json record_json(const EvalRecord& r) {
  json j = to_json(r.annotation);
  j["origin"] = std::string(to_string(r.origin));
  return j;
}

json config_json(const AnalysisConfig& cfg) {
  return {{"alpha", cfg.alpha},
          {"thresholds", {cfg.thresholds.edited_threshold, cfg.thresholds.high_effort_threshold}},
          {"ci_level", cfg.ci_level},
          {"alternative_tests", cfg.alternative_tests}};
}

std::vector<const EvalRecord*> sorted_records(const EvalDataset& ds) {
  std::vector<const EvalRecord*> out;
  out.reserve(ds.records.size());
  for (const auto& r : ds.records) out.push_back(&r);
  std::sort(out.begin(), out.end(), [](const EvalRecord* x, const EvalRecord* y) {
    return x->annotation.segment_id < y->annotation.segment_id;
  });
  return out;
}

metrics::TerBreakdown hter_pair(const std::string& shown, const std::string& postedit) {
  const auto hyp = metrics::tokenize(shown);
  const auto ref = metrics::tokenize(postedit);
  if (ref.empty()) {
    // Everything was deleted: count the deletions, nothing to normalize by.
    metrics::TerBreakdown b;
    b.deletions = hyp.size();
    return b;
  }
  return metrics::ter_edits(hyp, ref);
}

std::string format_stat(double v) {
  if (v == static_cast<double>(static_cast<long long>(v))) {
    return fmt::format("{}", static_cast<long long>(v));
  }
  return fmt::format("{:.2f}", v);
}

}  // namespace

std::string canonical_input(const EvalDataset& ds, const AnalysisConfig& cfg) {
  json records = json::array();
  for (const auto* r : sorted_records(ds)) records.push_back(record_json(*r));
  json j = {{"config", config_json(cfg)},
            {"language_pair", ds.language_pair.str()},
            {"records", std::move(records)}};
  return j.dump();
}

ResultsTable analyze(const EvalDataset& ds, const AnalysisConfig& cfg) {
  cfg.check();
  if (ds.records.empty()) throw PreconditionError("analyze: empty dataset");

  ResultsTable out;
  out.language_pair = ds.language_pair;
  out.config = cfg;
  out.seed = ds.seed;
  out.completion = ds.completion;

  std::unordered_map<std::string, std::size_t> med_by_id;
  std::vector<std::size_t> meds[2];
  for (const auto* r : sorted_records(ds)) {
    const auto& a = r->annotation;
    SegmentMetrics m{a.segment_id, a.rater_id, r->origin, metrics::med(a.target, a.postedited),
                     hter_pair(a.target, a.postedited)};
    med_by_id[a.segment_id] = m.med;
    OriginSummary& s = r->origin == Origin::HT ? out.ht : out.mt;
    ++s.n;
    switch (metrics::bin_med(m.med, cfg.thresholds)) {
      case metrics::MedBin::exact: ++s.exact; break;
      case metrics::MedBin::edited: ++s.edited; break;
      case metrics::MedBin::high_effort: ++s.high_effort; break;
    }
    s.hter_edits += m.ter.total_edits();
    s.hter_ref_tokens += m.ter.ref_tokens;
    meds[r->origin == Origin::HT ? 0 : 1].push_back(m.med);
    out.segments.push_back(std::move(m));
  }
  const auto finish = [](OriginSummary& s, const std::vector<std::size_t>& values) {
    if (!values.empty()) s.med_stats = metrics::descriptive_stats(values);
    if (s.hter_ref_tokens > 0) {
      s.hter = 100.0 * static_cast<double>(s.hter_edits) /
               static_cast<double>(s.hter_ref_tokens);
    }
  };
  finish(out.ht, meds[0]);
  finish(out.mt, meds[1]);

  const auto med_of = [&](const EvalRecord& r) { return med_by_id.at(r.annotation.segment_id); };
  const auto edited = static_cast<std::size_t>(cfg.thresholds.edited_threshold);
  const auto high = static_cast<std::size_t>(cfg.thresholds.high_effort_threshold);
  for (Comparison c : kComparisons) {
    Property property;
    switch (c) {
      case Comparison::terminology:
        property = [](const EvalRecord& r) { return r.annotation.flags.terminology; };
        break;
      case Comparison::omission:
        property = [](const EvalRecord& r) { return r.annotation.flags.omission; };
        break;
      case Comparison::typography:
        property = [](const EvalRecord& r) { return r.annotation.flags.typography; };
        break;
      case Comparison::med_edited:
        property = [&](const EvalRecord& r) { return med_of(r) > edited; };
        break;
      case Comparison::med_high_effort:
        property = [&](const EvalRecord& r) { return med_of(r) > high; };
        break;
    }
    ComparisonResult res;
    res.comparison = c;
    res.table = build_contingency(ds, property);
    res.fisher = stats::fisher_exact_two_tailed(res.table, cfg.alpha);
    if (cfg.alternative_tests && !res.table.has_zero_margin()) {
      res.g_test = stats::g_test(res.table, cfg.alpha);
      res.chi_square = stats::chi_square(res.table, false, cfg.alpha);
      res.chi_square_yates = stats::chi_square(res.table, true, cfg.alpha);
    }
    const auto ci = [&](std::uint64_t k, std::uint64_t n) {
      return n == 0 ? stats::ProportionCI{0, 0, cfg.ci_level, 0, 0}
                    : stats::wilson_ci(k, n, cfg.ci_level);
    };
    res.ci_ht = ci(res.table.a, res.table.row1());
    res.ci_mt = ci(res.table.c, res.table.row2());
    out.comparisons.push_back(std::move(res));
  }

  out.input_digest = text::sha256_hex(canonical_input(ds, cfg));
  return out;
}

std::string header_comment(const ResultsTable& r, const ReportOptions& opts) {
  std::string h = fmt::format(
      "# blindeval {} language_pair={} seed={} alpha={} thresholds={},{} ci_level={}\n",
      BLINDEVAL_VERSION, r.language_pair.empty() ? "-" : r.language_pair.str(),
      r.seed ? fmt::format("{}", *r.seed) : "-", r.config.alpha,
      r.config.thresholds.edited_threshold, r.config.thresholds.high_effort_threshold,
      r.config.ci_level);
  if (!opts.reproducible) {
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
    h += fmt::format("# generated_at={}\n", format_timestamp(Timestamp(now.time_since_epoch())));
  }
  return h;
}

std::string table_csv(const ResultsTable& r, const ReportOptions& opts) {
  std::string out = header_comment(r, opts);
  out += fmt::format(",HT (N={}),,MT (N={}),\n", r.ht.n, r.mt.n);
  const auto pct = [](std::uint64_t k, std::uint64_t n) {
    if (n == 0) return std::string("(-)");
    return fmt::format("({:.2f})", 100.0 * static_cast<double>(k) / static_cast<double>(n));
  };
  for (const auto& c : r.comparisons) {
    const char* mark = c.fisher.significant ? "*" : "";
    out += fmt::format("{},{}{},{},{}{},{}\n", comparison_label(c.comparison, r.config.thresholds),
                       mark, c.table.a, pct(c.table.a, c.table.row1()), mark, c.table.c,
                       pct(c.table.c, c.table.row2()));
  }
  const auto stat_row = [&](const char* name, auto field) {
    const auto cell = [&](const OriginSummary& s) {
      return s.med_stats ? format_stat(field(*s.med_stats)) : std::string("-");
    };
    out += fmt::format("{},{},,{},\n", name, cell(r.ht), cell(r.mt));
  };
  stat_row("min", [](const metrics::DescriptiveStats& s) { return s.min; });
  stat_row("max", [](const metrics::DescriptiveStats& s) { return s.max; });
  out += fmt::format("avg,{},,{},\n",
                     r.ht.med_stats ? fmt::format("{:.2f}", r.ht.med_stats->avg) : "-",
                     r.mt.med_stats ? fmt::format("{:.2f}", r.mt.med_stats->avg) : "-");
  stat_row("med", [](const metrics::DescriptiveStats& s) { return s.med; });
  out += fmt::format("sd,{},,{},\n",
                     r.ht.med_stats ? fmt::format("{:.2f}", r.ht.med_stats->sd) : "-",
                     r.mt.med_stats ? fmt::format("{:.2f}", r.mt.med_stats->sd) : "-");
  out += fmt::format("HTER,{},,{},\n", r.ht.hter ? fmt::format("{:.2f}", *r.ht.hter) : "-",
                     r.mt.hter ? fmt::format("{:.2f}", *r.mt.hter) : "-");
  return out;
}

namespace {

json outcome_json(const stats::TestOutcome& o) {
  json j = {{"method", std::string(stats::to_string(o.method))},
            {"p", o.p},
            {"significant", o.significant},
            {"degenerate", o.degenerate}};
  j["statistic"] = o.statistic ? json(*o.statistic) : json(nullptr);
  return j;
}

json ci_json(const stats::ProportionCI& ci) {
  return {{"k", ci.k},
          {"n", ci.n},
          {"proportion", ci.n == 0 ? 0.0 : ci.proportion()},
          {"lo", ci.lo},
          {"hi", ci.hi},
          {"level", ci.level}};
}

json summary_json(const OriginSummary& s) {
  json j = {{"n", s.n},
            {"exact", s.exact},
            {"edited", s.edited},
            {"high_effort", s.high_effort},
            {"hter_edits", s.hter_edits},
            {"hter_ref_tokens", s.hter_ref_tokens}};
  j["hter"] = s.hter ? json(*s.hter) : json(nullptr);
  if (s.med_stats) {
    j["med"] = {{"min", s.med_stats->min},
                {"max", s.med_stats->max},
                {"avg", s.med_stats->avg},
                {"med", s.med_stats->med},
                {"sd", s.med_stats->sd}};
  } else {
    j["med"] = nullptr;
  }
  return j;
}

}  // namespace

json results_json(const ResultsTable& r, const EvalDataset& ds, const ReportOptions& opts) {
  json j;
  j["tool"] = "blindeval";
  j["version"] = BLINDEVAL_VERSION;
  if (!opts.reproducible) {
    const auto now = std::chrono::time_point_cast<std::chrono::milliseconds>(
        std::chrono::system_clock::now());
    j["generated_at"] = format_timestamp(Timestamp(now.time_since_epoch()));
  }
  j["language_pair"] = r.language_pair.str();
  j["seed"] = r.seed ? json(*r.seed) : json(nullptr);
  j["config"] = config_json(r.config);
  j["input_digest"] = r.input_digest;
  j["groups"] = {{"HT", summary_json(r.ht)}, {"MT", summary_json(r.mt)}};

  json comparisons = json::array();
  for (const auto& c : r.comparisons) {
    json cj = {{"key", comparison_key(c.comparison, r.config.thresholds)},
               {"label", comparison_label(c.comparison, r.config.thresholds)},
               {"table", {{"a", c.table.a}, {"b", c.table.b}, {"c", c.table.c}, {"d", c.table.d}}},
               {"fisher", outcome_json(c.fisher)},
               {"ci", {{"HT", ci_json(c.ci_ht)}, {"MT", ci_json(c.ci_mt)}}}};
    if (c.g_test) cj["g_test"] = outcome_json(*c.g_test);
    if (c.chi_square) cj["chi_square"] = outcome_json(*c.chi_square);
    if (c.chi_square_yates) cj["chi_square_yates"] = outcome_json(*c.chi_square_yates);
    comparisons.push_back(std::move(cj));
  }
  j["comparisons"] = std::move(comparisons);

  json completion = json::array();
  for (const auto& c : r.completion) {
    completion.push_back({{"rater_id", c.rater_id},
                          {"assigned", c.assigned},
                          {"completed", c.completed},
                          {"excluded", c.excluded}});
  }
  j["completion"] = std::move(completion);

  json segments = json::array();
  for (const auto& s : r.segments) {
    segments.push_back({{"id", s.segment_id},
                        {"rater_id", s.rater_id},
                        {"origin", std::string(to_string(s.origin))},
                        {"med", s.med},
                        {"ter",
                         {{"insertions", s.ter.insertions},
                          {"deletions", s.ter.deletions},
                          {"substitutions", s.ter.substitutions},
                          {"shifts", s.ter.shifts},
                          {"ref_tokens", s.ter.ref_tokens}}}});
  }
  j["segments"] = std::move(segments);

  json records = json::array();
  for (const auto* rec : sorted_records(ds)) records.push_back(record_json(*rec));
  j["input"] = {{"records", std::move(records)}};
  return j;
}

EmbeddedInput read_embedded_input(const json& results) {
  EmbeddedInput in;
  try {
    const auto& cfg = results.at("config");
    in.config.alpha = cfg.at("alpha").get<double>();
    in.config.thresholds.edited_threshold = cfg.at("thresholds").at(0).get<int>();
    in.config.thresholds.high_effort_threshold = cfg.at("thresholds").at(1).get<int>();
    in.config.ci_level = cfg.at("ci_level").get<double>();
    in.config.alternative_tests = cfg.value("alternative_tests", false);
    if (results.at("seed").is_number_unsigned()) in.seed = results.at("seed").get<std::uint64_t>();
    in.input_digest = results.at("input_digest").get<std::string>();
    in.dataset.language_pair = LanguagePair::parse(results.at("language_pair").get<std::string>());
    in.dataset.seed = in.seed;
    for (const auto& rj : results.at("input").at("records")) {
      EvalRecord rec{record_from_json(rj), Origin::HT};
      const auto origin = parse_origin(rj.at("origin").get<std::string>());
      if (!origin) throw ParseError(0, "origin", "bad origin in embedded input");
      rec.origin = *origin;
      (rec.origin == Origin::HT ? in.dataset.n_ht : in.dataset.n_mt) += 1;
      in.dataset.records.push_back(std::move(rec));
    }
    for (const auto& cj : results.at("completion")) {
      in.dataset.completion.push_back({cj.at("rater_id").get<std::string>(),
                                       cj.at("assigned").get<std::size_t>(),
                                       cj.at("completed").get<std::size_t>(),
                                       cj.at("excluded").get<bool>()});
    }
  } catch (const json::exception& e) {
    throw ParseError(0, "", fmt::format("results file: {}", e.what()));
  }
  return in;
}

std::string figure_csv(const ResultsTable& r, const ComparisonResult& c,
                       const ReportOptions& opts) {
  std::string out = header_comment(r, opts);
  out += fmt::format("# comparison={}\n", comparison_key(c.comparison, r.config.thresholds));
  out += "origin,proportion,ci_lo,ci_hi,p\n";
  for (const auto* ci : {&c.ci_ht, &c.ci_mt}) {
    const char* origin = ci == &c.ci_ht ? "HT" : "MT";
    const double prop = ci->n == 0 ? 0.0 : ci->proportion();
    out += fmt::format("{},{:.4f},{:.4f},{:.4f},{:.3f}\n", origin, prop, ci->lo, ci->hi,
                       c.fisher.p);
  }
  return out;
}

std::string summary_line(const ResultsTable& r, const ComparisonResult& c) {
  return fmt::format("{} HT {}/{} MT {}/{} p={:.3f}{}",
                     text::to_lower_ascii(comparison_label(c.comparison, r.config.thresholds)),
                     c.table.a, c.table.row1(), c.table.c, c.table.row2(), c.fisher.p,
                     c.fisher.significant ? " *" : "");
}

std::string segment_metrics_tsv(const ResultsTable& r) {
  std::string out = "id\tmed\tter_edits\tref_tokens\n";
  for (const auto& s : r.segments) {
    out += fmt::format("{}\t{}\t{}\t{}\n", text::escape_cell(s.segment_id), s.med,
                       s.ter.total_edits(), s.ter.ref_tokens);
  }
  return out;
}

std::vector<std::filesystem::path> emit_report(const ResultsTable& r, const EvalDataset& ds,
                                               const std::filesystem::path& dir,
                                               const ReportOptions& opts) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(fmt::format("cannot create '{}': {}", dir.string(), ec.message()));

  std::vector<std::filesystem::path> written;
  const auto write = [&](const std::string& name, const std::string& content) {
    const auto path = dir / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) throw Error(fmt::format("cannot write '{}'", path.string()));
    written.push_back(path);
  };
  if (opts.csv) {
    write("table.csv", table_csv(r, opts));
    write("segments.tsv", segment_metrics_tsv(r));
  }
  if (opts.json) write("results.json", results_json(r, ds, opts).dump(2) + "\n");
  if (opts.figures) {
    for (const auto& c : r.comparisons) {
      write(fmt::format("figure_{}.csv", comparison_key(c.comparison, r.config.thresholds)),
            figure_csv(r, c, opts));
    }
  }
  return written;
}

}  // namespace blindeval::analysis
