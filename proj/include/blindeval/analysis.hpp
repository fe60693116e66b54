#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "blindeval/annotation.hpp"
#include "blindeval/interleaver.hpp"
#include "blindeval/metrics.hpp"
#include "blindeval/stats.hpp"

namespace blindeval::analysis {

struct AnalysisConfig {
  double alpha = stats::kDefaultAlpha;
  metrics::EditThresholds thresholds;
  double ci_level = 0.95;
  /// Also run the G test and chi-square tests next to Fisher's exact test.
  bool alternative_tests = false;

  void check() const;
};

/// Drops records that were not submitted, unblinds the rest and fills in the
/// per-rater completion report. Key entries without any record count as
/// assigned but not completed. Raters with no completed record are flagged
/// as excluded.
EvalDataset exclude_incomplete(const std::vector<AnnotationRecord>& records,
                               const BlindingKey& key,
                               const AlignedDocument* corpus = nullptr);

using Property = std::function<bool(const EvalRecord&)>;

stats::ContingencyTable2x2 build_contingency(const EvalDataset& ds, const Property& property);

enum class Comparison { terminology, omission, typography, med_edited, med_high_effort };

inline constexpr Comparison kComparisons[] = {
    Comparison::terminology, Comparison::omission, Comparison::typography,
    Comparison::med_edited, Comparison::med_high_effort};

/// Stable lowercase identifier: terminology, omission, typography, med_gt_0, med_gt_5.
std::string comparison_key(Comparison c, const metrics::EditThresholds& t);
/// Row label as in the results table: Terminology, ..., MED>0, MED>5.
std::string comparison_label(Comparison c, const metrics::EditThresholds& t);

struct ComparisonResult {
  Comparison comparison = Comparison::terminology;
  stats::ContingencyTable2x2 table;
  stats::TestOutcome fisher;
  std::optional<stats::TestOutcome> g_test;
  std::optional<stats::TestOutcome> chi_square;
  std::optional<stats::TestOutcome> chi_square_yates;
  stats::ProportionCI ci_ht;
  stats::ProportionCI ci_mt;

  std::uint64_t count(Origin o) const { return o == Origin::HT ? table.a : table.c; }
  std::uint64_t n(Origin o) const { return o == Origin::HT ? table.row1() : table.row2(); }
};

struct SegmentMetrics {
  std::string segment_id;
  std::string rater_id;
  Origin origin = Origin::HT;
  std::size_t med = 0;
  metrics::TerBreakdown ter;
};

struct OriginSummary {
  std::size_t n = 0;
  std::size_t exact = 0;
  std::size_t edited = 0;
  std::size_t high_effort = 0;
  std::optional<metrics::DescriptiveStats> med_stats;
  std::size_t hter_edits = 0;
  std::size_t hter_ref_tokens = 0;
  std::optional<double> hter;
};

struct ResultsTable {
  LanguagePair language_pair;
  AnalysisConfig config;
  std::optional<std::uint64_t> seed;
  OriginSummary ht;
  OriginSummary mt;
  std::vector<ComparisonResult> comparisons;
  std::vector<SegmentMetrics> segments;
  std::vector<RaterCompletion> completion;
  /// SHA-256 over the canonical form of the dataset and configuration.
  std::string input_digest;

  const OriginSummary& summary(Origin o) const { return o == Origin::HT ? ht : mt; }
  const ComparisonResult& find(Comparison c) const;
};

/// Hypothesis is the shown target, reference its post-edit. Records are
/// processed in segment-id order, so the result does not depend on input
/// order.
ResultsTable analyze(const EvalDataset& ds, const AnalysisConfig& cfg);

std::string canonical_input(const EvalDataset& ds, const AnalysisConfig& cfg);

// Reports.

struct ReportOptions {
  /// Omit wall-clock metadata so reruns are byte-identical.
  bool reproducible = false;
  bool csv = true;
  bool json = true;
  bool figures = true;
};

std::string header_comment(const ResultsTable& r, const ReportOptions& opts);

/// Table layout with counts and bracketed percentages, e.g.
/// "Omission,1,(0.67),5,(3.33)". Significant pairs are prefixed with '*'.
std::string table_csv(const ResultsTable& r, const ReportOptions& opts = {});

/// Full-precision statistics plus the unblinded input used to produce them.
nlohmann::json results_json(const ResultsTable& r, const EvalDataset& ds,
                            const ReportOptions& opts = {});

/// origin,proportion,ci_lo,ci_hi,p rows for one comparison.
std::string figure_csv(const ResultsTable& r, const ComparisonResult& c,
                       const ReportOptions& opts = {});

/// Console summary line, e.g. "omission HT 14/237 MT 12/238 p=0.693".
std::string summary_line(const ResultsTable& r, const ComparisonResult& c);

/// id, med, ter_edits, ref_tokens per segment.
std::string segment_metrics_tsv(const ResultsTable& r);

/// Writes the requested files into `dir` (created if needed) and returns
/// their paths. Throws Error when the destination is not writable.
std::vector<std::filesystem::path> emit_report(const ResultsTable& r, const EvalDataset& ds,
                                               const std::filesystem::path& dir,
                                               const ReportOptions& opts = {});

/// Rebuilds the dataset and configuration embedded by results_json.
struct EmbeddedInput {
  EvalDataset dataset;
  AnalysisConfig config;
  std::optional<std::uint64_t> seed;
  std::string input_digest;
};
EmbeddedInput read_embedded_input(const nlohmann::json& results);

}  // namespace blindeval::analysis
