#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace blindeval::metrics {

using Tokens = std::vector<std::string>;

/// Unit-cost Levenshtein distance over Unicode scalar values. Both texts
/// are expected NFC-normalized; throws PreconditionError on invalid UTF-8.
std::size_t med(std::string_view original, std::string_view postedited);

/// Unit-cost Levenshtein distance between two sequences.
template <typename T>
std::size_t levenshtein(std::span<const T> a, std::span<const T> b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      const std::size_t sub = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      row[j] = std::min({sub, up + 1, row[j - 1] + 1});
      diag = up;
    }
  }
  return row[b.size()];
}

struct EditThresholds {
  int edited_threshold = 0;
  int high_effort_threshold = 5;

  /// Throws PreconditionError unless 0 <= edited < high_effort.
  void check() const;
};

enum class MedBin { exact, edited, high_effort };

std::string_view to_string(MedBin bin);

/// exact iff value <= edited_threshold (i.e. 0 with the defaults);
/// high_effort iff value > high_effort_threshold; edited otherwise.
MedBin bin_med(std::size_t value, const EditThresholds& t = {});

/// Whitespace split, then every punctuation character becomes its own token.
/// Case is preserved.
Tokens tokenize(std::string_view text);

struct TerBreakdown {
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;
  std::size_t shifts = 0;
  std::size_t ref_tokens = 0;

  std::size_t total_edits() const {
    return insertions + deletions + substitutions + shifts;
  }
  friend bool operator==(const TerBreakdown&, const TerBreakdown&) = default;
};

/// One applied block shift: tokens [start, start+length) of the hypothesis
/// are removed and reinserted so that they begin at `destination` in the
/// result.
struct TerShift {
  std::size_t start = 0;
  std::size_t length = 0;
  std::size_t destination = 0;
  std::size_t distance_before = 0;
  std::size_t distance_after = 0;
  /// Number of distinct hypotheses reachable by a candidate shift that also
  /// attain `distance_after`. 1 when the greedy choice was unique.
  std::size_t tied_candidates = 0;
};

struct TerTrace {
  TerBreakdown breakdown;
  std::vector<TerShift> shifts;
  /// Best candidate at the step that ended the search, when any existed.
  std::optional<std::size_t> final_best_distance;
  std::size_t final_tied_candidates = 0;

  /// True when no greedy step had to break a tie between distinct results.
  bool greedy_unique() const;
};

inline constexpr std::size_t kMaxShiftLength = 10;

/// Translation edit rate edit counts of `hypothesis` against `reference`.
///
/// Greedy: while some block shift lowers the word-level Levenshtein distance,
/// apply the one with the lowest resulting distance (ties: earliest start,
/// then shortest block, then earliest destination). A candidate block has at
/// most kMaxShiftLength tokens, occurs verbatim somewhere in the reference
/// and contains at least one token left unmatched by the current alignment.
/// Throws PreconditionError for an empty reference with a nonempty
/// hypothesis.
TerBreakdown ter_edits(const Tokens& hypothesis, const Tokens& reference);
TerTrace ter_trace(const Tokens& hypothesis, const Tokens& reference);

/// 100 * sum(total_edits) / sum(ref_tokens).
double corpus_hter(const std::vector<std::pair<Tokens, Tokens>>& pairs);
double corpus_hter(const std::vector<TerBreakdown>& per_pair);

struct DescriptiveStats {
  double min = 0;
  double max = 0;
  double avg = 0;
  double med = 0;
  /// Sample standard deviation (n - 1 denominator); 0 for a single value.
  double sd = 0;
};

DescriptiveStats descriptive_stats(std::span<const std::size_t> values);

}  // namespace blindeval::metrics
