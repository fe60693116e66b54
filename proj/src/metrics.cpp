#include "blindeval/metrics.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>

#include "blindeval/error.hpp"
#include "blindeval/text.hpp"

namespace blindeval::metrics {

std::size_t med(std::string_view original, std::string_view postedited) {
  const auto a = text::decode_utf8(original);
  const auto b = text::decode_utf8(postedited);
  if (!a || !b) throw PreconditionError("med: invalid UTF-8 input");
  return levenshtein<char32_t>(*a, *b);
}

void EditThresholds::check() const {
  if (edited_threshold < 0 || edited_threshold >= high_effort_threshold) {
    throw PreconditionError(fmt::format(
        "thresholds must satisfy 0 <= edited < high effort, got {},{}", edited_threshold,
        high_effort_threshold));
  }
}

std::string_view to_string(MedBin bin) {
  switch (bin) {
    case MedBin::exact: return "exact";
    case MedBin::edited: return "edited";
    case MedBin::high_effort: return "high_effort";
  }
  return "?";
}

MedBin bin_med(std::size_t value, const EditThresholds& t) {
  if (value <= static_cast<std::size_t>(t.edited_threshold)) return MedBin::exact;
  if (value > static_cast<std::size_t>(t.high_effort_threshold)) return MedBin::high_effort;
  return MedBin::edited;
}

Tokens tokenize(std::string_view input) {
  const auto scalars = text::decode_utf8(input);
  if (!scalars) throw PreconditionError("tokenize: invalid UTF-8 input");
  Tokens tokens;
  std::u32string word;
  const auto flush = [&] {
    if (!word.empty()) {
      tokens.push_back(text::encode_utf8(word));
      word.clear();
    }
  };
  for (char32_t c : *scalars) {
    if (text::is_whitespace(c)) {
      flush();
    } else if (text::is_punctuation(c)) {
      flush();
      tokens.push_back(text::encode_utf8(std::u32string_view(&c, 1)));
    } else {
      word.push_back(c);
    }
  }
  flush();
  return tokens;
}

namespace {

using Ids = std::vector<int>;

struct Alignment {
  std::size_t distance = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t substitutions = 0;
  /// hyp_matched[i] is true when hypothesis token i is matched exactly.
  std::vector<bool> hyp_matched;
};

// Full DP with a fixed traceback preference: match, substitution, deletion
// (hypothesis token dropped), insertion (reference token added).
Alignment align(const Ids& hyp, const Ids& ref) {
  const std::size_t n = hyp.size();
  const std::size_t m = ref.size();
  std::vector<std::size_t> d((n + 1) * (m + 1));
  const auto at = [&](std::size_t i, std::size_t j) -> std::size_t& {
    return d[i * (m + 1) + j];
  };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t sub = at(i - 1, j - 1) + (hyp[i - 1] == ref[j - 1] ? 0 : 1);
      at(i, j) = std::min({sub, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }

  Alignment a;
  a.distance = at(n, m);
  a.hyp_matched.assign(n, false);
  std::size_t i = n;
  std::size_t j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && hyp[i - 1] == ref[j - 1] && at(i, j) == at(i - 1, j - 1)) {
      a.hyp_matched[i - 1] = true;
      --i;
      --j;
    } else if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + 1) {
      ++a.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++a.deletions;
      --i;
    } else {
      ++a.insertions;
      --j;
    }
  }
  return a;
}

std::size_t distance(const Ids& hyp, const Ids& ref) {
  return levenshtein<int>(hyp, ref);
}

Ids apply_shift(const Ids& hyp, std::size_t start, std::size_t length,
                std::size_t destination) {
  Ids rest;
  rest.reserve(hyp.size());
  rest.insert(rest.end(), hyp.begin(), hyp.begin() + static_cast<std::ptrdiff_t>(start));
  rest.insert(rest.end(), hyp.begin() + static_cast<std::ptrdiff_t>(start + length),
              hyp.end());
  rest.insert(rest.begin() + static_cast<std::ptrdiff_t>(destination),
              hyp.begin() + static_cast<std::ptrdiff_t>(start),
              hyp.begin() + static_cast<std::ptrdiff_t>(start + length));
  return rest;
}

bool occurs_in(const Ids& ref, Ids::const_iterator first, Ids::const_iterator last) {
  return std::search(ref.begin(), ref.end(), first, last) != ref.end();
}

}  // namespace

bool TerTrace::greedy_unique() const {
  for (const auto& s : shifts) {
    if (s.tied_candidates != 1) return false;
  }
  return true;
}

TerTrace ter_trace(const Tokens& hypothesis, const Tokens& reference) {
  if (reference.empty() && !hypothesis.empty()) {
    throw PreconditionError("ter: empty reference with a nonempty hypothesis");
  }

  std::map<std::string, int> vocab;
  const auto intern = [&](const Tokens& tokens) {
    Ids ids;
    ids.reserve(tokens.size());
    for (const auto& t : tokens) {
      ids.push_back(vocab.try_emplace(t, static_cast<int>(vocab.size())).first->second);
    }
    return ids;
  };
  Ids hyp = intern(hypothesis);
  const Ids ref = intern(reference);

  TerTrace trace;
  Alignment current = align(hyp, ref);

  while (current.distance > 0) {
    const std::size_t n = hyp.size();
    std::size_t best = current.distance;
    std::optional<TerShift> chosen;
    std::set<Ids> tied;
    std::optional<std::size_t> best_any;

    for (std::size_t start = 0; start < n; ++start) {
      bool has_unmatched = false;
      for (std::size_t length = 1; length <= kMaxShiftLength && start + length <= n;
           ++length) {
        const auto first = hyp.begin() + static_cast<std::ptrdiff_t>(start);
        const auto last = first + static_cast<std::ptrdiff_t>(length);
        if (!occurs_in(ref, first, last)) break;
        has_unmatched = has_unmatched || !current.hyp_matched[start + length - 1];
        if (!has_unmatched) continue;
        for (std::size_t dest = 0; dest + length <= n; ++dest) {
          if (dest == start) continue;
          Ids candidate = apply_shift(hyp, start, length, dest);
          if (candidate == hyp) continue;
          const std::size_t dist = distance(candidate, ref);
          if (!best_any || dist < *best_any) best_any = dist;
          if (dist < best) {
            best = dist;
            chosen = TerShift{start, length, dest, current.distance, dist, 0};
            tied.clear();
            tied.insert(std::move(candidate));
          } else if (chosen && dist == best) {
            tied.insert(std::move(candidate));
          }
        }
      }
    }

    if (!chosen) {
      trace.final_best_distance = best_any;
      break;
    }
    chosen->tied_candidates = tied.size();
    hyp = apply_shift(hyp, chosen->start, chosen->length, chosen->destination);
    trace.shifts.push_back(*chosen);
    current = align(hyp, ref);
  }

  trace.breakdown.insertions = current.insertions;
  trace.breakdown.deletions = current.deletions;
  trace.breakdown.substitutions = current.substitutions;
  trace.breakdown.shifts = trace.shifts.size();
  trace.breakdown.ref_tokens = reference.size();
  return trace;
}

TerBreakdown ter_edits(const Tokens& hypothesis, const Tokens& reference) {
  return ter_trace(hypothesis, reference).breakdown;
}

double corpus_hter(const std::vector<TerBreakdown>& per_pair) {
  if (per_pair.empty()) throw PreconditionError("corpus_hter: no pairs");
  std::size_t edits = 0;
  std::size_t ref_tokens = 0;
  for (const auto& b : per_pair) {
    edits += b.total_edits();
    ref_tokens += b.ref_tokens;
  }
  if (ref_tokens == 0) throw PreconditionError("corpus_hter: no reference tokens");
  return 100.0 * static_cast<double>(edits) / static_cast<double>(ref_tokens);
}

double corpus_hter(const std::vector<std::pair<Tokens, Tokens>>& pairs) {
  if (pairs.empty()) throw PreconditionError("corpus_hter: no pairs");
  std::vector<TerBreakdown> per_pair;
  per_pair.reserve(pairs.size());
  for (const auto& [hyp, ref] : pairs) {
    if (ref.empty()) throw PreconditionError("corpus_hter: empty reference");
    per_pair.push_back(ter_edits(hyp, ref));
  }
  return corpus_hter(per_pair);
}

DescriptiveStats descriptive_stats(std::span<const std::size_t> values) {
  if (values.empty()) throw PreconditionError("descriptive_stats: empty sample");
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  DescriptiveStats s;
  s.min = v.front();
  s.max = v.back();
  s.avg = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(n);
  s.med = n % 2 == 1 ? v[n / 2] : (v[n / 2 - 1] + v[n / 2]) / 2.0;
  if (n > 1) {
    double ss = 0;
    for (double x : v) ss += (x - s.avg) * (x - s.avg);
    s.sd = std::sqrt(ss / static_cast<double>(n - 1));
  }
  return s;
}

}  // namespace blindeval::metrics
