#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

namespace blindeval::stats {

/// Origin x property counts:
///
///            present  absent
///     HT        a        b
///     MT        c        d
struct ContingencyTable2x2 {
  std::uint64_t a = 0;
  std::uint64_t b = 0;
  std::uint64_t c = 0;
  std::uint64_t d = 0;

  std::uint64_t row1() const { return a + b; }
  std::uint64_t row2() const { return c + d; }
  std::uint64_t col1() const { return a + c; }
  std::uint64_t col2() const { return b + d; }
  std::uint64_t total() const { return a + b + c + d; }
  bool has_zero_margin() const {
    return row1() == 0 || row2() == 0 || col1() == 0 || col2() == 0;
  }
  ContingencyTable2x2 swap_rows() const { return {c, d, a, b}; }
  ContingencyTable2x2 swap_columns() const { return {b, a, d, c}; }

  friend bool operator==(const ContingencyTable2x2&, const ContingencyTable2x2&) = default;
};

enum class TestMethod { fisher_two_tailed, g_test, chi_square, chi_square_yates };

std::string_view to_string(TestMethod method);

struct TestOutcome {
  TestMethod method = TestMethod::fisher_two_tailed;
  /// Absent for Fisher's exact test.
  std::optional<double> statistic;
  double p = 1.0;
  bool significant = false;
  /// A margin was zero; p is 1 by convention.
  bool degenerate = false;
};

inline constexpr double kDefaultAlpha = 0.05;

/// log(n!) for n up to a fixed bound, computed once.
class LogFactorialTable {
 public:
  explicit LogFactorialTable(std::size_t max_n);
  /// Falls back to lgamma beyond the precomputed range.
  double operator()(std::uint64_t n) const;
  std::size_t max_n() const { return values_.size() - 1; }

 private:
  std::vector<double> values_;
};

/// Process-wide table covering desk-scale corpora.
const LogFactorialTable& default_log_factorials();

/// Hypergeometric point probability of `a` given the margins of `t`.
double hypergeometric_pmf(const ContingencyTable2x2& t,
                          const LogFactorialTable& lf = default_log_factorials());

/// Two-tailed Fisher's exact test: sums the probabilities of all tables with
/// the observed margins whose point probability does not exceed the observed
/// one by more than a relative 1e-7. Degenerate margins give p = 1.
TestOutcome fisher_exact_two_tailed(const ContingencyTable2x2& t,
                                    double alpha = kDefaultAlpha,
                                    const LogFactorialTable& lf = default_log_factorials());

/// Likelihood-ratio G test, df = 1. Throws PreconditionError on a zero margin.
TestOutcome g_test(const ContingencyTable2x2& t, double alpha = kDefaultAlpha);

/// Pearson chi-square, df = 1, optionally with Yates' continuity correction
/// (the correction is capped at |O - E| as R does). Throws on a zero margin.
TestOutcome chi_square(const ContingencyTable2x2& t, bool yates,
                       double alpha = kDefaultAlpha);

/// Upper tail of the chi-square distribution with one degree of freedom.
double chi2_df1_survival(double x);

struct ProportionCI {
  std::uint64_t k = 0;
  std::uint64_t n = 0;
  double level = 0.95;
  double lo = 0;
  double hi = 0;

  double proportion() const { return static_cast<double>(k) / static_cast<double>(n); }
};

/// Two-sided normal quantile for the given confidence level (1.959964 at 0.95).
double normal_quantile_two_sided(double level);

/// Wilson score interval. Throws PreconditionError when n == 0 or k > n.
ProportionCI wilson_ci(std::uint64_t k, std::uint64_t n, double level = 0.95);

}  // namespace blindeval::stats
