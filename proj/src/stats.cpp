#include "blindeval/stats.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <array>
#include <boost/math/distributions/normal.hpp>
#include <cmath>

#include "blindeval/error.hpp"

namespace blindeval::stats {

std::string_view to_string(TestMethod method) {
  switch (method) {
    case TestMethod::fisher_two_tailed: return "fisher_two_tailed";
    case TestMethod::g_test: return "g_test";
    case TestMethod::chi_square: return "chi_square";
    case TestMethod::chi_square_yates: return "chi_square_yates";
  }
  return "?";
}

LogFactorialTable::LogFactorialTable(std::size_t max_n) : values_(max_n + 1) {
  for (std::size_t n = 0; n <= max_n; ++n) {
    values_[n] = std::lgamma(static_cast<double>(n) + 1.0);
  }
}

double LogFactorialTable::operator()(std::uint64_t n) const {
  if (n < values_.size()) return values_[n];
  return std::lgamma(static_cast<double>(n) + 1.0);
}

const LogFactorialTable& default_log_factorials() {
  static const LogFactorialTable table(4096);
  return table;
}

namespace {

// log P(A = k) under the hypergeometric law fixed by the margins.
double log_pmf(std::uint64_t k, std::uint64_t r1, std::uint64_t r2, std::uint64_t c1,
               const LogFactorialTable& lf) {
  const std::uint64_t n = r1 + r2;
  return lf(r1) - lf(k) - lf(r1 - k) + lf(r2) - lf(c1 - k) - lf(r2 - (c1 - k)) -
         (lf(n) - lf(c1) - lf(n - c1));
}

void require_nonzero_margins(const ContingencyTable2x2& t, std::string_view test) {
  if (t.has_zero_margin()) {
    throw PreconditionError(fmt::format(
        "{}: zero margin in table ({}, {}, {}, {}); expected counts undefined", test, t.a,
        t.b, t.c, t.d));
  }
}

std::array<double, 4> expected_counts(const ContingencyTable2x2& t) {
  const double n = static_cast<double>(t.total());
  const double r1 = static_cast<double>(t.row1());
  const double r2 = static_cast<double>(t.row2());
  const double c1 = static_cast<double>(t.col1());
  const double c2 = static_cast<double>(t.col2());
  return {r1 * c1 / n, r1 * c2 / n, r2 * c1 / n, r2 * c2 / n};
}

std::array<double, 4> observed_counts(const ContingencyTable2x2& t) {
  return {static_cast<double>(t.a), static_cast<double>(t.b), static_cast<double>(t.c),
          static_cast<double>(t.d)};
}

TestOutcome make_outcome(TestMethod method, std::optional<double> statistic, double p,
                         double alpha) {
  p = std::clamp(p, 0.0, 1.0);
  return {method, statistic, p, p <= alpha, false};
}

}  // namespace

double hypergeometric_pmf(const ContingencyTable2x2& t, const LogFactorialTable& lf) {
  return std::exp(log_pmf(t.a, t.row1(), t.row2(), t.col1(), lf));
}

TestOutcome fisher_exact_two_tailed(const ContingencyTable2x2& t, double alpha,
                                    const LogFactorialTable& lf) {
  if (t.has_zero_margin()) {
    TestOutcome out{TestMethod::fisher_two_tailed, std::nullopt, 1.0, 1.0 <= alpha, true};
    return out;
  }
  const std::uint64_t r1 = t.row1();
  const std::uint64_t r2 = t.row2();
  const std::uint64_t c1 = t.col1();
  const std::uint64_t lo = c1 > r2 ? c1 - r2 : 0;
  const std::uint64_t hi = std::min(r1, c1);

  std::vector<double> logp;
  logp.reserve(hi - lo + 1);
  for (std::uint64_t k = lo; k <= hi; ++k) logp.push_back(log_pmf(k, r1, r2, c1, lf));
  const double max_log = *std::max_element(logp.begin(), logp.end());

  // Scaled by the mode to keep everything representable, then normalized.
  std::vector<double> dens(logp.size());
  double sum = 0;
  for (std::size_t i = 0; i < logp.size(); ++i) {
    dens[i] = std::exp(logp[i] - max_log);
    sum += dens[i];
  }
  const double observed = dens[t.a - lo];
  const double cutoff = observed * (1.0 + 1e-7);
  double tail = 0;
  for (double v : dens) {
    if (v <= cutoff) tail += v;
  }
  return make_outcome(TestMethod::fisher_two_tailed, std::nullopt, tail / sum, alpha);
}

double chi2_df1_survival(double x) {
  if (x <= 0) return 1.0;
  return std::erfc(std::sqrt(x / 2.0));
}

TestOutcome g_test(const ContingencyTable2x2& t, double alpha) {
  require_nonzero_margins(t, "g_test");
  const auto o = observed_counts(t);
  const auto e = expected_counts(t);
  double g = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    if (o[i] > 0) g += o[i] * std::log(o[i] / e[i]);
  }
  g = std::max(0.0, 2.0 * g);
  return make_outcome(TestMethod::g_test, g, chi2_df1_survival(g), alpha);
}

TestOutcome chi_square(const ContingencyTable2x2& t, bool yates, double alpha) {
  require_nonzero_margins(t, "chi_square");
  const auto o = observed_counts(t);
  const auto e = expected_counts(t);
  double correction = 0;
  if (yates) {
    correction = 0.5;
    for (std::size_t i = 0; i < 4; ++i) correction = std::min(correction, std::abs(o[i] - e[i]));
  }
  double x2 = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double dev = std::abs(o[i] - e[i]) - correction;
    x2 += dev * dev / e[i];
  }
  return make_outcome(yates ? TestMethod::chi_square_yates : TestMethod::chi_square, x2,
                      chi2_df1_survival(x2), alpha);
}

double normal_quantile_two_sided(double level) {
  if (!(level > 0.0 && level < 1.0)) {
    throw PreconditionError(fmt::format("confidence level {} not in (0, 1)", level));
  }
  const boost::math::normal standard;
  return boost::math::quantile(standard, 0.5 + level / 2.0);
}

ProportionCI wilson_ci(std::uint64_t k, std::uint64_t n, double level) {
  if (n == 0) throw PreconditionError("wilson_ci: n must be positive");
  if (k > n) throw PreconditionError(fmt::format("wilson_ci: k={} exceeds n={}", k, n));
  const double z = normal_quantile_two_sided(level);
  const double nn = static_cast<double>(n);
  const double phat = static_cast<double>(k) / nn;
  const double z2 = z * z;
  const double denom = 1.0 + z2 / nn;
  const double center = (phat + z2 / (2.0 * nn)) / denom;
  const double half = z * std::sqrt(phat * (1.0 - phat) / nn + z2 / (4.0 * nn * nn)) / denom;
  ProportionCI ci{k, n, level, std::max(0.0, center - half), std::min(1.0, center + half)};
  if (k == 0) ci.lo = 0.0;
  if (k == n) ci.hi = 1.0;
  ci.lo = std::min(ci.lo, phat);
  ci.hi = std::max(ci.hi, phat);
  return ci;
}

}  // namespace blindeval::stats
