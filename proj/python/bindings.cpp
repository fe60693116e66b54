#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "blindeval/analysis.hpp"
#include "blindeval/cli.hpp"
#include "blindeval/corpus.hpp"
#include "blindeval/error.hpp"
#include "blindeval/interleaver.hpp"
#include "blindeval/metrics.hpp"
#include "blindeval/stats.hpp"

namespace py = pybind11;
using namespace blindeval;

namespace {

stats::ContingencyTable2x2 table(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                                 std::uint64_t d) {
  return {a, b, c, d};
}

// Whole-pipeline helpers exchange the on-disk text formats so that Python
// sees exactly what the command line tool reads and writes.

py::tuple prepare(const std::string& corpus_tsv, const std::vector<std::string>& raters,
                  std::uint64_t seed, std::size_t segments_per_rater,
                  const std::string& balance_scope) {
  std::istringstream in(corpus_tsv);
  const auto doc = corpus::load_aligned(in);
  PreparationConfig cfg;
  cfg.seed = seed;
  cfg.raters = raters;
  cfg.segments_per_rater = segments_per_rater;
  const auto scope = parse_balance_scope(balance_scope);
  if (!scope) throw PreconditionError("unknown balance scope '" + balance_scope + "'");
  cfg.balance_scope = *scope;
  cfg.check();
  const auto prepared =
      interleaver::interleave(doc, interleaver::partition_sections(doc, cfg), cfg);
  py::dict documents;
  for (const auto& d : prepared.documents) {
    std::ostringstream ss;
    interleaver::write_prepared_tsv(d, ss);
    documents[py::str(d.rater_id)] = ss.str();
  }
  std::ostringstream key;
  interleaver::write_key_tsv(prepared.key, key);
  return py::make_tuple(documents, key.str());
}

std::string analyze(const std::string& annotations_jsonl, const std::string& key_tsv,
                    double alpha, std::pair<int, int> thresholds, bool reproducible) {
  std::istringstream ann(annotations_jsonl);
  std::istringstream key_in(key_tsv);
  const auto key = interleaver::read_key_tsv(key_in);
  analysis::AnalysisConfig cfg;
  cfg.alpha = alpha;
  cfg.thresholds = {thresholds.first, thresholds.second};
  cfg.check();
  const auto ds = analysis::exclude_incomplete(read_jsonl(ann), key);
  analysis::ReportOptions opts;
  opts.reproducible = reproducible;
  return analysis::results_json(analysis::analyze(ds, cfg), ds, opts).dump();
}

py::tuple run_cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  int code;
  {
    py::gil_scoped_release release;
    code = cli::run(args, out, err);
  }
  return py::make_tuple(code, out.str(), err.str());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Blinded HT/MT post-editing evaluation";
  m.attr("__version__") = BLINDEVAL_VERSION;

  py::register_exception<Error>(m, "Error", PyExc_ValueError);

  py::class_<stats::ContingencyTable2x2>(m, "ContingencyTable")
      .def(py::init(&table), py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"))
      .def_readonly("a", &stats::ContingencyTable2x2::a)
      .def_readonly("b", &stats::ContingencyTable2x2::b)
      .def_readonly("c", &stats::ContingencyTable2x2::c)
      .def_readonly("d", &stats::ContingencyTable2x2::d)
      .def("__repr__", [](const stats::ContingencyTable2x2& t) {
        return "ContingencyTable(" + std::to_string(t.a) + ", " + std::to_string(t.b) + ", " +
               std::to_string(t.c) + ", " + std::to_string(t.d) + ")";
      });

  py::class_<stats::TestOutcome>(m, "TestOutcome")
      .def_property_readonly("method",
                             [](const stats::TestOutcome& o) { return std::string(to_string(o.method)); })
      .def_readonly("statistic", &stats::TestOutcome::statistic)
      .def_readonly("p", &stats::TestOutcome::p)
      .def_readonly("significant", &stats::TestOutcome::significant)
      .def_readonly("degenerate", &stats::TestOutcome::degenerate);

  py::class_<stats::ProportionCI>(m, "ProportionCI")
      .def_readonly("k", &stats::ProportionCI::k)
      .def_readonly("n", &stats::ProportionCI::n)
      .def_readonly("level", &stats::ProportionCI::level)
      .def_readonly("lo", &stats::ProportionCI::lo)
      .def_readonly("hi", &stats::ProportionCI::hi);

  m.def("fisher_exact", [](std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                           double alpha) { return stats::fisher_exact_two_tailed(table(a, b, c, d), alpha); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("alpha") = stats::kDefaultAlpha,
        "Two-tailed Fisher's exact test on [[a, b], [c, d]].");
  m.def("g_test", [](std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                     double alpha) { return stats::g_test(table(a, b, c, d), alpha); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("alpha") = stats::kDefaultAlpha);
  m.def("chi_square", [](std::uint64_t a, std::uint64_t b, std::uint64_t c, std::uint64_t d,
                         bool yates, double alpha) { return stats::chi_square(table(a, b, c, d), yates, alpha); },
        py::arg("a"), py::arg("b"), py::arg("c"), py::arg("d"), py::arg("yates") = false,
        py::arg("alpha") = stats::kDefaultAlpha);
  m.def("wilson_ci", &stats::wilson_ci, py::arg("k"), py::arg("n"), py::arg("level") = 0.95);

  py::class_<metrics::TerBreakdown>(m, "TerBreakdown")
      .def_readonly("insertions", &metrics::TerBreakdown::insertions)
      .def_readonly("deletions", &metrics::TerBreakdown::deletions)
      .def_readonly("substitutions", &metrics::TerBreakdown::substitutions)
      .def_readonly("shifts", &metrics::TerBreakdown::shifts)
      .def_readonly("ref_tokens", &metrics::TerBreakdown::ref_tokens)
      .def_property_readonly("total_edits", &metrics::TerBreakdown::total_edits);

  m.def("med", &metrics::med, py::arg("original"), py::arg("postedited"),
        "Character-level Levenshtein distance.");
  m.def("tokenize", &metrics::tokenize, py::arg("text"));
  m.def("ter_edits", [](const std::string& hyp, const std::string& ref) {
          return metrics::ter_edits(metrics::tokenize(hyp), metrics::tokenize(ref));
        },
        py::arg("hypothesis"), py::arg("reference"));
  m.def("corpus_hter", [](const std::vector<std::pair<std::string, std::string>>& pairs) {
          std::vector<metrics::TerBreakdown> parts;
          for (const auto& [hyp, ref] : pairs) {
            parts.push_back(metrics::ter_edits(metrics::tokenize(hyp), metrics::tokenize(ref)));
          }
          return metrics::corpus_hter(parts);
        },
        py::arg("pairs"), "100 * edits / reference tokens over (hypothesis, reference) pairs.");

  m.def("validate_corpus", [](const std::string& corpus_tsv) {
          std::istringstream in(corpus_tsv);
          return corpus::format_findings_json(corpus::validate(corpus::load_aligned(in)));
        },
        py::arg("corpus_tsv"));
  m.def("prepare", &prepare, py::arg("corpus_tsv"), py::arg("raters"), py::arg("seed"),
        py::arg("segments_per_rater") = 150, py::arg("balance_scope") = "per_section");
  m.def("analyze", &analyze, py::arg("annotations_jsonl"), py::arg("key_tsv"),
        py::arg("alpha") = stats::kDefaultAlpha, py::arg("thresholds") = std::pair<int, int>{0, 5},
        py::arg("reproducible") = true);
  m.def("run_cli", &run_cli, py::arg("args"));
}
