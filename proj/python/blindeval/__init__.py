"""Blinded HT/MT post-editing evaluation."""

import json

from . import _core
from ._core import (
    ContingencyTable,
    Error,
    ProportionCI,
    TerBreakdown,
    TestOutcome,
    __version__,
    chi_square,
    corpus_hter,
    fisher_exact,
    g_test,
    med,
    prepare,
    run_cli,
    ter_edits,
    tokenize,
    wilson_ci,
)


def validate_corpus(corpus_tsv):
    """Findings for an aligned corpus as a list of dicts; empty when valid."""
    return json.loads(_core.validate_corpus(corpus_tsv))


def analyze(annotations_jsonl, key_tsv, alpha=0.05, thresholds=(0, 5), reproducible=True):
    """Runs the HT/MT comparison and returns the results document as a dict."""
    return json.loads(_core.analyze(annotations_jsonl, key_tsv, alpha, tuple(thresholds), reproducible))


__all__ = [
    "ContingencyTable",
    "Error",
    "ProportionCI",
    "TerBreakdown",
    "TestOutcome",
    "__version__",
    "analyze",
    "chi_square",
    "corpus_hter",
    "fisher_exact",
    "g_test",
    "med",
    "prepare",
    "run_cli",
    "ter_edits",
    "tokenize",
    "validate_corpus",
    "wilson_ci",
]
