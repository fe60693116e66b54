import json
import os
import subprocess

import pytest

import blindeval


def corpus_tsv(n, pair="de-en"):
    rows = [f"# language_pair = {pair}", "id\tsource\tht\tmt"]
    rows += [f"s{i:03}\tQuelle Satz {i}.\tHuman sentence {i}.\tMachine sentence {i}." for i in range(1, n + 1)]
    return "\n".join(rows) + "\n"


def test_published_p_values():
    assert blindeval.fisher_exact(14, 223, 12, 226).p == pytest.approx(0.693, abs=1e-3)
    outcome = blindeval.fisher_exact(1, 149, 5, 145)
    assert outcome.p == pytest.approx(0.214, abs=1e-3)
    assert outcome.method == "fisher_two_tailed"
    assert not outcome.significant
    assert blindeval.g_test(1, 149, 5, 145).p == pytest.approx(0.085, abs=2e-3)


def test_wilson_and_chi_square():
    ci = blindeval.wilson_ci(1, 150)
    assert ci.lo < 1 / 150 < ci.hi
    assert 0.0 <= ci.lo and ci.hi <= 1.0
    plain = blindeval.chi_square(10, 20, 20, 10)
    corrected = blindeval.chi_square(10, 20, 20, 10, yates=True)
    assert corrected.statistic < plain.statistic


def test_edit_metrics():
    assert blindeval.med("kitten", "sitting") == 3
    assert blindeval.med("Straße", "Strasse") == 2
    assert blindeval.tokenize("Hello, world.") == ["Hello", ",", "world", "."]
    ter = blindeval.ter_edits("c a b", "a b c")
    assert ter.shifts == 1
    assert ter.total_edits == 1
    ref = " ".join(f"w{i}" for i in range(10))
    assert blindeval.corpus_hter([(ref.replace("w3", "x"), ref)]) == pytest.approx(10.0)


def test_errors_surface_as_value_errors():
    with pytest.raises(blindeval.Error, match="need 6, have 5"):
        blindeval.prepare(corpus_tsv(5), ["a"], seed=1, segments_per_rater=6)
    with pytest.raises(ValueError):
        blindeval.corpus_hter([])


def test_validate_corpus():
    assert blindeval.validate_corpus(corpus_tsv(4)) == []
    same = corpus_tsv(1).replace("Machine sentence 1.", "Human sentence 1.")
    assert blindeval.validate_corpus(same) == []
    with pytest.raises(blindeval.Error, match="row 4"):
        blindeval.validate_corpus(corpus_tsv(2).replace("\tMachine sentence 2.", ""))


def test_prepare_and_analyze_round_trip():
    documents, key = blindeval.prepare(corpus_tsv(12), ["a", "b"], seed=5, segments_per_rater=6)
    again, key_again = blindeval.prepare(corpus_tsv(12), ["a", "b"], seed=5, segments_per_rater=6)
    assert (documents, key) == (again, key_again)
    assert sorted(documents) == ["a", "b"]
    assert key.startswith("# blinding key")

    records = []
    for rater, sheet in documents.items():
        lines = sheet.splitlines()
        assert lines[0].split("\t")[:4] == ["id", "source", "target", "postedit"]
        for line in lines[1:]:
            cells = line.split("\t")
            assert "HT" not in cells and "MT" not in cells
            target = cells[2]
            edited = target + " more" if target.startswith("Machine") else target
            records.append(
                {
                    "segment_id": cells[0],
                    "rater_id": rater,
                    "target": target,
                    "postedit": edited,
                    "flags": {"terminology": False, "omission": False, "typography": False},
                    "completed": True,
                    "submitted_at": "2021-03-01T09:30:00.000Z",
                }
            )
    results = blindeval.analyze("\n".join(json.dumps(r) for r in records) + "\n", key)
    med = {c["key"]: c for c in results["comparisons"]}["med_gt_0"]
    assert med["table"] == {"a": 0, "b": 6, "c": 6, "d": 0}
    assert med["fisher"]["p"] == pytest.approx(0.002165, abs=1e-6)


def test_run_cli_exit_codes(tmp_path):
    code, out, err = blindeval.run_cli(["prepare", "--corpus", str(tmp_path / "none.tsv"), "--out", str(tmp_path)])
    assert code == 2
    assert "--raters" in err or "--seed" in err
    code, _, err = blindeval.run_cli(["analyze", "--annotations", str(tmp_path / "x.jsonl")])
    assert code == 2
    assert "refusing to analyze blinded data" in err


@pytest.mark.skipif("BLINDEVAL_CLI" not in os.environ, reason="command line tool not built")
def test_installed_tool(tmp_path):
    corpus = tmp_path / "corpus.tsv"
    corpus.write_text(corpus_tsv(6))
    args = [os.environ["BLINDEVAL_CLI"], "prepare", "--corpus", str(corpus), "--raters", "a",
            "--segments-per-rater", "6", "--seed", "3", "--out", str(tmp_path / "out")]
    done = subprocess.run(args, capture_output=True, text=True, check=False)
    assert done.returncode == 0, done.stderr
    assert "prepared 1 document(s), 6 segments, seed=3" in done.stdout
    assert (tmp_path / "out" / "key" / "blinding_key.tsv").exists()
    version = subprocess.run([os.environ["BLINDEVAL_CLI"], "--version"], capture_output=True, text=True)
    assert blindeval.__version__ in version.stdout
