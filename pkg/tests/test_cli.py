import csv
import json
import math

import numpy as np
import pytest

from spandrop import jsonl
from spandrop.analytics import binomial_pmf, keep_count_distribution
from spandrop.cli import main
from spandrop.core import DropConfig


def read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        return list(jsonl.read_examples(fh))


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def dataset(tmp_path):
    path = tmp_path / "data.jsonl"
    assert main(["gen", "--needle", "cat", "--n", "300", "--count", "400", "--seed", "1",
                 "--out", str(path)]) == 0
    return path


def test_gen_balance_and_summary(tmp_path, capsys):
    out = tmp_path / "g.jsonl"
    assert main(["gen", "--needle", "cat", "--n", "300", "--count", "10000", "--seed", "1",
                 "--out", str(out)]) == 0
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["count"] == 10_000
    assert summary["positives"] == summary["negatives"] == 5000
    assert summary["label_oracle_disagreements"] == 0
    assert "redundancy_rate" in summary
    lines = out.read_text().splitlines()
    assert len(lines) == 10_000
    labels = [json.loads(line)["label"] for line in lines]
    assert labels.count(1) == 5000


def test_gen_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    args = ["gen", "--count", "50", "--n", "40", "--seed", "7"]
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_seed_from_environment(tmp_path, monkeypatch):
    monkeypatch.setenv("SPANDROP_SEED", "7")
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["gen", "--count", "20", "--n", "40", "--out", str(a)]) == 0
    assert main(["gen", "--count", "20", "--n", "40", "--seed", "7", "--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_gen_invalid_fixed_positions(capsys):
    assert main(["gen", "--position-mode", "fixed=10,110,210", "--n", "100", "--count", "2"]) == 1
    assert "out of range" in capsys.readouterr().err


def test_gen_bad_flag_exits_one():
    with pytest.raises(SystemExit) as err:
        main(["gen", "--n", "abc"])
    assert err.value.code == 1


def test_gen_position_modes(tmp_path):
    out = tmp_path / "f.jsonl"
    assert main(["gen", "--position-mode", "fixed=10,110,210", "--count", "20",
                 "--out", str(out)]) == 0
    for ex in read_jsonl(out):
        if ex.label == 1:
            assert sorted(ex.supporting) == [10, 110, 210]
    out = tmp_path / "k.jsonl"
    assert main(["gen", "--position-mode", "first=100", "--count", "20", "--out", str(out)]) == 0
    assert all(max(ex.supporting, default=0) < 100 for ex in read_jsonl(out))


def test_augment_mean_length(dataset, tmp_path, capsys):
    big = tmp_path / "big.jsonl"
    assert main(["gen", "--count", "2500", "--seed", "3", "--out", str(big)]) == 0
    out = tmp_path / "aug.jsonl"
    capsys.readouterr()
    assert main(["augment", "--input", str(big), "--out", str(out), "--mode", "bernoulli",
                 "--p", "0.1", "--policy", "off", "--epochs", "4", "--seed", "2"]) == 0
    summary = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
    assert summary["records"] == 10_000
    assert abs(summary["mean_output_length"] - 270) < 1
    lengths = [len(ex.spans) for ex in read_jsonl(out)]
    assert abs(sum(lengths) / len(lengths) - 270) < 1


def test_augment_p_zero_identity(dataset, tmp_path):
    out = tmp_path / "aug.jsonl"
    assert main(["augment", "--input", str(dataset), "--out", str(out), "--p", "0",
                 "--mode", "beta_bernoulli"]) == 0
    src, aug = read_jsonl(dataset), read_jsonl(out)
    assert [e.spans for e in src] == [e.spans for e in aug]
    assert all(e.source_id == s.id for e, s in zip(aug, src))


def test_augment_mask_mode_keeps_length(dataset, tmp_path):
    out = tmp_path / "aug.jsonl"
    assert main(["augment", "--input", str(dataset), "--out", str(out), "--mode", "mask_bernoulli",
                 "--p", "0.3", "--mask-token", "_", "--epochs", "2"]) == 0
    src, aug = read_jsonl(dataset), read_jsonl(out)
    assert len(aug) == 2 * len(src)
    for i, ex in enumerate(aug):
        assert len(ex.spans) == len(src[i // 2].spans)
        assert ex.pi is None


def test_augment_provenance_and_rejection(dataset, tmp_path):
    out = tmp_path / "aug.jsonl"
    assert main(["augment", "--input", str(dataset), "--out", str(out), "--mode", "beta_bernoulli",
                 "--p", "0.2", "--gamma", "1", "--policy", "rejection"]) == 0
    src = {e.id: e for e in read_jsonl(dataset)}
    for ex in read_jsonl(out):
        orig = src[ex.source_id]
        assert 0 <= ex.pi <= 1
        assert [orig.spans[i].content for i in ex.kept_indices] == ex.contents()
        assert len(ex.supporting) == len(orig.supporting)


def test_augment_workers_match(dataset, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    base = ["augment", "--input", str(dataset), "--mode", "beta_bernoulli", "--p", "0.3",
            "--epochs", "2", "--seed", "4"]
    assert main(base + ["--out", str(a), "--workers", "1"]) == 0
    assert main(base + ["--out", str(b), "--workers", "2"]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_augment_malformed_lines(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text('{"id": "a", "spans": [["x"], ["y"]], "supporting": [0]}\n'
                   '{broken\n'
                   '{"id": "b", "spans": [["x"]], "supporting": [3]}\n'
                   '{"id": "c", "spans": [["z"]]}\n')
    out = tmp_path / "out.jsonl"
    assert main(["augment", "--input", str(src), "--out", str(out), "--p", "0.1"]) == 0
    err = capsys.readouterr().err
    assert "line 2" in err and "line 3" in err
    assert [e.source_id for e in read_jsonl(out)] == ["a", "c"]
    assert main(["augment", "--input", str(src), "--out", str(out), "--strict"]) == 1
    assert "line 2" in capsys.readouterr().err


def test_augment_exhausted_retries(tmp_path, capsys):
    src = tmp_path / "in.jsonl"
    src.write_text(json.dumps({"id": "a", "spans": [["t"]] * 40, "supporting": list(range(40))}) + "\n")
    out = tmp_path / "out.jsonl"
    args = ["augment", "--input", str(src), "--out", str(out), "--p", "0.5", "--max-retries", "2"]
    assert main(args) == 0
    assert json.loads(capsys.readouterr().err.strip().splitlines()[-1])["retry_failures"] == 1
    assert main(args + ["--strict"]) == 1


def test_segment_adaptive(tmp_path):
    src = tmp_path / "raw.jsonl"
    src.write_text(json.dumps({"id": "q1", "tokens": "the cat sat on the mat",
                               "question": "where is the cat", "label": "mat"}) + "\n")
    out = tmp_path / "seg.jsonl"
    assert main(["segment", "--input", str(src), "--out", str(out), "--strategy", "adaptive=2",
                 "--reference-field", "question"]) == 0
    (ex,) = read_jsonl(out)
    assert [list(s.content) for s in ex.spans] == [["the", "cat"], ["sat"], ["on"], ["the"], ["mat"]]
    assert ex.supporting == {0} and ex.label == "mat"


def test_segment_sentences_and_errors(tmp_path, capsys):
    src = tmp_path / "raw.jsonl"
    src.write_text(json.dumps({"id": "d", "tokens": ["A", "b", ".", "C", "d", "!"], "q": ["c", "d"]}) + "\n")
    out = tmp_path / "seg.jsonl"
    assert main(["segment", "--input", str(src), "--out", str(out), "--strategy", "sentence=.,!",
                 "--reference-field", "q"]) == 0
    (ex,) = read_jsonl(out)
    assert len(ex.spans) == 2 and ex.supporting == {1}
    assert main(["segment", "--input", str(src), "--out", str(out), "--strategy", "sentence=.,!",
                 "--reference-field", "q", "--no-fold-case"]) == 0
    assert read_jsonl(out)[0].supporting == set()
    assert main(["segment", "--input", str(src), "--strategy", "adaptive=2"]) == 1
    assert main(["segment", "--input", str(src), "--strategy", "fixed=0"]) == 1
    assert main(["segment", "--input", str(src), "--tokens-field", "nope"]) == 1


def test_analyze_panels(tmp_path):
    assert main(["analyze", "--panel", "all", "--out", str(tmp_path / "fig")]) == 0
    a = read_csv(tmp_path / "fig" / "panel_a.csv")
    row = a[80]
    assert row["k"] == "80"
    assert float(row["pmf_bernoulli"]) == pytest.approx(0.0993, abs=5e-4)
    assert float(row["pmf_beta"]) == pytest.approx(0.0200, abs=5e-4)
    c = read_csv(tmp_path / "fig" / "panel_c.csv")
    assert c[0]["n"] == "1"
    assert all(float(v) == pytest.approx(0.32508, abs=5e-6) for k, v in c[0].items() if k != "n")
    assert [r["n"] for r in c] == ["1", "10", "100", "1000", "10000", "100000"]
    b = read_csv(tmp_path / "fig" / "panel_b.csv")
    assert list(b[0]) == ["m", "gamma_inf", "gamma_100", "gamma_10", "gamma_1", "gamma_0.1", "gamma_0.01"]
    assert float(b[9]["gamma_1"]) == pytest.approx(math.log(4 / 14), rel=1e-12)


def test_analyze_noise_free_at_p_one_tenth(tmp_path):
    out = tmp_path / "b.csv"
    assert main(["analyze", "--panel", "b", "--p", "0.1", "--ms", "1-10", "--out", str(out)]) == 0
    row = read_csv(out)[9]
    assert row["m"] == "10"
    assert round(math.exp(float(row["gamma_1"])), 3) == 0.474
    assert round(math.exp(float(row["gamma_inf"])), 3) == 0.349


def test_analyze_full_precision(tmp_path):
    out = tmp_path / "a.csv"
    assert main(["analyze", "--panel", "a", "--out", str(out)]) == 0
    k, bern, beta = out.read_text().splitlines()[81].split(",")
    assert k == "80"
    assert float(bern) == binomial_pmf(np.arange(101), 100, 0.2)[80]
    assert float(beta) == keep_count_distribution(100, DropConfig(mode="beta_bernoulli", p=0.2))[80]


def test_analyze_invalid_grid():
    assert main(["analyze", "--panel", "c", "--gammas", "1,-2"]) == 1
    assert main(["analyze", "--panel", "c", "--ns", "0,10"]) == 1
    assert main(["analyze", "--panel", "all"]) == 1
    with pytest.raises(SystemExit) as err:
        main(["analyze", "--panel", "c", "--ns", "a,b"])
    assert err.value.code == 1


def test_verify_monte_carlo_pass(capsys):
    code = main(["verify", "--n", "100", "--m", "10", "--mode", "beta_bernoulli", "--p", "0.1",
                 "--gamma", "1", "--trials", "1000000"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0 and report["pass"]
    assert report["noise_free_gap"] < 0.002 and report["tv_distance"] < 0.01
    assert report["trials"] == 1_000_000


def test_verify_exhaustive(capsys):
    code = main(["verify", "--n", "12", "--m", "3", "--mode", "bernoulli", "--p", "0.3", "--exhaustive"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0
    assert report["tv_distance"] < 1e-6 and report["exhaustive"]
    code = main(["verify", "--n", "8", "--m", "2", "--mode", "beta_bernoulli", "--p", "0.3",
                 "--gamma", "2", "--exhaustive"])
    assert code == 0 and json.loads(capsys.readouterr().out)["tv_distance"] < 1e-6


def test_verify_zero_tolerance_fails(capsys):
    code = main(["verify", "--n", "10", "--m", "2", "--trials", "1000", "--tv-tol", "0"])
    assert code == 2
    assert json.loads(capsys.readouterr().out)["pass"] is False


def test_verify_infinite_gamma(capsys):
    code = main(["verify", "--n", "20", "--m", "2", "--mode", "beta_bernoulli", "--gamma", "inf",
                 "--trials", "100000"])
    report = json.loads(capsys.readouterr().out)
    assert code == 0 and report["config"]["gamma"] == "inf"


def test_verify_validation():
    assert main(["verify", "--n", "5", "--m", "6"]) == 1
    assert main(["verify", "--p", "1.0"]) == 1
    assert main(["verify", "--n", "30", "--exhaustive"]) == 1
