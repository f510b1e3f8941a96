import csv
import io
import json
import subprocess
import sys

import numpy as np
import pytest
from scipy import stats

from disttest.cli import main, planted, power_rows, spec_hash
from disttest.dist_core import SiirvSpec, spec_to_dict
from disttest.ledger import Ledger
from disttest.pmd import hard_instance, norms_for_lb
from disttest.report import validate_report


def write_json(path, obj):
    path.write_text(json.dumps(obj))
    return str(path)


@pytest.fixture
def bin100(tmp_path):
    return write_json(tmp_path / "bin.json", spec_to_dict(SiirvSpec.binomial(100, 0.5)))


def test_pbd_report_is_deterministic(tmp_path, bin100):
    outs = []
    for i in range(2):
        out = tmp_path / f"r{i}.json"
        code = main(["test", "--class", "pbd", "--n", "100", "--eps", "0.25", "--seed", "7", "--spec", bin100, "--out", str(out)])
        outs.append(out.read_bytes())
    assert code == 0 and outs[0] == outs[1]
    validate_report(json.loads(outs[0]))
    proc = subprocess.run(
        [sys.executable, "-m", "disttest", "test", "--class", "pbd", "--n", "100", "--eps", "0.25", "--seed", "7", "--spec", bin100],
        capture_output=True,
    )
    assert proc.returncode == 0 and proc.stdout == outs[0]


def test_k1_is_usage_error(bin100, capsys):
    assert main(["test", "--class", "siirv", "--n", "10", "--k", "1", "--eps", "0.2", "--spec", bin100]) == 2


def test_malformed_spec_names_field(tmp_path, capsys):
    bad = write_json(tmp_path / "bad.json", {"type": "siirv", "summands": [[0.5, 0.6]]})
    assert main(["test", "--class", "pbd", "--n", "1", "--eps", "0.2", "--spec", bad]) == 2
    assert "summands" in capsys.readouterr().err


def test_uniform_sample_file_rejected(tmp_path):
    rng = np.random.default_rng(0)
    f = tmp_path / "u.txt"
    f.write_text("# uniform\n" + "\n".join(map(str, rng.integers(0, 401, size=10_000))) + "\n")
    codes = [main(["test", "--class", "pbd", "--n", "100", "--eps", "0.1", "--seed", str(s), "--samples", str(f), "--out", str(tmp_path / "r.json")]) for s in range(1, 21)]
    assert sum(c == 1 for c in codes) >= 12


def test_power_trials_one_and_hard_norms(tmp_path):
    rows = power_rows("pmd", ["hard"], [2, 6], 2, [0.5], 1, 3, Ledger())
    for row in rows:
        assert row["accept_rate"] in (0.0, 1.0)
        assert float(row["l2_norm_sq"]) == norms_for_lb(hard_instance(row["n"], 2))[0]
    out = tmp_path / "p.csv"
    assert main(["power", "--class", "pmd", "--instance", "hard", "--grid-n", "2", "--k", "2", "--grid-eps", "0.5", "--trials", "1", "--out", str(out)]) == 0
    got = list(csv.DictReader(out.open()))
    assert {"class", "n", "k", "epsilon", "m_total_mean", "accept_rate", "reject_stage_histogram", "wall_ms"} <= set(got[0])
    assert float(got[0]["l2_norm_sq"]) == 3 / 8


def test_power_rejects_zero_trials():
    assert main(["power", "--class", "pbd", "--instance", "binomial", "--grid-n", "8", "--grid-eps", "0.5", "--trials", "0"]) == 2


def _sample(tmp_path, spec, count, seed=1):
    path = write_json(tmp_path / "s.json", spec)
    out = tmp_path / "out.txt"
    assert main(["sample", "--spec", path, "--count", str(count), "--seed", str(seed), "--out", str(out)]) == 0
    return out.read_text().splitlines()


def test_sample_header_only(tmp_path):
    spec = spec_to_dict(SiirvSpec.binomial(10, 0.5))
    lines = _sample(tmp_path, spec, 0)
    assert len(lines) == 1 and lines[0].startswith("#") and "seed=1" in lines[0]


def test_sample_point_mass(tmp_path):
    lines = _sample(tmp_path, {"type": "pmf", "offset": 4, "weights": [1.0]}, 50)
    assert set(lines[1:]) == {"4"}


def test_sample_pmd_tuples(tmp_path):
    lines = _sample(tmp_path, {"type": "pmd", "summands": [[0.5, 0.5]] * 3}, 20)
    for line in lines[1:]:
        a, b = map(int, line.split())
        assert a + b == 3


def test_sample_binomial_chi_square(tmp_path):
    lines = _sample(tmp_path, spec_to_dict(SiirvSpec.binomial(10, 0.5)), 100_000, seed=11)
    x = np.array(lines[1:], dtype=int)
    obs = np.bincount(x, minlength=11)
    exp = stats.binom.pmf(np.arange(11), 10, 0.5) * x.size
    assert stats.chisquare(obs, exp).pvalue > 0.001


def test_ledger_env_override(tmp_path, bin100, monkeypatch):
    monkeypatch.setenv("DISTTEST_LEDGER", write_json(tmp_path / "l.json", {"fourier_C": 1500}))
    out = tmp_path / "r.json"
    main(["test", "--class", "pbd", "--n", "100", "--eps", "0.25", "--spec", bin100, "--out", str(out)])
    assert json.loads(out.read_text())["ledger"]["fourier_C"] == 1500
    monkeypatch.setenv("DISTTEST_LEDGER", write_json(tmp_path / "l2.json", {"fourier_C": -1}))
    assert main(["test", "--class", "pbd", "--n", "100", "--eps", "0.25", "--spec", bin100]) == 2


@pytest.mark.parametrize(
    "cls, instance, n, k, eps",
    [
        ("siirv", "binomial", 60, 3, 0.3),
        ("pmd", "hard", 20, 2, 0.4),
        ("logconcave", "binomial", 100, None, 0.3),
        ("logconcave", "two-spike", 40, None, 0.3),
        ("plugin:uniform-interval", "uniform", 20, 10, 0.3),
        ("plugin:uniform-interval", "two-block", 20, 10, 0.3),
    ],
)
def test_reports_schema_valid(tmp_path, cls, instance, n, k, eps):
    spec, _ = planted(cls, instance, n, k)
    path = write_json(tmp_path / "s.json", spec_to_dict(spec))
    out = tmp_path / "r.json"
    argv = ["test", "--class", cls, "--n", str(n), "--eps", str(eps), "--spec", path, "--out", str(out), "--timings"]
    if k is not None:
        argv += ["--k", str(k)]
    assert main(argv) in (0, 1)
    validate_report(json.loads(out.read_text()))


def test_spec_hash_stable():
    a = SiirvSpec.binomial(5, 0.25)
    assert spec_hash(a) == spec_hash(SiirvSpec.binomial(5, 0.25))
    assert spec_hash(a) != spec_hash(SiirvSpec.binomial(5, 0.5))
