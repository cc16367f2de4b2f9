import json
import os
import subprocess
import sys

import pytest
from hypothesis import given, settings, strategies as st

from latcap.cache import RESULTS_SCHEMA, CacheError, CountCache, ResultsLog, cache_dir, csv_text, decimal_str
from latcap.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


# --------------------------------------------------------------------------
# cache

def test_cache_dir_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("LATCAP_CACHE_DIR", str(tmp_path / "c"))
    assert cache_dir() == tmp_path / "c"


@given(st.integers(0, 10 ** 60), st.integers(1, 9), st.integers(0, 40), st.booleans())
@settings(max_examples=40, deadline=None)
def test_count_cache_round_trip(value, m, n, flag):
    import tempfile
    with tempfile.TemporaryDirectory() as d:
        c = CountCache(os.path.join(d, "counts.txt"))
        key = CountCache.key("rect", m, n, (), flag)
        assert c.put(key, value)
        assert not c.put(key, value)
        assert c.get(key) == value
        assert str(CountCache(c.path).load()[key]) == str(value)


def test_count_cache_record_format(tmp_path):
    c = CountCache(tmp_path / "counts.txt")
    c.put(CountCache.key("trap4", 4, 4, (2, 2), True), 12345)
    assert (tmp_path / "counts.txt").read_text() == "trap4 4 4 2,2 nos2s 12345\n"


def test_count_cache_conflict(tmp_path):
    c = CountCache(tmp_path / "counts.txt")
    key = CountCache.key("rect", 1, 1)
    c.put(key, 2)
    with pytest.raises(CacheError):
        c.put(key, 3)
    (tmp_path / "counts.txt").write_text("garbage line\n")
    with pytest.raises(CacheError):
        c.load()


def test_results_log_header(tmp_path):
    log = ResultsLog(tmp_path / "r.jsonl")
    log.append({"a": 1})
    log.append({"a": 2})
    lines = (tmp_path / "r.jsonl").read_text().splitlines()
    assert lines[0] == RESULTS_SCHEMA
    assert [json.loads(x)["a"] for x in lines[1:]] == [1, 2]
    assert log.read() == [{"a": 1}, {"a": 2}]


def test_decimal_strings():
    assert decimal_str("2.10392283469307790885", 12) == "2.10392283469"
    assert decimal_str(20, 2) == "20"
    assert csv_text(("a", "b"), [(1, 2)]) == "a,b\n1,2\n"


# --------------------------------------------------------------------------
# commands

def test_count_prints_binomial(capsys):
    code, out, _ = run(capsys, "count", "--kind", "rect", "--m", "1", "--n", "3")
    assert code == 0 and out.strip() == "20"
    assert "rect 1 3 - s2s 20" in (cache_dir() / "counts.txt").read_text()


def test_count_uses_cache(capsys):
    path = cache_dir() / "counts.txt"
    path.parent.mkdir(parents=True)
    path.write_text("rect 2 2 - s2s 999\n")
    code, out, _ = run(capsys, "count", "--kind", "rect", "--m", "2", "--n", "2")
    assert out.strip() == "999"


def test_unknown_flag_leaves_cache_untouched(capsys):
    run(capsys, "count", "--kind", "rect", "--m", "1", "--n", "2")
    before = (cache_dir() / "counts.txt").read_bytes()
    with pytest.raises(SystemExit) as e:
        main(["count", "--kind", "rect", "--m", "1", "--n", "4", "--frobnicate"])
    assert e.value.code != 0
    assert (cache_dir() / "counts.txt").read_bytes() == before


def test_usage_error_exit(capsys):
    code, _, err = run(capsys, "count", "--kind", "trap4", "--profile", "1")
    assert code != 0 and "error" in err


def test_trapezoid_counts(capsys):
    _, out, _ = run(capsys, "count", "--kind", "trap4", "--profile", "2,2", "--no-s2s")
    assert int(out) > 0
    _, out, _ = run(capsys, "count", "--kind", "trap5", "--profile", "1,2,0", "--no-s2s")
    assert int(out) >= 0


def test_series_check_width5(capsys):
    code, out, _ = run(capsys, "series", "--width", "5", "--order", "4", "--check", "all")
    assert code == 0
    rows = out.strip().splitlines()[1:]
    assert rows and all(r.endswith(",0,zero") for r in rows)


def test_series_coefficients(capsys):
    code, out, _ = run(capsys, "series", "--width", "4", "--order", "12")
    assert "J,2,6" in out and "J,4,714" in out


def test_series_dump_csv(tmp_path, capsys):
    path = tmp_path / "dump.csv"
    code, _, _ = run(capsys, "series", "--width", "4", "--order", "4", "--dump", "csv", "--out", str(path))
    lines = path.read_text().splitlines()
    assert code == 0 and lines[0].startswith("member,x_exp,exponents")
    assert len(lines) > 10


def test_kernels_psi_zeros(capsys):
    code, out, _ = run(capsys, "kernels", "--width", "4", "--psi-zeros")
    assert code == 0 and "psi1,0.495375" in out


def test_kernels_samples(capsys):
    code, out, _ = run(capsys, "kernels", "--width", "4", "--x", "0.3", "--grid", "4")
    assert code == 0 and out.count("\n") > 4


def test_capacity_point_csv(tmp_path, capsys):
    path = tmp_path / "conv.csv"
    code, _, _ = run(capsys, "capacity", "--width", "4", "--nodes", "8,12", "--x", "0.3", "--csv", str(path))
    lines = path.read_text().splitlines()
    assert code == 0 and lines[0] == "n,x,value,residual,seconds" and len(lines) == 3


def test_capacity_solve_root_appends_results(capsys):
    code, out, _ = run(capsys, "capacity", "--width", "4", "--nodes", "12,16", "--solve-root")
    assert code == 0 and "stable_digits=" in out
    recs = ResultsLog().read()
    assert [r["n"] for r in recs] == [12, 16]
    assert recs[-1]["c"].startswith("2.1039")


def test_capacity_rejects_unavailable_precision(capsys):
    code, _, err = run(capsys, "capacity", "--width", "4", "--x", "0.3", "--base-digits", "34",
                       "--refine-digits", "68")
    assert code == 2 and "double precision" in err


def test_capacity_needs_one_mode(capsys):
    code, _, _ = run(capsys, "capacity", "--width", "4")
    assert code == 2


def test_extrapolate_from_file(tmp_path, capsys):
    import math
    f = tmp_path / "f1.txt"
    f.write_text("\n".join(str(math.comb(2 * n, n)) for n in range(1, 10)) + "\n")
    code, out, _ = run(capsys, "extrapolate", "--m", "1", "--k", "3", "--values", str(f))
    rows = out.strip().splitlines()
    assert code == 0 and rows[0] == "k,estimate,digits,alpha,status"
    assert rows[1].startswith("1,2.00000000000,12,-1/2")


def test_bounds(capsys):
    code, out, err = run(capsys, "bounds", "--np", "5")
    assert code == 0 and "argmax=0.8" in err
    assert out.splitlines()[0] == "k,estimate,digits"


def test_determinism(capsys):
    outs = [run(capsys, "series", "--width", "4", "--order", "6")[1] for _ in range(2)]
    assert outs[0] == outs[1]


def test_console_script_entry(tmp_path):
    env = dict(os.environ, LATCAP_CACHE_DIR=str(tmp_path))
    p = subprocess.run([sys.executable, "-m", "latcap.cli", "count", "--kind", "rect", "--m", "1", "--n", "3"],
                       capture_output=True, text=True, env=env)
    assert p.returncode == 0 and p.stdout.strip() == "20"
