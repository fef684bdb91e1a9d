import json
import math
import os

import numpy as np
import pytest

from sclopt.bench import (LibsvmParseError, ProfileTable, RunRecord, SparseDataset,
                          extreme_eigs, from_dense, load_libsvm, parse_libsvm,
                          performance_profile, read_records, run_matrix, run_one,
                          save_libsvm, serialize, synth_gp_instance, worker_count,
                          write_records)
from sclopt.bench.profile import read_profile_csv, terminal_fraction
from sclopt.bench.records import trace_csv
from sclopt.bench.synth import desk_logistic, parse_synthetic
from sclopt.solvers import SolverOptions

FIXTURE_NAMES = ["tiny_a1a.svm", "multiclass.svm", "edge_cases.svm", "real_labels.svm"]


# ---------------------------------------------------------------- libsvm

def test_parse_basic_line():
    ds = parse_libsvm("+1 3:4.5 7:-2\n")
    assert list(ds.labels) == [1.0]
    idx, val = ds.rows[0]
    assert list(idx) == [2, 6] and list(val) == [4.5, -2.0]
    assert ds.feature_count == 7


def test_parse_empty_feature_list():
    ds = parse_libsvm("-1\n+1 2:1\n")
    assert ds.rows[0][0].size == 0 and ds.labels[0] == -1.0
    assert ds.to_csr().toarray()[0].tolist() == [0.0, 0.0]


def test_parse_comments_and_blank_lines():
    ds = parse_libsvm(b"# header\n\n+1 1:2 # trailing\n\t-1  2:3\r\n")
    assert len(ds) == 2 and ds.feature_count == 2
    assert ds.to_csr().toarray().tolist() == [[2.0, 0.0], [0.0, 3.0]]


def test_parse_zero_one_labels_mapped():
    assert list(parse_libsvm("0 1:1\n1 1:2\n").labels) == [-1.0, 1.0]
    assert list(parse_libsvm("0 1:1\n1 1:2\n", normalize_labels=False).labels) == [0.0, 1.0]


def test_parse_multiclass_kept():
    ds = parse_libsvm("3 1:1\n1 2:1\n2 1:1\n")
    assert list(ds.labels) == [3.0, 1.0, 2.0] and not ds.is_binary()


@pytest.mark.parametrize("text,line,col", [
    ("+1 1:2\n+1 3:x\n", 2, 6),
    ("+1 1:2 1:3\n", 1, 8),
    ("+1 2:2 1:3\n", 1, 8),
    ("+1 0:2\n", 1, 4),
    ("abc 1:2\n", 1, 1),
    ("+1 1:2\n\n-1 4\n", 3, 4),
    ("1:2\n", 1, 1),
    ("+1 a:2\n", 1, 4),
    ("+1 1:nan\n", 1, 6),
    ("  +1 1:1:1\n", 1, 8),
])
def test_parse_errors_locate_token(text, line, col):
    with pytest.raises(LibsvmParseError) as info:
        parse_libsvm(text)
    assert (info.value.line, info.value.column) == (line, col)
    assert f"line {line}" in str(info.value)


def test_parse_rejects_bad_utf8():
    with pytest.raises(LibsvmParseError) as info:
        parse_libsvm(b"+1 1:2\n-1 1:\xff\n")
    assert info.value.line == 2


@pytest.mark.parametrize("name", FIXTURE_NAMES)
def test_fixture_round_trip_byte_stable(name, fixtures_dir, tmp_path):
    path = os.path.join(fixtures_dir, name)
    raw = open(path, "rb").read()
    ds = load_libsvm(path)
    text = serialize(ds)
    assert text.encode() == raw
    assert parse_libsvm(text) == ds
    out = tmp_path / name
    save_libsvm(ds, out)
    assert out.read_bytes() == raw


def test_round_trip_random_values(rng):
    X = rng.standard_normal((30, 12)) * (rng.uniform(size=(30, 12)) < 0.3)
    X[0, 0] = 1e-300
    X[1, 1] = -123456789.123
    ds = from_dense(X, np.where(rng.uniform(size=30) < 0.5, 1.0, -1.0))
    back = parse_libsvm(serialize(ds))
    assert back == ds
    assert np.array_equal(back.to_csr(12).toarray(), X)


def test_dataset_validation():
    with pytest.raises(ValueError):
        SparseDataset(((np.array([1, 0]), np.ones(2)),), np.ones(1), 3)
    with pytest.raises(ValueError):
        SparseDataset(((np.array([0]), np.ones(1)),), np.ones(2), 3)


# ---------------------------------------------------------------- profiles

def test_profile_hand_example():
    t = ProfileTable(np.array([[2.0, 4.0]]), ["a", "b"], ["p"])
    res = performance_profile(t, [0.0, 1.0])
    assert list(res.rho["a"]) == [1.0, 1.0]
    assert list(res.rho["b"]) == [0.0, 1.0]
    assert np.array_equal(res.log_ratios, [[0.0, 1.0]])


def test_profile_identical_times():
    t = ProfileTable(np.full((4, 3), 2.5), ["a", "b", "c"], list("wxyz"))
    res = performance_profile(t)
    for s in "abc":
        assert res.rho[s][0] == 1.0


def test_profile_failed_entry_never_counts():
    t = ProfileTable(np.array([[1.0, np.inf], [3.0, 1.0]]), ["a", "b"], ["p", "q"])
    res = performance_profile(t, np.linspace(0, 20, 41))
    assert res.rho["b"][-1] == 0.5 < 1.0
    assert res.rho["a"][-1] == 1.0
    assert terminal_fraction(t) == {"a": 1.0, "b": 0.5}


def test_profile_all_fail_problem_dropped():
    t = ProfileTable(np.array([[np.nan, np.inf], [1.0, 2.0]]), ["a", "b"], ["p", "q"])
    res = performance_profile(t, [0.0, 1.0])
    assert res.dropped == ["p"]
    assert list(res.rho["a"]) == [1.0, 1.0] and list(res.rho["b"]) == [0.0, 1.0]


def test_profile_monotone_into_unit_interval(rng):
    T = rng.uniform(0.1, 10, (25, 4))
    T[rng.uniform(size=T.shape) < 0.2] = np.inf
    T[:, 0] = np.where(np.isinf(T).all(axis=1), 1.0, T[:, 0])
    res = performance_profile(ProfileTable(T, list("abcd"), [str(i) for i in range(25)]))
    for r in res.rho.values():
        assert np.all(np.diff(r) >= 0) and r.min() >= 0 and r.max() <= 1


def test_profile_errors():
    with pytest.raises(ValueError):
        ProfileTable(np.zeros((0, 0)), [], [])
    with pytest.raises(ValueError):
        ProfileTable(np.array([[0.0, 1.0]]), ["a", "b"], ["p"])
    t = ProfileTable(np.array([[1.0, 2.0]]), ["a", "b"], ["p"])
    with pytest.raises(ValueError):
        performance_profile(t, [1.0, 0.0])
    with pytest.raises(ValueError):
        performance_profile(ProfileTable(np.array([[np.inf]]), ["a"], ["p"]))


def test_profile_csv_round_trip():
    t = ProfileTable(np.array([[2.0, 4.0]]), ["a", "b"], ["p"])
    res = performance_profile(t, [0.0, 1.0])
    text = res.to_csv()
    assert text.splitlines()[0] == "tau,a,b"
    back = read_profile_csv(text)
    assert np.array_equal(back.tau, res.tau)
    assert all(np.array_equal(back.rho[k], res.rho[k]) for k in res.rho)


def test_profile_from_records_marks_failures():
    recs = [RunRecord("p", "a", 3, 5, 0.2, 1e-9, True),
            RunRecord("p", "b", 3, 10, 0.4, 1e-9, False),
            RunRecord("q", "a", 3, 0, 0.0, 0.0, True)]
    t = ProfileTable.from_records(recs, metric="prox_calls")
    assert t.solver_names == ["a", "b"] and t.problem_names == ["p", "q"]
    assert t.times[0, 0] == 5 and np.isinf(t.times[0, 1])
    assert t.times[1, 0] == 1e-9 and np.isinf(t.times[1, 1])


# ---------------------------------------------------------------- eigenvalues

def test_extreme_eigs_diag():
    lo, hi = extreme_eigs(lambda v: np.array([1.0, 4.0]) * v, 2)
    assert lo == pytest.approx(1.0, rel=1e-2) and hi == pytest.approx(4.0, rel=1e-2)


def test_extreme_eigs_identity():
    lo, hi = extreme_eigs(lambda v: v, 5)
    assert lo == pytest.approx(1.0, rel=1e-10) and hi == pytest.approx(1.0, rel=1e-10)


def test_extreme_eigs_random_spd(rng):
    for _ in range(5):
        Q, _ = np.linalg.qr(rng.standard_normal((8, 8)))
        ev = np.sort(rng.uniform(1, 10, 8))
        ev[0], ev[-1] = 0.5, 20.0
        H = (Q * ev) @ Q.T
        ref = np.linalg.eigvalsh(H)
        lo, hi = extreme_eigs(lambda v: H @ v, 8, iters=200)
        assert lo == pytest.approx(ref[0], rel=1e-2)
        assert hi == pytest.approx(ref[-1], rel=1e-2)


def test_extreme_eigs_sandwich(rng):
    H = rng.standard_normal((10, 10))
    H = H @ H.T + 0.1 * np.eye(10)
    lo, hi = extreme_eigs(lambda v: H @ v, 10, iters=2000)
    for _ in range(200):
        v = rng.standard_normal(10)
        q = v @ H @ v / (v @ v)
        assert lo - 1e-8 <= q <= hi + 1e-8


# ---------------------------------------------------------------- synthetic

def test_gp_determinism():
    a, b = synth_gp_instance(7, 4, seed=3), synth_gp_instance(7, 4, seed=3)
    da, db = a.oracle.data, b.oracle.data
    for f in ("exponents", "offsets", "linear"):
        assert np.array_equal(getattr(da, f), getattr(db, f))
    c = synth_gp_instance(7, 4, seed=4)
    assert not np.array_equal(da.exponents, c.oracle.data.exponents)


def test_gp_reports_row_norm_constant():
    p = synth_gp_instance(50, 30, seed=0)
    A = p.oracle.data.exponents
    assert p.oracle.M_f == np.linalg.norm(A, axis=1).max()
    assert p.nonsmooth.rho == 1.0


def test_gp_hessian_grows_along_ray():
    p = synth_gp_instance(10, 8, seed=1)
    ones = np.ones(10)
    norms = [np.linalg.norm(p.oracle.hess_dense(t * ones), 2) for t in (0, 1, 2, 3)]
    # grows without bound along the ray if some <a_i, 1> > 0
    assert (p.oracle.data.exponents @ ones).max() > 0
    assert all(b > a for a, b in zip(norms, norms[1:]))
    assert norms[-1] > 2 * norms[0]


def test_parse_synthetic_kinds():
    assert parse_synthetic("logistic:30x4").dimension == 5
    assert parse_synthetic("multinomial:20x3x4").dimension == 9
    assert parse_synthetic("gp:6x5").dimension == 6
    for bad in ("nope:3", "logistic:ax3", "gp:0x3", "multinomial:5x5x1"):
        with pytest.raises(ValueError):
            parse_synthetic(bad)


# ---------------------------------------------------------------- records

def test_record_json_round_trip():
    r = RunRecord("p", "prox-grad", 4, 9, 0.5, 1e-9, True, "converged", 1.25, {"eps": 1e-8})
    line = r.to_json()
    d = json.loads(line)
    assert list(d) == sorted(d)
    assert RunRecord.from_json(line) == r


def test_record_nonfinite_becomes_null():
    r = RunRecord("p", "s", 0, 0, 0.0, math.nan, False)
    assert json.loads(r.to_json())["residual"] is None
    assert math.isnan(RunRecord.from_json(r.to_json()).residual)


def test_record_validation(tmp_path):
    with pytest.raises(ValueError):
        RunRecord("p", "s", 0, 0, -1.0, 0.0, True)
    with pytest.raises(ValueError):
        RunRecord("p", "s", 0, 0, 1.0, -1.0, True)
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"problem": "p"}\n')
    with pytest.raises(ValueError, match="bad.jsonl:1"):
        read_records(bad)


def test_write_read_records(tmp_path):
    recs = [RunRecord("p", s, 1, 2, 0.1, 0.0, True) for s in ("a", "b")]
    path = tmp_path / "runs.jsonl"
    write_records(path, recs)
    assert read_records(path) == recs
    assert [f for f in os.listdir(tmp_path)] == ["runs.jsonl"]


def test_run_one_and_trace_csv():
    p = desk_logistic(60, 8, 0.1, seed=1)
    x, tr, rec = run_one(p, "prox-newton", SolverOptions(epsilon=1e-8))
    assert rec.converged and rec.residual <= 1e-6
    assert rec.iters == tr.iterations and rec.solver == "prox-newton"
    lines = trace_csv(tr).splitlines()
    assert lines[0].startswith("k,F_value,alpha")
    assert len(lines) == len(tr.records) + 1


def test_run_one_captures_failure():
    p = desk_logistic(60, 8, 0.1, seed=1)
    _, _, rec = run_one(p, "prox-grad", SolverOptions(epsilon=1e-14, max_iterations=2))
    assert not rec.converged and rec.status == "max_iterations"


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("SCLOPT_THREADS", "2")
    assert worker_count(8) == 2
    assert worker_count(1) == 1
    monkeypatch.setenv("SCLOPT_THREADS", "zero")
    with pytest.raises(ValueError):
        worker_count(4)
    monkeypatch.delenv("SCLOPT_THREADS")
    assert worker_count(3) == 3


def test_run_matrix_ordered_and_persisted(tmp_path, monkeypatch):
    monkeypatch.setenv("SCLOPT_THREADS", "3")
    probs = [desk_logistic(50, 5, 0.1, seed=s) for s in range(2)]
    out = tmp_path / "runs.jsonl"
    recs = run_matrix(probs, ("prox-grad", "prox-newton"), SolverOptions(epsilon=1e-7),
                      out_path=out)
    assert [(r.problem, r.solver) for r in recs] == [
        (probs[0].name, "prox-grad"), (probs[0].name, "prox-newton"),
        (probs[1].name, "prox-grad"), (probs[1].name, "prox-newton")]
    assert read_records(out) == recs
    assert all(r.converged for r in recs)
