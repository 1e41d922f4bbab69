import warnings
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from genmv import data as D

DATA = Path(__file__).parent / "data"


# synthetic law ----------------------------------------------------------

def test_law_parameters_as_published():
    assert D.PUBLISHED_MU[0] == 0.15 and D.PUBLISHED_SIGMA[0, 0] == 0.1024
    assert np.allclose(D.PUBLISHED_SIGMA, D.PUBLISHED_SIGMA.T)
    assert np.linalg.eigvalsh(D.PUBLISHED_SIGMA).min() > 0


def test_zero_covariance_returns_mean_exactly():
    spec = D.SyntheticSpec(mu=[0.12, 0.06], sigma=np.zeros((2, 2)), T=5)
    r = D.gen_synthetic(spec, 3)
    assert r.shape == (3, 5, 2)
    assert np.all(r == np.array([0.01, 0.005]))


def test_moment_recovery_full_law():
    spec = D.published_spec(10, T=10, seed=3)
    r = D.gen_synthetic(spec, 10_000).reshape(-1, 10)  # 1e5 monthly draws
    n = len(r)
    cov = spec.sigma / 12
    se_mean = np.sqrt(np.diag(cov) / n)
    assert np.all(np.abs(r.mean(0) - spec.mu / 12) < 4 * se_mean)
    # SE of a sample covariance entry: sqrt((s_ii s_jj + s_ij^2) / n) under normality
    se_cov = np.sqrt((np.outer(np.diag(cov), np.diag(cov)) + cov ** 2) / n)
    assert np.all(np.abs(np.cov(r.T) - cov) < 4 * se_cov)


def test_first_asset_moments_at_1e4():
    r = D.gen_synthetic(D.published_spec(10, T=1, seed=11), 10_000)[:, 0, 0]
    se = np.sqrt(0.1024 / 12 / len(r))
    assert abs(r.mean() - 0.0125) < 4 * se
    assert abs(r.var() - 0.1024 / 12) < 4 * (0.1024 / 12) * np.sqrt(2 / len(r))


def test_spec_validation_and_subset():
    with pytest.raises(ValueError):
        D.SyntheticSpec(mu=[0.1, 0.2], sigma=np.eye(3))
    with pytest.raises(ValueError):
        D.SyntheticSpec(mu=[0.1, 0.2], sigma=[[1, 0.5], [0, 1]])
    with pytest.raises(ValueError):
        D.gen_synthetic(D.SyntheticSpec(mu=[0, 0], sigma=[[1, 2], [2, 1]]), 1)
    sub = D.published_spec(3)
    assert sub.d == 3 and np.array_equal(sub.sigma, D.PUBLISHED_SIGMA[:3, :3])


# prices -----------------------------------------------------------------

def test_price_examples():
    assert np.array_equal(D.returns_to_prices(np.zeros((3, 2)), [5.0, 7.0]),
                          np.array([[5.0, 7.0]] * 4))
    assert np.allclose(D.returns_to_prices([[0.1], [-0.1]], [100.0])[:, 0], [100, 110, 99])
    with pytest.raises(ValueError):
        D.returns_to_prices([[-1.0]], [1.0])
    with pytest.raises(ValueError):
        D.returns_to_prices([[0.1]], [0.0])


@settings(max_examples=50)
@given(st.lists(st.floats(-0.9, 2.0), min_size=1, max_size=20), st.floats(0.5, 500))
def test_price_return_roundtrip(r, s1):
    r = np.array(r)[:, None]
    p = D.returns_to_prices(r, [s1])
    assert np.allclose(D.prices_to_returns(p), r, rtol=0, atol=1e-12)
    assert np.allclose(D.returns_to_prices(D.prices_to_returns(p), p[0]), p, rtol=1e-12)


def test_uniform_start_prices_range():
    s = D.uniform_start_prices(np.random.default_rng(0), 1000, 3)
    assert s.shape == (1000, 3) and s.min() >= 1 and s.max() <= 200


# CSV --------------------------------------------------------------------

def test_twelve_row_fixture_against_plain_text_parse():
    # independent route: slice the monthly block by hand
    lines = (DATA / "french_12.csv").read_text().splitlines()[3:15]
    expect = np.array([[float(v) / 100 for v in ln.split(",")[1:]] for ln in lines])
    panel = D.load_french_csv(DATA / "french_12.csv")
    assert panel.dates.tolist() == [202000 + m for m in range(1, 13)]
    assert np.array_equal(panel.returns, expect)
    assert panel.returns[0, 0] == 0.0077 and panel.returns[11, 9] == -0.0337
    assert panel.benchmark is None and len(panel) == 12


def test_percent_conversion_and_benchmark(tmp_path):
    p = tmp_path / "f.csv"
    p.write_text(",".join(["", *D.INDUSTRIES, "Mkt"]) + "\n"
                 "192607," + ",".join(["1.45"] * 10) + ",2.00\n")
    panel = D.load_french_csv(p, benchmark="Mkt")
    assert panel.dates[0] == 192607 and panel.returns[0, 0] == pytest.approx(0.0145, abs=1e-15)
    assert panel.benchmark[0] == 0.02


def test_sentinel_rows_dropped_with_warning(tmp_path):
    p = tmp_path / "f.csv"
    head = ",".join(["", *D.INDUSTRIES])
    p.write_text(head + "\n192607," + ",".join(["1.0"] * 10) + "\n"
                 "192608," + ",".join(["-99.99"] + ["1.0"] * 9) + "\n"
                 "192609," + ",".join(["2.0"] * 10) + "\n")
    with pytest.warns(UserWarning, match="sentinel"):
        panel = D.load_french_csv(p)
    assert panel.dates.tolist() == [192607, 192609]


@pytest.mark.parametrize("body,match", [
    ("192607,1.0,2.0\n", "expected 11 columns"),
    ("192607," + ",".join(["x"] * 10) + "\n", "malformed"),
    ("192613," + ",".join(["1.0"] * 10) + "\n", "bad month"),
    ("", "no monthly rows"),
])
def test_malformed_rows_report_line(tmp_path, body, match):
    p = tmp_path / "f.csv"
    p.write_text("preamble\n" + ",".join(["", *D.INDUSTRIES]) + "\n" + body)
    with pytest.raises(ValueError, match=match) as e:
        D.load_french_csv(p)
    if body:
        assert ":3:" in str(e.value)


def test_missing_file_and_header(tmp_path):
    with pytest.raises(FileNotFoundError, match="nope.csv"):
        D.load_french_csv(tmp_path / "nope.csv")
    (tmp_path / "h.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError, match="header"):
        D.load_french_csv(tmp_path / "h.csv")
    with pytest.raises(ValueError, match="benchmark"):
        D.load_french_csv(DATA / "french_12.csv", benchmark="Mkt")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 30), st.integers(0, 10_000))
def test_csv_roundtrip_is_exact(n, seed):
    import tempfile
    panel = D.synthetic_panel(n, start=199912, seed=seed)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "x.csv"
        D.write_french_csv(path, panel, benchmark="Mkt", preamble="hello")
        back = D.load_french_csv(path, benchmark="Mkt")
    assert np.array_equal(back.dates, panel.dates)
    assert np.array_equal(back.returns, panel.returns)
    assert np.array_equal(back.benchmark, panel.benchmark)


def test_month_sequence_wraps_years():
    assert D.month_sequence(199911, 4).tolist() == [199911, 199912, 200001, 200002]


# splits -----------------------------------------------------------------

def test_split_examples():
    sp = D.make_splits(1185)
    assert (len(sp.train), len(sp.val), len(sp.test)) == (493, 500, 192)
    assert sp.test.stop == 1185 and sp.context_range == range(993, 1005)
    small = D.make_splits(100, test=24, val=24)
    assert len(small.train) == 52
    with pytest.raises(ValueError):
        D.make_splits(100, test=60, val=40)
    with pytest.raises(ValueError):
        D.make_splits(100, test=5, val=5, context=6)


@given(st.integers(1, 2000), st.integers(0, 300), st.integers(0, 600), st.integers(0, 24))
def test_split_chronology(n, test, val, ctx):
    try:
        sp = D.make_splits(n, test, val, ctx)
    except ValueError:
        return
    assert sp.train.start == 0 and sp.test.stop == n
    assert sp.train.stop == sp.val.start and sp.val.stop == sp.test.start
    if len(sp.val) and len(sp.test):
        assert max(sp.train) < min(sp.val) <= max(sp.val) < min(sp.test)


def test_windows():
    r = np.arange(10.0).reshape(5, 2)
    w = D.windows(r, 3)
    assert w.shape == (3, 3, 2) and np.array_equal(w[1], r[1:4])
    assert D.windows(r, 2, stride=2).shape == (2, 2, 2)
    with pytest.raises(ValueError):
        D.windows(r, 6)
