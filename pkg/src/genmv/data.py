"""Market data: the synthetic Gaussian law, French industry CSVs, splits, prices.

The 10-industry CSV format is ``YYYYMM,v1,...,v10`` with returns in percent
under a header naming the industries. Missing-value sentinels (-99.99, -999)
drop the row with a warning.
"""
from __future__ import annotations

import logging
import re
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)

INDUSTRIES = ("NoDur", "Durbl", "Manuf", "Enrgy", "HiTec", "Telcm", "Shops", "Hlth", "Utils",
              "Other")
SENTINELS = (-99.99, -999.0)

PUBLISHED_MU = np.array([0.15, 0.12, 0.18, 0.14, 0.25, 0.10, 0.08, 0.09, 0.07, 0.11])
PUBLISHED_SIGMA = np.array([
    [0.1024, 0.0627, 0.1008, 0.0672, 0.1568, 0.0320, 0.0230, 0.0256, 0.0448, 0.0282],
    [0.0627, 0.0784, 0.0882, 0.0588, 0.1372, 0.0280, 0.0202, 0.0224, 0.0392, 0.0246],
    [0.1008, 0.0882, 0.2025, 0.0945, 0.2205, 0.0450, 0.0324, 0.0360, 0.0630, 0.0396],
    [0.0672, 0.0588, 0.0945, 0.0900, 0.1470, 0.0300, 0.0216, 0.0240, 0.0420, 0.0264],
    [0.1568, 0.1372, 0.2205, 0.1470, 0.4900, 0.0700, 0.0504, 0.0560, 0.0980, 0.0616],
    [0.0320, 0.0280, 0.0450, 0.0300, 0.0700, 0.0625, 0.0135, 0.0150, 0.0350, 0.0330],
    [0.0230, 0.0202, 0.0324, 0.0216, 0.0504, 0.0135, 0.0324, 0.0288, 0.0252, 0.0119],
    [0.0256, 0.0224, 0.0360, 0.0240, 0.0560, 0.0150, 0.0288, 0.0400, 0.0280, 0.0132],
    [0.0448, 0.0392, 0.0630, 0.0420, 0.0980, 0.0350, 0.0252, 0.0280, 0.1225, 0.0231],
    [0.0282, 0.0246, 0.0396, 0.0264, 0.0616, 0.0330, 0.0119, 0.0132, 0.0231, 0.0484],
])


# synthetic law ----------------------------------------------------------

@dataclass
class SyntheticSpec:
    mu: np.ndarray = field(default_factory=lambda: PUBLISHED_MU.copy())
    sigma: np.ndarray = field(default_factory=lambda: PUBLISHED_SIGMA.copy())
    periods: int = 12
    T: int = 12
    seed: int = 0

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=float)
        self.sigma = np.asarray(self.sigma, dtype=float)
        d = len(self.mu)
        if self.sigma.shape != (d, d):
            raise ValueError("sigma must be d x d with d = len(mu)")
        if not np.allclose(self.sigma, self.sigma.T, atol=1e-12):
            raise ValueError("sigma must be symmetric")

    @property
    def d(self) -> int:
        return len(self.mu)

    def subset(self, assets) -> "SyntheticSpec":
        idx = np.asarray(assets)
        return SyntheticSpec(self.mu[idx], self.sigma[np.ix_(idx, idx)], self.periods, self.T,
                             self.seed)


def published_spec(d: int = 10, T: int = 12, seed: int = 0) -> SyntheticSpec:
    """The 10-asset law; ``d < 10`` keeps the first ``d`` assets."""
    return SyntheticSpec(T=T, seed=seed).subset(np.arange(d))


def _factor(cov):
    try:
        return np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals.min() < -1e-12 * max(1.0, abs(vals).max()):
            raise ValueError("covariance is not positive semidefinite") from None
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def gen_synthetic(spec: SyntheticSpec, n_paths: int, rng=None) -> np.ndarray:
    """``(n_paths, T, d)`` i.i.d. monthly returns from ``N(mu/periods, sigma/periods)``."""
    rng = np.random.default_rng(spec.seed) if rng is None else rng
    L = _factor(spec.sigma / spec.periods)
    z = rng.standard_normal((n_paths, spec.T, spec.d))
    return spec.mu / spec.periods + z @ L.T


# prices -----------------------------------------------------------------

def returns_to_prices(returns, s1) -> np.ndarray:
    """``(T, d)`` returns to ``(T + 1, d)`` prices starting at ``s1``."""
    r = np.asarray(returns, dtype=float)
    s1 = np.asarray(s1, dtype=float)
    if np.any(s1 <= 0):
        raise ValueError("initial prices must be positive")
    if np.any(r <= -1.0):
        raise ValueError("returns must exceed -1")
    growth = np.cumprod(1.0 + r, axis=-2)
    first = np.broadcast_to(s1, r.shape[:-2] + (1, r.shape[-1]))
    return np.concatenate([first, s1 * growth], axis=-2)


def prices_to_returns(prices) -> np.ndarray:
    p = np.asarray(prices, dtype=float)
    return p[..., 1:, :] / p[..., :-1, :] - 1.0


def uniform_start_prices(rng, n: int, d: int, low: float = 1.0, high: float = 200.0):
    return rng.uniform(low, high, size=(n, d))


# French CSV -------------------------------------------------------------

@dataclass
class MonthlyPanel:
    dates: np.ndarray
    returns: np.ndarray
    names: tuple
    benchmark: np.ndarray | None = None

    def __len__(self):
        return len(self.dates)

    def slice(self, rng: range) -> "MonthlyPanel":
        s = slice(rng.start, rng.stop)
        bench = None if self.benchmark is None else self.benchmark[s]
        return MonthlyPanel(self.dates[s], self.returns[s], self.names, bench)


_DATE = re.compile(r"^\s*(\d{6})\s*$")


def load_french_csv(path, names=INDUSTRIES, benchmark: str | None = None) -> MonthlyPanel:
    """Parse the first monthly block of a French 10-industry file.

    Lines before the header (the row naming the industries) are skipped; the
    block ends at the first blank or non-date line. An extra column named
    ``benchmark`` is returned separately.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"data file not found: {path}")
    lines = path.read_text().splitlines()
    header_at, cols = None, None
    for i, line in enumerate(lines):
        cells = [c.strip() for c in line.split(",")]
        if all(n in cells for n in names):
            header_at, cols = i, cells
            break
    if header_at is None:
        raise ValueError(f"{path}: no header row naming {', '.join(names)}")
    want = [cols.index(n) for n in names]
    if benchmark and benchmark not in cols:
        raise ValueError(f"{path}: benchmark column {benchmark!r} missing")
    bench_col = cols.index(benchmark) if benchmark else None
    dates, rows, bench = [], [], []
    for lineno, line in enumerate(lines[header_at + 1:], start=header_at + 2):
        if not line.strip():
            break
        cells = [c.strip() for c in line.split(",")]
        if not _DATE.match(cells[0]):
            break
        if len(cells) != len(cols):
            raise ValueError(f"{path}:{lineno}: expected {len(cols)} columns, got {len(cells)}")
        try:
            vals = [float(cells[j]) for j in want]
            bval = float(cells[bench_col]) if bench_col is not None else None
        except ValueError:
            raise ValueError(f"{path}:{lineno}: malformed number in {line!r}") from None
        checked = vals + ([bval] if bval is not None else [])
        if any(v in SENTINELS for v in checked):
            warnings.warn(f"{path}:{lineno}: missing-value sentinel, row dropped")
            continue
        ym = int(cells[0])
        if not 1 <= ym % 100 <= 12:
            raise ValueError(f"{path}:{lineno}: bad month in {cells[0]}")
        dates.append(ym)
        rows.append(vals)
        bench.append(bval)
    if not rows:
        raise ValueError(f"{path}: no monthly rows after the header")
    ret = np.array(rows) / 100.0
    b = np.array(bench) / 100.0 if bench_col is not None else None
    return MonthlyPanel(np.array(dates, dtype=np.int64), ret, tuple(names), b)


def _pct(v) -> str:
    return f"{round(float(v) * 100.0, 4):.4f}"


def write_french_csv(path, panel: MonthlyPanel, benchmark: str | None = None,
                     preamble: str = "") -> None:
    """Writes values in percent with four decimals (exact for parsed data)."""
    head = [""] + list(panel.names) + ([benchmark] if benchmark else [])
    out = [preamble] if preamble else []
    out.append(",".join(head))
    for k, ym in enumerate(panel.dates):
        cells = [str(int(ym))] + [_pct(v) for v in panel.returns[k]]
        if benchmark:
            cells.append(_pct(panel.benchmark[k]))
        out.append(",".join(cells))
    Path(path).write_text("\n".join(out) + "\n")


def month_sequence(start: int, n: int) -> np.ndarray:
    y, m = divmod(start, 100)
    k = (y * 12 + m - 1) + np.arange(n)
    return (k // 12) * 100 + k % 12 + 1


def synthetic_panel(n_months: int, start: int = 192607, seed: int = 0, spec=None) -> MonthlyPanel:
    """French-schema panel from the Gaussian law, plus a cap-weighted-style benchmark.

    Stands in for the library file when it is not available offline.
    """
    spec = spec or published_spec(10)
    rng = np.random.default_rng(seed)
    r = gen_synthetic(SyntheticSpec(spec.mu, spec.sigma, spec.periods, n_months, seed), 1, rng)[0]
    r = np.round(r * 100.0, 2) / 100.0
    w = np.linspace(1.5, 0.5, spec.d)
    bench = np.round((r @ (w / w.sum())) * 100.0, 2) / 100.0
    names = INDUSTRIES if spec.d == 10 else tuple(f"A{i + 1}" for i in range(spec.d))
    return MonthlyPanel(month_sequence(start, n_months), r, names, bench)


# splits -----------------------------------------------------------------

@dataclass(frozen=True)
class DataSplit:
    train: range
    val: range
    test: range
    context: int

    @property
    def context_range(self) -> range:
        return range(self.test.start, self.test.start + self.context)


def make_splits(n_months: int, test: int = 192, val: int = 500, context: int = 12) -> DataSplit:
    """Chronological split: last ``test`` months, the ``val`` before, the rest train."""
    if min(test, val, context) < 0 or context > test:
        raise ValueError("split sizes must be nonnegative with context <= test")
    n_train = n_months - test - val
    if n_train <= 0:
        raise ValueError(f"{n_months} months cannot hold test={test} and val={val} plus training")
    sp = DataSplit(range(0, n_train), range(n_train, n_train + val),
                   range(n_train + val, n_months), context)
    assert sp.train.stop <= sp.val.start and sp.val.stop <= sp.test.start
    return sp


def windows(returns, length: int, stride: int = 1) -> np.ndarray:
    """Overlapping windows ``(n, length, d)`` of a ``(T, d)`` series."""
    r = np.asarray(returns, dtype=float)
    if len(r) < length:
        raise ValueError(f"series of length {len(r)} shorter than window {length}")
    starts = range(0, len(r) - length + 1, stride)
    return np.stack([r[s:s + length] for s in starts])
