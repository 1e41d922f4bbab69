import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from helpers import ACCEPTANCE  # noqa: E402

from genmv.cli import main  # noqa: E402

DATA = Path(__file__).parent / "data"

GAUSSIAN_TOML = """\
data_kind = "gaussian-1d"
mean = 0.5
var = 0.04
n_train = 20000
n_eval = 5000
epochs = 30
ema_decay = 0.99
hidden_dim = 8
width = 64
"""

# reduced scale: width-64 networks and 200 generated paths per decision
PIPELINE_TOML = f"""\
data = "{DATA / 'french_synthetic.csv'}"
benchmark = "Mkt"
test_months = 48
val_months = 60
context = 12
T = 12
width = 64
agent_width = 64
hidden_dim = 16
epochs = 200
n_pre = 200
gen_samples = 200
pool_size = 200
episodes = 300
"""


def snapshot(out: Path) -> dict:
    """Bytes of every output file except the wall-clock sidecars."""
    return {p.name: p.read_bytes() for p in sorted(out.iterdir())
            if p.is_file() and not p.name.endswith(".timing.json")}


@pytest.fixture(scope="session")
def data_dir():
    return DATA


@pytest.fixture(scope="session")
def gaussian_runs(tmp_path_factory):
    """The 1-D Gaussian generator trained twice through the CLI in one directory."""
    root = tmp_path_factory.mktemp("gaussian")
    (root / "g.toml").write_text(GAUSSIAN_TOML)
    out = root / "out"
    argv = ["gen-train", "--config", str(root / "g.toml"), "--out-dir", str(out),
            "--seed", "0", "--threads", "1"]
    codes = [main(argv)]
    first = snapshot(out)
    codes.append(main(argv))
    return {"out": out, "codes": codes, "first": first, "second": snapshot(out)}


@pytest.fixture(scope="session")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipeline")
    (root / "p.toml").write_text(PIPELINE_TOML)
    out = root / "out"
    codes = {}
    for cmd in ("gen-train", "agent-train", "backtest"):
        codes[cmd] = main([cmd, "--config", str(root / "p.toml"), "--out-dir", str(out),
                           "--threads", "1"])
    return {"out": out, "codes": codes}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
