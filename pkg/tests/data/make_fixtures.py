"""Regenerates the CSV fixtures in this directory (run from the repo root)."""
from pathlib import Path

import numpy as np

from genmv import data as D

HERE = Path(__file__).parent

PREAMBLE = ("  This file was created using a synthetic Gaussian law in the 10-industry layout.\n"
            "  Average Value Weighted Returns -- Monthly")


def twelve_rows():
    rng = np.random.default_rng(12)
    r = np.round(rng.normal(0.8, 4.0, size=(12, 10)), 2) / 100.0
    panel = D.MonthlyPanel(D.month_sequence(202001, 12), r, D.INDUSTRIES)
    D.write_french_csv(HERE / "french_12.csv", panel, preamble=PREAMBLE)
    # a trailing annual block the loader must ignore
    with open(HERE / "french_12.csv", "a") as fh:
        fh.write("\n  Average Value Weighted Returns -- Annual\n")
        fh.write("," + ",".join(D.INDUSTRIES) + "\n")
        fh.write("2020," + ",".join(["10.00"] * 10) + "\n")


def synthetic_file():
    panel = D.synthetic_panel(360, start=199001, seed=7)
    D.write_french_csv(HERE / "french_synthetic.csv", panel, benchmark="Mkt", preamble=PREAMBLE)


def golden_series():
    rng = np.random.default_rng(24)
    r = np.round(rng.normal(0.01, 0.045, size=24), 4)
    np.savetxt(HERE / "golden_returns_24.csv", r, fmt="%.4f", header="monthly_return",
               comments="")


if __name__ == "__main__":
    twelve_rows()
    synthetic_file()
    golden_series()
