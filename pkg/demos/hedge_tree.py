"""Exact hedging values and the mean-variance dual on a small two-asset tree."""
import numpy as np

from genmv.experiments import crosscheck_tree
from genmv.market import ConstraintSet, dual_mv, solve_hedge_dpp

tree = crosscheck_tree()
K = ConstraintSet("simplex")
for c in (0.8, 1.0, 1.3):
    hv = solve_hedge_dpp(tree, c, K)
    w, p = hv.terminal_wealths()
    print(f"c={c}: value {hv.root_value():.5f}  E[w_T] {np.dot(p, w):+.4f}  "
          f"first action {hv.action(tree.first, 0.0)}")

for gamma in (0.5, 1.5, 5.0):
    res = dual_mv(tree, gamma, K, refine=2)
    print(f"gamma={gamma}: mv value {res.value:.5f} at a={res.a:.4f}")
