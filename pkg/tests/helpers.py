"""Shared test utilities: central finite differences and the acceptance log."""
import numpy as np

ACCEPTANCE = {}


def record(criterion: int, ok: bool, detail: str) -> None:
    ACCEPTANCE[criterion] = (bool(ok), detail)


def max_rel_error(loss_fn, params: dict, grads: dict, step: float = 1e-5,
                  floor: float = 1e-6, max_entries: int | None = None, rng=None) -> float:
    """Largest ``|analytic - numeric| / max(|analytic|, |numeric|, floor)`` over entries.

    ``loss_fn()`` re-evaluates the scalar loss with the current parameter values.
    """
    worst = 0.0
    for k, p in params.items():
        idx = list(np.ndindex(p.shape))
        if max_entries is not None and len(idx) > max_entries:
            pick = (rng or np.random.default_rng(0)).choice(len(idx), max_entries, replace=False)
            idx = [idx[i] for i in pick]
        for i in idx:
            old = p[i]
            p[i] = old + step
            up = loss_fn()
            p[i] = old - step
            down = loss_fn()
            p[i] = old
            num = (up - down) / (2.0 * step)
            a = grads[k][i]
            worst = max(worst, abs(a - num) / max(abs(a), abs(num), floor))
    return worst
