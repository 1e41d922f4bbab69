"""Two laws that are W2-close but carry different information at t=1."""
from genmv.transport import AdaptedMeasure, aw2, w2

for eps in (1e-1, 1e-2, 1e-3):
    # the first coordinate reveals the second one under mu, never under nu
    mu = AdaptedMeasure.from_paths([[eps, 1.0], [-eps, -1.0]])
    nu = AdaptedMeasure.from_paths([[0.0, 1.0], [0.0, -1.0]])
    print(f"eps={eps:g}  w2={w2(mu.flatten(), nu.flatten()):.4f}  aw2={aw2(mu, nu):.4f}")
