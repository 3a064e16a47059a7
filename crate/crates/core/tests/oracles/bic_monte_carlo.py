"""Monte Carlo oracle for BIC degree selection on quadratic-plus-noise series.

Design (mirrored by the Rust test): 40 windows at heights 0, 500, ..., 19500;
y = 1000 + 0.05 n + 2e-6 n^2 + N(0, 20^2); seeded 80/20 split; candidate
degrees 1..3; BIC = m ln(RSS/m) + k ln(m) on the validation split.
"""
import numpy as np


def select(rng):
    n = np.arange(40) * 500.0
    y = 1000 + 0.05 * n + 2e-6 * n**2 + rng.normal(0, 20, n.size)
    idx = rng.permutation(n.size)
    train, val = idx[:32], idx[32:]
    x = n / n.max()
    best = None
    for deg in (1, 2, 3):
        coef = np.polyfit(x[train], y[train], deg)
        rss = float(np.sum((np.polyval(coef, x[val]) - y[val]) ** 2))
        m = val.size
        bic = m * np.log(rss / m) + (deg + 1) * np.log(m)
        if best is None or bic < best[0]:
            best = (bic, deg)
    return best[1]


rng = np.random.default_rng(20191014)
for batch in range(5):
    picks = [select(rng) for _ in range(100)]
    print("batch", batch, "degree2 =", picks.count(2), "deg1 =", picks.count(1), "deg3 =", picks.count(3))
picks = [select(rng) for _ in range(10000)]
print("rate over 10000 trials:", picks.count(2) / 10000)
