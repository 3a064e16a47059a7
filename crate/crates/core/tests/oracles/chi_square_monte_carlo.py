"""Monte Carlo oracle for the chi-square normality test.

Equal-probability bins under the sample-fitted normal (mean, sample sd);
dof = bins - 3; accept iff statistic < chi2.ppf(1 - alpha, dof).
"""
import numpy as np
from scipy import stats


def accept(samples, bins, alpha=0.05):
    mu = samples.mean()
    sd = samples.std(ddof=1)
    edges = stats.norm.ppf(np.linspace(0, 1, bins + 1)[1:-1], mu, sd)
    observed = np.bincount(np.searchsorted(edges, samples, side="right"), minlength=bins)
    expected = samples.size / bins
    statistic = float(((observed - expected) ** 2 / expected).sum())
    return statistic < stats.chi2.ppf(1 - alpha, bins - 3)


print("critical(17, 0.05) =", stats.chi2.ppf(0.95, 17))
rng = np.random.default_rng(7)
for n, bins in [(200, 10), (500, 10), (500, 20), (1000, 20)]:
    normal = np.mean([accept(rng.normal(3, 2, n), bins) for _ in range(4000)])
    uniform = np.mean([not accept(rng.uniform(-1, 1, n), bins) for _ in range(4000)])
    print(f"n={n} bins={bins}: normal accept {normal:.4f}, uniform reject {uniform:.4f}")
