"""Fit year trends and test correlations on small numeric series.

The statistics layer is deliberately plain: ordinary least squares with
r-squared, Student's t and a two-tailed p-value, plus Pearson correlation
with the same significance machinery. Values parse with either '.' or ','
as the decimal mark, because source tables in the wild use both.
"""

import numpy as np

from somqe import Series, linear_fit, pearson
from somqe.stats import parse_decimal

rng = np.random.default_rng(8)

years = np.arange(1984.0, 2009.0)
signal = 0.003 * (years - 1984.0)
noisy = signal + rng.normal(0, 0.004, years.size)

fit = linear_fit(Series("synthetic qe", years, 0.24 + noisy))
print("trend fit on a noisy increasing series:")
print(f"  slope     {fit.slope:.6g} per year")
print(f"  intercept {fit.intercept:.6g}")
print(f"  r2        {fit.r2:.4f}")
print(f"  t         {fit.t:.3f}  (df {fit.df})")
print(f"  p         {fit.p:.3g}")

flat = linear_fit(Series("flat", years, np.full(years.size, 0.25)))
print(f"\na constant series is flagged: degenerate={flat.degenerate}, p={flat.p}")

# correlation between two series that share a driver
driver = np.cumsum(rng.uniform(0.5, 1.5, years.size))
a = Series("a", years, driver + rng.normal(0, 0.8, years.size))
b = Series("b", years, 3.0 * driver + rng.normal(0, 2.4, years.size))
corr = pearson(a, b)
print(f"\npearson between two driver-share series: r {corr.r:.4f}, p {corr.p:.3g}")

print("\ndecimal-mark parsing:")
for text in ("0.9657", "0,9657", "-3,5", "1984"):
    print(f"  {text!r} -> {parse_decimal(text)}")
