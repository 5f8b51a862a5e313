"""Trend fits and correlations on the bundled Las Vegas 1984-2008 series.

The package ships two small tables: yearly quantization errors for two
regions of interest (the city core and a residential area on the northern
fringe), and the matching demographics (annual visitors, county population).
The source tables skip 1990 and print 1991 twice; both interpretations of
that quirk are shown below.
"""

from somqe import linear_fit, pearson, reference

print("trend fits, slope per year:")
for fix in ("as-printed", "relabel-1990"):
    qe = reference.load_qe_series(year_fix=fix)
    demo = reference.load_demographics(year_fix=fix)
    print(f"\n  year labels {fix}:")
    for label, series in {**qe, **demo}.items():
        fit = linear_fit(series)
        print(
            f"    {label:<22} slope {fit.slope:>12.6g}  r2 {fit.r2:.4f}  "
            f"p {fit.p:.3g}"
        )

# correlations pair rows by position, so the year quirk does not matter here
qe = reference.load_qe_series()
demo = reference.load_demographics()
pairs = [
    (qe[reference.NORTH], demo[reference.POPULATION]),
    (qe[reference.CITY], demo[reference.VISITORS]),
]
print("\ncorrelations:")
for a, b in pairs:
    corr = pearson(a, b)
    print(f"  {a.label} vs {b.label}: r {corr.r:.6f}, p {corr.p:.3g}")
