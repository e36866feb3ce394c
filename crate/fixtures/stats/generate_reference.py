#!/usr/bin/env python3
"""Regenerate reference_vectors.json from scipy/numpy.

The Rust test suite compares its Welch t, Mann-Whitney U, Cohen's d, and
rank effect-size implementations against these vectors. Conventions:
Mann-Whitney uses the asymptotic normal approximation with tie correction
and a 0.5 continuity correction; the rank effect size is r = z/sqrt(n_a+n_b)
with z recovered from the two-sided p and the sign of (U - mu).
"""

import json
import math

import numpy as np
from scipy import stats


def case(name, a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    welch = stats.ttest_ind(a, b, equal_var=False)
    na, nb = len(a), len(b)
    va, vb = a.var(ddof=1), b.var(ddof=1)
    df = (va / na + vb / nb) ** 2 / (
        (va / na) ** 2 / (na - 1) + (vb / nb) ** 2 / (nb - 1)
    )
    mwu = stats.mannwhitneyu(a, b, alternative="two-sided", method="asymptotic",
                             use_continuity=True)
    mu = na * nb / 2
    z_mag = stats.norm.isf(min(mwu.pvalue, 1.0) / 2)
    z = math.copysign(z_mag, mwu.statistic - mu) if mwu.statistic != mu else 0.0
    pooled = math.sqrt(((na - 1) * va + (nb - 1) * vb) / (na + nb - 2))
    d = (a.mean() - b.mean()) / pooled if pooled > 0 else None
    r = z / math.sqrt(na + nb)
    return {
        "name": name,
        "a": a.tolist(),
        "b": b.tolist(),
        "welch_t": float(welch.statistic),
        "welch_df": float(df),
        "welch_p": float(welch.pvalue),
        "mwu_u": float(mwu.statistic),
        "mwu_p": float(mwu.pvalue),
        "cohens_d": d,
        "rank_r": r,
    }


def main():
    rng = np.random.default_rng(20210901)
    cases = [
        case("shifted_integers", np.arange(1, 21), np.arange(1, 21) + 10),
        case("identical_sequences", np.arange(1, 21), np.arange(1, 21)),
        case(
            "seeded_normals",
            rng.normal(10.0, 2.0, 30),
            rng.normal(11.0, 3.0, 25),
        ),
        case(
            "small_integers_with_ties",
            rng.integers(0, 6, 15),
            rng.integers(1, 7, 10),
        ),
        case(
            "lognormal_skew",
            rng.lognormal(0.0, 0.6, 50),
            rng.lognormal(0.25, 0.6, 50),
        ),
        case(
            "eight_by_eight_ties",
            [1, 2, 2, 3, 3, 3, 4, 5],
            [2, 3, 3, 4, 4, 5, 5, 6],
        ),
        case(
            "close_means",
            rng.normal(0.0, 1.0, 40),
            rng.normal(0.1, 1.0, 40),
        ),
    ]
    with open("reference_vectors.json", "w") as fh:
        json.dump(cases, fh, indent=2)
        fh.write("\n")


if __name__ == "__main__":
    main()
