"""Generate frozen oracle values for the test suite.

Every number here is computed independently of the package under test:
high-precision special functions come from mpmath, exact rational
arithmetic from fractions.Fraction, and hash oracles from the md5sum
binary. Run from the repository root to refresh tests/data/oracle_values.json;
the suite reads the frozen file and never calls this module.
"""

from __future__ import annotations

import json
import subprocess
from fractions import Fraction
from pathlib import Path

import mpmath

mpmath.mp.dps = 50

Z_95 = mpmath.mpf("1.959964")


def p_value(x) -> float:
    """Chi-square (df=1) upper tail: erfc(sqrt(x/2))."""
    return float(mpmath.erfc(mpmath.sqrt(mpmath.mpf(x) / 2)))


def chi_square_exact(a: int, b: int, c: int, d: int) -> Fraction:
    n = a + b + c + d
    return Fraction(n * (a * d - b * c) ** 2, (a + b) * (c + d) * (a + c) * (b + d))


def min_expected_exact(a: int, b: int, c: int, d: int) -> Fraction:
    n = a + b + c + d
    rows = (a + b, c + d)
    cols = (a + c, b + d)
    return min(Fraction(r * cl, n) for r in rows for cl in cols)


def odds_ratio_ci(a, b, c, d):
    a, b, c, d = (mpmath.mpf(x) for x in (a, b, c, d))
    est = (a * d) / (b * c)
    se = mpmath.sqrt(1 / a + 1 / b + 1 / c + 1 / d)
    return (
        float(est),
        float(mpmath.e ** (mpmath.log(est) - Z_95 * se)),
        float(mpmath.e ** (mpmath.log(est) + Z_95 * se)),
        float(se),
    )


def relative_risk_ci(a, b, c, d):
    a, b, c, d = (mpmath.mpf(x) for x in (a, b, c, d))
    est = (a / (a + b)) / (c / (c + d))
    se = mpmath.sqrt(1 / a - 1 / (a + b) + 1 / c - 1 / (c + d))
    return (
        float(est),
        float(mpmath.e ** (mpmath.log(est) - Z_95 * se)),
        float(mpmath.e ** (mpmath.log(est) + Z_95 * se)),
        float(se),
    )


def md5_oracle(text: str) -> str:
    out = subprocess.run(
        ["md5sum"], input=text.encode("utf-8"), capture_output=True, check=True
    )
    return out.stdout.decode("ascii").split()[0]


def table_oracle(a, b, c, d) -> dict:
    orv = odds_ratio_ci(a, b, c, d)
    rrv = relative_risk_ci(a, b, c, d)
    chi = chi_square_exact(a, b, c, d)
    return {
        "cells": [a, b, c, d],
        "or": orv[0],
        "or_low": orv[1],
        "or_high": orv[2],
        "or_se": orv[3],
        "rr": rrv[0],
        "rr_low": rrv[1],
        "rr_high": rrv[2],
        "rr_se": rrv[3],
        "chi2": float(chi),
        "p": p_value(float(chi)),
        "min_expected": float(min_expected_exact(a, b, c, d)),
    }


def judge_fixture_overall() -> float:
    scores = (1, 1, Fraction(3, 4), Fraction(3, 4), 1, 1, 1, 1, Fraction(3, 4))
    return float(Fraction(sum(scores), len(scores)))


def alternating_fixture() -> dict:
    # 15 trials alternating 1.0, 0.5 starting at 1.0: eight 1s, seven halves
    values = [Fraction(1) if i % 2 == 0 else Fraction(1, 2) for i in range(15)]
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return {"mean": float(mean), "pstd": float(mpmath.sqrt(mpmath.mpf(var.numerator) / var.denominator))}


GRID = (Fraction(0), Fraction(1, 4), Fraction(1, 2), Fraction(3, 4), Fraction(1))
DIMS = ("or_ci", "rr_ci", "or_smp", "rr_smp", "cmp", "chi_smp", "p_ctx", "lim", "att")


def trial_value(report: int, dim: int, trial: int) -> Fraction:
    """Deterministic score pattern for the 30x15 aggregation fixture.

    'att' (dim index 8) is constant 1.0 everywhere so its per-report std is
    exactly zero. Other dimensions alternate between 1.0 and a grid value
    picked by (report + dim) mod 5.
    """
    if dim == len(DIMS) - 1:
        return Fraction(1)
    if trial % 2 == 0:
        return Fraction(1)
    return GRID[(report + dim) % len(GRID)]


def aggregation_fixture(n_reports=30, n_trials=15) -> dict:
    per_dim_means: dict[str, list[Fraction]] = {k: [] for k in DIMS}
    per_dim_stds: dict[str, list[float]] = {k: [] for k in DIMS}
    overall_means: list[Fraction] = []
    overall_stds: list[float] = []
    for r in range(n_reports):
        trial_overalls: list[Fraction] = []
        per_trial: dict[str, list[Fraction]] = {k: [] for k in DIMS}
        for t in range(n_trials):
            vals = [trial_value(r, j, t) for j in range(len(DIMS))]
            for k, v in zip(DIMS, vals):
                per_trial[k].append(v)
            trial_overalls.append(sum(vals) / len(vals))
        for k in DIMS:
            vals = per_trial[k]
            mean = sum(vals) / len(vals)
            var = sum((v - mean) ** 2 for v in vals) / len(vals)
            per_dim_means[k].append(mean)
            per_dim_stds[k].append(
                float(mpmath.sqrt(mpmath.mpf(var.numerator) / var.denominator))
            )
        mean_o = sum(trial_overalls) / len(trial_overalls)
        var_o = sum((v - mean_o) ** 2 for v in trial_overalls) / len(trial_overalls)
        overall_means.append(mean_o)
        overall_stds.append(
            float(mpmath.sqrt(mpmath.mpf(var_o.numerator) / var_o.denominator))
        )
    rows = {}
    for k in DIMS:
        means = per_dim_means[k]
        rows[k] = {
            "mean": float(sum(means) / len(means)),
            "std": sum(per_dim_stds[k]) / len(per_dim_stds[k]),
            "min": float(min(means)),
            "max": float(max(means)),
        }
    rows["overall"] = {
        "mean": float(sum(overall_means) / len(overall_means)),
        "std": sum(overall_stds) / len(overall_stds),
        "min": float(min(overall_means)),
        "max": float(max(overall_means)),
    }
    return rows


def main() -> None:
    oracles = {
        "z_95": float(Z_95),
        "p_anchor_12_26": p_value("12.26"),
        "p_0_32": p_value("0.32"),
        "p_1_52": p_value("1.52"),
        "p_3_841459": p_value("3.841459"),
        "p_2_6667": p_value("2.6667"),
        "p_0": p_value("0"),
        "table_30_70_20_80": table_oracle(30, 70, 20, 80),
        "table_56_103_267_256": table_oracle(56, 103, 267, 256),
        "table_10_10_10_10": table_oracle(10, 10, 10, 10),
        "tanimoto_12_21": float(Fraction(1 * 2 + 2 * 1, (1 + 4) + (4 + 1) - (1 * 2 + 2 * 1))),
        "cosine_12_21": float(mpmath.mpf(4) / (mpmath.sqrt(5) * mpmath.sqrt(5))),
        "md5": {
            "pepper-1A123": md5_oracle("pepper-1A123"),
            "fixture-seedP000001": md5_oracle("fixture-seedP000001"),
            "sx": md5_oracle("sx"),
        },
        "judge_overall_fixture": judge_fixture_overall(),
        "alternating_trials": alternating_fixture(),
        "aggregation_30x15": aggregation_fixture(),
        "d_sign": {
            "p_ctx": {"model": 0.89, "human": 0.84, "d": 0.89 - 0.84},
            "lim": {"model": 0.75, "human": 0.94, "d": 0.75 - 0.94},
        },
    }
    out = Path(__file__).parent / "data" / "oracle_values.json"
    out.parent.mkdir(exist_ok=True)
    out.write_text(json.dumps(oracles, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out}")
    print(f"p(12.26) = {oracles['p_anchor_12_26']:.8f}")
    print(f"p(0.32)  = {oracles['p_0_32']:.8f}")
    print(f"p(1.52)  = {oracles['p_1_52']:.8f}")
    t = oracles["table_56_103_267_256"]
    print(f"engineered: OR {t['or']:.5f} RR {t['rr']:.5f} chi2 {t['chi2']:.4f} p {t['p']:.6f}")


if __name__ == "__main__":
    main()
