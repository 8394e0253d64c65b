"""Freeze scipy Welch t-test results used as the independent reference in tests."""
import json
import os

import numpy as np
from scipy import stats

OUT = os.path.join(os.path.dirname(__file__), "..", "crates", "core", "tests", "fixtures", "welch_reference.json")


def case(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    r = stats.ttest_ind(a, b, equal_var=False)
    va, vb = a.var(ddof=1) / len(a), b.var(ddof=1) / len(b)
    df = (va + vb) ** 2 / (va ** 2 / (len(a) - 1) + vb ** 2 / (len(b) - 1))
    return {"a": a.tolist(), "b": b.tolist(), "t": float(r.statistic), "p": float(r.pvalue), "df": float(df)}


def main():
    rng = np.random.default_rng(20241016)
    cases = [case([0.1, 0.2, 0.3, 0.4], [0.15, 0.25, 0.35, 0.45])]
    while len(cases) < 101:
        na, nb = rng.integers(2, 31, size=2)
        a = rng.normal(rng.uniform(-1, 1), rng.uniform(0.05, 2.0), size=na)
        b = rng.normal(rng.uniform(-1, 1), rng.uniform(0.05, 2.0), size=nb)
        cases.append(case(a, b))
    with open(OUT, "w") as f:
        json.dump({"spec_example": cases[0], "random": cases[1:]}, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
