#!/usr/bin/env python3
"""Arbitrary-precision reference values for the statistics engine.

Regenerate with:

    python3 crates/core/tests/oracle/stats_oracle.py > crates/core/tests/fixtures/stats_oracle.json

Every quantity is recomputed from first principles with mpmath at 60 digits;
nothing here shares code with the Rust implementation.
"""
import json
import random
from fractions import Fraction

import mpmath as mp

mp.mp.dps = 60
CASES = 100


def s(x):
    return mp.nstr(x, 30, strip_zeros=False)


def welch(a, b):
    a = [mp.mpf(x) for x in a]
    b = [mp.mpf(x) for x in b]
    n1, n2 = len(a), len(b)
    m1, m2 = mp.fsum(a) / n1, mp.fsum(b) / n2
    v1 = mp.fsum((x - m1) ** 2 for x in a) / (n1 - 1)
    v2 = mp.fsum((x - m2) ** 2 for x in b) / (n2 - 1)
    se2 = v1 / n1 + v2 / n2
    t = (m1 - m2) / mp.sqrt(se2)
    df = se2 ** 2 / ((v1 / n1) ** 2 / (n1 - 1) + (v2 / n2) ** 2 / (n2 - 1))
    p = mp.betainc(df / 2, mp.mpf(1) / 2, 0, df / (df + t * t), regularized=True)
    pooled = mp.sqrt(((n1 - 1) * v1 + (n2 - 1) * v2) / (n1 + n2 - 2))
    d = abs(m1 - m2) / pooled
    return t, df, p, m1 - m2, d


def ztest(x1, n1, x2, n2):
    p1, p2 = mp.mpf(x1) / n1, mp.mpf(x2) / n2
    pp = mp.mpf(x1 + x2) / (n1 + n2)
    z = (p1 - p2) / mp.sqrt(pp * (1 - pp) * (mp.mpf(1) / n1 + mp.mpf(1) / n2))
    p = mp.erfc(abs(z) / mp.sqrt(2))
    h = abs(2 * mp.asin(mp.sqrt(p1)) - 2 * mp.asin(mp.sqrt(p2)))
    # Pearson chi-square on the 2x2 table, no continuity correction.
    table = [[x1, n1 - x1], [x2, n2 - x2]]
    total = n1 + n2
    cols = [x1 + x2, total - x1 - x2]
    chi2 = mp.mpf(0)
    for i, row in enumerate(table):
        for j, obs in enumerate(row):
            exp = mp.mpf(sum(table[i])) * cols[j] / total
            chi2 += (obs - exp) ** 2 / exp
    return z, p, p1 - p2, h, chi2


def kappa(a, b):
    n = len(a)
    po = Fraction(sum(1 for x, y in zip(a, b) if x == y), n)
    pa, pb = Fraction(sum(a), n), Fraction(sum(b), n)
    pe = pa * pb + (1 - pa) * (1 - pb)
    if pe == 1:
        return Fraction(1) if po == 1 else Fraction(0)
    return (po - pe) / (1 - pe)


def main():
    rng = random.Random(20230112)
    welch_cases, z_cases, d_cases, k_cases = [], [], [], []
    for _ in range(CASES):
        n1, n2 = rng.randint(2, 60), rng.randint(2, 60)
        mu, sd1, sd2 = rng.uniform(-2, 2), rng.uniform(0.1, 5), rng.uniform(0.1, 5)
        a = [round(rng.gauss(0, sd1), 4) for _ in range(n1)]
        b = [round(rng.gauss(mu, sd2), 4) for _ in range(n2)]
        t, df, p, est, d = welch(a, b)
        welch_cases.append({"a": a, "b": b, "t": s(t), "df": s(df), "p": s(p),
                            "estimate": s(est), "d": s(d)})

        n1, n2 = rng.randint(1, 5000), rng.randint(1, 5000)
        while True:
            x1, x2 = rng.randint(0, n1), rng.randint(0, n2)
            if 0 < x1 + x2 < n1 + n2:
                break
        z, p, est, h, chi2 = ztest(x1, n1, x2, n2)
        z_cases.append({"x1": x1, "n1": n1, "x2": x2, "n2": n2, "z": s(z), "p": s(p),
                        "estimate": s(est), "h": s(h), "chi2": s(chi2)})

        n1, n2 = rng.randint(2, 40), rng.randint(2, 40)
        a = [round(rng.uniform(-10, 10), 3) for _ in range(n1)]
        b = [round(rng.uniform(-5, 15), 3) for _ in range(n2)]
        d_cases.append({"a": a, "b": b, "d": s(welch(a, b)[4])})

        n = rng.randint(1, 200)
        bias = rng.random()
        la = [rng.random() < bias for _ in range(n)]
        flip = rng.uniform(0, 0.5)
        lb = [(not x) if rng.random() < flip else x for x in la]
        k = kappa(la, lb)
        k_cases.append({"a": la, "b": lb, "kappa": s(mp.mpf(k.numerator) / k.denominator)})

    json.dump({"welch": welch_cases, "ztest": z_cases, "cohens_d": d_cases,
               "kappa": k_cases}, __import__("sys").stdout, indent=1)
    print()


if __name__ == "__main__":
    main()
