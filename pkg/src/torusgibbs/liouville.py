"""Construction of frequency pairs with abnormally good rational approximations.

alpha_2 = 1 and alpha_1 is built greedily from its continued fraction so the
convergents p_n/q_n satisfy |alpha_1 q_n - p_n| < 1/p_n^n with huge margin.
The witnesses are the integer pairs m_n = (q_n, -p_n); then

    alpha_1 m_1 + alpha_2 m_2 = alpha_1 q_n - p_n

is the tiny convergent residual.  The shipped alpha_1 is pinned to a deep
convergent p_K/q_K (two guard terms past the last witness), which makes
every residual an exact rational: r_n = |p_K q_n - p_n q_K| / q_K.  All
construction arithmetic is integer-exact; floats only appear in exported
convenience fields (and underflow to 0.0 for the deepest witnesses, whose
true values are kept as decimal strings).
"""

from __future__ import annotations

import json
from fractions import Fraction

import mpmath
import numpy as np

__all__ = ["LiouvilleData", "liouville_frequencies", "verify_witnesses"]


def _decimal_str(num, den, digits=30):
    """Decimal string of num/den without converting through float."""
    if num == 0:
        return "0"
    with mpmath.workdps(digits):
        val = mpmath.mpf(num) / mpmath.mpf(den)
        return mpmath.nstr(val, digits - 5)


class LiouvilleData:
    """Frequency pair, approximation witnesses, and the exact rational backing."""

    def __init__(self, cf_terms, witness_indices):
        self.cf_terms = [int(a) for a in cf_terms]
        # convergents of the full (guarded) continued fraction
        p = [0, 1]
        q = [1, 0]
        for a in self.cf_terms:
            p.append(a * p[-1] + p[-2])
            q.append(a * q[-1] + q[-2])
        self.p = p[2:]
        self.q = q[2:]
        self.p_exact = self.p[-1]
        self.q_exact = self.q[-1]
        self.witnesses = []
        for n in witness_indices:
            pn, qn = self.p[n], self.q[n]
            # signed residual of the pinned alpha against this convergent
            num = self.p_exact * qn - pn * self.q_exact
            self.witnesses.append({
                "n": n,
                "m1": qn,
                "m2": -pn,
                "residual_num": num,
                "residual_den": self.q_exact,
            })

    @property
    def alpha(self):
        """Float frequency pair (alpha_1 rounded from the exact rational)."""
        with mpmath.workdps(40):
            a1 = float(mpmath.mpf(self.p_exact) / mpmath.mpf(self.q_exact))
        return np.array([a1, 1.0])

    def alpha_fraction(self):
        return (Fraction(self.p_exact, self.q_exact), Fraction(1))

    def residual_fraction(self, i):
        w = self.witnesses[i]
        return Fraction(w["residual_num"], w["residual_den"])

    def residual_float(self, i):
        w = self.witnesses[i]
        with mpmath.workdps(40):
            return float(mpmath.mpf(w["residual_num"]) / mpmath.mpf(w["residual_den"]))

    def witness_modes(self):
        """Integer mode pairs (m1, m2), largest magnitudes last."""
        return [(w["m1"], w["m2"]) for w in self.witnesses]

    def precision_digits(self):
        """Decimal digits needed to resolve phases against the largest mode."""
        return len(str(abs(self.q_exact)))

    def to_json(self):
        return {
            "alpha": [float(self.alpha[0]), 1.0],
            "alpha_decimal": [_decimal_str(self.p_exact, self.q_exact, 60), "1"],
            "alpha_rational": {"p": str(self.p_exact), "q": str(self.q_exact)},
            "continued_fraction": [str(a) for a in self.cf_terms],
            "witnesses": [
                {
                    "n": w["n"],
                    "m1": str(w["m1"]),
                    "m2": str(w["m2"]),
                    "residual": self.residual_float(i),
                    "residual_decimal": _decimal_str(w["residual_num"],
                                                     w["residual_den"]),
                }
                for i, w in enumerate(self.witnesses)
            ],
        }

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)

    @classmethod
    def from_json(cls, data):
        cf = [int(a) for a in data["continued_fraction"]]
        indices = [int(w["n"]) for w in data["witnesses"]]
        out = cls(cf, indices)
        # sanity: the file's witnesses must match the reconstruction
        for w_in, w_out in zip(data["witnesses"], out.witnesses):
            if int(w_in["m1"]) != w_out["m1"] or int(w_in["m2"]) != w_out["m2"]:
                raise ValueError("witness list does not match the continued fraction")
        return out

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def __repr__(self):
        return "LiouvilleData(%d witnesses, q_max ~ 1e%d)" % (
            len(self.witnesses), len(str(abs(self.q_exact))) - 1)


def liouville_frequencies(depth=5, guard_terms=2, residual_cap=1e-14):
    """Greedy continued-fraction construction of the frequency data.

    Each partial quotient is chosen large enough that the witness residual
    beats 1/|m2|^n with margin and also falls below residual_cap (so that
    downstream Birkhoff sums built from the residuals stay tiny).  Integer
    sizes grow doubly exponentially; depth is capped accordingly.
    """
    if not 1 <= depth <= 8:
        raise ValueError("depth must be between 1 and 8")
    cf = [1, 2]  # alpha_1 in (1, 1.5); q_1 = 2 > 1
    p = [0, 1]
    q = [1, 0]
    for a in cf:
        p.append(a * p[-1] + p[-2])
        q.append(a * q[-1] + q[-2])
    witness_indices = []
    for n in range(1, depth + 1):
        qn = q[-1]
        witness_indices.append(n)
        # residual of witness n is ~ 1/(q_n q_{n+1}); force both the
        # 1/|m2|^n = 1/p_n^n margin (p_n < 2 q_n) and the absolute cap
        a_next = max(2 ** (n + 2) * qn ** max(n - 1, 0),
                     (-(-10 ** 14 // qn)) * 10)
        cf.append(a_next)
        p.append(a_next * p[-1] + p[-2])
        q.append(a_next * q[-1] + q[-2])
    for _ in range(guard_terms):
        cf.append(7)
        p.append(7 * p[-1] + p[-2])
        q.append(7 * q[-1] + q[-2])
    data = LiouvilleData(cf, witness_indices)
    report = verify_witnesses(data)
    if not report["ok"]:
        raise AssertionError("constructed witnesses fail their own inequality")
    # absolute cap on the first (largest) residual
    if abs(data.residual_fraction(0)) > Fraction(residual_cap):
        raise AssertionError("leading residual above the requested cap")
    return data


def verify_witnesses(data):
    """Exact integer re-check of every witness inequality.

    |alpha_1 m1 + alpha_2 m2| < 1/|m2|^n, |m2| >= |m1| > n, all checked
    as integer comparisons against the exact rational alpha_1.
    """
    results = []
    ok = True
    for i, w in enumerate(data.witnesses):
        n, m1, m2 = w["n"], w["m1"], w["m2"]
        num = abs(w["residual_num"])
        den = w["residual_den"]
        # |num/den| * |m2|^n < 1  <=>  num * |m2|^n < den
        ineq = num * abs(m2) ** n < den
        sizes = abs(m2) >= abs(m1) > n
        ok = ok and ineq and sizes
        results.append({
            "n": n,
            "inequality": bool(ineq),
            "sizes": bool(sizes),
            "residual": data.residual_float(i),
            "residual_decimal": _decimal_str(w["residual_num"], den),
            "m2_digits": len(str(abs(m2))),
        })
    return {"ok": bool(ok), "witnesses": results}
