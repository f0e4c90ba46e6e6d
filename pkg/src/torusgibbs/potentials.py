"""Potentials on the skew product: evaluation, Birkhoff sums, leaf products.

Supported kinds:
  trig_poly   real trigonometric polynomial on the base (fiber independent)
  constant    a constant value
  srb         minus the log of the unstable expansion rate, measured in the
              leaf arclength parameter (constant for an unperturbed base)
  fiber_trig  trigonometric polynomial on the full torus T^d
  appendix_d  truncated oscillatory series driven by Liouville frequencies;
              the theta phases use exact integer arithmetic because the
              witness modes are far beyond float range

The leaf products delta_u, jac_s, jac_u are the truncated infinite products
of potential ratios along backward/forward orbits, with geometric tail
bounds from the Hölder data.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .leaves import periodic_orbits
from .systems import apply, derivative, unstable_direction
from .torus import TrigPolynomial, torus_distance, wrap

__all__ = [
    "PotentialSpec",
    "evaluate",
    "birkhoff_sum",
    "delta_u",
    "jac_s",
    "jac_u",
    "livsic_obstruction",
    "orbit_potential_sum",
    "appendix_orbit_sum",
]

KINDS = ("trig_poly", "constant", "srb", "fiber_trig", "appendix_d")


class PotentialSpec:
    """Description of one potential, with Hölder data."""

    def __init__(self, kind, poly=None, value=0.0, liouville=None, n_trunc=None,
                 use_imag=False, holder_constant=None, holder_exponent=1.0):
        if kind not in KINDS:
            raise ValueError("unknown potential kind %r" % (kind,))
        self.kind = kind
        self.poly = poly
        self.value = float(value)
        self.liouville = liouville
        self.use_imag = bool(use_imag)
        if kind == "trig_poly":
            if poly is None or poly.dim != 2:
                raise ValueError("trig_poly needs a polynomial on the base")
        if kind == "fiber_trig" and poly is None:
            raise ValueError("fiber_trig needs a polynomial on the full torus")
        if kind == "appendix_d":
            if liouville is None:
                raise ValueError("appendix_d needs liouville data")
            n_avail = len(liouville.witnesses)
            self.n_trunc = n_avail if n_trunc is None else int(n_trunc)
            if not 1 <= self.n_trunc <= n_avail:
                raise ValueError("truncation outside the witness range")
        else:
            self.n_trunc = n_trunc
        self.c_constant = kind in ("trig_poly", "constant", "srb")
        self._holder = (holder_constant, float(holder_exponent))

    def holder_data(self, system):
        """(C, theta) with |phi(x)-phi(y)| <= C d(x,y)^theta."""
        c_given, exp_given = self._holder
        if c_given is not None:
            return float(c_given), exp_given
        if self.kind == "constant":
            return 0.0, 1.0
        if self.kind == "trig_poly" or self.kind == "fiber_trig":
            return self.poly.lipschitz_bound(), 1.0
        if self.kind == "srb":
            if system.perturbation is None:
                return 0.0, 1.0
            return _sampled_holder(self, system)
        return _sampled_holder(self, system)

    def to_json(self):
        out = {"kind": self.kind}
        if self.kind in ("trig_poly", "fiber_trig"):
            out["modes"] = self.poly.to_json()
        if self.kind == "constant":
            out["value"] = self.value
        if self.kind == "appendix_d":
            out["n_trunc"] = self.n_trunc
            out["use_imag"] = self.use_imag
            out["liouville"] = self.liouville.to_json()
        return out

    @classmethod
    def from_json(cls, data, liouville=None):
        kind = data["kind"]
        if kind in ("trig_poly", "fiber_trig"):
            return cls(kind, poly=TrigPolynomial.from_json(data["modes"]))
        if kind == "constant":
            return cls(kind, value=data.get("value", 0.0))
        if kind == "srb":
            return cls(kind)
        if kind == "appendix_d":
            if liouville is None:
                from .liouville import LiouvilleData
                liouville = LiouvilleData.from_json(data["liouville"])
            return cls(kind, liouville=liouville,
                       n_trunc=data.get("n_trunc"),
                       use_imag=data.get("use_imag", False))
        raise ValueError("unknown potential kind %r" % (kind,))

    def __repr__(self):
        if self.kind == "constant":
            return "PotentialSpec(constant %.6g)" % self.value
        return "PotentialSpec(%s)" % self.kind


def _sampled_holder(potential, system, n_pairs=10**4, seed=7):
    rng = np.random.default_rng(seed)
    x = rng.random((n_pairs, system.dim))
    step = rng.normal(size=(n_pairs, system.dim))
    step *= (10.0 ** rng.uniform(-4, -0.5, n_pairs) / np.linalg.norm(step, axis=1))[:, None]
    y = wrap(x + step)
    fx = evaluate(potential, system, x)
    fy = evaluate(potential, system, y)
    d = torus_distance(x, y)
    ratio = np.abs(fx - fy) / d
    return float(np.max(ratio) * 1.5), 1.0


def _exact_mode_phases(theta, modes):
    """frac(m1 th1 + m2 th2) per point and mode, exact integer arithmetic.

    Floats are dyadic rationals, so the product m*theta is computed without
    rounding; only the final reduction mod 1 is rounded back to float.
    This matters because |m| can exceed 1e300 where one float ulp of theta
    swamps the phase entirely.
    """
    flat = np.ascontiguousarray(theta, dtype=float).reshape(-1, 2)
    out = np.empty((flat.shape[0], len(modes)))
    for i in range(flat.shape[0]):
        f1 = Fraction(float(flat[i, 0]))
        f2 = Fraction(float(flat[i, 1]))
        for j, (m1, m2) in enumerate(modes):
            val = m1 * f1 + m2 * f2
            out[i, j] = float(val - (val.numerator // val.denominator))
    return out.reshape(theta.shape[:-1] + (len(modes),))


def _appendix_terms(potential, system, kval, theta_phase):
    """Summed witness terms given k values and exact theta phases."""
    res = np.array([potential.liouville.residual_float(j)
                    for j in range(potential.n_trunc)])
    a = 2.0 * np.pi * kval[..., None] * res
    b = 2.0 * np.pi * theta_phase
    if potential.use_imag:
        terms = np.sin(b) - np.sin(a + b)
    else:
        terms = np.cos(b) - np.cos(a + b)
    return terms.sum(axis=-1)


def evaluate(potential, system, x):
    """Potential value at points of shape (..., dim)."""
    x = np.asarray(x, dtype=float)
    lead = x.shape[:-1]
    if potential.kind == "constant":
        return np.full(lead, potential.value)
    if potential.kind == "trig_poly":
        return potential.poly(x[..., :2])
    if potential.kind == "fiber_trig":
        if x.shape[-1] != potential.poly.dim:
            raise ValueError("point dimension does not match the polynomial")
        return potential.poly(x)
    if potential.kind == "srb":
        if system.perturbation is None:
            return np.full(lead, -math.log(system.expansion))
        return _srb_perturbed(system, x)
    # appendix_d
    if system.center_dim != 2:
        raise ValueError("the oscillatory potential needs a two-dimensional fiber")
    theta = x[..., 2:]
    kval = system.coupling_values(x[..., :2])
    modes = potential.liouville.witness_modes()[:potential.n_trunc]
    phases = _exact_mode_phases(theta, modes)
    return _appendix_terms(potential, system, kval, phases)


def _srb_perturbed(system, x):
    flat = x.reshape(-1, x.shape[-1])
    out = np.empty(flat.shape[0])
    for i, pt in enumerate(flat):
        v = unstable_direction(system, pt)
        img = derivative(system, pt) @ v
        nb = np.linalg.norm(v[:2])
        out[i] = -math.log(np.linalg.norm(img[:2]) / nb)
    return out.reshape(x.shape[:-1])


def birkhoff_sum(potential, system, x, n):
    """S_n phi. For n < 0 the backward cocycle convention:

        S_{-m} phi(x) = -sum_{j=1..m} phi(f^{-j} x),

    which makes S additive: S_{n+m}(x) = S_n(x) + S_m(f^n x) for all signs.
    """
    x = np.asarray(x, dtype=float)
    total = np.zeros(x.shape[:-1])
    if n == 0:
        return total
    cur = x
    if n > 0:
        for _ in range(n):
            total += evaluate(potential, system, cur)
            cur = apply(system, cur, 1)
    else:
        for _ in range(-n):
            cur = apply(system, cur, -1)
            total -= evaluate(potential, system, cur)
    return total


def _product_depth(potential, system, dist, tol):
    c_h, th = potential.holder_data(system)
    lam = system.expansion ** th
    if c_h == 0.0 or dist == 0.0:
        return 4
    tol = tol if tol is not None else 1e-8
    n = math.log(c_h * dist ** th / (tol * (1.0 - 1.0 / lam))) / (th * math.log(system.expansion))
    # float rounding transverse to the leaf grows like expansion^k while the
    # leaf separation shrinks like expansion^-k; past the crossing the terms
    # are noise, so the product must stop there whatever the Hölder tail says
    cap = math.log(max(dist, 1e-8) / np.finfo(float).eps * 10.0) / (2.0 * math.log(system.expansion))
    return int(min(max(4, math.ceil(n)), max(4, math.floor(cap)), 400))


def _tail_bound(potential, system, dist, depth):
    c_h, th = potential.holder_data(system)
    lam = system.expansion ** (-th)
    return c_h * lam ** (depth + 1) / (1.0 - lam) * dist ** th


def delta_u(potential, system, x, y, depth=None, tol=1e-8):
    """Product over k >= 1 of exp(phi(f^-k y) - phi(f^-k x)).

    y may be an array of points (..., dim) on the unstable leaf of x.
    Backward iteration contracts along the leaf, so the log-series converges
    geometrically; depth defaults to the Hölder tail estimate for tol.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dist = float(np.max(torus_distance(y, np.broadcast_to(x, y.shape))))
    if depth is None:
        depth = _product_depth(potential, system, dist, tol)
    bound = _tail_bound(potential, system, dist, depth)
    if tol is not None and bound > tol:
        raise ValueError("tail bound %.3e exceeds tolerance %.3e; raise depth"
                         % (bound, tol))
    log_ratio = np.zeros(y.shape[:-1])
    cx, cy = x, y
    for _ in range(depth):
        cx = apply(system, cx, -1)
        cy = apply(system, cy, -1)
        log_ratio += evaluate(potential, system, cy) - evaluate(potential, system, cx)
    return np.exp(log_ratio)


def jac_s(potential, system, z, zp, depth=None, tol=1e-8):
    """Product over j >= 0 of exp(phi(f^j z') - phi(f^j z)) along stable pairs."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    dist = float(np.max(torus_distance(zp, np.broadcast_to(z, zp.shape))))
    if depth is None:
        depth = _product_depth(potential, system, dist, tol)
    bound = _tail_bound(potential, system, dist, depth)
    if tol is not None and bound > tol:
        raise ValueError("tail bound %.3e exceeds tolerance %.3e; raise depth"
                         % (bound, tol))
    log_ratio = np.zeros(zp.shape[:-1])
    cz, cp = z, zp
    d0 = dist
    for j in range(depth + 1):
        log_ratio += evaluate(potential, system, cp) - evaluate(potential, system, cz)
        cz = apply(system, cz, 1)
        cp = apply(system, cp, 1)
    d_end = float(np.max(torus_distance(cp, cz)))
    if d0 > 1e-12 and d_end > 0.5 * d0 and depth >= 4:
        raise ValueError("forward distances did not contract; "
                         "points are not on a common stable leaf")
    return np.exp(log_ratio)


def jac_u(potential, system, z, zp, depth=None, tol=1e-8):
    """Product over j >= 1 of exp(phi(f^-j z') - phi(f^-j z)) along unstable pairs."""
    z = np.asarray(z, dtype=float)
    zp = np.asarray(zp, dtype=float)
    dist = float(np.max(torus_distance(zp, np.broadcast_to(z, zp.shape))))
    if depth is None:
        depth = _product_depth(potential, system, dist, tol)
    bound = _tail_bound(potential, system, dist, depth)
    if tol is not None and bound > tol:
        raise ValueError("tail bound %.3e exceeds tolerance %.3e; raise depth"
                         % (bound, tol))
    log_ratio = np.zeros(zp.shape[:-1])
    cz, cp = z, zp
    d0 = dist
    for _ in range(depth):
        cz = apply(system, cz, -1)
        cp = apply(system, cp, -1)
        log_ratio += evaluate(potential, system, cp) - evaluate(potential, system, cz)
    d_end = float(np.max(torus_distance(cp, cz)))
    if d0 > 1e-12 and d_end > 0.5 * d0 and depth >= 4:
        raise ValueError("backward distances did not contract; "
                         "points are not on a common unstable leaf")
    return np.exp(log_ratio)


def appendix_orbit_sum(potential, system, orbit):
    """Birkhoff sum of the oscillatory potential over one base periodic orbit.

    The fiber starts at theta = 0 and its phase against each witness mode is
    tracked as running-coupling-sum times residual, which never touches the
    huge mode integers; evaluating through float fiber coordinates instead
    would amplify their rounding by |m| and produce noise.
    """
    kvals = system.coupling_values(orbit)
    res = np.array([potential.liouville.residual_float(j)
                    for j in range(potential.n_trunc)])
    running = np.concatenate([[0.0], np.cumsum(kvals)[:-1]])
    a = 2.0 * np.pi * kvals[:, None] * res
    b = 2.0 * np.pi * running[:, None] * res
    if potential.use_imag:
        terms = np.sin(b) - np.sin(a + b)
    else:
        terms = np.cos(b) - np.cos(a + b)
    return float(terms.sum())


def orbit_potential_sum(potential, system, orbit):
    """Birkhoff sum over a base periodic orbit for fiber-independent kinds."""
    if potential.kind == "appendix_d":
        return appendix_orbit_sum(potential, system, orbit)
    if not potential.c_constant:
        raise ValueError("potential must be fiber independent, or have its "
                         "fiber phase tracked explicitly")
    pts = np.asarray(orbit, dtype=float)
    if pts.shape[-1] == 2 and system.center_dim:
        fill = np.zeros(pts.shape[:-1] + (system.center_dim,))
        pts = np.concatenate([pts, fill], axis=-1)
    return float(np.sum(evaluate(potential, system, pts)))


def livsic_obstruction(potential, system, max_period, candidate=None):
    """Per-orbit Birkhoff sums minus period times a candidate constant.

    A potential cohomologous to the constant c has S_p phi = p c over every
    periodic orbit; the returned list of (period, orbit, defect) is the
    numerical obstruction.  The candidate defaults to the value forced by
    the fixed orbit of the origin.
    """
    orbits = periodic_orbits(system, max_period)
    if candidate is None:
        fixed = np.zeros((1, 2))
        candidate = orbit_potential_sum(potential, system, fixed)
    out = []
    for period, orbit in orbits:
        s = orbit_potential_sum(potential, system, orbit)
        out.append((period, orbit, s - period * candidate))
    return out
