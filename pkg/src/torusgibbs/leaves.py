"""Invariant leaf segments, Bowen balls and periodic points.

Unstable and stable leaves of the skew product are graphs over the base
eigenlines: the base moves linearly along e_u or e_s while the fiber picks
up a shift given by a geometrically convergent series of coupling
differences.  Segments are parametrized by signed base arclength t, with
the anchor at t = 0.
"""

from __future__ import annotations

import math
from fractions import Fraction

import numpy as np

from .systems import apply, int_matrix_power, stable_direction, unstable_direction
from .torus import torus_delta, torus_distance, wrap

__all__ = [
    "LeafSegment",
    "leaf_point",
    "fiber_shift",
    "BowenBallSpec",
    "bowen_ball_contains",
    "periodic_points",
    "periodic_orbits",
]

DEFAULT_TOL = 1e-10


def default_truncation(system, tol=DEFAULT_TOL):
    """Depth making the geometric series tail fall below tol."""
    return max(4, int(math.ceil(-math.log(tol) / math.log(system.expansion))))


class LeafSegment:
    """A parametrized piece of unstable or stable leaf through an anchor."""

    def __init__(self, anchor, kind="unstable", half_width=0.2, truncation=None):
        self.anchor = wrap(np.asarray(anchor, dtype=float))
        if kind not in ("unstable", "stable"):
            raise ValueError("kind must be 'unstable' or 'stable'")
        self.kind = kind
        if half_width <= 0:
            raise ValueError("half_width must be positive")
        self.half_width = float(half_width)
        self.truncation = truncation
        self._polyline = None

    def tail_bound(self, system, t):
        """Geometric tail of the truncated fiber-shift series at parameter t."""
        if system.coupling is None or system.center_dim == 0:
            return 0.0
        depth = self.truncation or default_truncation(system)
        lam = system.expansion
        lip = system.coupling.lipschitz_bound()
        scale = float(np.linalg.norm(system.frequencies))
        return scale * lip * lam ** (-depth) * abs(float(np.max(np.abs(t)))) / (lam - 1.0)

    def __repr__(self):
        return "LeafSegment(%s, r=%.4g, anchor=%s)" % (
            self.kind, self.half_width, np.array2string(self.anchor, precision=4))


def fiber_shift(system, xb, t, kind="unstable", depth=None):
    """Series giving the fiber displacement along a leaf, before the alpha scaling.

    Unstable: sum over j >= 1 of k(A^-j x + t lam^-j e_u) - k(A^-j x).
    Stable:   sum over j >= 0 of k(A^j x) - k(A^j x + t lam_s^j e_s).
    Both series converge geometrically; the signs make backward (resp.
    forward) iteration contract distances along the leaf.
    """
    t = np.asarray(t, dtype=float)
    if system.coupling is None or system.center_dim == 0:
        return np.zeros(t.shape)
    if depth is None:
        depth = default_truncation(system)
    k = system.coupling
    xb = np.asarray(xb, dtype=float)
    total = np.zeros(t.shape)
    if kind == "unstable":
        lam = system.lambda_u
        ainv = system.base_inv.astype(float)
        b = xb
        scale = 1.0
        for _ in range(depth):
            b = wrap(b @ ainv.T)
            scale /= lam
            disp = t[..., None] * (scale * system.e_u)
            total += k(b + disp) - k(b)
    else:
        lam_s = system.lambda_s
        amat = system.base.astype(float)
        b = xb
        scale = 1.0
        for _ in range(depth + 1):
            disp = t[..., None] * (scale * system.e_s)
            total += k(b) - k(b + disp)
            b = wrap(b @ amat.T)
            scale *= lam_s
    return total


def _grow_polyline(system, seg):
    """Graph-transform construction of a nonlinear leaf as a polyline.

    A short straight segment through the deep backward (forward, for stable)
    iterate of the anchor is pushed through the dynamics; the image hugs the
    true leaf.  Points are parametrized by accumulated base arclength.
    """
    n_steps = 40
    sgn = -1 if seg.kind == "unstable" else 1
    z = apply(system, seg.anchor, sgn * n_steps)
    if seg.kind == "unstable":
        v = unstable_direction(system, z)
    else:
        v = stable_direction(system, z)
    lam = system.expansion
    h0 = seg.half_width * lam ** (-n_steps) * 4.0
    n_pts = max(801, int(seg.half_width * 2 * 1.5 * 1000) | 1)
    s_grid = np.linspace(-h0, h0, n_pts)
    pts = wrap(z[None, :] + s_grid[:, None] * v[None, :])
    pts = apply(system, pts, -sgn * n_steps)
    mid = n_pts // 2
    deltas = torus_delta(pts[1:], pts[:-1])
    ds = np.linalg.norm(deltas[:, :2], axis=1)
    cum = np.concatenate([[0.0], np.cumsum(ds)])
    params = cum - cum[mid]
    if params[0] > -seg.half_width or params[-1] < seg.half_width:
        raise RuntimeError("grown leaf polyline does not cover the segment; "
                           "increase the growth margin")
    return params, pts


def leaf_point(system, seg, t, tol=None):
    """Point(s) of the leaf segment at signed base arclength t.

    t may be a scalar or an array; |t| must not exceed the half width.
    For unperturbed bases the result is the closed series form; perturbed
    bases interpolate a grown polyline.  tol, when given, is checked
    against the truncation tail bound.
    """
    t = np.asarray(t, dtype=float)
    if np.any(np.abs(t) > seg.half_width * (1 + 1e-12)):
        raise ValueError("parameter outside the segment")
    if tol is not None:
        bound = seg.tail_bound(system, np.max(np.abs(t)))
        if bound > tol:
            raise ValueError(
                "series tail %.3e above tolerance %.3e; raise the truncation depth"
                % (bound, tol))
    if system.perturbation is not None:
        if seg._polyline is None:
            seg._polyline = _grow_polyline(system, seg)
        params, pts = seg._polyline
        idx = np.clip(np.searchsorted(params, t) - 1, 0, len(params) - 2)
        frac = (t - params[idx]) / (params[idx + 1] - params[idx])
        step = torus_delta(pts[idx + 1], pts[idx])
        return wrap(pts[idx] + frac[..., None] * step)
    e_dir = system.e_u if seg.kind == "unstable" else system.e_s
    base = wrap(seg.anchor[..., :2] + t[..., None] * e_dir)
    if system.center_dim == 0:
        return base
    depth = seg.truncation or default_truncation(system)
    shift = fiber_shift(system, seg.anchor[:2], t, seg.kind, depth)
    theta = wrap(seg.anchor[2:] + shift[..., None] * system.frequencies)
    return np.concatenate([base, np.broadcast_to(theta, t.shape + (system.center_dim,))], axis=-1)


class BowenBallSpec:
    """Center, radius and depth of a dynamical ball."""

    def __init__(self, center, radius, depth):
        self.center = wrap(np.asarray(center, dtype=float))
        if radius <= 0:
            raise ValueError("radius must be positive")
        self.radius = float(radius)
        if depth < 0:
            raise ValueError("depth must be >= 0")
        self.depth = int(depth)


def bowen_ball_contains(system, spec, y):
    """Membership test: the first depth iterates stay within radius.

    Scalar points short-circuit at the first violation; arrays are masked.
    """
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        cy = y.copy()
        cc = spec.center.copy()
        for _ in range(spec.depth):
            if torus_distance(cy, cc) >= spec.radius:
                return False
            cy = apply(system, cy, 1)
            cc = apply(system, cc, 1)
        return True
    alive = np.ones(y.shape[:-1], dtype=bool)
    cy = y.copy()
    cc = spec.center.copy()
    for _ in range(spec.depth):
        d = torus_distance(cy, cc)
        alive &= d < spec.radius
        if not alive.any():
            break
        cy = apply(system, cy, 1)
        cc = apply(system, cc, 1)
    return alive


def _diagonalize_2x2(m):
    """Integer diagonalization U M V = diag; returns (s1, s2, V) with V unimodular.

    Column operations are mirrored on V (M := M E, V := V E); row operations
    act on M alone.  The pivot magnitude strictly decreases through the
    remainder steps, so the loop terminates like the Euclidean algorithm.
    """
    a, b, c, d = m[0][0], m[0][1], m[1][0], m[1][1]
    v = (1, 0, 0, 1)
    for _ in range(256):
        if b == 0 and c == 0:
            break
        if a == 0:
            if b != 0:
                a, b, c, d = b, a, d, c
                v = (v[1], v[0], v[3], v[2])
            elif c != 0:
                a, b, c, d = c, d, a, b
            else:
                a, b, c, d = d, c, b, a
                v = (v[1], v[0], v[3], v[2])
            continue
        if b != 0:
            q = b // a
            b, d = b - q * a, d - q * c
            v = (v[0], v[1] - q * v[0], v[2], v[3] - q * v[2])
            if b != 0:
                a, b, c, d = b, a, d, c
                v = (v[1], v[0], v[3], v[2])
            continue
        q = c // a
        c, d = c - q * a, d - q * b
        if c != 0:
            a, b, c, d = c, d, a, b
    else:
        raise AssertionError("integer diagonalization did not terminate")
    return abs(a), abs(d), v


def periodic_points(system, period, exact=False):
    """All base points whose period divides the given one.

    Solves (A^p - I) x = 0 mod Z^2 by integer diagonalization; the count
    equals |det(A^p - I)|.  Returns an (N, 2) float array, or a list of
    Fraction pairs when exact.
    """
    if period < 1 or period > system.period_guard:
        raise ValueError("period outside guard range [1, %d]" % system.period_guard)
    ap = int_matrix_power(system.base, period)
    m = ((ap[0][0] - 1, ap[0][1]), (ap[1][0], ap[1][1] - 1))
    det = m[0][0] * m[1][1] - m[0][1] * m[1][0]
    assert det != 0, "hyperbolic matrices cannot have 1 as an eigenvalue"
    s1, s2, v = _diagonalize_2x2(m)
    count = s1 * s2
    assert count == abs(det)
    pts = []
    for i in range(s1):
        for j in range(s2):
            n1 = (v[0] * i * s2 + v[1] * j * s1) % count
            n2 = (v[2] * i * s2 + v[3] * j * s1) % count
            pts.append((n1, n2))
    if exact:
        return [(Fraction(n1, count), Fraction(n2, count)) for n1, n2 in pts]
    return np.array(pts, dtype=float) / float(count)


def periodic_orbits(system, max_period):
    """Distinct base periodic orbits with exact period <= max_period.

    Returns a list of (period, orbit) with orbit an (p, 2) float array;
    orbits are deduplicated across periods with exact rational keys.
    """
    amat = ((int(system.base[0, 0]), int(system.base[0, 1])),
            (int(system.base[1, 0]), int(system.base[1, 1])))
    seen = set()
    orbits = []
    for p in range(1, max_period + 1):
        for x0 in periodic_points(system, p, exact=True):
            orbit = [x0]
            cur = x0
            for _ in range(p - 1):
                cur = ((amat[0][0] * cur[0] + amat[0][1] * cur[1]) % 1,
                       (amat[1][0] * cur[0] + amat[1][1] * cur[1]) % 1)
                if cur == x0:
                    break
                orbit.append(cur)
            key = min(orbit)
            if key in seen:
                continue
            seen.add(key)
            arr = np.array([[float(a), float(b)] for a, b in orbit])
            orbits.append((len(orbit), arr))
    return orbits
