"""Skew products over hyperbolic toral automorphisms.

The base is T^2 with an integer hyperbolic matrix A (|trace| > 2, det = +-1),
optionally perturbed by a small trigonometric vector field.  The fiber is
T^c, c in {0, 1, 2}, rotated by frequencies alpha scaled by a coupling
function k on the base:

    f(x, theta) = (A x + eps g(x), theta + alpha k(x))      (mod 1)

Fibers are rotated rigidly, so the map is an isometric extension of the base.
"""

from __future__ import annotations

import numpy as np

from .torus import TrigPolynomial, torus_delta, wrap

__all__ = [
    "SystemSpec",
    "apply",
    "derivative",
    "unstable_direction",
    "stable_direction",
    "int_matrix_power",
]


def int_matrix_power(mat, n):
    """Exact integer power of a 2x2 integer matrix (python ints, no overflow)."""
    a, b, c, d = int(mat[0][0]), int(mat[0][1]), int(mat[1][0]), int(mat[1][1])
    if n < 0:
        det = a * d - b * c
        if det == 1:
            a, b, c, d = d, -b, -c, a
        elif det == -1:
            a, b, c, d = -d, b, c, -a
        else:
            raise ValueError("matrix is not invertible over the integers")
        n = -n
    out = (1, 0, 0, 1)
    cur = (a, b, c, d)
    while n:
        if n & 1:
            out = (
                out[0] * cur[0] + out[1] * cur[2],
                out[0] * cur[1] + out[1] * cur[3],
                out[2] * cur[0] + out[3] * cur[2],
                out[2] * cur[1] + out[3] * cur[3],
            )
        cur = (
            cur[0] * cur[0] + cur[1] * cur[2],
            cur[0] * cur[1] + cur[1] * cur[3],
            cur[2] * cur[0] + cur[3] * cur[2],
            cur[2] * cur[1] + cur[3] * cur[3],
        )
        n >>= 1
    return ((out[0], out[1]), (out[2], out[3]))


class SystemSpec:
    """Validated description of one skew product, with cached eigendata."""

    def __init__(self, base, coupling=None, frequencies=(), perturbation=None,
                 iter_guard=10**6, period_guard=12):
        self.base = np.asarray(base, dtype=np.int64)
        if self.base.shape != (2, 2):
            raise ValueError("base must be a 2x2 integer matrix")
        det = int(round(np.linalg.det(self.base)))
        if det not in (1, -1):
            raise ValueError("base must have determinant +-1")
        tr = int(self.base[0, 0] + self.base[1, 1])
        if det == 1 and abs(tr) <= 2:
            raise ValueError("base must be hyperbolic (|trace| > 2 for det 1)")
        self.det = det
        self.frequencies = np.asarray(frequencies, dtype=float)
        c = self.frequencies.shape[0]
        if c not in (0, 1, 2):
            raise ValueError("center dimension must be 0, 1 or 2")
        self.center_dim = c
        if coupling is None and c > 0:
            # canonical coupling: vanishes at the fixed point 0
            coupling = TrigPolynomial([[1, 0], [0, 0]], [1.0, -1.0], [0.0, 0.0])
        if coupling is not None and coupling.dim != 2:
            raise ValueError("coupling must be a function on the base torus")
        self.coupling = coupling
        self.iter_guard = int(iter_guard)
        self.period_guard = int(period_guard)

        # eigendata of the integer part; exact quadratic formulas
        disc = tr * tr - 4 * det
        if disc <= 0:
            raise ValueError("base has no real eigenbasis")
        rt = np.sqrt(float(disc))
        roots = ((tr + rt) / 2.0, (tr - rt) / 2.0)
        lam_u = max(roots, key=abs)
        lam_s = min(roots, key=abs)
        if not (abs(lam_u) > 1.0 + 1e-12 and abs(lam_s) < 1.0 - 1e-12):
            raise ValueError("base is not hyperbolic")
        self.lambda_u = float(lam_u)
        self.lambda_s = float(lam_s)
        self.expansion = abs(self.lambda_u)
        self.e_u = self._eigvec(lam_u)
        self.e_s = self._eigvec(lam_s)
        basis = np.column_stack([self.e_u, self.e_s])
        dual = np.linalg.inv(basis)
        self.dual_u = dual[0]
        self.dual_s = dual[1]
        self.base_inv = np.array(int_matrix_power(self.base, -1), dtype=np.int64)

        self.perturbation = None
        if perturbation is not None:
            amp, gx, gy = perturbation
            if gx.dim != 2 or gy.dim != 2:
                raise ValueError("perturbation components live on the base torus")
            self.perturbation = (float(amp), gx, gy)
            self._validate_cone()

    def _eigvec(self, lam):
        a, b = float(self.base[0, 0]), float(self.base[0, 1])
        c, d = float(self.base[1, 0]), float(self.base[1, 1])
        # rows of (A - lam I) are orthogonal to the eigenvector; pick the
        # better conditioned kernel representation
        v1 = np.array([b, lam - a])
        v2 = np.array([lam - d, c])
        v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
        return v / np.linalg.norm(v)

    @property
    def dim(self):
        return 2 + self.center_dim

    def coupling_values(self, xb):
        if self.coupling is None:
            return np.zeros(np.asarray(xb).shape[:-1])
        return self.coupling(xb)

    def perturbation_field(self, xb):
        amp, gx, gy = self.perturbation
        return amp * np.stack([gx(xb), gy(xb)], axis=-1)

    def perturbation_jacobian(self, xb):
        amp, gx, gy = self.perturbation
        return amp * np.stack([gx.gradient(xb), gy.gradient(xb)], axis=-2)

    def _validate_cone(self):
        """Grid check that a fixed unstable cone is strictly preserved."""
        grid = np.stack(np.meshgrid(np.linspace(0, 1, 25, endpoint=False),
                                    np.linspace(0, 1, 25, endpoint=False),
                                    indexing="ij"), axis=-1).reshape(-1, 2)
        kappa = 0.5
        jac = self.base.astype(float) + self.perturbation_jacobian(grid)
        for sgn in (1.0, -1.0):
            w = self.e_u + sgn * kappa * self.e_s
            img = jac @ w
            u = img @ self.dual_u
            s = img @ self.dual_s
            if np.any(np.abs(u) <= 1.0) or np.any(np.abs(s / u) >= kappa):
                raise ValueError(
                    "perturbation amplitude violates the unstable cone condition")

    def _invert_base(self, xb):
        """Solve A y + eps g(y) = xb (mod 1) by contraction."""
        y = wrap(xb @ self.base_inv.T.astype(float))
        for _ in range(80):
            fwd = wrap(y @ self.base.T.astype(float) + self.perturbation_field(y))
            res = torus_delta(xb, fwd)
            if np.max(np.abs(res)) < 1e-14:
                break
            y = wrap(y + res @ self.base_inv.T.astype(float))
        return y

    # -- serialization (stable external schema) --

    def to_json(self):
        return {
            "base": [[int(v) for v in row] for row in self.base],
            "coupling": None if self.coupling is None else self.coupling.to_json(),
            "frequencies": [float(a) for a in self.frequencies],
            "center_dim": int(self.center_dim),
            "perturbation": None if self.perturbation is None else {
                "amplitude": self.perturbation[0],
                "components": [self.perturbation[1].to_json(),
                               self.perturbation[2].to_json()],
            },
        }

    @classmethod
    def from_json(cls, data):
        coupling = data.get("coupling")
        if coupling is not None:
            coupling = TrigPolynomial.from_json(coupling)
        pert = data.get("perturbation")
        if pert is not None:
            pert = (pert["amplitude"],
                    TrigPolynomial.from_json(pert["components"][0]),
                    TrigPolynomial.from_json(pert["components"][1]))
        freqs = data.get("frequencies", [])
        c = data.get("center_dim", len(freqs))
        if c != len(freqs):
            raise ValueError("center_dim does not match the frequency list")
        return cls(data["base"], coupling=coupling, frequencies=freqs,
                   perturbation=pert)

    def __repr__(self):
        return "SystemSpec(trace %d, det %d, c=%d%s)" % (
            int(self.base[0, 0] + self.base[1, 1]), self.det, self.center_dim,
            ", perturbed" if self.perturbation else "")


def apply(system, x, n=1):
    """n-th iterate (n may be negative) of points with shape (..., dim)."""
    if abs(n) > system.iter_guard:
        raise ValueError("iterate count %d exceeds the guard %d"
                         % (n, system.iter_guard))
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != system.dim:
        raise ValueError("point dimension %d, system needs %d"
                         % (x.shape[-1], system.dim))
    xb = wrap(x[..., :2])
    th = wrap(x[..., 2:])
    alpha = system.frequencies
    A = system.base.astype(float)
    Ainv = system.base_inv.astype(float)
    for _ in range(abs(n)):
        if n > 0:
            if system.center_dim:
                th = wrap(th + system.coupling_values(xb)[..., None] * alpha)
            nxt = xb @ A.T
            if system.perturbation is not None:
                nxt = nxt + system.perturbation_field(xb)
            xb = wrap(nxt)
        else:
            if system.perturbation is not None:
                xb = system._invert_base(xb)
            else:
                xb = wrap(xb @ Ainv.T)
            if system.center_dim:
                th = wrap(th - system.coupling_values(xb)[..., None] * alpha)
    if system.center_dim:
        return np.concatenate([xb, th], axis=-1)
    return xb


def derivative(system, x):
    """Full derivative matrix at x, shape (..., dim, dim)."""
    x = np.asarray(x, dtype=float)
    xb = x[..., :2]
    lead = x.shape[:-1]
    d = system.dim
    out = np.zeros(lead + (d, d))
    jac = np.broadcast_to(system.base.astype(float), lead + (2, 2)).copy()
    if system.perturbation is not None:
        jac = jac + system.perturbation_jacobian(xb)
    out[..., :2, :2] = jac
    if system.center_dim:
        grad = system.coupling.gradient(xb)
        out[..., 2:, :2] = system.frequencies[..., :, None] * grad[..., None, :]
        idx = np.arange(system.center_dim)
        out[..., 2 + idx, 2 + idx] = 1.0
    return out


def _shear_series_unstable(system, xb, depth=60):
    """d/dt at t=0 of the unstable fiber shift, before scaling by alpha."""
    if system.coupling is None:
        return 0.0
    xb = np.asarray(xb, dtype=float)
    total = 0.0
    b = xb
    Ainv = system.base_inv.astype(float)
    for j in range(1, depth + 1):
        b = wrap(b @ Ainv.T)
        total += system.lambda_u ** (-j) * (system.coupling.gradient(b) @ system.e_u)
    return total


def _shear_series_stable(system, xb, depth=60):
    if system.coupling is None:
        return 0.0
    xb = np.asarray(xb, dtype=float)
    total = 0.0
    b = xb
    A = system.base.astype(float)
    for j in range(0, depth + 1):
        total -= system.lambda_s ** j * (system.coupling.gradient(b) @ system.e_s)
        b = wrap(b @ A.T)
    return total


def _power_iteration(system, x, n_backward, stable=False, tol=1e-6):
    """Push a generic vector along the orbit; returns a unit vector at x."""
    extra = 6
    total = n_backward + extra
    pts = [np.asarray(x, dtype=float)]
    for _ in range(total):
        pts.append(apply(system, pts[-1], -1 if not stable else 1))
    v = np.zeros(system.dim)
    v[:2] = system.e_u if not stable else system.e_s
    v = v + 1e-3  # keep the seed generic
    v /= np.linalg.norm(v)
    recorded = {}
    for step in range(total, 0, -1):
        if stable:
            # derivative of the inverse at pts[step] is the inverse of the
            # derivative taken at the preimage pts[step-1]
            v = np.linalg.solve(derivative(system, pts[step - 1]), v)
        else:
            v = derivative(system, pts[step]) @ v
        v /= np.linalg.norm(v)
        depth = total - step + 1
        if depth in (n_backward, total):
            recorded[depth] = v.copy()
    drift = np.linalg.norm(recorded[total] - np.sign(recorded[total] @ recorded[n_backward]) * recorded[n_backward])
    if drift > tol:
        raise RuntimeError(
            "power iteration has not converged (drift %.2e); raise n_backward" % drift)
    return recorded[total]


def unstable_direction(system, x, n_backward=40, depth=60):
    """Unit tangent of the unstable leaf at x.

    Unperturbed base: analytic, (e_u, alpha * shear) with the shear given by
    a geometric series over the backward orbit.  Perturbed base: power
    iteration along the backward orbit, with a convergence check.
    """
    x = np.asarray(x, dtype=float)
    if system.perturbation is not None:
        return _power_iteration(system, x, n_backward)
    v = np.zeros(system.dim)
    v[:2] = system.e_u
    if system.center_dim:
        v[2:] = system.frequencies * _shear_series_unstable(system, x[:2], depth)
    return v / np.linalg.norm(v)


def stable_direction(system, x, n_forward=40, depth=60):
    """Unit tangent of the stable leaf at x (mirror of unstable_direction)."""
    x = np.asarray(x, dtype=float)
    if system.perturbation is not None:
        return _power_iteration(system, x, n_forward, stable=True)
    v = np.zeros(system.dim)
    v[:2] = system.e_s
    if system.center_dim:
        v[2:] = system.frequencies * _shear_series_stable(system, x[:2], depth)
    return v / np.linalg.norm(v)
