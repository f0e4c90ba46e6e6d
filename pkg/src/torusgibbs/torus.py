"""Flat torus geometry and real trigonometric polynomials.

Points on T^d are numpy arrays with every coordinate reduced to [0, 1).
The metric is the flat one: coordinate differences are wrapped to
[-1/2, 1/2) and combined in the Euclidean way.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "wrap",
    "torus_delta",
    "torus_distance",
    "TrigPolynomial",
]


def wrap(x):
    """Reduce coordinates to [0, 1)."""
    return np.mod(np.asarray(x, dtype=float), 1.0)


def torus_delta(a, b):
    """Minimal lift of a - b, coordinates in [-1/2, 1/2)."""
    return np.mod(np.asarray(a, dtype=float) - np.asarray(b, dtype=float) + 0.5, 1.0) - 0.5


def torus_distance(a, b):
    """Flat-torus distance; broadcasts over leading axes."""
    d = torus_delta(a, b)
    return np.sqrt(np.sum(d * d, axis=-1))


class TrigPolynomial:
    """Finite real Fourier sum  sum_m  c_m cos(2 pi <m,x>) + s_m sin(2 pi <m,x>).

    modes is an integer array of shape (M, dim); cos_coeffs and sin_coeffs
    are float arrays of length M.  The zero mode encodes a constant term.
    """

    def __init__(self, modes, cos_coeffs=None, sin_coeffs=None):
        self.modes = np.atleast_2d(np.asarray(modes, dtype=np.int64))
        m = self.modes.shape[0]
        self.cos_coeffs = np.zeros(m) if cos_coeffs is None else np.asarray(cos_coeffs, dtype=float)
        self.sin_coeffs = np.zeros(m) if sin_coeffs is None else np.asarray(sin_coeffs, dtype=float)
        if self.cos_coeffs.shape != (m,) or self.sin_coeffs.shape != (m,):
            raise ValueError("coefficient arrays must match the number of modes")

    @property
    def dim(self):
        return self.modes.shape[1]

    def __call__(self, x):
        """Evaluate at points of shape (..., dim)."""
        x = np.asarray(x, dtype=float)
        phases = 2.0 * np.pi * (x @ self.modes.T.astype(float))
        return np.cos(phases) @ self.cos_coeffs + np.sin(phases) @ self.sin_coeffs

    def gradient(self, x):
        """Gradient at points of shape (..., dim); result has the same shape."""
        x = np.asarray(x, dtype=float)
        phases = 2.0 * np.pi * (x @ self.modes.T.astype(float))
        # d/dx of c cos + s sin per mode, then contract with 2 pi m
        radial = -np.sin(phases) * self.cos_coeffs + np.cos(phases) * self.sin_coeffs
        return 2.0 * np.pi * (radial @ self.modes.astype(float))

    def lipschitz_bound(self):
        """Upper bound for sup |grad|, hence a Lipschitz constant."""
        amp = np.hypot(self.cos_coeffs, self.sin_coeffs)
        return float(np.sum(2.0 * np.pi * np.linalg.norm(self.modes, axis=1) * amp))

    def sup_bound(self):
        """Upper bound for the sup norm."""
        return float(np.sum(np.hypot(self.cos_coeffs, self.sin_coeffs)))

    def to_json(self):
        out = []
        for m, c, s in zip(self.modes, self.cos_coeffs, self.sin_coeffs):
            out.append({"mode": [int(v) for v in m], "cos": float(c), "sin": float(s)})
        return out

    @classmethod
    def from_json(cls, data):
        modes = [entry["mode"] for entry in data]
        cos = [entry.get("cos", 0.0) for entry in data]
        sin = [entry.get("sin", 0.0) for entry in data]
        return cls(modes, cos, sin)

    def __repr__(self):
        return "TrigPolynomial(%d modes, dim %d)" % (self.modes.shape[0], self.dim)
