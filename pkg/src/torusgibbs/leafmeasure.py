"""Atomic measures on leaf segments and the weighted transfer dynamics.

The transfer operator S(mu) = e^phi f^-1 mu literally contracts unstable
supports, so iterating it loses resolution.  The pipeline instead uses the
equivalent fixed-window form: on W^u(x, r) the n-th iterate started from
Lebesgue on the far segment W^u(f^n x, r lam^n) has density

    lam^n exp(S_n phi(y_t))        (t the arclength parameter)

against dt, by the change of variables along the leaf (the u-parameter
expands by exactly lam each step).  Masses are tracked in log space; the
per-generation log-mass increments estimate the pressure through the
fixed-point relation, and a Cesàro average over the last quarter of the
generations smooths residual oscillation.

The same pipeline run on f^-1 with the shifted potential phi o f^-1 over a
stable window produces the center-stable marginals and the backward
pressure P'.
"""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .leaves import LeafSegment, leaf_point
from .potentials import delta_u, evaluate
from .systems import apply
from .torus import wrap

__all__ = [
    "WeightedLeafMeasure",
    "PressureReport",
    "seed_lebesgue",
    "transfer_step",
    "leaf_measure",
    "nu_u",
    "quasi_invariance_residual",
    "holonomy_transport_s",
    "center_projection_check",
    "tv_distance",
    "resample_masses",
]


def _logsumexp(a):
    a = np.asarray(a, dtype=float)
    m = np.max(a)
    if not np.isfinite(m):
        return m
    return float(m + np.log(np.sum(np.exp(a - m))))


class WeightedLeafMeasure:
    """Atoms (t_j, w_j) on a leaf segment, with log-scale mass bookkeeping.

    True atom weights are weights * exp(log_offset); keeping the array
    O(1) avoids overflow once masses grow like e^{nP}.
    """

    def __init__(self, segment, params, weights, generation=0,
                 pressure_trace=None, log_offset=0.0):
        self.segment = segment
        self.params = np.asarray(params, dtype=float)
        self.weights = np.asarray(weights, dtype=float)
        if self.params.shape != self.weights.shape:
            raise ValueError("params and weights must align")
        if np.any(self.weights < 0):
            raise ValueError("weights must be nonnegative")
        if np.any(np.abs(self.params) > segment.half_width * (1 + 1e-9)):
            raise ValueError("atom outside the segment")
        self.generation = int(generation)
        self.pressure_trace = list(pressure_trace or [])
        self.log_offset = float(log_offset)

    @property
    def mass(self):
        return float(np.sum(self.weights)) * math.exp(self.log_offset)

    def log_mass(self):
        s = float(np.sum(self.weights))
        if s <= 0:
            return -np.inf
        return math.log(s) + self.log_offset

    def normalized(self):
        s = float(np.sum(self.weights))
        return WeightedLeafMeasure(self.segment, self.params, self.weights / s,
                                   self.generation, self.pressure_trace, 0.0)

    def density(self):
        """Probability density values against dt at the atom positions."""
        order = np.argsort(self.params)
        t = self.params[order]
        w = self.weights[order]
        gaps = np.empty_like(t)
        gaps[1:-1] = (t[2:] - t[:-2]) / 2.0
        gaps[0] = t[1] - t[0]
        gaps[-1] = t[-1] - t[-2]
        dens = w / gaps / np.sum(w)
        out = np.empty_like(dens)
        out[order] = dens
        return out

    def points(self, system):
        return leaf_point(system, self.segment, self.params)

    def restricted(self, half_width):
        keep = np.abs(self.params) <= half_width
        seg = LeafSegment(self.segment.anchor, self.segment.kind, half_width,
                          self.segment.truncation)
        return WeightedLeafMeasure(seg, self.params[keep], self.weights[keep],
                                   self.generation, self.pressure_trace,
                                   self.log_offset)

    def to_json(self):
        return {
            "kind": self.segment.kind,
            "anchor": [float(v) for v in self.segment.anchor],
            "half_width": self.segment.half_width,
            "generation": self.generation,
            "log_offset": self.log_offset,
            "pressure_trace": [float(v) for v in self.pressure_trace],
            "atoms": [{"t": float(t), "w": float(w)}
                      for t, w in zip(self.params, self.weights)],
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    def save_csv(self, path):
        dens = self.density()
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "weight", "density"])
            for t, w, d in zip(self.params, self.weights, dens):
                writer.writerow(["%.17g" % t, "%.17g" % w, "%.17g" % d])

    def __repr__(self):
        return "WeightedLeafMeasure(%d atoms, gen %d, log mass %.4f)" % (
            len(self.params), self.generation, self.log_mass())


class PressureReport:
    """Pressure estimate with its provenance and a spread-based error bar."""

    def __init__(self, method, value, n_used, grid, error_estimate,
                 increments=None, converged=True, log_mass_final=None):
        self.method = method
        self.value = float(value)
        self.n_used = int(n_used)
        self.grid = dict(grid)
        self.error_estimate = float(error_estimate)
        self.increments = [] if increments is None else list(increments)
        self.converged = bool(converged)
        self.log_mass_final = log_mass_final

    def to_json(self):
        return {
            "method": self.method,
            "value": self.value,
            "n_used": self.n_used,
            "grid": self.grid,
            "error_estimate": self.error_estimate,
            "increments": [float(v) for v in self.increments],
            "converged": self.converged,
            "log_mass_final": self.log_mass_final,
        }

    def __repr__(self):
        return "PressureReport(%s, P=%.6f +- %.2e)" % (
            self.method, self.value, self.error_estimate)


def seed_lebesgue(segment, n_atoms):
    """Uniform midpoint atoms with total mass = arclength of the segment."""
    if n_atoms < 2:
        raise ValueError("need at least two atoms")
    r = segment.half_width
    delta = 2.0 * r / n_atoms
    t = -r + (np.arange(n_atoms) + 0.5) * delta
    w = np.full(n_atoms, delta)
    return WeightedLeafMeasure(segment, t, w)


def _trig_cell_means(edges, scale, amplitude, frequency, phase):
    """Exact cell averages of 1 + a cos(2 pi (f s + phase)) with s = scale*t.

    The antiderivative is evaluated at the scaled cell edges, so the wild
    oscillation at large scale integrates out exactly instead of aliasing.
    """
    s = edges * scale
    anti = s + amplitude / (2 * np.pi * frequency) * np.sin(
        2 * np.pi * (frequency * s + phase))
    return np.diff(anti) / (np.diff(edges) * scale)


def transfer_step(system, potential, mu):
    """One literal weighted-pushforward step of the transfer operator.

    Atoms move to the contracted parameters on the segment anchored one
    step back; weights pick up e^{phi} at the moved points.  The appended
    pressure trace entry is the log mass ratio.
    """
    if mu.segment.kind != "unstable":
        raise ValueError("transfer steps act on unstable segments")
    lam = system.lambda_u
    new_anchor = apply(system, mu.segment.anchor, -1)
    new_seg = LeafSegment(new_anchor, "unstable",
                          mu.segment.half_width / abs(lam) * (1 + 1e-12),
                          mu.segment.truncation)
    new_params = mu.params / lam
    pts = leaf_point(system, new_seg, new_params)
    phi = evaluate(potential, system, pts)
    m = float(np.max(phi))
    new_w = mu.weights * np.exp(phi - m)
    old_log = mu.log_mass()
    out = WeightedLeafMeasure(new_seg, new_params, new_w, mu.generation + 1,
                              mu.pressure_trace, mu.log_offset + m)
    out.pressure_trace = mu.pressure_trace + [out.log_mass() - old_log]
    return out


def leaf_measure(system, potential, x, r=0.2, n=25, n_atoms=2000,
                 direction="forward", seed=None, cesaro=True, conv_tol=5e-2,
                 grid=None, keep_window=0):
    """Fixed-window transfer iteration; returns (measure, pressure report).

    direction "forward" builds the unstable-leaf section and estimates P;
    "backward" runs the mirrored pipeline for f^-1 on a stable window with
    the potential sampled one step back, yielding the center-stable
    marginal and P'.  seed=None is Lebesgue; seed=(a, freq, phase) tilts
    the far-segment seed by the trig density 1 + a cos(2 pi (freq s + ph)).
    grid=(params, width) overrides the default midpoint discretization.
    """
    x = wrap(np.asarray(x, dtype=float))
    kind = "unstable" if direction == "forward" else "stable"
    seg = LeafSegment(x, kind, r)
    if grid is None:
        edges = np.linspace(-r, r, n_atoms + 1)
        t = 0.5 * (edges[1:] + edges[:-1])
        delta = 2.0 * r / n_atoms
    else:
        t, delta = grid
        t = np.asarray(t, dtype=float)
        n_atoms = len(t)
        edges = np.concatenate([t - delta / 2.0, [t[-1] + delta / 2.0]])
    lam = system.expansion
    log_lam = math.log(lam)
    cur = leaf_point(system, seg, t)
    logw = np.full(n_atoms, math.log(delta))
    log_masses = [_logsumexp(logw)]
    # once the potential oscillates below the cell scale, a single point
    # sample per cell aliases badly whenever lam^g delta drifts near a
    # rational; cell-averaging e^phi over subpoints restores the quadrature.
    # The base part of f^g is linear along the leaf, so subpoints spawn
    # from the running orbit by an exact in-leaf shift.
    subcell = 16 if potential.kind in ("trig_poly", "srb", "constant") else 0
    offsets = None
    if subcell:
        # golden-sequence subpoints with a per-cell rotation keyed to the
        # dimensionless cell coordinate: uniform subdivisions freeze when
        # the cell spans near-integer periods, and keying the rotation to
        # t/delta keeps aligned grids (used by the quasi-invariance
        # comparison) sampling identical physical points
        golden = 0.6180339887498949
        pattern = np.mod(np.arange(subcell) * golden, 1.0)
        rho = np.mod((t / delta) * (np.sqrt(2.0) - 1.0), 1.0)
        offsets = (np.mod(pattern[:, None] + rho[None, :], 1.0) - 0.5) * delta
    e_dir = system.e_u if direction == "forward" else system.e_s

    def _layer(points, g):
        """Log of the cell-averaged e^phi for the g-th expansion layer."""
        stretch = abs(lam) ** g * delta
        if not subcell or stretch <= 0.25:
            return evaluate(potential, system, points)
        if direction == "forward":
            rate = system.lambda_u ** g
        else:
            rate = system.lambda_s ** (-g)
        acc = 0.0
        pts = points.copy()
        for j in range(subcell):
            shift = (offsets[j] * rate)[..., None] * e_dir
            pts[..., :2] = wrap(points[..., :2] + shift)
            acc = acc + np.exp(evaluate(potential, system, pts))
        return np.log(acc / subcell)
    window = max(1, n // 4, int(keep_window))
    avg_weights = np.zeros(n_atoms)
    avg_count = 0
    prev_norm = None
    last_tv = np.nan
    window_data = []
    cesaro_window = max(1, n // 4)
    for gen in range(1, n + 1):
        if direction == "forward":
            phi = _layer(cur, gen - 1)
            logw = logw + phi + log_lam
            cur = apply(system, cur, 1)
        else:
            cur = apply(system, cur, -1)
            phi = _layer(cur, gen)
            logw = logw + phi + log_lam
        logw_eff = logw
        if seed is not None:
            amp, freq, phase = seed
            means = _trig_cell_means(edges, lam ** gen, amp, freq, phase)
            logw_eff = logw + np.log(means)
        log_masses.append(_logsumexp(logw_eff))
        if gen > n - window or not cesaro:
            norm_w = np.exp(logw_eff - np.max(logw_eff))
            norm_w /= norm_w.sum()
            if cesaro and gen > n - cesaro_window:
                avg_weights += norm_w
                avg_count += 1
            elif not cesaro:
                avg_weights = norm_w
                avg_count = 1
            if keep_window:
                window_data.append((gen, log_masses[-1], norm_w.copy()))
            # convergence is judged on coarse bins: the raw atom weights
            # carry a fast-oscillating factor that only cell averages kill
            coarse = norm_w[:n_atoms - n_atoms % 32].reshape(32, -1).sum(axis=1)
            if prev_norm is not None:
                last_tv = 0.5 * float(np.sum(np.abs(coarse - prev_norm)))
            prev_norm = coarse
    increments = np.diff(log_masses)
    tail = increments[-max(5, n // 4):] if n >= 1 else increments
    value = float(np.mean(tail))
    spread = float(np.max(tail) - np.min(tail)) if len(tail) else np.nan
    weights = avg_weights / avg_count
    measure = WeightedLeafMeasure(seg, t, weights, n, list(increments))
    if keep_window:
        measure.window_data = window_data
    converged = not (np.isfinite(last_tv) and last_tv > conv_tol)
    report = PressureReport(
        method="leaf_growth",
        value=value if direction == "forward" else value,
        n_used=n,
        grid={"r": r, "n_atoms": n_atoms, "direction": direction,
              "final_tv_step": None if not np.isfinite(last_tv) else last_tv},
        error_estimate=spread,
        increments=increments,
        converged=converged,
        log_mass_final=log_masses[-1],
    )
    return measure, report


def nu_u(system, potential, mu_u, x=None):
    """Reweight a leaf section by the backward potential products.

    The anchor weight is untouched and no renormalization happens: the
    result is one representative of a projective class.
    """
    x = mu_u.segment.anchor if x is None else np.asarray(x, dtype=float)
    pts = leaf_point(system, mu_u.segment, mu_u.params)
    d = delta_u(potential, system, x, pts)
    return WeightedLeafMeasure(mu_u.segment, mu_u.params, mu_u.weights * d,
                               mu_u.generation, mu_u.pressure_trace,
                               mu_u.log_offset)


def resample_masses(params, weights, edges):
    """Bin masses via linear interpolation of the cumulative mass."""
    order = np.argsort(params)
    t = params[order]
    c = np.concatenate([[0.0], np.cumsum(weights[order])])
    # cumulative mass as a function of t at atom positions (mass sits at atoms)
    cdf_at = lambda q: np.interp(q, t, 0.5 * (c[1:] + c[:-1]),
                                 left=0.0, right=c[-1])
    vals = cdf_at(edges)
    return np.diff(vals)


def tv_distance(mu_a, mu_b, n_bins=None):
    """Total variation of normalized measures after binning to a common grid."""
    lo = max(mu_a.params.min(), mu_b.params.min())
    hi = min(mu_a.params.max(), mu_b.params.max())
    if n_bins is None:
        n_bins = max(10, min(len(mu_a.params), len(mu_b.params)) // 20)
    edges = np.linspace(lo, hi, n_bins + 1)
    pa = resample_masses(mu_a.params, mu_a.weights, edges)
    pb = resample_masses(mu_b.params, mu_b.weights, edges)
    pa = pa / pa.sum()
    pb = pb / pb.sum()
    return 0.5 * float(np.sum(np.abs(pa - pb)))


def quasi_invariance_residual(system, potential, x, P, r=0.2, n=25,
                              n_atoms=20000, n_bins=60):
    """TV mismatch of the pulled-back section against the section at x.

    Both sections are built on W^u(x, r) and W^u(fx, r) with canonical
    (unnormalized, common-scale) masses; the fx-section is pulled back
    through one explicit inverse step with weight e^{phi - P} and both
    restrictions to W^u(x, r/lam) are compared on a common grid, scaled by
    the mass of the x-side.  A wrong P shows up as a global mass mismatch.
    The fx discretization is anchored on lam times the inner x-grid so
    that both sections point-sample the rough high-generation density at
    the same parameters; otherwise independent sampling offsets of the
    sub-cell oscillation drown the defect being measured.
    """
    x = wrap(np.asarray(x, dtype=float))
    fx = apply(system, x, 1)
    lam = system.lambda_u
    r_in = r / abs(lam)
    win = max(2, n - 5)
    mu_x, rep_x = leaf_measure(system, potential, x, r, n, n_atoms,
                               keep_window=win)
    delta = 2.0 * r / n_atoms
    inner = np.abs(mu_x.params) <= r_in - delta
    fx_grid = (mu_x.params[inner] * lam, abs(lam) * delta)
    mu_fx, rep_fx = leaf_measure(system, potential, fx, r, n, n_atoms,
                                 grid=fx_grid, keep_window=win)
    # pull the fx measure back: parameters contract, weights e^{phi-P}
    seg_x = LeafSegment(x, "unstable", r)
    pulled_params = mu_fx.params / lam
    pulled_pts = leaf_point(system, seg_x, pulled_params)
    phi = evaluate(potential, system, pulled_pts)
    edges = np.linspace(pulled_params.min(), pulled_params.max(), n_bins + 1)
    # compare generation by generation over the averaging window, scaling
    # each pair by the x-side mass; one resonant layer then only enters
    # with weight 1/window instead of deciding the whole comparison
    e_avg = np.zeros(n_bins)
    d_avg = np.zeros(n_bins)
    for (gen_f, logm_f, w_f), (gen_x, logm_x, w_x) in zip(
            mu_fx.window_data, mu_x.window_data):
        pulled_w = w_f * np.exp(phi - P + logm_f - logm_x)
        e_avg += resample_masses(pulled_params, pulled_w, edges)
        d_avg += resample_masses(mu_x.params[inner], w_x[inner], edges)
    denom = d_avg.sum()
    return 0.5 * float(np.sum(np.abs(e_avg - d_avg))) / denom


def holonomy_transport_s(system, mu, y, max_stable_distance=0.25):
    """Slide an unstable-leaf measure to the leaf through y along stables.

    For the skew product the base holonomy between the parallel unstable
    lines is the translation by the stable offset, which preserves the
    u-parameter exactly; atom weights ride along unchanged.  y must lie on
    the stable leaf of the source anchor.
    """
    y = wrap(np.asarray(y, dtype=float))
    x = mu.segment.anchor
    # verify y is on the local stable leaf of x: backward distances expand,
    # forward distances contract
    d0 = np.linalg.norm(_stable_offset(system, x, y))
    if d0 > max_stable_distance:
        raise ValueError("transport target beyond the locality radius")
    seg_y = LeafSegment(y, "unstable", mu.segment.half_width,
                        mu.segment.truncation)
    return WeightedLeafMeasure(seg_y, mu.params.copy(), mu.weights.copy(),
                               mu.generation, mu.pressure_trace,
                               mu.log_offset)


def _stable_offset(system, x, y):
    """Base displacement from x to y, expected along e_s."""
    from .torus import torus_delta
    dxy = torus_delta(y[:2], x[:2])
    u = dxy @ system.dual_u
    s = dxy @ system.dual_s
    if abs(u) > 1e-8:
        raise ValueError("target is not on the stable leaf of the anchor "
                         "(unstable offset %.2e)" % u)
    return s * system.e_s


def center_projection_check(system, potential, x, r=0.2, n=20, n_atoms=400,
                            n_c=16):
    """Fiber-resolved rebuild of the window density vs its u-marginal.

    Builds the density on a (u, c) grid by shifting the fiber coordinate
    of every leaf point around the center torus, then compares the center
    marginal with the plain one-dimensional pipeline.  For potentials that
    are constant on centers the agreement is exact up to float noise.
    """
    if system.center_dim == 0:
        raise ValueError("needs a nontrivial center")
    x = wrap(np.asarray(x, dtype=float))
    seg = LeafSegment(x, "unstable", r)
    t = (np.arange(n_atoms) + 0.5) * (2 * r / n_atoms) - r
    pts = leaf_point(system, seg, t)
    shifts = np.arange(n_c) / n_c
    cur = np.repeat(pts[:, None, :], n_c, axis=1).copy()
    cur[..., 2] = wrap(cur[..., 2] + shifts[None, :])
    logw = np.zeros((n_atoms, n_c))
    ref_cur = pts.copy()
    ref_logw = np.zeros(n_atoms)
    for _ in range(n):
        logw += evaluate(potential, system, cur)
        cur = apply(system, cur, 1)
        ref_logw += evaluate(potential, system, ref_cur)
        ref_cur = apply(system, ref_cur, 1)
    w = np.exp(logw - logw.max())
    marginal = w.mean(axis=1)
    marginal /= marginal.sum()
    ref = np.exp(ref_logw - ref_logw.max())
    ref /= ref.sum()
    return 0.5 * float(np.sum(np.abs(marginal - ref)))
