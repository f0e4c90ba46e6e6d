"""Cocycle identities and continuity diagnostics for the oscillatory potential.

Each witness mode m_n defines the unimodular function d_n(theta) =
exp(2 pi i <m_n, theta>).  Along the skew product the fiber translates by
alpha k(x), so

    d_n(f(x, theta)) = exp(2 pi i k(x) r_n) d_n(x, theta),

where r_n = <alpha, m_n> is the tiny Liouville residual.  Verifying this
numerically needs working precision beyond the mode size: one float ulp of
theta swings the phase by |m_n| ulps.  The checks here run in mpmath with
the mantissa sized from the exact rational frequency.

The second diagnostic measures how wildly the partial transfer sums
F_N = sum_{n<=N} d_n oscillate: the hierarchical mode scales let each term
be steered almost independently, so the observed oscillation grows by
about 2 per witness, the quantitative footprint of a discontinuous limit.
"""

from __future__ import annotations

import math
from fractions import Fraction

import mpmath
import numpy as np

__all__ = ["cocycle_residuals", "oscillation_profile"]


def _frac_mod1(x):
    """x mod 1 for mpmath values, result in [0, 1)."""
    return x - mpmath.floor(x)


def cocycle_residuals(potential, system, n_points=2000, seed=11):
    """Max |d_n(f z) - e^{2 pi i k r_n} d_n(z)| over random points, per witness.

    The fiber update theta + alpha k(x) is recomputed in extended precision
    from the exact rational alpha; both sides then reduce to phases mod 1
    whose difference is reported as an arc length (times 2 pi it bounds the
    complex residual).  The same float k(x) feeds both sides: the identity
    under test is the fiber translation against the multiplier, not the
    precision of the coupling.
    """
    data = potential.liouville
    digits = data.precision_digits() + 30
    rng = np.random.default_rng(seed)
    pts = rng.random((n_points, system.dim))
    kvals = system.coupling_values(pts[:, :2])
    modes = data.witness_modes()[:potential.n_trunc]
    out = []
    with mpmath.workdps(digits):
        alpha1 = mpmath.mpf(data.p_exact) / mpmath.mpf(data.q_exact)
        alpha2 = mpmath.mpf(1)
        residuals = [mpmath.mpf(w["residual_num"]) / mpmath.mpf(w["residual_den"])
                     for w in data.witnesses[:potential.n_trunc]]
        worst = [mpmath.mpf(0)] * len(modes)
        for i in range(n_points):
            th1 = mpmath.mpf(float(pts[i, 2]))
            th2 = mpmath.mpf(float(pts[i, 3]))
            kv = mpmath.mpf(float(kvals[i]))
            tp1 = th1 + alpha1 * kv
            tp2 = th2 + alpha2 * kv
            for j, (m1, m2) in enumerate(modes):
                lhs = _frac_mod1(m1 * tp1 + m2 * tp2)
                rhs = _frac_mod1(_frac_mod1(m1 * th1 + m2 * th2) + kv * residuals[j])
                diff = _frac_mod1(lhs - rhs)
                if diff > mpmath.mpf("0.5"):
                    diff = 1 - diff
                if diff > worst[j]:
                    worst[j] = diff
        for j, w in enumerate(worst):
            # |e^{2 pi i a} - e^{2 pi i b}| = 2 |sin(pi (a-b))| <= 2 pi |a-b|
            out.append(float(2 * mpmath.pi * w))
    return out


def _exact_phases(theta_terms, modes):
    """Phases <m_j, theta> mod 1 as floats, theta a list of rational 2-vectors."""
    phases = []
    for m1, m2 in modes:
        acc = Fraction(0)
        for c1, c2 in theta_terms:
            acc += m1 * c1 + m2 * c2
        acc -= acc.numerator // acc.denominator
        phases.append(float(acc))
    return phases


def oscillation_profile(data, n_max=None, sweep=512, scale_samples=64):
    """Oscillation growth of the partial transfer sums F_N = sum d_n.

    For each N the real part of F_N is maximized at theta = 0 (value N
    exactly) and minimized by a hierarchical descent: sweeping theta along
    m_N / |m_N|^2 moves the N-th phase through full turns while barely
    touching the coarser ones, so each round pushes one more term toward -1.
    All phases are computed in exact rational arithmetic; float rounding of
    theta would destroy them at these mode sizes.

    Also reported: the swing of Re F_N across a step of length ~1/|m_{N,2}|
    (the modulus of continuity at the finest witness scale), which stays
    near 2 for every N: a fixed-size jump at ever finer scales.
    """
    modes = data.witness_modes()
    if n_max is None:
        n_max = len(modes)
    profile = []
    theta_terms = []  # accumulated rational components of the minimizer
    for nidx in range(n_max):
        m1, m2 = modes[nidx]
        qn = m1 * m1 + m2 * m2
        sub = modes[:nidx + 1]
        base_phases = _exact_phases(theta_terms, sub)
        best_c, best_val = 0, None
        for a in range(sweep):
            c = Fraction(a, sweep)
            val = 0.0
            for j in range(nidx + 1):
                shift = c if j == nidx else (
                    Fraction(sub[j][0] * m1 + sub[j][1] * m2, qn) * c)
                ph = base_phases[j] + float(shift - math.floor(shift))
                val += math.cos(2 * math.pi * ph)
            if best_val is None or val < best_val:
                best_c, best_val = c, val
        theta_terms.append((best_c * Fraction(m1, qn), best_c * Fraction(m2, qn)))
        # exact re-evaluation at the accumulated minimizer
        phases = _exact_phases(theta_terms, sub)
        min_re = sum(math.cos(2 * math.pi * p) for p in phases)
        sup_re = float(nidx + 1)  # theta = 0 gives every term +1
        # modulus of continuity at the finest scale: step along m_N
        finest = 0.0
        for a in range(scale_samples):
            step = Fraction(a, scale_samples)
            ph_shift = []
            for j in range(nidx + 1):
                sh = Fraction(sub[j][0] * m1 + sub[j][1] * m2, qn) * step
                ph_shift.append(phases[j] + float(sh - math.floor(sh)))
            val = sum(math.cos(2 * math.pi * p) for p in ph_shift)
            finest = max(finest, abs(val - min_re))
        profile.append({
            "n_trunc": nidx + 1,
            "sup_re": sup_re,
            "min_re": min_re,
            "oscillation": sup_re - min_re,
            "finest_scale_swing": finest,
        })
    return profile
