"""Adaptive Gauss-Kronrod (7/15) quadrature, vectorised over panels.

``integrate`` handles smooth integrands on a finite interval.
``integrate_from_zero`` handles an integrable power-type singularity at the
left endpoint 0 by grading panels geometrically toward it and extrapolating
the leftover sliver with the locally fitted power law.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DivergenceError

# Kronrod 15-point abscissae (nonnegative half) and weights; the Gauss 7-point
# rule uses the odd-indexed abscissae.
_XGK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])

NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])          # 15 nodes on [-1, 1]
KRONROD_W = np.concatenate([_WGK[:-1], _WGK[::-1]])
GAUSS_W = np.zeros(15)
GAUSS_W[1:7:2] = _WG[:3]
GAUSS_W[7] = _WG[3]
GAUSS_W[9:15:2] = _WG[:3][::-1]


@dataclass(frozen=True)
class QuadratureResult:
    value: float
    abs_error_estimate: float
    subdivisions: int
    converged: bool
    tolerance: float = 0.0


_TINY = 1e-290


def gk15(f, a, b):
    """Kronrod value and |Kronrod - Gauss| on each panel ``[a_i, b_i]``."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    half = 0.5 * (b - a)
    mid = 0.5 * (b + a)
    x = mid[:, None] + half[:, None] * NODES[None, :]
    fx = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    k = half * (fx @ KRONROD_W)
    g = half * (fx @ GAUSS_W)
    return k, np.abs(k - g)


def _refine(f, a, b, val, err, extra_err, abs_tol, rel_tol, max_panels):
    splits = 0
    while True:
        total = math.fsum(val)
        total_err = float(np.sum(err)) + extra_err
        target = max(abs_tol, rel_tol * abs(total))
        if total_err <= target or len(a) >= max_panels:
            return a, b, val, err, splits
        share = target / len(a)
        bad = err > share
        if not np.any(bad):
            bad = err == err.max()
        # split at most the worst half per sweep so work follows the error
        if bad.sum() > 1:
            cut = np.quantile(err[bad], 0.5) if bad.sum() > 64 else -1.0
            bad &= err > cut
        ab, bb = a[bad], b[bad]
        m = 0.5 * (ab + bb)
        na = np.concatenate([ab, m])
        nb = np.concatenate([m, bb])
        nv, ne = gk15(f, na, nb)
        keep = ~bad
        a = np.concatenate([a[keep], na])
        b = np.concatenate([b[keep], nb])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
        splits += int(bad.sum())


def integrate(f, a, b, abs_tol=1e-10, rel_tol=1e-10, panels=1, max_panels=4000,
              geometric=False):
    """Adaptive quadrature of a vectorised ``f`` over ``[a, b]``.

    ``panels`` initial panels, log-spaced when ``geometric`` (needs a > 0).
    """
    if b == a:
        return QuadratureResult(0.0, 0.0, 0, True, abs_tol)
    if geometric:
        edges = np.geomspace(a, b, panels + 1)
    else:
        edges = np.linspace(a, b, panels + 1)
    pa, pb = edges[:-1], edges[1:]
    val, err = gk15(f, pa, pb)
    pa, pb, val, err, splits = _refine(f, pa, pb, val, err, 0.0, abs_tol, rel_tol,
                                       max_panels)
    total = math.fsum(val)
    total_err = float(np.sum(err))
    target = max(abs_tol, rel_tol * abs(total))
    return QuadratureResult(total, total_err, splits, total_err <= target, target)


def local_exponent(f, eps):
    """Log-log slope of ``f`` between ``eps/2`` and ``eps``."""
    f1, f0 = (float(v) for v in np.asarray(f(np.array([eps, 0.5 * eps]))))
    if f1 == 0.0 or f0 == 0.0:
        return math.inf, f1
    return math.log(f1 / f0) / math.log(2.0), f1


def integrate_from_zero(f, s, abs_tol=1e-10, rel_tol=1e-10, max_levels=1000,
                        max_panels=8000):
    """Quadrature of ``f`` over ``(0, s]`` for ``f(r) ~ c r^beta`` at 0, ``beta > -1``.

    Panels ``[s 2^-(k+1), s 2^-k]`` are added until the power-law estimate of
    the remaining ``(0, eps]`` piece falls below the tolerance; that estimate
    is added to the value and counted in full in the error.  Raises
    :class:`DivergenceError` when the fitted exponent is ``<= -1``.
    """
    if s <= 0:
        return QuadratureResult(0.0, 0.0, 0, True, abs_tol)
    levels = 0
    pa = np.empty(0)
    pb = np.empty(0)
    val = np.empty(0)
    err = np.empty(0)
    tail = 0.0
    # keep panel ends (and GK nodes) in the normal floating-point range
    max_levels = min(max_levels, int(math.floor(math.log2(s / _TINY))))
    step = 40
    while True:
        step = max(1, min(step, max_levels - levels))
        k = np.arange(levels, levels + step, dtype=float)
        na = s * np.exp2(-(k + 1.0))
        nb = s * np.exp2(-k)
        nv, ne = gk15(f, na, nb)
        pa = np.concatenate([pa, na])
        pb = np.concatenate([pb, nb])
        val = np.concatenate([val, nv])
        err = np.concatenate([err, ne])
        levels += step
        eps = s * 2.0 ** (-levels)
        beta, feps = local_exponent(f, eps)
        if beta <= -1.0:
            raise DivergenceError(
                f"integrand behaves like r^{beta:.4g} at 0; not integrable", beta)
        tail = 0.0 if math.isinf(beta) else eps * feps / (beta + 1.0)
        total = math.fsum(val) + tail
        target = max(abs_tol, rel_tol * abs(total))
        if abs(tail) <= 0.1 * target or levels >= max_levels:
            break
        # the tail shrinks like eps^(beta+1): jump straight to where it is small enough
        need = math.log2(abs(tail) / (0.1 * target)) / (beta + 1.0)
        step = int(min(400, max(8, math.ceil(need) + 2)))
    pa, pb, val, err, splits = _refine(f, pa, pb, val, err, abs(tail), abs_tol, rel_tol,
                                       max_panels)
    total = math.fsum(val) + tail
    total_err = float(np.sum(err)) + abs(tail)
    target = max(abs_tol, rel_tol * abs(total))
    return QuadratureResult(total, total_err, splits + levels, total_err <= target, target)


def integrate_segments(f, edges, abs_tol=1e-10, rel_tol=1e-10, max_rounds=30):
    """Integrals of ``f`` over each ``[edges[i], edges[i+1]]`` separately.

    Every segment is refined (by splitting into 4) until its own estimate
    meets ``max(abs_tol * w_i, rel_tol * |I_i|)`` with ``w_i`` the segment's
    share of the total length.  Returns ``(values, errors)``.
    """
    edges = np.asarray(edges, dtype=float)
    nseg = len(edges) - 1
    if nseg <= 0:
        return np.empty(0), np.empty(0)
    span = edges[-1] - edges[0]
    owner = np.arange(nseg)
    pa, pb = edges[:-1].copy(), edges[1:].copy()
    val, err = gk15(f, pa, pb)
    for _ in range(max_rounds):
        seg_val = np.bincount(owner, val, nseg)
        seg_err = np.bincount(owner, err, nseg)
        width = edges[1:] - edges[:-1]
        target = np.maximum(abs_tol * width / span if span > 0 else abs_tol,
                            rel_tol * np.abs(seg_val))
        bad_seg = seg_err > target
        if not np.any(bad_seg):
            break
        bad = bad_seg[owner] & (err > 0)
        if not np.any(bad):
            break
        ab, bb, ob = pa[bad], pb[bad], owner[bad]
        cuts = ab[:, None] + (bb - ab)[:, None] * np.linspace(0.0, 1.0, 5)[None, :]
        na, nb = cuts[:, :-1].ravel(), cuts[:, 1:].ravel()
        no = np.repeat(ob, 4)
        nv, ne = gk15(f, na, nb)
        keep = ~bad
        pa = np.concatenate([pa[keep], na])
        pb = np.concatenate([pb[keep], nb])
        owner = np.concatenate([owner[keep], no])
        val = np.concatenate([val[keep], nv])
        err = np.concatenate([err[keep], ne])
    return np.bincount(owner, val, nseg), np.bincount(owner, err, nseg)
