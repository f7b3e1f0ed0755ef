"""Vectorised root finding for monotone functions on [0, inf).

Every routine works elementwise on arrays of targets so that a whole grid of
inversions costs one loop of numpy operations.
"""

from __future__ import annotations

import numpy as np

from .errors import ConvergenceError

EPS = np.finfo(float).eps
MAX_ITER = 200


def bracket_increasing(g, y, start=1.0, max_steps=1100):
    """Find ``lo <= hi`` with ``g(lo) <= y <= g(hi)`` for nondecreasing ``g``.

    ``g(0)`` is assumed to be 0 and ``y >= 0``.  The upper end is pushed up
    from ``start`` and the lower end down, by a factor that starts at 2 and
    squares each step (capped at 2**32), so remote targets cost few calls;
    ``lo > 0`` whenever ``y > 0`` is reachable, which keeps geometric
    bisection usable for targets spanning many decades.
    """
    y = np.asarray(y, dtype=float)
    hi = np.full(y.shape, float(start))
    lo = np.zeros(y.shape)
    ghi = g(hi)
    # ties push upward too, so a plateau at height y lies inside the bracket
    todo = (ghi < y) | ((ghi == y) & (y > 0))
    steps = 0
    factor = 2.0
    big = np.finfo(float).max
    while np.any(todo):
        if steps >= max_steps or not np.all(hi[todo] < big):
            raise ConvergenceError("target exceeds representable range",
                                   bracket=(lo, hi))
        lo = np.where(todo, hi, lo)
        with np.errstate(over="ignore"):
            hi = np.where(todo, np.minimum(hi * factor, big), hi)
        ghi = np.where(todo, g(hi), ghi)
        todo = todo & ((ghi < y) | (ghi == y))
        factor = min(factor * factor, _FACTOR_CAP)
        steps += 1
    # pull lo up from 0 for the entries that never moved
    factor = 2.0
    cand = np.where(lo == 0, hi / factor, lo)
    need = (lo == 0) & (y > 0)
    steps = 0
    while np.any(need):
        gc = g(cand)
        ok = need & (gc <= y)
        lo = np.where(ok, cand, lo)
        hi = np.where(need & ~ok, cand, hi)
        need = need & ~ok & (cand > 0)
        factor = min(factor * factor, _FACTOR_CAP)
        cand = np.where(need, cand / factor, cand)
        steps += 1
        if steps >= max_steps:
            break
    # y below every positive value we can represent: lo stays at 0
    return lo, hi


_FACTOR_CAP = 2.0 ** 32


def solve_increasing(g, y, lo, hi, dg=None, rtol=4 * EPS, max_iter=MAX_ITER,
                     what="root", active=None):
    """Solve ``g(t) = y`` on brackets ``[lo, hi]`` for nondecreasing ``g``.

    Safeguarded Newton when ``dg`` is given.  Otherwise Illinois regula falsi
    on ``log g`` against ``log t``, which is nearly linear for power-like
    ``g``.  Either way a step that leaves the bracket is replaced by
    bisection (geometric while the bracket spans more than a factor 4).
    Ties ``g(t) == y`` move the lower end, so on a plateau the result is the
    supremum of ``{t : g(t) <= y}``.
    """
    y = np.asarray(y, dtype=float)
    lo = np.array(np.broadcast_to(lo, y.shape), dtype=float)
    hi = np.array(np.broadcast_to(hi, y.shape), dtype=float)
    active = (hi - lo > rtol * hi) if active is None else (active & (hi - lo > rtol * hi))
    secant = dg is None
    if secant and np.any(active):
        with np.errstate(all="ignore"):
            glo = g(lo)
            flo = np.log(glo / y)
            fhi = np.log(g(hi) / y)
        side = np.zeros(y.shape, dtype=np.int8)
        ties = (glo == y).astype(np.int64)
        x = _illinois(lo, hi, flo, fhi, ties, rtol)
    else:
        x = _midpoint(lo, hi)
    for _ in range(max_iter):
        if not np.any(active):
            break
        gx = g(x)
        below = gx <= y
        lo = np.where(active & below, x, lo)
        hi = np.where(active & ~below, x, hi)
        if secant:
            with np.errstate(all="ignore"):
                fx = np.log(gx / y)
            # Illinois: halve the stale end when the same side moves twice
            stale_hi = active & below & (side == 1)
            stale_lo = active & ~below & (side == -1)
            flo = np.where(active & below, fx, np.where(stale_lo, 0.5 * flo, flo))
            fhi = np.where(active & ~below, fx, np.where(stale_hi, 0.5 * fhi, fhi))
            side = np.where(active, np.where(below, 1, -1), side).astype(np.int8)
            ties = np.where(active & (gx == y), ties + 1, 0)
            nxt = _illinois(lo, hi, flo, fhi, ties, rtol)
            # g(x) equals y to rounding: x is as good as the data allows.  An
            # exact tie goes on, toward the supremum of a possible plateau.
            active = active & ~((fx != 0) & (np.abs(fx) <= EPS))
        else:
            nxt = _midpoint(lo, hi)
            d = dg(x)
            with np.errstate(all="ignore"):
                newton = x - (gx - y) / d
            good = np.isfinite(newton) & (newton > lo) & (newton < hi) & (d > 0)
            small = good & (np.abs(newton - x) <= rtol * np.abs(x))
            nxt = np.where(good, newton, nxt)
            active = active & ~small & (gx != y)
        x = np.where(active, nxt, x)
        active = active & (hi - lo > rtol * hi)
    else:
        if np.any(active):
            raise ConvergenceError(f"{what}: no convergence in {max_iter} iterations",
                                   bracket=(lo[active], hi[active]))
    return x


def _illinois(lo, hi, flo, fhi, ties, rtol):
    """Regula falsi point in ``(log t, log g)``; bisection where it is unusable.

    After a first exact tie at ``lo`` the point just above ``lo`` is probed,
    which closes the bracket unless ``g`` is flat there; repeated ties bisect.
    """
    mid = _midpoint(lo, hi)
    step = 0.5 * rtol * hi
    with np.errstate(all="ignore"):
        # offsets relative to lo keep full precision even where |log t| is large
        u = np.log(hi / lo) * (-flo / (fhi - flo))
        # a minimal step away from either end (as in Brent's method) lets a
        # bracket pinned at the root from one side still collapse
        cand = np.clip(lo * np.exp(u), lo + step, hi - step)
    cand = np.where(ties == 1, lo + step, cand)
    # wide brackets are first narrowed to a factor 4 by geometric bisection
    # an overflowed end (g = inf, or g = 0 at lo) carries no slope information
    ok = (np.isfinite(cand) & (cand > lo) & (cand < hi) & (hi <= 4.0 * lo)
          & np.isfinite(flo) & np.isfinite(fhi) & ((flo != 0) | (ties == 1)))
    return np.where(ok, cand, mid)


def _midpoint(lo, hi):
    geo = (lo > 0) & (hi > 4.0 * lo)
    with np.errstate(all="ignore"):
        g = np.sqrt(lo) * np.sqrt(hi)
    return np.where(geo, g, 0.5 * (lo + hi))


def invert_increasing(g, y, dg=None, start=1.0, what="inverse"):
    """``t >= 0`` with ``g(t) = y`` for nondecreasing ``g`` with ``g(0) = 0``.

    ``g`` and ``dg`` are called with arrays of the same shape as ``y``.
    """
    y = np.asarray(y, dtype=float)
    if np.any(~np.isfinite(y)) or np.any(y < 0):
        raise ValueError(f"{what}: target must be finite and nonnegative")
    with np.errstate(over="ignore"):
        lo, hi = bracket_increasing(g, y, start=start)
        x = solve_increasing(g, y, lo, hi, dg=dg, what=what, active=y > 0)
    return np.where(y > 0, x, 0.0)


def golden_max(f, lo, hi, rtol=1e-13, max_iter=MAX_ITER):
    """Elementwise maximiser of a unimodal ``f`` on ``[lo, hi]`` by golden section."""
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a = np.array(lo, dtype=float)
    b = np.array(hi, dtype=float)
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if np.all(b - a <= rtol * np.maximum(np.abs(b), 1e-300)):
            break
        left = fc >= fd
        a, b = np.where(left, a, c), np.where(left, d, b)
        c_new = np.where(left, b - invphi * (b - a), d)
        d_new = np.where(left, c, a + invphi * (b - a))
        ff = f(np.where(left, c_new, d_new))
        fc, fd = np.where(left, ff, fd), np.where(left, fc, ff)
        c, d = c_new, d_new
    return 0.5 * (a + b)
