"""Sobolev conjugate, its saturation level T(x), and the Morrey modulus mu(x, s).

    A_*^{-1}(x, s) = int_0^s  A^{-1}(x, tau) tau^{-(n+1)/n} dtau
    T(x)           = lim_{s -> inf} A_*^{-1}(x, s)
    mu(x, s)       = int_{s^-n}^inf A^{-1}(x, tau) tau^{-(n+1)/n} dtau
                   = n int_0^s A^{-1}(x, r^-n) dr          (tau = r^-n)

The modulus is computed from the second (proper) form; the first form is
kept as an independent cross-check (``morrey_modulus_tail``).
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate as sp_integrate

from .errors import ConvergenceError, DivergenceError, P3Violation
from .nfunction import NFunction
from .quadrature import (QuadratureResult, integrate, integrate_from_zero,
                         integrate_segments)

P3_WINDOW = (1e-12, 1e-2)
P3_MARGIN = 1e-3
DEFAULT_TOL = 1e-10


def _point(m: NFunction, x):
    return m.domain.check(np.asarray(x, dtype=float).reshape(m.n))


def sobolev_integrand(m: NFunction, x):
    """``tau -> A^{-1}(x, tau) / tau^((n+1)/n)`` for a fixed point."""
    x = _point(m, x)
    expo = (m.n + 1.0) / m.n

    def f(tau):
        tau = np.asarray(tau, dtype=float)
        with np.errstate(over="ignore"):
            return m._inverse(x, tau) / tau ** expo
    return f


def p3_exponent(m: NFunction, x, window=P3_WINDOW, points=41):
    """Least-squares log-log slope of the Sobolev integrand near 0.

    The integral over (0, 1] is finite iff this exponent exceeds -1 (for
    integrands that behave like a power near 0).
    """
    tau = np.geomspace(window[0], window[1], points)
    vals = sobolev_integrand(m, x)(tau)
    slope = np.polyfit(np.log(tau), np.log(vals), 1)[0]
    return float(slope)


def sobolev_conjugate_inverse(m: NFunction, x, s, tol=DEFAULT_TOL, check=True):
    """``A_*^{-1}(x, s)`` by graded quadrature on (0, s]."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if check:
        beta = p3_exponent(m, x)
        if beta <= -1.0 + P3_MARGIN:
            raise P3Violation(
                f"A^-1(x,t)/t^((n+1)/n) ~ t^{beta:.4f} near 0: not integrable", beta)
    if s == 0:
        return QuadratureResult(0.0, 0.0, 0, True, tol)
    try:
        return integrate_from_zero(sobolev_integrand(m, x), float(s), tol, tol,
                                   max_levels=_max_levels(s, 1))
    except DivergenceError as exc:
        raise P3Violation(str(exc), exc.exponent) from None


def _max_levels(s, n):
    # keep the graded panels inside the range where r^-n (or tau) stays finite
    return int(max(40, math.log2(max(s, 1e-300)) + 1000.0 / n))


@dataclass(frozen=True)
class TLimit:
    value: float          # +inf when the partial integrals do not stabilise
    error: float
    samples: tuple = ()

    @property
    def finite(self):
        return math.isfinite(self.value)


T_GRID = tuple(10.0 ** k for k in range(2, 13, 2))
T_GAP = 1e-4


class _Primitive:
    """Incremental evaluation of ``s -> A_*^{-1}(x, s)`` reusing known values."""

    def __init__(self, m, x, tol):
        self.f = sobolev_integrand(m, x)
        self.tol = tol
        self.known = {}

    def __call__(self, s):
        s = float(s)
        if s in self.known:
            return self.known[s]
        below = [k for k in self.known if k < s]
        above = [k for k in self.known if k > s]
        if below:
            s0 = max(below)
            piece = self._piece(s0, s)
            val = self.known[s0] + piece
        elif above and s > 0.5 * min(above):
            s0 = min(above)
            val = self.known[s0] - self._piece(s, s0)
        else:
            res = integrate_from_zero(self.f, s, self.tol, self.tol,
                                      max_levels=_max_levels(s, 1))
            if not res.converged:
                raise ConvergenceError(f"A_*^-1 quadrature did not converge at s={s:g}")
            val = res.value
        self.known[s] = val
        return val

    def _piece(self, a, b):
        panels = max(1, int(math.ceil(math.log10(b / a) * 4)))
        res = integrate(self.f, a, b, abs_tol=0.0, rel_tol=self.tol, panels=panels,
                        geometric=True)
        return res.value


def limit_T(m: NFunction, x, tol=DEFAULT_TOL) -> TLimit:
    """Estimate ``T(x)`` from ``A_*^{-1}(x, s)`` at s = 1e2, 1e4, ..., 1e12."""
    beta = p3_exponent(m, x)
    if beta <= -1.0 + P3_MARGIN:
        raise P3Violation(f"Sobolev integrand ~ t^{beta:.4f} near 0", beta)
    prim = _Primitive(m, x, tol)
    values = [prim(s) for s in T_GRID]
    gap = abs(values[-1] - values[-2]) / abs(values[-1])
    samples = tuple(zip(T_GRID, values))
    if gap > T_GAP:
        return TLimit(math.inf, math.inf, samples)
    return TLimit(values[-1], abs(values[-1] - values[-2]), samples)


def sobolev_conjugate(m: NFunction, x, t, tol=DEFAULT_TOL, T: TLimit | None = None):
    """``A_*(x, t)``: the s with ``A_*^{-1}(x, s) = |t|``, or +inf past T(x)."""
    t = abs(float(t))
    if t == 0.0:
        return 0.0
    T = T if T is not None else limit_T(m, x, tol)
    if t >= T.value:
        return math.inf
    prim = _Primitive(m, x, tol)
    dprim = sobolev_integrand(m, x)
    # bracket in u = log s
    u = 0.0
    v = prim(1.0)
    lo_u = hi_u = None
    step = math.log(10.0)
    while v < t:
        lo_u = u
        u += step
        v = prim(math.exp(u))
        if u > 700:
            raise ConvergenceError("A_* inversion: could not bracket from above")
    hi_u = u
    if lo_u is None:
        while v >= t:
            hi_u = u
            u -= step
            v = prim(math.exp(u))
            if u < -700:
                raise ConvergenceError("A_* inversion: could not bracket from below")
        lo_u = u
    # safeguarded Newton in u; dv/du = s * A^{-1}(s) / s^((n+1)/n)
    u = 0.5 * (lo_u + hi_u)
    for _ in range(200):
        s = math.exp(u)
        v = prim(s)
        if v < t:
            lo_u = u
        else:
            hi_u = u
        if abs(v - t) <= 1e-14 * t or hi_u - lo_u <= 1e-15 * max(1.0, abs(u)):
            return s
        slope = s * float(dprim(np.array([s]))[0])
        nxt = u - (v - t) / slope if slope > 0 else math.nan
        if not (lo_u < nxt < hi_u):
            nxt = 0.5 * (lo_u + hi_u)
        u = nxt
    raise ConvergenceError("A_* inversion did not converge", bracket=(math.exp(lo_u),
                                                                     math.exp(hi_u)))


# ---------------------------------------------------------------------------
# Morrey modulus

def morrey_integrand(m: NFunction, x):
    """``r -> n A^{-1}(x, r^-n)``."""
    x = _point(m, x)
    n = m.n

    def f(r):
        r = np.asarray(r, dtype=float)
        with np.errstate(over="ignore"):
            tau = r ** (-float(n))
        return n * m._inverse(x, tau)
    return f


def morrey_modulus(m: NFunction, x, s, tol=DEFAULT_TOL) -> QuadratureResult:
    """``mu(x, s)`` via the substituted integral ``n int_0^s A^{-1}(x, r^-n) dr``."""
    if s < 0:
        raise ValueError("s must be nonnegative")
    if s == 0:
        return QuadratureResult(0.0, 0.0, 0, True, tol)
    return integrate_from_zero(morrey_integrand(m, x), float(s), tol, tol,
                               max_levels=_max_levels(s, m.n))


def morrey_modulus_tail(m: NFunction, x, s, tol=DEFAULT_TOL) -> QuadratureResult:
    """``mu(x, s)`` straight from the tail integral over ``[s^-n, inf)``.

    Integrates in ``w = log tau`` with scipy's QUADPACK up to a cutoff past
    which the power-law remainder is below ``tol`` of the total; the
    remainder estimate is added.  Independent of :func:`morrey_modulus`.
    """
    f = sobolev_integrand(m, x)
    n = m.n

    def g(w):
        tau = math.exp(w)
        return float(f(np.array([tau]))[0]) * tau

    w0 = -n * math.log(s)
    total = 0.0
    err = 0.0
    w = w0
    width = 5.0
    for _ in range(400):
        piece, perr = sp_integrate.quad(g, w, w + width, epsabs=0.0, epsrel=tol * 1e-2,
                                        limit=200)
        total += piece
        err += perr
        w += width
        # local exponent of the tau-integrand, from g = tau * f(tau)
        g1, g0 = g(w), g(w - 1.0)
        gamma = math.log(g1 / g0) - 1.0 if g1 > 0 and g0 > 0 else -math.inf
        if gamma >= -1.0:
            raise DivergenceError(f"tail integrand ~ tau^{gamma:.4g}; not integrable", gamma)
        remainder = g1 / (-gamma - 1.0)
        if remainder <= 0.1 * tol * abs(total) or w > 1400:
            break
    total += remainder
    err += remainder
    target = tol * max(1.0, abs(total))
    return QuadratureResult(total, err, 0, err <= target, target)


def morrey_modulus_many(m: NFunction, x, s_values, tol=DEFAULT_TOL):
    """``mu(x, s)`` and error estimates for many s at one point.

    The smallest s is integrated from 0; the rest are accumulated over the
    gaps between consecutive sorted values.
    """
    s_values = np.asarray(s_values, dtype=float)
    if s_values.size == 0:
        return np.empty(0), np.empty(0)
    if np.any(s_values < 0):
        raise ValueError("s must be nonnegative")
    uniq, inv = np.unique(s_values, return_inverse=True)
    mu = np.zeros(uniq.shape)
    err = np.zeros(uniq.shape)
    pos = uniq > 0
    if np.any(pos):
        up = uniq[pos]
        first = morrey_modulus(m, x, up[0], tol)
        inc, inc_err = integrate_segments(morrey_integrand(m, x), up, abs_tol=tol * first.value,
                                          rel_tol=tol)
        mu[pos] = first.value + np.concatenate([[0.0], np.cumsum(inc)])
        err[pos] = first.abs_error_estimate + np.concatenate([[0.0], np.cumsum(inc_err)])
    return mu[inv].reshape(s_values.shape), err[inv].reshape(s_values.shape)


def mu_power_closed_form(n, p, s):
    """Closed form of mu for ``A = t^p / p`` with constant ``p > n``."""
    return n * p / (p - n) * p ** (1.0 / p) * np.asarray(s, dtype=float) ** (1.0 - n / p)


@dataclass
class ModulusTable:
    n: int
    rows: list = field(default_factory=list)   # (x tuple, s, mu, err)

    def header(self):
        return [f"x{i + 1}" for i in range(self.n)] + ["s", "mu", "err"]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for x, s, mu, err in self.rows:
            w.writerow([fmt(v) for v in (*x, s, mu, err)])
        return buf.getvalue()


def fmt(v) -> str:
    """17 significant digits, enough to round-trip a double."""
    return format(float(v), ".17g")


def modulus_table(m: NFunction, xs, s_grid, tol=DEFAULT_TOL) -> ModulusTable:
    table = ModulusTable(m.n)
    for x in xs:
        x = tuple(float(v) for v in x)
        mu, err = morrey_modulus_many(m, x, s_grid, tol)
        for s, v, e in zip(s_grid, np.atleast_1d(mu), np.atleast_1d(err)):
            table.rows.append((x, float(s), float(v), float(e)))
    return table
