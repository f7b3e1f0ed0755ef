"""Generalized N-functions A(x, t) on a box, with pointwise calculus.

A model evaluates ``A(x, t)`` for points ``x`` of a closed box and reals
``t``.  Points are arrays whose last axis has length n; ``t`` broadcasts
against the leading axes of ``x``.  Builtin families provide closed forms for
whatever is available; everything else falls back to numerics:

* derivative in t: right-sided difference with step ``max(1e-7, 1e-7 t)``
* inverse in t: bracketing plus safeguarded Newton/bisection
* x-gradient: central differences with step ``1e-6 * edge length``
* Young conjugate: root of ``a(x, t) = s`` (first-order condition), with a
  golden-section fallback where ``a`` jumps.

Evenness of A and oddness of a are imposed here, not trusted from the
family formulas, which only ever see ``t >= 0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Sequence

import numpy as np

from . import exprlang
from .errors import ConvergenceError, DomainError
from .roots import bracket_increasing, golden_max, invert_increasing, solve_increasing

FAMILIES = ("variable-exponent", "log-type", "double-phase", "custom")
FD_GRAD_STEP = 1e-6
FD_DERIV_STEP = 1e-7


@dataclass(frozen=True)
class Domain:
    """Axis-aligned box ``[lower_1, upper_1] x ... x [lower_n, upper_n]``, n >= 2."""

    lower: tuple
    upper: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        if len(lo) != len(hi):
            raise ValueError("lower and upper bounds differ in length")
        if len(lo) < 2:
            raise ValueError("dimension must be at least 2")
        if not all(math.isfinite(a) and math.isfinite(b) and a < b for a, b in zip(lo, hi)):
            raise ValueError("each lower bound must be finite and below its upper bound")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def unit_cube(cls, n=2):
        return cls((0.0,) * n, (1.0,) * n)

    @property
    def n(self) -> int:
        return len(self.lower)

    @property
    def widths(self) -> np.ndarray:
        return np.subtract(self.upper, self.lower)

    @property
    def volume(self) -> float:
        return float(np.prod(self.widths))

    @property
    def diameter(self) -> float:
        return float(np.linalg.norm(self.widths))

    @property
    def center(self) -> np.ndarray:
        return 0.5 * (np.asarray(self.lower) + np.asarray(self.upper))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower) & (x <= self.upper), axis=-1)

    def check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim == 0 or x.shape[-1] != self.n:
            raise DomainError(f"points must have {self.n} coordinates, got shape {x.shape}")
        inside = self.contains(x)
        if not np.all(inside):
            bad = x[~inside] if x.ndim > 1 else x
            raise DomainError(f"point {np.asarray(bad).reshape(-1, self.n)[0].tolist()} "
                              f"lies outside the closed box")
        return x

    def distance_to_boundary(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.min(np.minimum(x - self.lower, np.subtract(self.upper, x)), axis=-1)

    def lattice(self, k: int, interior: bool = False) -> np.ndarray:
        """``k**n`` points: a closed lattice, or the k cell midpoints per axis."""
        axes = []
        for a, b in zip(self.lower, self.upper):
            if interior:
                axes.append(a + (np.arange(k) + 0.5) * (b - a) / k)
            else:
                axes.append(np.linspace(a, b, k))
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def to_dict(self):
        return {"n": self.n, "lower": list(self.lower), "upper": list(self.upper)}


class Coefficient:
    """A scalar function of the point: p(x), alpha(x), ...

    ``func`` maps an array of points (last axis n) to values on the leading
    axes.  ``grad`` is optional; without it gradients are central
    differences of ``func``.
    """

    def __init__(self, func: Callable, label: str, grad: Callable | None = None,
                 constant: float | None = None):
        self.func = func
        self.label = label
        self.grad = grad
        self.constant = constant

    @classmethod
    def const(cls, c: float):
        c = float(c)
        return cls(lambda x: np.full(np.shape(x)[:-1], c) if np.ndim(x) > 1 else c,
                   repr(c), grad=lambda x: np.zeros(np.shape(x)), constant=c)

    @classmethod
    def from_expr(cls, expr):
        if isinstance(expr, (int, float)):
            return cls.const(expr)
        if isinstance(expr, str):
            expr = exprlang.parse(expr)
        if not exprlang.uses_point(expr):
            return cls.const(exprlang.evaluate(expr, [0.0]))
        func = lambda x: exprlang.evaluate(expr, x)
        try:
            parts = exprlang.gradient(expr, exprlang.max_variable_index(expr) or 1)
        except exprlang.NotDifferentiable:
            return cls(func, exprlang.to_source(expr))

        def grad(x):
            x = np.asarray(x, dtype=float)
            try:
                cols = [np.broadcast_to(exprlang.evaluate(d, x), x.shape[:-1]) for d in parts]
            except exprlang.EvaluationError:
                # derivative singular somewhere (e.g. norm(x) at 0): differences instead
                return central_gradient(func, x, np.full(x.shape[-1], FD_GRAD_STEP))
            cols += [np.zeros(x.shape[:-1])] * (x.shape[-1] - len(cols))
            return np.stack(cols, axis=-1)

        return cls(func, exprlang.to_source(expr), grad=grad)

    @classmethod
    def coerce(cls, value):
        return value if isinstance(value, Coefficient) else cls.from_expr(value)

    def __call__(self, x):
        return self.func(x)

    def gradient(self, x, steps):
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return central_gradient(self.func, x, steps)

    def __repr__(self):
        return f"Coefficient({self.label})"


def central_gradient(func, x, steps):
    x = np.asarray(x, dtype=float)
    parts = []
    for i, h in enumerate(steps):
        e = np.zeros(x.shape[-1])
        e[i] = h
        with np.errstate(over="ignore", invalid="ignore"):
            parts.append((np.asarray(func(x + e)) - np.asarray(func(x - e))) / (2.0 * h))
    return np.stack(np.broadcast_arrays(*parts), axis=-1)


class NFunction:
    """Base class for generalized N-functions on a box.

    Subclasses implement ``_A(x, t)`` for ``t >= 0`` and may override
    ``_a``, ``_inverse``, ``_x_gradient`` and ``_conjugate`` with closed
    forms.  The ``has_*`` flags record which ones are analytic.
    """

    family = "custom"
    has_derivative = False
    has_inverse = False
    has_x_gradient = False
    has_conjugate = False

    def __init__(self, domain: Domain, label: str = ""):
        self.domain = domain
        self.label = label or self.family

    # --- hooks for subclasses (t >= 0, x already validated) ----------------
    def _A(self, x, t):
        raise NotImplementedError

    def _a(self, x, t):
        h = np.maximum(FD_DERIV_STEP, FD_DERIV_STEP * t)
        return (self._A(x, t + h) - self._A(x, t)) / h

    def _inverse(self, x, y):
        dg = (lambda t: self._a(x, t)) if self.has_derivative else None
        return invert_increasing(lambda t: self._A(x, t), y, dg=dg, what="inverse_A")

    def _x_gradient(self, x, t):
        return central_gradient(lambda z: self._A(z, t), x, self.fd_steps)

    def _conjugate(self):
        return ConjugateModel(self)

    # --- public surface -----------------------------------------------------
    @property
    def n(self):
        return self.domain.n

    @property
    def fd_steps(self):
        return FD_GRAD_STEP * self.domain.widths

    def _prep(self, x, t, name="t"):
        x = self.domain.check(x)
        t = np.asarray(t, dtype=float)
        if not np.all(np.isfinite(t)):
            raise DomainError(f"{name} must be finite")
        return x, t

    def A(self, x, t):
        x, t = self._prep(x, t)
        return _out(self._A(x, np.abs(t)))

    def a(self, x, t):
        x, t = self._prep(x, t)
        return _out(np.sign(t) * self._a(x, np.abs(t)))

    def inverse(self, x, y):
        x, y = self._prep(x, y, "y")
        if np.any(y < 0):
            raise DomainError("inverse_A needs y >= 0")
        shape = np.broadcast_shapes(x.shape[:-1], y.shape)
        return _out(self._inverse(x, np.broadcast_to(y, shape)))

    def x_gradient(self, x, t):
        x, t = self._prep(x, t)
        if not self.has_x_gradient or self._coefficient_needs_fd:
            margin = self.domain.distance_to_boundary(x)
            if np.any(margin < self.fd_steps.max()):
                raise DomainError("x is too close to the boundary for the difference step")
        return _out(self._x_gradient(x, np.abs(t)))

    _coefficient_needs_fd = True

    @cached_property
    def conjugate_model(self) -> "NFunction":
        return self._conjugate()

    def __repr__(self):
        return f"<{type(self).__name__} {self.label} on {self.domain.lower}-{self.domain.upper}>"


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def _pos_log(t):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(t > 0, np.log(np.where(t > 0, t, 1.0)), 0.0)


def _scan_bounds(domain, coef, k=None):
    k = k or (17 if domain.n <= 3 else 5)
    vals = np.asarray(coef(domain.lattice(k)), dtype=float)
    return float(vals.min()), float(vals.max())


class VariableExponent(NFunction):
    """``A(x, t) = t^p(x) / p(x)``.

    With ``supercritical=True`` (the Morrey setting) construction requires
    ``inf p > n``; otherwise only ``inf p > 1``.
    """

    family = "variable-exponent"
    has_derivative = has_inverse = has_x_gradient = has_conjugate = True

    def __init__(self, domain, p, supercritical=True, _conjugate_of=None):
        self.p = Coefficient.coerce(p)
        super().__init__(domain, f"t^p/p, p={self.p.label}")
        self.p_min, self.p_max = _scan_bounds(domain, self.p)
        floor = domain.n if supercritical else 1.0
        if not self.p_min > floor:
            raise ValueError(f"variable exponent needs inf p > {floor:g}, got {self.p_min:g}")
        self.supercritical = supercritical
        self._conjugate_of = _conjugate_of
        self._coefficient_needs_fd = self.p.grad is None

    def _A(self, x, t):
        p = self.p(x)
        return t ** p / p

    def _a(self, x, t):
        return t ** (self.p(x) - 1.0)

    def _inverse(self, x, y):
        p = self.p(x)
        return (p * y) ** (1.0 / p)

    def _x_gradient(self, x, t):
        p = self.p(x)
        tp = t ** p
        dA_dp = tp * _pos_log(t) / p - tp / p ** 2
        return np.asarray(dA_dp)[..., None] * self.p.gradient(x, self.fd_steps)

    def _conjugate(self):
        if self._conjugate_of is not None:
            return self._conjugate_of
        p = self.p
        if p.constant is not None:
            q = Coefficient.const(p.constant / (p.constant - 1.0))
        else:
            steps = self.fd_steps

            def q_grad(x):
                pv = np.asarray(p(x))
                return -p.gradient(x, steps) / ((pv - 1.0) ** 2)[..., None]
            q = Coefficient(lambda x: p(x) / (p(x) - 1.0), f"p/(p-1), p={p.label}",
                            grad=q_grad)
        return VariableExponent(self.domain, q, supercritical=False, _conjugate_of=self)


class LogType(NFunction):
    """``A(x, t) = t^p(x) log(1 + t)`` with ``inf p > n``."""

    family = "log-type"
    has_derivative = has_x_gradient = True

    def __init__(self, domain, p, supercritical=True):
        self.p = Coefficient.coerce(p)
        super().__init__(domain, f"t^p log(1+t), p={self.p.label}")
        self.p_min, self.p_max = _scan_bounds(domain, self.p)
        floor = domain.n if supercritical else 1.0
        if not self.p_min > floor:
            raise ValueError(f"log-type exponent needs inf p > {floor:g}, got {self.p_min:g}")
        self.supercritical = supercritical
        self._coefficient_needs_fd = self.p.grad is None

    def _A(self, x, t):
        return t ** self.p(x) * np.log1p(t)

    def _a(self, x, t):
        p = self.p(x)
        return p * t ** (p - 1.0) * np.log1p(t) + t ** p / (1.0 + t)

    def _x_gradient(self, x, t):
        p = self.p(x)
        dA_dp = t ** p * _pos_log(t) * np.log1p(t)
        return np.asarray(dA_dp)[..., None] * self.p.gradient(x, self.fd_steps)


class DoublePhase(NFunction):
    """``A(x, t) = t^p + alpha(x) t^q`` with ``q > p > n`` and ``inf alpha > 0``."""

    family = "double-phase"
    has_derivative = has_x_gradient = True

    def __init__(self, domain, alpha, p, q, supercritical=True):
        self.alpha = Coefficient.coerce(alpha)
        self.p = float(p)
        self.q = float(q)
        super().__init__(domain, f"t^{self.p:g} + alpha t^{self.q:g}, alpha={self.alpha.label}")
        floor = domain.n if supercritical else 1.0
        if not self.q > self.p > floor:
            raise ValueError(f"double phase needs q > p > {floor:g}")
        self.alpha_min, self.alpha_max = _scan_bounds(domain, self.alpha)
        if not self.alpha_min > 0:
            raise ValueError(f"double phase needs inf alpha > 0, got {self.alpha_min:g}")
        self.p_min, self.p_max = self.p, self.q
        self._coefficient_needs_fd = self.alpha.grad is None

    def _A(self, x, t):
        return t ** self.p + self.alpha(x) * t ** self.q

    def _a(self, x, t):
        return self.p * t ** (self.p - 1.0) + self.q * self.alpha(x) * t ** (self.q - 1.0)

    def _x_gradient(self, x, t):
        return np.asarray(t ** self.q)[..., None] * self.alpha.gradient(x, self.fd_steps)


class Custom(NFunction):
    """An N-function given by an expression in ``t`` and ``x1 ... xn``.

    A Python callable ``f(x, t)`` (vectorised, ``t >= 0``) is accepted in
    place of the expression.
    """

    family = "custom"

    def __init__(self, domain, expr, label=None):
        if callable(expr) and not isinstance(expr, exprlang.Expr):
            self.func = expr
            self.expr = None
            super().__init__(domain, label or getattr(expr, "__name__", "callable"))
            return
        if isinstance(expr, str):
            expr = exprlang.parse(expr, names=("t",))
        self.expr = expr
        self.func = None
        super().__init__(domain, label or exprlang.to_source(expr))

    def _A(self, x, t):
        if self.func is not None:
            with np.errstate(over="ignore"):
                return np.asarray(self.func(x, t), dtype=float)
        x = np.asarray(x)
        shape = np.broadcast_shapes(x.shape[:-1], np.shape(t))
        xb = np.broadcast_to(x, shape + (x.shape[-1],))
        with np.errstate(over="ignore"):
            return exprlang.evaluate(self.expr, xb, {"t": np.broadcast_to(t, shape)})


class ConjugateModel(NFunction):
    """Numerical Young conjugate ``sup_t (s t - A(x, t))`` of a base model."""

    family = "custom"
    has_derivative = True      # the generalized inverse of a, computed by root finding
    has_x_gradient = True      # via the envelope identity below

    def __init__(self, base: NFunction):
        self.base = base
        super().__init__(base.domain, f"conjugate of [{base.label}]")
        self._coefficient_needs_fd = True

    def _slope_root(self, x, s):
        """``t* = sup{t >= 0 : a(x, t) <= s}`` and its final bracket."""
        s = np.asarray(s, dtype=float)
        shape = np.broadcast_shapes(np.shape(x)[:-1], s.shape)
        s = np.broadcast_to(s, shape)
        g = lambda t: self.base._a(x, t)
        lo, hi = bracket_increasing(g, s)
        t = solve_increasing(g, s, lo, hi, what="conjugate slope", active=s > 0)
        return np.where(s > 0, t, 0.0), lo, hi

    def _A(self, x, s):
        t, lo, hi = self._slope_root(x, s)
        val = s * t - self.base._A(x, t)
        miss = np.abs(self.base._a(x, t) - s) > 1e-6 * np.maximum(1.0, s)
        if np.any(miss & (s > 0)):
            tg = golden_max(lambda u: s * u - self.base._A(x, u), 0.5 * lo, 2.0 * hi + 1e-300)
            val = np.maximum(val, s * tg - self.base._A(x, tg))
        return np.maximum(val, 0.0)

    def _a(self, x, s):
        return self._slope_root(x, s)[0]

    def _inverse(self, x, y):
        base = self.base
        if base.has_derivative:
            # conj(a(t)) = t a(t) - A(t) is increasing in t; solve it, then map back by a
            h = lambda t: t * base._a(x, t) - base._A(x, t)
            t = invert_increasing(h, y, what="inverse_conjugate")
            return base._a(x, t)
        return invert_increasing(lambda s: self._A(x, s), y, what="inverse_conjugate")

    def _x_gradient(self, x, s):
        # grad_x conj(x, s) = -grad_y A(y, t*)|_{y=x} with t* = conjugate slope at s
        t = self._a(x, s)
        return -np.asarray(self.base._x_gradient(x, t))

    def _conjugate(self):
        return ConjugateModel(self)


# ---------------------------------------------------------------------------
# functional surface

def eval_A(m: NFunction, x, t):
    return m.A(x, t)


def eval_a(m: NFunction, x, t):
    return m.a(x, t)


def inverse_A(m: NFunction, x, y):
    return m.inverse(x, y)


def grad_x_A(m: NFunction, x, t):
    return m.x_gradient(x, t)


def conjugate(m: NFunction, x, s):
    return m.conjugate_model.A(x, s)


def conjugate_derivative(m: NFunction, x, s):
    if np.any(np.asarray(s) < 0):
        raise DomainError("conjugate_derivative needs s >= 0")
    return m.conjugate_model.a(x, s)


def inverse_conjugate(m: NFunction, x, y):
    return m.conjugate_model.inverse(x, y)


def make_family(domain: Domain, tag: str, **params) -> NFunction:
    """Build a model from a family tag and parameters (expressions or numbers)."""
    supercritical = params.pop("supercritical", True)
    if tag == "variable-exponent":
        return VariableExponent(domain, params["p"], supercritical=supercritical)
    if tag == "log-type":
        return LogType(domain, params["p"], supercritical=supercritical)
    if tag == "double-phase":
        return DoublePhase(domain, params["alpha"], params["p"], params["q"],
                           supercritical=supercritical)
    if tag == "custom":
        return Custom(domain, params["A"])
    raise ValueError(f"unknown family {tag!r}; expected one of {FAMILIES}")


def check_invariants(m: NFunction, k: int = 5, t_grid: Sequence[float] | None = None):
    """Sample the N-function axioms on a lattice; return a list of violations.

    Checks A(x, 0) = 0, positivity for t > 0, midpoint convexity (1e-12
    relative slack) and the two limits A/t -> 0 at 0+ and A/t -> inf.
    """
    xs = m.domain.lattice(k)[:, None, :]
    t = np.asarray(t_grid if t_grid is not None else np.logspace(-6, 6, 49))
    problems = []
    if np.any(m.A(xs[:, 0], 0.0) != 0):
        problems.append("A(x, 0) != 0")
    with np.errstate(over="ignore"):
        vals = m.A(xs, t)
    if np.any(vals <= 0):
        problems.append("A(x, t) not positive for some t > 0")
    lo, hi = t[:-1], t[1:]
    with np.errstate(over="ignore", invalid="ignore"):
        mid = m.A(xs, 0.5 * (lo + hi))
        chord = 0.5 * (m.A(xs, lo) + m.A(xs, hi))
        bad = mid > chord * (1 + 1e-12)
    if np.any(bad & np.isfinite(chord)):
        problems.append("midpoint convexity fails")
    ratio = vals / t
    finite = np.isfinite(ratio)
    if not np.all(ratio[:, :3] < ratio[:, 3:6].min(axis=1, keepdims=True) + 1e-300):
        problems.append("A(x,t)/t does not decrease toward t = 0")
    top = np.where(finite, ratio, np.inf)
    if not np.all(np.isinf(top[:, -1]) | (top[:, -1] > top[:, -10] * (1 + 1e-3))):
        problems.append("A(x,t)/t does not grow without bound")
    return problems
