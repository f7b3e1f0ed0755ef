"""Functions sampled on a cell lattice, modular integrals and Luxemburg norms.

A grid function stores one value per cell of a uniform ``m x ... x m``
lattice of the box, taken at the cell midpoint.  Integrals use the midpoint
rule, so nothing is ever evaluated on the boundary.
"""

from __future__ import annotations

import csv
import io
import math
import struct
from dataclasses import dataclass

import numpy as np

from . import exprlang
from .errors import ConvergenceError, DomainError
from .nfunction import Domain, NFunction
from .roots import bracket_increasing, solve_increasing

MIN_RESOLUTION = 4
NORM_TOL = 1e-9
BINARY_MAGIC = b"MKGRID01"


class GridEvaluationError(exprlang.ExprError, ArithmeticError):
    """An expression left its real domain at some cell of the lattice."""

    def __init__(self, cause: exprlang.EvaluationError, cell, point):
        self.cause = cause
        self.cell = cell
        self.point = point
        where = f"cell {cell} (x = {point})" if cell is not None else "every cell"
        super().__init__(f"{cause} at {where}")


@dataclass(frozen=True)
class GridFunction:
    domain: Domain
    resolution: int
    values: np.ndarray

    def __post_init__(self):
        m = int(self.resolution)
        if m < MIN_RESOLUTION:
            raise ValueError(f"resolution must be at least {MIN_RESOLUTION}")
        vals = np.array(self.values, dtype=float)
        shape = (m,) * self.domain.n
        if vals.size != m ** self.domain.n:
            raise ValueError(f"expected {m ** self.domain.n} values, got {vals.size}")
        vals = vals.reshape(shape)
        if not np.all(np.isfinite(vals)):
            idx = np.unravel_index(int(np.argmax(~np.isfinite(vals))), shape)
            raise ValueError(f"non-finite value at cell {tuple(int(i) for i in idx)}")
        vals.setflags(write=False)
        object.__setattr__(self, "resolution", m)
        object.__setattr__(self, "values", vals)

    @property
    def n(self):
        return self.domain.n

    @property
    def spacing(self) -> np.ndarray:
        return self.domain.widths / self.resolution

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    def centers(self) -> np.ndarray:
        """Cell midpoints, shape ``(m, ..., m, n)``."""
        return cell_centers(self.domain, self.resolution)

    def with_values(self, values):
        return GridFunction(self.domain, self.resolution, values)

    def __mul__(self, c):
        return self.with_values(self.values * float(c))

    __rmul__ = __mul__

    def __add__(self, other):
        _same_grid(self, other)
        return self.with_values(self.values + other.values)

    def __neg__(self):
        return self.with_values(-self.values)

    # --- import / export ---------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        n = self.n
        w.writerow(["n", "m"] + [f"lower{i + 1}" for i in range(n)]
                   + [f"upper{i + 1}" for i in range(n)])
        w.writerow([n, self.resolution] + [_fmt(v) for v in self.domain.lower]
                   + [_fmt(v) for v in self.domain.upper])
        w.writerow(["value"])
        for v in self.values.ravel():
            w.writerow([_fmt(v)])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        rows = [r for r in csv.reader(io.StringIO(text)) if r]
        if len(rows) < 3 or rows[0][:2] != ["n", "m"] or rows[2] != ["value"]:
            raise ValueError("not a grid-function CSV")
        head = rows[1]
        n, m = int(head[0]), int(head[1])
        bounds = [float(v) for v in head[2:]]
        if len(bounds) != 2 * n:
            raise ValueError("bounds do not match the dimension")
        values = [float(r[0]) for r in rows[3:]]
        return cls(Domain(tuple(bounds[:n]), tuple(bounds[n:])), m, np.array(values))

    def to_bytes(self) -> bytes:
        n = self.n
        head = BINARY_MAGIC + struct.pack("<ii", n, self.resolution)
        bounds = np.array(self.domain.lower + self.domain.upper, dtype="<f8").tobytes()
        return head + bounds + np.ascontiguousarray(self.values, dtype="<f8").tobytes()

    @classmethod
    def from_bytes(cls, data: bytes) -> "GridFunction":
        k = len(BINARY_MAGIC)
        if data[:k] != BINARY_MAGIC:
            raise ValueError("bad magic bytes")
        n, m = struct.unpack_from("<ii", data, k)
        off = k + 8
        bounds = np.frombuffer(data, dtype="<f8", count=2 * n, offset=off)
        off += 16 * n
        values = np.frombuffer(data, dtype="<f8", offset=off)
        if values.size != m ** n:
            raise ValueError("payload size does not match the header")
        return cls(Domain(tuple(bounds[:n]), tuple(bounds[n:])), m, values.astype(float))


def _fmt(v):
    return format(float(v), ".17g")


def _same_grid(u: GridFunction, v: GridFunction):
    if u.domain != v.domain or u.resolution != v.resolution:
        raise ValueError("grid functions live on different lattices")


def cell_centers(domain: Domain, m: int) -> np.ndarray:
    return domain.lattice(m, interior=True).reshape((m,) * domain.n + (domain.n,))


def sample(e, d: Domain, m: int) -> GridFunction:
    """Sample an expression (source text, parsed tree or callable) at cell midpoints."""
    if m < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}")
    pts = cell_centers(d, m)
    if callable(e) and not isinstance(e, exprlang.Expr):
        vals = np.asarray(e(pts), dtype=float)
    else:
        tree = exprlang.parse(e) if isinstance(e, str) else e
        if exprlang.max_variable_index(tree) > d.n:
            raise exprlang.ExprError(f"expression uses a variable beyond x{d.n}")
        try:
            vals = exprlang.evaluate(tree, pts)
        except exprlang.EvaluationError as exc:
            cell = exc.index if exc.index is not None and len(exc.index) == d.n else None
            point = pts[cell].tolist() if cell is not None else None
            raise GridEvaluationError(exc, cell, point) from None
    vals = np.broadcast_to(vals, (m,) * d.n)
    return GridFunction(d, m, vals)


# ---------------------------------------------------------------------------
# modular and norm

def modular_integral(m: NFunction, u: GridFunction, lam: float) -> float:
    """Midpoint rule for ``int A(x, |u(x)| / lam) dx``."""
    if not lam > 0:
        raise ValueError("lambda must be positive")
    _check_domain(m, u)
    vals = m.A(u.centers(), np.abs(u.values) / lam)
    if not np.all(np.isfinite(vals)):
        raise ConvergenceError(f"modular summand is not finite at lambda={lam:g}")
    return math.fsum(vals.ravel()) * u.cell_volume


def _check_domain(m: NFunction, u: GridFunction):
    if m.domain != u.domain:
        raise ValueError("model and grid function are defined on different boxes")


def _require_delta2(m: NFunction):
    """Custom models must pass the Delta2 scan before their norm is used."""
    if m.family != "custom":
        return
    ok = getattr(m, "_delta2_certified", None)
    if ok is None:
        from .conditions import check_delta2
        ok = check_delta2(m).passed
        m._delta2_certified = ok
    if not ok:
        raise DomainError("the modular defines the norm only under Delta2; "
                          "this model fails the Delta2 scan")


def luxemburg_norm(m: NFunction, u: GridFunction, tol: float = NORM_TOL) -> float:
    """``inf{lam > 0 : modular(u / lam) <= 1}``.

    The modular is continuous and strictly decreasing in ``lam`` when
    ``u != 0``, so the norm is the root of ``modular(lam) = 1``.  It is found
    in ``nu = 1 / lam`` with the bracketing solver from :mod:`roots`, then
    checked against ``|modular - 1| <= tol``.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    _check_domain(m, u)
    absu = np.abs(u.values)
    umax = float(absu.max())
    if umax == 0.0:
        return 0.0
    _require_delta2(m)
    pts = u.centers()
    flat = absu.ravel()
    pts = pts.reshape(-1, u.n)
    vol = u.cell_volume

    def rho(nu):
        nu = np.atleast_1d(np.asarray(nu, dtype=float))
        out = np.empty(nu.shape)
        for i, v in enumerate(nu.ravel()):
            vals = m.A(pts, flat * v)
            out.flat[i] = math.fsum(vals) * vol if np.all(np.isfinite(vals)) else math.inf
        return out

    one = np.ones(1)
    try:
        lo, hi = bracket_increasing(rho, one, start=1.0 / umax)
    except ConvergenceError as exc:
        raise ConvergenceError("modular never reaches 1; cannot bracket the norm",
                               bracket=exc.bracket) from None
    nu = solve_increasing(rho, one, lo, hi, what="luxemburg norm")
    val = float(rho(nu)[0])
    if abs(val - 1.0) > tol:
        raise ConvergenceError(f"modular at the computed norm is {val!r}, not within {tol:g} of 1",
                               bracket=(1.0 / hi, 1.0 / lo))
    return float(1.0 / nu[0])


@dataclass(frozen=True)
class GradientField:
    components: np.ndarray      # shape (m, ..., m, n)
    magnitude: GridFunction


def gradient(u: GridFunction) -> GradientField:
    """Central differences inside, second-order one-sided differences at the faces."""
    parts = np.gradient(u.values, *u.spacing, edge_order=2)
    comps = np.stack(parts, axis=-1)
    mag = np.sqrt(np.sum(comps * comps, axis=-1))
    return GradientField(comps, u.with_values(mag))


def gradient_norm(m: NFunction, u: GridFunction, tol: float = NORM_TOL) -> float:
    """Luxemburg norm of ``|grad u|``."""
    return luxemburg_norm(m, gradient(u).magnitude, tol)


def sobolev_norm(m: NFunction, u: GridFunction, tol: float = NORM_TOL) -> dict:
    """``{norm_u, norm_grad_u, norm_W1A}`` with ``norm_W1A = norm_u + norm_grad_u``."""
    nu = luxemburg_norm(m, u, tol)
    ng = gradient_norm(m, u, tol)
    return {"norm_u": nu, "norm_grad_u": ng, "norm_W1A": nu + ng}


def holder_pairing(ma: NFunction, u: GridFunction, v: GridFunction, tol: float = NORM_TOL):
    """``(|int u v|, 2 ||u||_A ||v||_conj)``; the conjugate norm uses ``ma.conjugate_model``."""
    _same_grid(u, v)
    lhs = abs(math.fsum((u.values * v.values).ravel()) * u.cell_volume)
    nu = luxemburg_norm(ma, u, tol)
    nv = luxemburg_norm(ma.conjugate_model, v, tol) if np.any(v.values) else 0.0
    return lhs, 2.0 * nu * nv
