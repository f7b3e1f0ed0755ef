"""Empirical checks of the local Morrey estimate and of mu-Hoelder continuity.

For a grid function u, a centre x and lattice points y1, y2 in the cube
Q_sigma(x) (centred at x, edge length sigma) the quantity

    |u(y1) - u(y2)| / (||grad u||_A  mu(x, |y1 - y2|))

is compared with the reference constant K(n) = 16 / (4^(1/n) sqrt(n)).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import calculus, conditions
from .errors import DomainError, MorreyKitError
from .modular import GridFunction, gradient_norm
from .nfunction import NFunction

MIN_RESOLUTION = 64
RATIO_SLACK = 0.05
EXHAUSTIVE_LIMIT = 10 ** 6
SAMPLED_PAIRS = 200_000


class CertificationError(MorreyKitError):
    """A hypothesis of the estimate is not certified for this model."""


def reference_constant(n: int) -> float:
    return 16.0 / (4.0 ** (1.0 / n) * math.sqrt(n))


def certify(nm: NFunction) -> dict:
    """Condition reports the estimate relies on, computed once per model."""
    cached = getattr(nm, "_morrey_certificates", None)
    if cached is None:
        cached = {
            "Delta2": conditions.check_delta2(nm),
            "Delta2-conjugate": conditions.check_delta2(nm.conjugate_model),
            "P5-tilde": conditions.check_P5_tilde(nm),
        }
        nm._morrey_certificates = cached
    return cached


def sigma_terms(nm: NFunction, x, p5_tilde: conditions.ConditionReport | None = None,
                sigma0: float | None = None) -> dict:
    """The three quantities whose minimum is sigma.

    ``C0, delta0`` are the constants fitted for the conjugate's growth bound;
    ``sigma0`` defaults to a quarter of the diameter of the box.
    """
    rep = p5_tilde if p5_tilde is not None else certify(nm)["P5-tilde"]
    if rep.condition_id != "P5-tilde" or not rep.passed:
        raise CertificationError("the conjugate's growth bound (P5-tilde) is not certified")
    x = np.asarray(x, dtype=float)
    n = nm.n
    dist = float(nm.domain.distance_to_boundary(x))
    if dist <= 0:
        raise DomainError("the centre must be an interior point")
    C0 = rep.fitted_constants["C"]
    d0 = rep.fitted_constants["delta"]
    if C0 == 0:
        middle = math.inf
    else:
        base = 4.0 ** (1.0 + d0) / (C0 * math.sqrt(n))
        try:
            middle = base ** (1.0 / (1.0 - n * d0))
        except OverflowError:
            middle = math.inf
    return {"sigma0": float(sigma0) if sigma0 is not None else 0.25 * nm.domain.diameter,
            "growth": middle,
            "boundary": dist / math.sqrt(n)}


def select_sigma(nm: NFunction, x, p5_tilde=None, sigma0=None) -> float:
    return min(sigma_terms(nm, x, p5_tilde, sigma0).values())


@dataclass
class MorreyReport:
    center: tuple
    sigma: float
    constant_reference: float
    max_ratio: float
    arg_pair: tuple
    samples: int
    grad_norm: float
    family: str = ""
    resolution: int = 0
    seed: int = 0

    @property
    def passed(self):
        return self.max_ratio <= self.constant_reference * (1.0 + RATIO_SLACK)

    def to_dict(self):
        return {
            "center": [float(v) for v in self.center],
            "sigma": float(self.sigma),
            "K_ref": float(self.constant_reference),
            "max_ratio": float(self.max_ratio),
            "worst_pair": [[float(v) for v in p] for p in self.arg_pair],
            "samples": int(self.samples),
            "grad_norm": float(self.grad_norm),
            "family": self.family,
            "resolution": int(self.resolution),
            "seed": int(self.seed),
        }

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent)


def cube_indices(u: GridFunction, x, edge: float):
    """Index ranges (per axis) of the lattice cells whose midpoint lies in Q_edge(x)."""
    x = np.asarray(x, dtype=float)
    lo = np.asarray(u.domain.lower)
    h = u.spacing
    ranges = []
    for i in range(u.n):
        c = lo[i] + (np.arange(u.resolution) + 0.5) * h[i]
        inside = np.nonzero(np.abs(c - x[i]) <= 0.5 * edge * (1 + 1e-12))[0]
        ranges.append((int(inside[0]), int(inside[-1]) + 1) if inside.size else (0, 0))
    return ranges


def _check_cube(u: GridFunction, x, edge):
    x = np.asarray(x, dtype=float)
    if np.any(x - 0.5 * edge < np.asarray(u.domain.lower)) or \
            np.any(x + 0.5 * edge > np.asarray(u.domain.upper)):
        raise DomainError(f"the cube of edge {edge:g} around {x.tolist()} leaves the box")


def _modulus_lookup(nm: NFunction, x, distances, tol):
    """mu(x, d) for many d, memoised per model and centre."""
    store = nm.__dict__.setdefault("_mu_memo", {})
    key = (tuple(float(v) for v in x), float(tol))
    known = store.setdefault(key, {})
    uniq = np.unique(distances)
    missing = np.array([d for d in uniq if d not in known])
    if missing.size:
        vals, _ = calculus.morrey_modulus_many(nm, x, missing, tol)
        known.update(zip(missing.tolist(), vals.tolist()))
    return np.array([known[d] for d in np.asarray(distances).ravel().tolist()]).reshape(
        np.shape(distances))


def morrey_ratios(nm: NFunction, u: GridFunction, x, idx1, idx2, grad_norm, tol=1e-10):
    """Ratios for the cell pairs ``idx1[k], idx2[k]`` (flat indices)."""
    pts = u.centers().reshape(-1, u.n)
    vals = u.values.ravel()
    num = np.abs(vals[idx1] - vals[idx2])
    dist = np.linalg.norm(pts[idx1] - pts[idx2], axis=-1)
    if not np.any(num):
        return np.zeros(num.shape)
    mu = _modulus_lookup(nm, x, dist, tol)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = num / (grad_norm * mu)
    return np.where(num == 0, 0.0, ratio)


def sample_pairs(u: GridFunction, x, edge, pairs, seed):
    """Seeded pairs of distinct lattice cells inside Q_edge(x), as flat indices."""
    ranges = cube_indices(u, x, edge)
    axes = [np.arange(a, b) for a, b in ranges]
    sub = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, u.n)
    if len(sub) < 2:
        raise DomainError("fewer than two lattice points inside the cube")
    flat = np.ravel_multi_index(sub.T, (u.resolution,) * u.n)
    rng = np.random.default_rng(seed)
    i = rng.integers(len(flat), size=pairs)
    j = rng.integers(len(flat) - 1, size=pairs)
    j = j + (j >= i)
    return flat[i], flat[j]


def empirical_morrey_check(nm: NFunction, u: GridFunction, x, pairs: int = 10_000,
                           seed: int = 0, sigma: float | None = None,
                           sigma0: float | None = None, tol=1e-10) -> MorreyReport:
    """Largest sampled ratio over pairs in Q_sigma(x), against K(n).

    mu is evaluated at the declared centre x.  ``sigma`` overrides the
    selection rule; ``sigma0`` replaces its default first term.
    """
    if u.resolution < MIN_RESOLUTION:
        raise ValueError(f"resolution must be at least {MIN_RESOLUTION}")
    if nm.domain != u.domain:
        raise ValueError("model and grid function are defined on different boxes")
    certs = certify(nm)
    for key in ("Delta2", "Delta2-conjugate"):
        if not certs[key].passed:
            raise CertificationError(f"{key} is not certified for this model")
    x = np.asarray(x, dtype=float)
    sig = float(sigma) if sigma is not None else select_sigma(nm, x, certs["P5-tilde"], sigma0)
    _check_cube(u, x, sig)
    i, j = sample_pairs(u, x, sig, pairs, seed)
    gn = gradient_norm(nm, u)
    ratio = morrey_ratios(nm, u, x, i, j, gn, tol)
    k = int(np.argmax(ratio))
    pts = u.centers().reshape(-1, u.n)
    return MorreyReport(tuple(x.tolist()), sig, reference_constant(u.n), float(ratio[k]),
                        (tuple(pts[i[k]]), tuple(pts[j[k]])), int(pairs), gn,
                        nm.family, u.resolution, int(seed))


@dataclass(frozen=True)
class HolderSeminorm:
    value: float
    r: float
    pair_count: int
    exhaustive: bool = True


def holder_seminorm(nm: NFunction, u: GridFunction, x, r: float, seed: int = 0,
                    tol=1e-10) -> HolderSeminorm:
    """``sup |u(y1) - u(y2)| / mu(x, |y1 - y2|)`` over lattice pairs in Q_r(x)."""
    x = np.asarray(x, dtype=float)
    dist = float(u.domain.distance_to_boundary(x))
    if not 0 < r / 2 < dist:
        raise DomainError("need 0 < r/2 < dist(x, boundary)")
    ranges = cube_indices(u, x, r)
    block = u.values[tuple(slice(a, b) for a, b in ranges)]
    count = block.size
    total = count * (count - 1) // 2
    if total == 0:
        return HolderSeminorm(0.0, float(r), 0)
    if total > EXHAUSTIVE_LIMIT:
        i, j = sample_pairs(u, x, r, SAMPLED_PAIRS, seed)
        ratio = morrey_ratios(nm, u, x, i, j, 1.0, tol)
        return HolderSeminorm(float(ratio.max()), float(r), SAMPLED_PAIRS, False)
    # every pair is a lattice offset o != 0 (taken up to sign) and a base cell
    shape = block.shape
    h = u.spacing
    offsets = [o for o in np.ndindex(*(2 * s - 1 for s in shape))]
    offsets = [tuple(k - (s - 1) for k, s in zip(o, shape)) for o in offsets]
    offsets = [o for o in offsets if any(o) and o[next(i for i, v in enumerate(o) if v)] > 0]
    best = np.zeros(len(offsets))
    for k, o in enumerate(offsets):
        a = tuple(slice(max(0, -v), s - max(0, v)) for v, s in zip(o, shape))
        b = tuple(slice(max(0, v), s - max(0, -v)) for v, s in zip(o, shape))
        best[k] = np.max(np.abs(block[a] - block[b]), initial=0.0)
    dists = np.linalg.norm(np.asarray(offsets, dtype=float) * h, axis=-1)
    mu = _modulus_lookup(nm, x, dists, tol)
    ratio = np.where(best == 0, 0.0, best / mu)
    return HolderSeminorm(float(ratio.max()), float(r), int(total))


def stress_functions(nm: NFunction, x, count: int = 20, seed: int = 0):
    """Seeded expression sources: affine maps, sine products and radial cusps.

    Cusp exponents start above ``1 - n / p_max`` (``p_max`` the largest
    growth exponent of the model), so the gradient stays in the Orlicz class
    even where the growth is steepest; cusps are centred at x or near it.
    """
    rng = np.random.default_rng(seed)
    n = nm.n
    x = np.asarray(x, dtype=float)
    p_max = float(getattr(nm, "p_max", n + 1.0))
    crit = 1.0 - n / p_max
    n_aff = count // 5
    n_sin = (count - n_aff) // 2
    n_cusp = count - n_aff - n_sin
    out = []
    for _ in range(n_aff):
        a = rng.normal(size=n)
        b = rng.normal()
        out.append(" + ".join(f"{float(c)!r}*x{i + 1}" for i, c in enumerate(a)) + f" + {float(b)!r}")
    for _ in range(n_sin):
        k = rng.uniform(1.0, 6.0, size=n)
        ph = rng.uniform(0.0, 2 * math.pi, size=n)
        out.append("*".join(f"sin({float(kk)!r}*x{i + 1} + {float(pp)!r})"
                            for i, (kk, pp) in enumerate(zip(k, ph))))
    for c in range(n_cusp):
        beta = crit + 0.02 + 0.6 * (1.0 - crit) * c / max(1, n_cusp)
        centre = x if c % 2 == 0 else x + rng.uniform(-0.05, 0.05, size=n)
        args = ", ".join(f"x{i + 1} - {float(v)!r}" for i, v in enumerate(centre))
        out.append(f"norm({args})^{float(beta)!r}")
    return out
