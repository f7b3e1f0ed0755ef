"""Grid-scan certification of the structural conditions on an N-function.

"Passed" means: no counterexample on the declared grid, and the scanned
ratio shows no growth across the last decade.  It is a numerical
certificate, not a proof.  Every report records its grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import calculus
from .errors import P3Violation
from .nfunction import NFunction

CONDITIONS = ("Delta2", "Delta2-near-infinity", "P3", "P5", "P5-star", "P5-tilde",
              "MuchLessThan", "PropAa")
DELTA2_THRESHOLDS = (1.0, 10.0, 100.0)
GROWTH_SLACK = 1e-2      # Delta2: allowed relative rise of the ratio over the top decade
MLT_LEVEL = 1e-3         # A << B: top-of-grid ratio must reach this level
TREND_SLACK = 1e-9       # P5 family: the top-decade max must not exceed the previous one


@dataclass
class ConditionReport:
    condition_id: str
    passed: bool
    fitted_constants: dict = field(default_factory=dict)
    witnesses: list = field(default_factory=list)
    grid_spec: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    hypotheses: dict = field(default_factory=dict)

    def to_dict(self):
        out = {
            "condition": self.condition_id,
            "passed": bool(self.passed),
            "constants": {k: _num(v) for k, v in self.fitted_constants.items()},
            "witnesses": [{k: ([_num(c) for c in v] if k == "x" else _num(v))
                           for k, v in w.items()} for w in self.witnesses],
            "grid": self.grid_spec,
        }
        if self.hypotheses:
            out["hypotheses"] = dict(self.hypotheses)
        if self.notes:
            out["notes"] = list(self.notes)
        return out

    def to_json(self, indent=2):
        return json.dumps(self.to_dict(), indent=indent, allow_nan=True)


def _num(v):
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _witness(x, t, lhs, rhs, **extra):
    w = {"x": [float(c) for c in np.ravel(x)], "t": float(t), "lhs": float(lhs),
         "rhs": float(rhs)}
    w.update({k: float(v) for k, v in extra.items()})
    return w


def _t_grid(lo, hi, per_decade=4):
    count = max(2, int(round(math.log10(hi / lo) * per_decade)) + 1)
    return np.geomspace(lo, hi, count)


def _decade_split(t):
    """Masks for the top band of the t-grid and the band just below it.

    A band is one decade, or a third of the scanned log-range if that is
    shorter (narrow ranges occur below a finite saturation level).
    """
    width = min(1.0, math.log10(t[-1] / t[0]) / 3.0)
    lt = np.log10(t)
    top = lt >= lt[-1] - width - 1e-12
    prev = (lt >= lt[-1] - 2 * width - 1e-12) & ~top
    return top, prev


# ---------------------------------------------------------------------------
# Delta2

def check_delta2(m: NFunction, near_infinity: bool = False, k: int = 9,
                 t_range=(1e-4, 1e6), per_decade=4) -> ConditionReport:
    """Fit ``K = max A(x, 2t) / A(x, t)`` over a lattice of the closed box."""
    xs = m.domain.lattice(k)
    t_full = _t_grid(*t_range, per_decade=per_decade)
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        lhs_all = m.A(xs[:, None, :], 2.0 * t_full[None, :])
        base_all = m.A(xs[:, None, :], t_full[None, :])
        ratio_all = lhs_all / base_all
    ratio_all = np.where(np.isnan(ratio_all), np.inf, ratio_all)
    cid = "Delta2-near-infinity" if near_infinity else "Delta2"
    grid = {"x_lattice": f"{k}^{m.n} closed", "t_range": [float(t_range[0]), float(t_range[1])],
            "t_per_decade": per_decade}
    thresholds = DELTA2_THRESHOLDS if near_infinity else (t_range[0],)
    chosen = None
    for t0 in thresholds:
        sel = t_full >= t0 * (1 - 1e-12)
        t = t_full[sel]
        ratio = ratio_all[:, sel]
        rmax = ratio.max(axis=0)
        top, prev = _decade_split(t)
        bounded = np.all(np.isfinite(rmax)) and rmax[top].max() <= rmax[prev].max() * (1 + GROWTH_SLACK)
        chosen = (t0, sel, ratio, rmax, bounded)
        if bounded:
            break
    t0, sel, ratio, rmax, bounded = chosen
    K = float(ratio.max())
    i, j = np.unravel_index(int(np.argmax(ratio)), ratio.shape)
    tj = t_full[sel][j]
    consts = {"K": K}
    if near_infinity:
        consts["t0"] = t0
        grid["t0_candidates"] = list(DELTA2_THRESHOLDS)
    report = ConditionReport(cid, bool(bounded), consts, grid_spec=grid)
    report.witnesses.append(_witness(xs[i], tj, lhs_all[i, sel][j],
                                     K * base_all[i, sel][j] if math.isfinite(K) else math.inf))
    if not bounded:
        report.notes.append("ratio A(x,2t)/A(x,t) grows across the top decade")
    return report


# ---------------------------------------------------------------------------
# P3

def check_P3(m: NFunction, x, tol=1e-10) -> ConditionReport:
    """Integrability of ``A^{-1}(x, t) t^{-(n+1)/n}`` at 0."""
    x = np.asarray(x, dtype=float)
    beta = calculus.p3_exponent(m, x)
    f = calculus.sobolev_integrand(m, x)
    eps = [1e-4, 1e-6, 1e-8, 1e-10, 1e-12]
    pieces = []
    hi = 1.0
    for e in eps:
        res = calculus.integrate(f, e, hi, abs_tol=0.0, rel_tol=tol,
                                 panels=int(4 * math.log10(hi / e)), geometric=True)
        pieces.append(res.value)
        hi = e
    ratios = [pieces[i + 1] / pieces[i] for i in range(1, len(pieces) - 1)]
    cauchy = all(r < 0.99 for r in ratios)
    passed = beta > -1.0 + calculus.P3_MARGIN and cauchy
    partial = float(np.cumsum(pieces)[-1])
    report = ConditionReport(
        "P3", passed, {"beta": beta, "partial_integral": partial,
                       "increment_ratio": float(max(ratios))},
        grid_spec={"x": x.tolist(), "t_window": list(calculus.P3_WINDOW),
                   "cauchy_cutoffs": eps})
    report.witnesses.append(_witness(x, calculus.P3_WINDOW[0], beta, -1.0 + calculus.P3_MARGIN))
    if not passed:
        report.notes.append("integrand not integrable at 0 (A_*^-1 undefined at this x)")
    return report


# ---------------------------------------------------------------------------
# P5 family: |grad_x F(x,t)| <= C F(x,t)^(1+delta)

def delta_candidates(n):
    return np.linspace(0.01, 0.9 / n, 10)


def _growth_fit(cid, n, xs, t, F, G, grid):
    """Sweep delta, fit C, and pick the admissible pair with the smallest C."""
    top, prev = _decade_split(t)
    sweep = []
    best = None
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for d in delta_candidates(n):
            r = np.where(G == 0, 0.0, G / F ** (1.0 + d))
            rmax = r.max(axis=0)
            C = float(r.max())
            stable = bool(np.all(np.isfinite(r)) and
                          rmax[top].max() <= rmax[prev].max() * (1 + TREND_SLACK))
            sweep.append({"delta": float(d), "C": _num(C), "stable": stable})
            if stable and d < 1.0 / n and (best is None or C < best[1]):
                best = (float(d), C, r)
    grid = dict(grid, delta_sweep=sweep)
    if best is None:
        d = float(delta_candidates(n)[-1])
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            r = np.where(G == 0, 0.0, G / F ** (1.0 + d))
        best = (d, float(np.nanmax(r)), r)
        passed = False
    else:
        passed = True
    d, C, r = best
    i, j = np.unravel_index(int(np.nanargmax(r)), r.shape)
    report = ConditionReport(cid, passed, {"delta": d, "C": C, "t0": float(t[0])},
                             grid_spec=grid)
    report.witnesses.append(_witness(xs[i], t[j], G[i, j], C * F[i, j] ** (1.0 + d)))
    if not passed:
        report.notes.append("no delta < 1/n gives a ratio that stops growing on the grid")
    return report


def _p5_scan(model, cid, k, t0, t_max, per_decade):
    xs = model.domain.lattice(k, interior=True)
    t = _t_grid(t0, t_max, per_decade)
    F = model.A(xs[:, None, :], t[None, :])
    with np.errstate(over="ignore", invalid="ignore"):
        G = np.linalg.norm(model.x_gradient(xs[:, None, :], t[None, :]), axis=-1)
    grid = {"x_lattice": f"{k}^{model.n} interior", "t_range": [float(t0), float(t_max)],
            "t_per_decade": per_decade}
    return _growth_fit(cid, model.n, xs, t, F, G, grid)


def check_P5(m: NFunction, t0=1.0, k=7, t_max=1e6, per_decade=4) -> ConditionReport:
    """``|grad_x A| <= C0 A^(1+delta0)`` for t >= t0."""
    return _p5_scan(m, "P5", k, t0, t_max, per_decade)


def check_P5_tilde(m: NFunction, t0=1.0, k=7, t_max=1e6, per_decade=4) -> ConditionReport:
    """The same growth bound for the Young conjugate.

    Closed-form conjugates use their own x-gradient; numerical ones use
    ``grad_x conj(x, s) = -grad_y A(y, conj_slope(x, s))|_{y=x}``.
    """
    conj = m.conjugate_model
    report = _p5_scan(conj, "P5-tilde", k, t0, t_max, per_decade)
    report.grid_spec["gradient_route"] = ("closed form" if not hasattr(conj, "base")
                                          else "conjugation identity")
    return report


def check_P5_star(m: NFunction, t_star=1.0, k=3, t_max=1e3, per_decade=3,
                  tol=1e-13) -> ConditionReport:
    """The growth bound for the Sobolev conjugate ``A_*``.

    ``A_*`` comes from inverting the quadrature; its x-gradient from central
    differences of ``A_*^{-1}(., s)`` at fixed s and the implicit-function
    identity ``grad_x A_* = -grad_x A_*^{-1} / d_s A_*^{-1}``.
    """
    xs = m.domain.lattice(k, interior=True)
    for x in xs:
        p3 = check_P3(m, x)
        if not p3.passed:
            raise P3Violation(f"(P3) fails at x={x.tolist()}", p3.fitted_constants["beta"])
    d2 = check_delta2(m, near_infinity=True)
    Ts = [calculus.limit_T(m, x) for x in xs]
    Tmin = min(T.value for T in Ts)
    upper = 0.95 * Tmin if math.isfinite(Tmin) else t_max
    if upper <= t_star:
        raise ValueError(f"t_* = {t_star} is not below min T(x) = {Tmin}")
    t = _t_grid(t_star, upper, per_decade)
    n = m.n
    h = m.fd_steps
    F = np.zeros((len(xs), len(t)))
    G = np.zeros_like(F)
    lipschitz = 0.0
    for i, (x, T) in enumerate(zip(xs, Ts)):
        integrand = calculus.sobolev_integrand(m, x)
        for j, tj in enumerate(t):
            s = calculus.sobolev_conjugate(m, x, tj, tol=tol, T=T)
            F[i, j] = s
            grad_inv = np.empty(n)
            for c in range(n):
                e = np.zeros(n)
                e[c] = h[c]
                up = calculus.sobolev_conjugate_inverse(m, x + e, s, tol, check=False).value
                dn = calculus.sobolev_conjugate_inverse(m, x - e, s, tol, check=False).value
                grad_inv[c] = (up - dn) / (2.0 * h[c])
            ds = float(integrand(np.array([s]))[0])
            G[i, j] = np.linalg.norm(grad_inv) / ds
        q = np.abs(np.diff(F[i])) / np.diff(t)
        lipschitz = max(lipschitz, float(q.max()))
    grid = {"x_lattice": f"{k}^{n} interior", "t_range": [float(t_star), float(upper)],
            "t_per_decade": per_decade, "T_min": _num(Tmin)}
    report = _growth_fit("P5-star", n, xs, t, F, G, grid)
    report.fitted_constants["lipschitz_quotient"] = lipschitz
    report.hypotheses["delta2_near_infinity"] = bool(d2.passed)
    report.notes.append("local Lipschitz continuity of A_* is only spot-checked by bounded "
                        f"difference quotients in t (max {lipschitz:.6g})")
    if not d2.passed:
        report.notes.append("hypothesis 'A satisfies Delta2 near infinity' is unmet; "
                            "(P5) does not imply (P5)_* here")
    return report


# ---------------------------------------------------------------------------
# A << B

def check_much_less_than(a: NFunction, b: NFunction, k_list=(1.0, 10.0), k: int = 9,
                         t_values=None) -> ConditionReport:
    """``A(x, k t) / B(x, t) -> 0`` uniformly, for each k in ``k_list``."""
    xs = a.domain.lattice(k)
    t = np.asarray(t_values if t_values is not None else 10.0 ** np.arange(1, 7), dtype=float)
    passed = True
    consts = {}
    worst = None
    for kk in k_list:
        with np.errstate(over="ignore", invalid="ignore"):
            num = a.A(xs[:, None, :], kk * t[None, :])
            den = b.A(xs[:, None, :], t[None, :])
            r = num / den
        r = np.where(np.isnan(r), np.inf, r)
        rmax = r.max(axis=0)
        ok = bool(np.all(np.diff(rmax) < 0) and rmax[-1] <= MLT_LEVEL * (1 + 1e-12))
        passed &= ok
        consts[f"ratio_top_k={kk:g}"] = float(rmax[-1])
        i = int(np.argmax(r[:, -1]))
        if worst is None or r[i, -1] > worst[0]:
            worst = (r[i, -1], xs[i], t[-1], num[i, -1], den[i, -1], kk)
    report = ConditionReport("MuchLessThan", passed, consts,
                             grid_spec={"x_lattice": f"{k}^{a.n} closed",
                                        "t_values": t.tolist(), "k_list": list(map(float, k_list))})
    _, x, tt, lhs, rhs, kk = worst
    report.witnesses.append(_witness(x, tt, lhs, rhs, k=kk))
    return report


# ---------------------------------------------------------------------------
# three inequalities for A, a and the conjugate

def verify_prop_Aa(m: NFunction, samples: int = 10_000, seed: int = 0,
                   slack=1e-8, eq_slack=1e-7, log_range=(-3.0, 3.0)) -> ConditionReport:
    """Sample ``A <= a t <= A(2t)``, ``y < A^-1 conj^-1 <= 2y`` and Young's inequality."""
    rng = np.random.default_rng(seed)
    lo = np.asarray(m.domain.lower)
    hi = np.asarray(m.domain.upper)
    x = lo + (hi - lo) * rng.random((samples, m.n))
    t = 10.0 ** rng.uniform(*log_range, samples)
    s = 10.0 ** rng.uniform(*log_range, samples)
    y = 10.0 ** rng.uniform(*log_range, samples)
    conj = m.conjugate_model

    A_t = m.A(x, t)
    a_t = m.a(x, t)
    A_2t = m.A(x, 2.0 * t)
    at = a_t * t
    r1_low = A_t / at
    r1_high = at / A_2t

    prod = m.inverse(x, y) * conj.inverse(x, y)
    r2_low = prod / y
    r2_high = prod / (2.0 * y)

    C_s = conj.A(x, s)
    r3 = s * t / (A_t + C_s)
    C_a = conj.A(x, a_t)
    eq_dev = np.abs(at - (A_t + C_a)) / (A_t + C_a)

    checks = {
        "ineq1_lower": (r1_low.max(), r1_low.max() <= 1 + slack, np.argmax(r1_low),
                        A_t, at),
        "ineq1_upper": (r1_high.max(), r1_high.max() <= 1 + slack, np.argmax(r1_high),
                        at, A_2t),
        "ineq2_lower": (r2_low.min(), r2_low.min() > 1.0, np.argmin(r2_low), y, prod),
        "ineq2_upper": (r2_high.max(), r2_high.max() <= 1 + slack, np.argmax(r2_high),
                        prod, 2.0 * y),
        "young": (r3.max(), r3.max() <= 1 + slack, np.argmax(r3), s * t, A_t + C_s),
        "young_equality": (eq_dev.max(), eq_dev.max() <= eq_slack, np.argmax(eq_dev),
                           at, A_t + C_a),
    }
    passed = all(ok for _, ok, *_ in checks.values())
    consts = {name: float(v[0]) for name, v in checks.items()}
    report = ConditionReport("PropAa", bool(passed), consts,
                             grid_spec={"samples": samples, "seed": seed,
                                        "log10_range": list(log_range),
                                        "slack": slack, "equality_slack": eq_slack})
    # "t" is the argument of the inequality (y for the inverse bounds); Young also needs s
    witness_t = {"ineq2_lower": y, "ineq2_upper": y}
    for name, (_, ok, idx, lhs, rhs) in checks.items():
        tt = witness_t.get(name, t)
        extra = {"s": s[idx]} if name == "young" else {}
        report.witnesses.append(_witness(x[idx], tt[idx], lhs[idx], rhs[idx], **extra))
        if not ok:
            report.notes.append(f"{name} violated")
    return report
