import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import integrate as sp_integrate

from morreykit import calculus as C
from morreykit.errors import P3Violation
from morreykit.nfunction import Custom, Domain, VariableExponent

from conftest import builtin_families

SQ = Domain.unit_cube(2)
X = np.array([0.5, 0.5])
P15 = VariableExponent(SQ, 1.5, supercritical=False)
P4 = VariableExponent(SQ, 4)
# grows like exp(t^2) at infinity, like t^1.5 at 0: (P3) holds and T is finite
EXPO = Custom(SQ, "t^1.5*exp(t^2)")


# --- Sobolev conjugate ---------------------------------------------------------

def test_sobolev_inverse_power_law_closed_form():
    p, n = 1.5, 2
    want = p ** (1 / p) / (1 / p - 1 / n)
    res = C.sobolev_conjugate_inverse(P15, X, 1.0, 1e-12)
    assert res.converged
    assert res.value == pytest.approx(want, rel=1e-10)


def test_sobolev_inverse_small_s_and_monotone():
    vals = [C.sobolev_conjugate_inverse(P15, X, s).value for s in (1e-12, 1e-6, 1.0, 2.0, 4.0)]
    # A_*^{-1}(s) = p^{1/p} s^{1/p - 1/n} / (1/p - 1/n) for the power law
    assert vals[0] == pytest.approx(6 * 1.5 ** (1 / 1.5) * 1e-2, rel=1e-9)
    assert C.sobolev_conjugate_inverse(P15, X, 0.0).value == 0.0
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_sobolev_inverse_concave_in_s():
    s = np.geomspace(0.01, 100, 15)
    v = np.array([C.sobolev_conjugate_inverse(EXPO, X, si).value for si in s])
    # concavity on a geometric grid: secant slopes decrease
    slopes = np.diff(v) / np.diff(s)
    assert np.all(np.diff(slopes) < 0)


def test_p3_fails_for_p_above_n():
    assert C.p3_exponent(P4, X) == pytest.approx(-1.25, abs=1e-6)
    with pytest.raises(P3Violation):
        C.sobolev_conjugate_inverse(P4, X, 1.0)
    with pytest.raises(P3Violation):
        C.limit_T(P4, X)


def test_limit_T_infinite_for_subcritical_power():
    T = C.limit_T(P15, X)
    assert not T.finite and T.value == math.inf


def test_limit_T_finite_for_exponential_growth():
    T = C.limit_T(EXPO, X)
    assert T.finite
    # independent route: QUADPACK on (0, inf) in log variables
    f = C.sobolev_integrand(EXPO, X)
    g = lambda w: float(f(np.array([math.exp(w)]))[0]) * math.exp(w)
    ref = sum(sp_integrate.quad(g, a, a + 10, epsabs=0, epsrel=1e-12, limit=200)[0]
              for a in range(-200, 700, 10))
    # the reported value is the last partial integral; its error bar covers the tail
    assert abs(T.value - ref) <= T.error
    assert T.error < 1e-4 * T.value


def test_limit_T_ignores_x_when_A_does():
    T1 = C.limit_T(EXPO, np.array([0.2, 0.3]))
    T2 = C.limit_T(EXPO, np.array([0.2001, 0.3]))
    assert T1.value == T2.value


def test_sobolev_conjugate_branches():
    T = C.limit_T(EXPO, X)
    assert C.sobolev_conjugate(EXPO, X, 0.0, T=T) == 0.0
    assert C.sobolev_conjugate(EXPO, X, T.value, T=T) == math.inf
    assert C.sobolev_conjugate(EXPO, X, -1.5 * T.value, T=T) == math.inf
    s = C.sobolev_conjugate(EXPO, X, 0.5 * T.value, T=T)
    assert C.sobolev_conjugate_inverse(EXPO, X, s).value == pytest.approx(0.5 * T.value,
                                                                           rel=1e-10)


def test_sobolev_conjugate_classical_exponent():
    p, n = 1.5, 2
    t = np.geomspace(10, 1000, 7)
    vals = [C.sobolev_conjugate(P15, X, ti) for ti in t]
    slope = np.polyfit(np.log(t), np.log(vals), 1)[0]
    assert slope == pytest.approx(n * p / (n - p), rel=1e-6)


# --- Morrey modulus -------------------------------------------------------------

def test_modulus_worked_values():
    assert C.morrey_modulus(P4, X, 0.5).value == pytest.approx(4.0, rel=1e-10)
    assert C.morrey_modulus(P4, X, 1.0).value == pytest.approx(4 * math.sqrt(2), rel=1e-10)
    assert C.morrey_modulus(P4, X, 0.0).value == 0.0
    assert C.morrey_modulus(P4, X, 1e-12).value < 1e-5


@pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
def test_modulus_closed_form(p):
    m = VariableExponent(SQ, p)
    s = np.geomspace(0.01, 1.0, 9)
    mu, err = C.morrey_modulus_many(m, X, s)
    assert np.allclose(mu, C.mu_power_closed_form(2, p, s), rtol=1e-6, atol=0)
    single = [C.morrey_modulus(m, X, si).value for si in s]
    assert np.allclose(mu, single, rtol=1e-9)


@pytest.mark.parametrize("p", [3.0, 4.0, 6.0])
def test_modulus_doubling_ratio(p):
    m = VariableExponent(SQ, p)
    for s in (0.01, 0.1, 0.4):
        r = C.morrey_modulus(m, X, 2 * s).value / C.morrey_modulus(m, X, s).value
        assert r == pytest.approx(2 ** (1 - 2 / p), abs=1e-6)


@pytest.mark.parametrize("name", ["variable-exponent", "log-type", "double-phase"])
def test_modulus_two_routes_agree(name):
    m = builtin_families(SQ)[name]
    tol = 1e-10
    for x in (X, np.array([0.1, 0.9])):
        for s in (0.05, 0.5, 1.0):
            a = C.morrey_modulus(m, x, s, tol).value
            b = C.morrey_modulus_tail(m, x, s, tol).value
            assert abs(a - b) <= 10 * tol * max(1.0, a)


def test_modulus_tail_rejects_divergent_tail():
    from morreykit.errors import DivergenceError
    with pytest.raises(DivergenceError):
        C.morrey_modulus_tail(P15, X, 0.5)


FAMS = builtin_families(SQ)


@given(st.sampled_from(sorted(FAMS)),
       st.tuples(st.floats(0, 1), st.floats(0, 1)).map(np.array),
       st.lists(st.floats(1e-4, 2.0), min_size=2, max_size=6, unique=True))
def test_modulus_increasing(name, x, s):
    s = np.sort(np.array(s))
    mu, _ = C.morrey_modulus_many(FAMS[name], x, s)
    assert np.all(np.diff(mu) > 0)


def test_modulus_table_csv():
    t = C.modulus_table(P4, [(0.5, 0.5)], [0.5, 1.0])
    lines = t.to_csv().splitlines()
    assert lines[0] == "x1,x2,s,mu,err"
    assert lines[1].startswith("0.5,0.5,0.5,")
    assert float(lines[1].split(",")[3]) == pytest.approx(4.0, rel=1e-12)
    assert C.modulus_table(P4, [(0.5, 0.5)], []).to_csv() == "x1,x2,s,mu,err\n"
