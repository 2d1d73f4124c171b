"""Interval map structure, derivative sups, moduli, iterate scales, snake."""

import math
import random
from fractions import Fraction

import numpy as np
import pytest

from tailent import polyalg
from tailent.errors import (DomainError, NotC1Error, UnsupportedOrderError)
from tailent.maps import (IterateMap, PiecewiseAffineMap, PolynomialMap,
                          build_snake, get_map, get_rate, identity_map,
                          min_branch_length_iterate, quadratic_map, tent_map)

F4 = quadratic_map()
TENT = tent_map()
IDENT = identity_map()
QUARTIC3 = PolynomialMap([0, 0, 16, -40, 25], name="three-branch-quartic")
# f(x) = x^2 (5x-4)^2: quartic with monotone branches [0,.4],[.4,.8],[.8,1]


def test_evaluate_examples():
    assert F4.evaluate(0.5) == 1.0
    assert IDENT.evaluate(0.3) == 0.3
    assert TENT.evaluate(0.25) == 0.5


def test_evaluate_domain_error():
    with pytest.raises(DomainError):
        F4.evaluate(1.5)
    with pytest.raises(DomainError):
        TENT.evaluate(-0.1)


def test_derivative_sup_examples():
    assert F4.derivative_sup(1) == pytest.approx(4.0, abs=1e-12)
    assert F4.derivative_sup(2) == pytest.approx(8.0, abs=1e-12)
    assert IDENT.derivative_sup(1) == pytest.approx(1.0, abs=1e-15)
    assert F4.derivative_sup(1, (0.25, 0.75)) == pytest.approx(2.0, abs=1e-10)


def test_derivative_sup_unsupported_order():
    with pytest.raises(UnsupportedOrderError):
        TENT.derivative_sup(2)


def test_monotone_partition_examples():
    branches, length, count = TENT.monotone_partition()
    assert branches == [(0.0, 0.5), (0.5, 1.0)]
    assert length == 0.5 and count == 2
    branches, length, count = F4.monotone_partition()
    assert count == 2 and length == pytest.approx(0.5, abs=1e-12)
    _, length, count = QUARTIC3.monotone_partition()
    assert count == 3
    assert length == pytest.approx(0.2, abs=1e-10)


def test_monotone_partition_from_fitted_polynomial():
    """Branch count of a fitted polynomial: exact root isolation agrees with
    a dense sampled sign-change oracle (a degree-6 LSQ fit of the 3-branch
    sin^2(3 pi x/2) carries ripple extrema, so the count is the fit's own)."""
    xs = np.linspace(0, 1, 200)
    fit = np.polyfit(xs, np.sin(1.5 * math.pi * xs) ** 2, 6)
    p = polyalg.Polynomial([Fraction(c).limit_denominator(10 ** 9)
                            for c in fit[::-1]])
    cands = [Fraction(0), Fraction(1)]
    dp = p.diff()
    cands += [Fraction(x).limit_denominator(1 << 40)
              for x in polyalg.isolate_roots(dp, 0, 1)]
    vals = [p.eval_exact(c) for c in cands]
    lo, hi = min(vals), max(vals)
    rescaled = polyalg.Polynomial([(c - (lo if i == 0 else 0)) / (hi - lo)
                                   for i, c in enumerate(p.coeffs)])
    m = PolynomialMap(rescaled, name="sin2-fit")
    _, _, count = m.monotone_partition()
    grid = np.linspace(0, 1, 1 << 16)
    d = rescaled.diff()(grid)
    s = np.sign(d)
    s = s[s != 0]
    oracle = int(np.sum(s[:-1] * s[1:] < 0)) + 1
    assert count == oracle


def test_modulus_of_continuity():
    assert F4.modulus_of_continuity(0.1) == pytest.approx(0.8, abs=1e-10)
    assert IDENT.modulus_of_continuity(0.2) == 0.0
    with pytest.raises(NotC1Error):
        TENT.modulus_of_continuity(0.1)


def test_modulus_linear_in_eps_for_quadratic():
    for eps in (0.01, 0.05, 0.3):
        assert F4.modulus_of_continuity(eps) == pytest.approx(8 * eps, rel=1e-9)


def test_branch_count_in_ball():
    assert F4.branch_count_in_ball(0.5, 0.1) == 2
    assert F4.branch_count_in_ball(0.1, 0.05) == 1
    assert IDENT.branch_count_in_ball(0.7, 0.3) == 1
    # nondecreasing in eps, bounded by the branch count
    _, _, l = QUARTIC3.monotone_partition()
    prev = 0
    for eps in (0.01, 0.05, 0.21, 0.5, 0.9):
        c = QUARTIC3.branch_count_in_ball(0.41, eps)
        assert prev <= c <= l
        prev = c


@pytest.mark.parametrize("m,orders,h,rel", [
    (F4, (1, 2), 1e-2, 1e-10),
    (IDENT, (1,), 1e-2, 1e-12),
    (QUARTIC3, (1, 2, 3), 1e-2, 1e-9),
])
def test_derivatives_match_finite_differences(m, orders, h, rel):
    w1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5,
                   4 / 105, -1 / 280])
    rng = random.Random(5)
    pts = np.array([rng.uniform(0.05, 0.95) for _ in range(200)])
    for order in orders:
        exact = m.derivative_array(pts, order)
        prev = (m.derivative_array(pts[:, None] + np.arange(-4, 5) * h, order - 1)
                if order > 1 else
                m.evaluate_array(np.clip(pts[:, None] + np.arange(-4, 5) * h, 0, 1)))
        fd = prev @ w1 / h
        scale = np.maximum(np.abs(exact), np.max(np.abs(exact)) * 1e-3 + 1e-12)
        assert np.max(np.abs(fd - exact) / scale) < max(rel, 1e-7)


def test_snake_derivatives_match_finite_differences():
    """Analytic snake derivatives vs 8th-order differences, orders 1..3.

    Points near the bump's C^3 joints are excluded (the 4th derivative jumps
    there, as at the tent kink); elsewhere the map is piecewise analytic."""
    _, sm = build_snake(RATE, 0.1, 1.0)
    w1 = np.array([1 / 280, -4 / 105, 1 / 5, -4 / 5, 0, 4 / 5, -1 / 5,
                   4 / 105, -1 / 280])
    rng = random.Random(13)
    p = sm.params
    lo, hi = p.c - p.ell, p.d + p.ell
    joints = np.array([p.c - p.ell, p.c, p.d, p.d + p.ell])
    h = 5e-5
    pts = np.array([x for x in (rng.uniform(lo, hi) for _ in range(600))
                    if np.min(np.abs(x - joints)) > 20 * h][:200])
    for order in (1, 2, 3):
        exact = sm.derivative_array(pts, order)
        prev = (sm.derivative_array(pts[:, None] + np.arange(-4, 5) * h,
                                    order - 1)
                if order > 1 else
                sm.evaluate_array(pts[:, None] + np.arange(-4, 5) * h))
        fd = prev @ w1 / h
        scale = max(float(np.max(np.abs(exact))), 1e-12)
        assert np.max(np.abs(fd - exact)) / scale < 1e-5


def test_tent_derivative_finite_differences_off_kink():
    rng = random.Random(9)
    pts = np.array([x for x in (rng.uniform(0.02, 0.98) for _ in range(400))
                    if abs(x - 0.5) > 0.01][:200])
    h = 1e-3
    fd = (TENT.evaluate_array(pts + h) - TENT.evaluate_array(pts - h)) / (2 * h)
    assert np.allclose(fd, TENT.derivative_array(pts, 1), rtol=1e-10, atol=1e-10)


def test_vanishing_derivative_lemma():
    """sup |f'| over I <= ||f^(k+1)|| |I|^k when f' vanishes at k points of I."""
    rng = random.Random(21)
    for _ in range(20):
        k = rng.randrange(1, 4)
        zeros = sorted(rng.uniform(0.1, 0.9) for _ in range(k))
        dp = polyalg.Polynomial([1])
        for z in zeros:
            dp = dp * polyalg.Polynomial([-Fraction(z).limit_denominator(10 ** 6), 1])
        lo = max(0.0, zeros[0] - rng.uniform(0.0, 0.1))
        hi = min(1.0, zeros[-1] + rng.uniform(0.0, 0.1))
        xs = np.linspace(lo, hi, 2001)
        sup_dp = float(np.max(np.abs(dp(xs))))
        # f^(k+1) = dp^(k): for monic product of k linear factors it is k!
        sup_next = math.factorial(k)
        assert sup_dp <= sup_next * (hi - lo) ** k * (1 + 1e-9)


def test_min_branch_length_iterate_examples():
    assert min_branch_length_iterate(TENT, 0.1, 16) == (3, False)
    assert min_branch_length_iterate(IDENT, 0.3, 8) == (8, True)


def test_min_branch_length_monotone_in_eps():
    prev = None
    for eps in (0.01, 0.05, 0.2, 0.4):
        p, _ = min_branch_length_iterate(F4, eps, 16)
        if prev is not None:
            assert p <= prev
        prev = p


def test_min_branch_length_vs_exact_composition():
    """Pullback partition agrees with exact root isolation of (f4^p)'."""
    f4_poly = polyalg.Polynomial([0, 4, -4])
    comp = f4_poly
    lengths = []
    for p in range(1, 6):
        crit = polyalg.isolate_roots(comp.diff(), 0, 1)
        pts = sorted({0.0, 1.0, *crit})
        lengths.append(min(b - a for a, b in zip(pts, pts[1:])))
        comp = f4_poly.compose(comp)
    for eps in (0.05, 0.02, 0.11):
        expected = 0
        for p, length in enumerate(lengths, start=1):
            if length > eps:
                expected = p
            else:
                break
        got, saturated = min_branch_length_iterate(F4, eps, 5)
        assert (got, saturated) == (expected, expected == 5)


def test_tent_dyadic_boundary_is_exact():
    # L(T^p) = 2^-p exactly; at eps = 2^-6 the inequality is strict, so p = 5
    assert min_branch_length_iterate(TENT, 2.0 ** -6, 16)[0] == 5


# ---------------------------------------------------------------------------
# snake construction
# ---------------------------------------------------------------------------

RATE = get_rate("invsqrtlog")


def test_snake_params_frozen_example():
    params, _ = build_snake(RATE, 0.01, 1.0)
    assert params.P == pytest.approx(abs(math.log(0.01)) ** 1.5, rel=1e-12)
    assert params.N == 100
    assert params.M == pytest.approx(0.01 * math.exp(-params.P), rel=1e-12)
    assert params.n == 3 and params.ell == pytest.approx(1 / 156, rel=1e-12)


@pytest.mark.parametrize("eps,lam", [(0.1, 1.0), (0.01, 1.7), (0.003, 0.6)])
def test_snake_invariants(eps, lam):
    params, sm = build_snake(RATE, eps, lam)
    assert params.N == math.ceil(Fraction(1) / Fraction(eps))
    assert params.M * math.exp(lam * params.P) == pytest.approx(eps, rel=1e-12)
    assert params.M < params.R
    assert params.R * math.exp(lam * params.P) <= params.big_c * (1 + 1e-12)
    assert sm.oscillation_count() == params.N


def test_snake_first_derivative_decays_along_powers_of_ten():
    sups = [build_snake(RATE, 10.0 ** -j, 1.0)[1].sampled_derivative_sup(1)
            for j in (1, 2, 3)]
    assert sups[0] > sups[1] > sups[2]


def test_snake_decay_vacuous_flag():
    params, _ = build_snake(RATE, 0.001, 1.0)
    # a(0.001) = 0.3805 >= 1/5: the r = 3 analytic decay bound is vacuous
    assert params.decay_vacuous(3)
    assert not params.decay_vacuous(1)
    assert params.analytic_norm_bound(1) < 1


def test_snake_map_image_and_smoothness():
    params, sm = build_snake(RATE, 0.01, 1.0)
    xs = np.linspace(0, 1, 20001)
    v = sm.evaluate_array(xs)
    assert v.min() >= 0 and v.max() <= params.R + params.M + 1e-15
    assert sm.k_max == 3 and sm.smooth
    with pytest.raises(UnsupportedOrderError):
        sm.derivative_array(xs[:5], 4)


def test_snake_rejects_bad_configs():
    with pytest.raises(DomainError):
        build_snake(RATE, 1.5, 1.0)
    with pytest.raises(ValueError):
        build_snake(RATE, 0.5, 1.0, big_c=0.1)


# ---------------------------------------------------------------------------
# iterates and registry
# ---------------------------------------------------------------------------

def test_iterate_map_chain_rule():
    it = IterateMap(F4, 2)
    xs = np.linspace(0.05, 0.95, 7)
    manual = F4.derivative_array(F4.evaluate_array(xs), 1) * F4.derivative_array(xs, 1)
    assert np.allclose(it.derivative_array(xs, 1), manual, rtol=1e-12)
    assert it.evaluate(0.3) == pytest.approx(F4.evaluate(F4.evaluate(0.3)))


def test_registry_round_trip():
    assert get_map("tent").name == "tent"
    assert get_map("identity").evaluate(0.25) == 0.25
    assert get_map("quadratic:4.0").evaluate(0.5) == 1.0
    m = get_map("poly:[0,1]")
    assert m.evaluate(0.125) == 0.125
    sm = get_map("snake:eps=0.01,lambda=1.0,rate=invsqrtlog")
    assert sm.params.N == 100
    with pytest.raises(KeyError):
        get_map("lorenz")
    with pytest.raises(KeyError):
        get_rate("cubic-spline")


def test_piecewise_affine_validation():
    with pytest.raises(ValueError):
        PiecewiseAffineMap([0, 0.5, 0.9], [0, 1, 0])
    with pytest.raises(ValueError):
        PiecewiseAffineMap([0, 0.5, 1.0], [0, 1.5, 0])


def test_polynomial_map_image_validation():
    with pytest.raises(ValueError):
        PolynomialMap([0, 5, -5])  # peaks at 1.25
