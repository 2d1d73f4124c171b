"""Interval self-maps of [0,1]: polynomial, piecewise-affine, and the
single-bump oscillation ("snake") family, with derivatives, monotone
structure, and a string registry used by the CLI.

All map objects are immutable after construction; caches (critical points,
monotone partition) are built lazily from exact root isolation for the
polynomial kind and from sampled sign changes elsewhere.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import polyalg
from .errors import (DomainError, NotC1Error, ResourceError,
                     UnsupportedOrderError)

__all__ = [
    "IntervalMap", "PolynomialMap", "PiecewiseAffineMap", "SnakeMap",
    "IterateMap", "SnakeParams", "build_snake", "get_map", "get_rate",
    "min_branch_length_iterate", "quadratic_map", "tent_map", "identity_map",
]

_GRID_BITS_SUP = 14      # dense grid for sup-norm estimates on non-polynomials
_GRID_BITS_CRIT = 16     # sampled sign changes for closed-form critical points


def _as_array(x):
    return np.asarray(x, dtype=float)


class IntervalMap:
    """Evaluable self-map of [0,1] with derivative and branch structure."""

    name = "map"
    k_max = 0
    smooth = False          # whether f' is continuous on [0,1]

    def __init__(self):
        self._crit = None
        self._branches = None

    # -- evaluation -----------------------------------------------------
    def evaluate(self, x):
        """f(x) with domain check; overshoot below 1e-12 is clamped."""
        if not 0.0 <= x <= 1.0:
            raise DomainError(f"x={x} outside [0,1]")
        v = float(self._eval_array(np.array([x]))[0])
        return min(1.0, max(0.0, v))

    __call__ = evaluate

    def evaluate_array(self, xs):
        """Vectorized evaluation; clamps rounding overshoot into [0,1]."""
        return np.clip(self._eval_array(_as_array(xs)), 0.0, 1.0)

    def _eval_array(self, xs):
        raise NotImplementedError

    def derivative_array(self, xs, order=1):
        """Analytic derivative values of the given order."""
        if order < 1 or order > self.k_max:
            raise UnsupportedOrderError(
                f"order {order} not supported (k_max={self.k_max})")
        return self._deriv_array(_as_array(xs), order)

    def _deriv_array(self, xs, order):
        raise NotImplementedError

    # -- structure --------------------------------------------------------
    @property
    def critical_points(self):
        """Sorted zeros of f' in the open interval (0,1)."""
        if self._crit is None:
            self._crit = self._find_critical_points()
        return self._crit

    def _find_critical_points(self):
        # sampled sign changes of f' plus local bisection
        n = 1 << _GRID_BITS_CRIT
        xs = np.linspace(0.0, 1.0, n + 1)
        d = self._deriv_array(xs, 1)
        s = np.sign(d)
        idx = np.nonzero(s[:-1] * s[1:] < 0)[0]
        roots = []
        for i in idx:
            lo, hi = xs[i], xs[i + 1]
            flo = d[i]
            for _ in range(60):
                mid = 0.5 * (lo + hi)
                fm = float(self._deriv_array(np.array([mid]), 1)[0])
                if flo * fm <= 0:
                    hi = mid
                else:
                    lo, flo = mid, fm
            roots.append(0.5 * (lo + hi))
        roots.extend(xs[1:-1][d[1:-1] == 0.0])
        return sorted(set(roots))

    def _sign_change_points(self):
        """Critical points where f' actually changes sign."""
        pts = []
        anchors = [0.0] + list(self.critical_points) + [1.0]
        for i, c in enumerate(self.critical_points):
            left = 0.5 * (anchors[i] + c)
            right = 0.5 * (c + anchors[i + 2])
            sl = float(self._deriv_array(np.array([left]), 1)[0])
            sr = float(self._deriv_array(np.array([right]), 1)[0])
            if sl * sr < 0:
                pts.append(c)
        return pts

    def monotone_partition(self):
        """(branch list, L(f), l): minimal monotone partition of [0,1]."""
        if self._branches is None:
            cuts = [0.0] + self._sign_change_points() + [1.0]
            self._branches = list(zip(cuts[:-1], cuts[1:]))
        branches = self._branches
        length = min(hi - lo for lo, hi in branches)
        return branches, length, len(branches)

    def branch_count_in_ball(self, x, eps):
        """Number of monotone branches meeting the open ball B(x, eps)."""
        if eps <= 0:
            raise DomainError("eps must be positive")
        branches, _, _ = self.monotone_partition()
        lo, hi = x - eps, x + eps
        return sum(1 for a, b in branches if a < hi and b > lo)

    def derivative_sup(self, order, interval=(0.0, 1.0)):
        """sup of |f^(order)| over the interval; dense-grid estimate with a
        Lipschitz correction from the next-order derivative when available."""
        if order < 1 or order > self.k_max:
            raise UnsupportedOrderError(
                f"order {order} not supported (k_max={self.k_max})")
        a, b = interval
        n = 1 << _GRID_BITS_SUP
        xs = np.linspace(a, b, n + 1)
        base = float(np.max(np.abs(self._deriv_array(xs, order))))
        if order + 1 <= self.k_max:
            h = (b - a) / n
            nxt = float(np.max(np.abs(self._deriv_array(xs, order + 1))))
            return base + 0.5 * h * nxt
        return base

    def modulus_of_continuity(self, eps):
        """w(f', eps) = sup over |x-y| < eps of |f'(x)-f'(y)|."""
        if not self.smooth:
            raise NotC1Error(f"{self.name}: derivative is not continuous")
        if not 0 < eps < 1:
            raise DomainError("need 0 < eps < 1")
        n = 1 << _GRID_BITS_SUP
        xs = np.linspace(0.0, 1.0, n + 1)
        d = self._deriv_array(xs, 1)
        k = max(1, int(math.ceil(eps * n)))
        if (n + 1) * k <= 1 << 26:
            win = np.lib.stride_tricks.sliding_window_view(d, k + 1)
            return float(np.max(win.max(axis=1) - win.min(axis=1)))
        # coarse fallback for very wide windows
        step = max(1, k // 4096)
        w = 0.0
        for i in range(0, n + 1 - k, step):
            seg = d[i:i + k + 1]
            w = max(w, float(seg.max() - seg.min()))
        return w

    def iterate(self, p):
        return IterateMap(self, p)

    def __repr__(self):
        return f"<{type(self).__name__} {self.name}>"


class PolynomialMap(IntervalMap):
    """Map given by a polynomial with exact rational coefficients."""

    smooth = True
    k_max = 64

    def __init__(self, coeffs, name=None, validate=True):
        super().__init__()
        self.poly = (coeffs if isinstance(coeffs, polyalg.Polynomial)
                     else polyalg.Polynomial(coeffs))
        self.name = name or f"poly:[{','.join(str(float(c)) for c in self.poly.coeffs)}]"
        self._derivs = {0: self.poly}
        if validate:
            xs = np.linspace(0.0, 1.0, 4097)
            v = self.poly(xs)
            if v.min() < -1e-12 or v.max() > 1 + 1e-12:
                raise ValueError(
                    f"{self.name}: image [{v.min():.3g}, {v.max():.3g}] "
                    "leaves [0,1]")

    def _derivative_poly(self, k):
        if k not in self._derivs:
            self._derivs[k] = self.poly.diff(k)
        return self._derivs[k]

    def _eval_array(self, xs):
        return self.poly(xs)

    def _deriv_array(self, xs, order):
        return self._derivative_poly(order)(xs) + np.zeros_like(xs)

    def _find_critical_points(self):
        dp = self.poly.diff()
        if dp.is_zero() or dp.degree < 1:
            return []
        return [r for r in polyalg.isolate_roots(dp, 0, 1) if 0 < r < 1]

    def derivative_sup(self, order, interval=(0.0, 1.0)):
        """Exact for the polynomial kind: root isolation of f^(order+1)."""
        if order < 1 or order > self.k_max:
            raise UnsupportedOrderError(
                f"order {order} not supported (k_max={self.k_max})")
        dk = self._derivative_poly(order)
        if dk.is_zero():
            return 0.0
        a, b = interval
        cands = [a, b]
        nxt = dk.diff()
        if not nxt.is_zero() and nxt.degree >= 1:
            cands.extend(polyalg.isolate_roots(nxt, Fraction(a), Fraction(b)))
        return max(abs(float(dk(x))) for x in cands)

    def modulus_of_continuity(self, eps):
        """Exact candidate enumeration: critical pairs, endpoint pairs, and
        sliding pairs at distance eps with g'(x) = g'(x+eps)."""
        if not 0 < eps < 1:
            raise DomainError("need 0 < eps < 1")
        g = self.poly.diff()
        eps_f = Fraction(eps).limit_denominator(1 << 48)
        cands = {0.0, 1.0}
        gp = g.diff()
        if not gp.is_zero() and gp.degree >= 1:
            cands.update(polyalg.isolate_roots(gp, 0, 1))
        pairs = []
        pts = sorted(cands)
        for i, a in enumerate(pts):
            for b in pts[i:]:
                if b - a <= eps + 1e-15:
                    pairs.append((a, b))
            if a + eps <= 1:
                pairs.append((a, a + eps))
            if a - eps >= 0:
                pairs.append((a - eps, a))
        slide = gp - gp.compose_affine(eps_f, 1)
        if not slide.is_zero() and slide.degree >= 1:
            for x in polyalg.isolate_roots(slide, 0, Fraction(1) - eps_f):
                pairs.append((x, x + eps))
        return max(abs(float(g(a)) - float(g(b))) for a, b in pairs)


class PiecewiseAffineMap(IntervalMap):
    """Continuous piecewise-affine map from breakpoint/value lists."""

    smooth = False
    k_max = 1

    def __init__(self, xs, ys, name=None):
        super().__init__()
        self.xs = np.asarray(xs, dtype=float)
        self.ys = np.asarray(ys, dtype=float)
        if self.xs[0] != 0.0 or self.xs[-1] != 1.0 or np.any(np.diff(self.xs) <= 0):
            raise ValueError("breakpoints must increase from 0 to 1")
        if self.ys.min() < 0 or self.ys.max() > 1:
            raise ValueError("values must lie in [0,1]")
        self.slopes = np.diff(self.ys) / np.diff(self.xs)
        self.name = name or "piecewise-affine"

    def _eval_array(self, xs):
        return np.interp(xs, self.xs, self.ys)

    def _deriv_array(self, xs, order):
        # right-continuous slope convention at breakpoints
        idx = np.clip(np.searchsorted(self.xs, xs, side="right") - 1,
                      0, len(self.slopes) - 1)
        return self.slopes[idx]

    def _find_critical_points(self):
        pts = []
        for i in range(len(self.slopes) - 1):
            if self.slopes[i] * self.slopes[i + 1] < 0:
                pts.append(float(self.xs[i + 1]))
        return pts

    def _sign_change_points(self):
        return self._find_critical_points()

    def branch_preimages(self, ys):
        """All preimages of each y (flattened, sorted); exact per segment."""
        out = []
        for i in range(len(self.slopes)):
            y0, y1 = self.ys[i], self.ys[i + 1]
            lo, hi = min(y0, y1), max(y0, y1)
            if self.slopes[i] == 0:
                continue
            sel = (ys >= lo) & (ys <= hi)
            out.append(self.xs[i] + (ys[sel] - y0) / self.slopes[i])
        return np.sort(np.concatenate(out)) if out else np.empty(0)


class IterateMap(IntervalMap):
    """p-fold composition f^p of a base map."""

    def __init__(self, base, p):
        super().__init__()
        if p < 1:
            raise ValueError("p must be >= 1")
        self.base = base
        self.p = int(p)
        self.k_max = 1
        self.smooth = base.smooth
        self.name = f"{base.name}^{p}"

    def _eval_array(self, xs):
        v = np.clip(xs, 0.0, 1.0)
        for _ in range(self.p):
            v = np.clip(self.base._eval_array(v), 0.0, 1.0)
        return v

    def _deriv_array(self, xs, order):
        if order != 1:
            raise UnsupportedOrderError("iterated maps expose order 1 only")
        v = np.clip(xs, 0.0, 1.0)
        acc = np.ones_like(v)
        for _ in range(self.p):
            acc = acc * self.base._deriv_array(v, 1)
            v = np.clip(self.base._eval_array(v), 0.0, 1.0)
        return acc

    def _find_critical_points(self):
        pts = _pullback_critical_points(self.base, self.p)
        return [x for x in pts if 0 < x < 1]

    def _sign_change_points(self):
        return self._find_critical_points()


# ---------------------------------------------------------------------------
# branch pullback and the p_eps scale
# ---------------------------------------------------------------------------

def _preimages(m: IntervalMap, ys, tol=1e-14):
    """Solutions of f(x) = y over all monotone branches, for an array ys."""
    if isinstance(m, PiecewiseAffineMap):
        return m.branch_preimages(np.asarray(ys, dtype=float))
    branches, _, _ = m.monotone_partition()
    ys = np.asarray(ys, dtype=float)
    out = []
    for a, b in branches:
        fa = float(m.evaluate_array(np.array([a]))[0])
        fb = float(m.evaluate_array(np.array([b]))[0])
        lo_v, hi_v = min(fa, fb), max(fa, fb)
        sel = (ys >= lo_v) & (ys <= hi_v)
        tgt = ys[sel]
        if tgt.size == 0:
            continue
        lo = np.full_like(tgt, a)
        hi = np.full_like(tgt, b)
        increasing = fb > fa
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            v = m.evaluate_array(mid)
            go_right = (v < tgt) if increasing else (v > tgt)
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        out.append(0.5 * (lo + hi))
    return np.sort(np.concatenate(out)) if out else np.empty(0)


def _pullback_critical_points(m: IntervalMap, p, point_cap=1 << 17):
    """Critical points of f^p as pullbacks of crit(f)."""
    base = np.array(sorted(m.critical_points), dtype=float)
    cur = base.copy()
    for _ in range(p - 1):
        pre = _preimages(m, cur)
        cur = np.unique(np.concatenate([base, pre]))
        if cur.size > point_cap:
            raise ResourceError(f"branch explosion beyond {point_cap} points")
    return cur.tolist()


def min_branch_length_iterate(m: IntervalMap, eps, p_cap=32, point_cap=1 << 17):
    """Largest p <= p_cap with L(f^p) > eps, by critical-point pullback.

    Returns (p_eps, saturated); saturated means the cap was reached with the
    minimal branch length still above eps.
    """
    if not 0 < eps < 1:
        raise DomainError("need 0 < eps < 1")
    base = np.array(sorted(m.critical_points), dtype=float)
    if base.size == 0:
        return p_cap, True
    cur = base.copy()
    best = 0
    for p in range(1, p_cap + 1):
        pts = np.concatenate([[0.0], cur, [1.0]])
        length = float(np.min(np.diff(np.unique(pts))))
        if length > eps:
            best = p
        else:
            return best, False
        pre = _preimages(m, cur)
        cur = np.unique(np.concatenate([base, pre]))
        if cur.size > point_cap:
            raise ResourceError(f"branch explosion beyond {point_cap} points")
    return p_cap, True


# ---------------------------------------------------------------------------
# snake construction
# ---------------------------------------------------------------------------

def _smoothstep7(u):
    """C^3 smoothstep on [0,1] (degree 7), with derivatives 0..3."""
    u = np.clip(u, 0.0, 1.0)
    s0 = ((( -20 * u + 70) * u - 84) * u + 35) * u ** 4
    s1 = ((( -140 * u + 420) * u - 420) * u + 140) * u ** 3
    s2 = ((( -840 * u + 2100) * u - 1680) * u + 420) * u ** 2
    s3 = ((( -4200 * u + 8400) * u - 5040) * u + 840) * u
    return s0, s1, s2, s3


def _chi(t, order=0):
    """Bump: 1 on [0,1], 0 outside (-1,2), C^3 ramps on [-1,0] and [1,2]."""
    t = _as_array(t)
    out = np.zeros_like(t)
    core = (t >= 0) & (t <= 1)
    if order == 0:
        out[core] = 1.0
    up = (t > -1) & (t < 0)
    dn = (t > 1) & (t < 2)
    if np.any(up):
        s = _smoothstep7(t[up] + 1.0)
        out[up] = s[order]
    if np.any(dn):
        s = _smoothstep7(2.0 - t[dn])
        out[dn] = s[order] * (-1.0) ** order
    return out


@dataclass(frozen=True)
class SnakeParams:
    """Derived parameters of the single-bump oscillation at scale eps."""
    eps: float
    a_eps: float          # rate value a(eps)
    lambda_u: float
    big_c: float
    P: float              # crossing time, -log(eps)/a(eps)
    N: int                # oscillation count, ceil(1/eps)
    M: float              # amplitude, eps * exp(-lambda_u * P)
    R: float              # offset, big_c * exp(-lambda_u * P)
    n: int                # window index: support [1/(4n+1), 1/(4n)]
    c: float
    d: float
    ell: float            # window width d - c

    def analytic_norm_bound(self, r, c_r=1.0):
        """c_r * (1/eps)^(-lambda_u/a(eps) + 2r - 1)."""
        return c_r * (1.0 / self.eps) ** (-self.lambda_u / self.a_eps + 2 * r - 1)

    def decay_vacuous(self, r):
        """True when a(eps) >= lambda_u/(2r-1), making the decay bound empty."""
        return self.a_eps >= self.lambda_u / (2 * r - 1)


class SnakeMap(IntervalMap):
    """Single bump-window term chi(t) * (R + M cos(pi N t)), t=(x-c)/ell.

    The sinusoid phase is chosen so f - R has exactly N zero crossings
    inside the window [c, d]; the bump is a C^3 smoothstep, so k_max = 3.
    """

    smooth = True
    k_max = 3

    def __init__(self, params: SnakeParams, name=None):
        super().__init__()
        self.params = params
        self.name = name or f"snake:eps={params.eps:g}"

    def _t(self, xs):
        return (xs - self.params.c) / self.params.ell

    def _h(self, t, order=0):
        p = self.params
        w = math.pi * p.N
        if order == 0:
            return p.R + p.M * np.cos(w * t)
        return p.M * w ** order * np.cos(w * t + order * math.pi / 2)

    def _eval_array(self, xs):
        t = self._t(xs)
        return _chi(t) * self._h(t)

    def _deriv_array(self, xs, order):
        t = self._t(xs)
        binom = {1: (1, 1), 2: (1, 2, 1), 3: (1, 3, 3, 1)}[order]
        acc = np.zeros_like(t)
        for a, coef in enumerate(binom):
            acc += coef * _chi(t, order=a) * self._h(t, order=order - a)
        return acc / self.params.ell ** order

    def profile_derivative_sup(self, order, samples_per_osc=100):
        """sup over window units t of |d^r/dt^r f(c + ell*t)| on [-1, 2].

        Equals ell^r times the x-derivative sup; this is the scale-free
        size of the bump profile.
        """
        if order < 1 or order > self.k_max:
            raise UnsupportedOrderError(f"order {order} beyond k_max=3")
        n = 3 * samples_per_osc * self.params.N
        t = np.linspace(-1.0, 2.0, n + 1)
        binom = {1: (1, 1), 2: (1, 2, 1), 3: (1, 3, 3, 1)}[order]
        acc = np.zeros_like(t)
        for a, coef in enumerate(binom):
            acc += coef * _chi(t, order=a) * self._h(t, order=order - a)
        return float(np.max(np.abs(acc)))

    def sampled_derivative_sup(self, order, samples_per_osc=100):
        """sup over x of |f^(order)| sampled at 100 points per oscillation."""
        return self.profile_derivative_sup(order, samples_per_osc) \
            / self.params.ell ** order

    def oscillation_count(self, samples_per_osc=100):
        """Sign changes of f - R on a 100*N grid over the window [c, d]."""
        p = self.params
        xs = np.linspace(p.c, p.d, samples_per_osc * p.N + 1)
        v = self._eval_array(xs) - p.R
        s = np.sign(v)
        s = s[s != 0]
        return int(np.sum(s[:-1] * s[1:] < 0))


def build_snake(rate, eps, lambda_u, big_c=1.0):
    """Snake parameters and the single-term map at scale eps.

    rate: evaluable monotone function a(.) with a(eps) > 0.
    """
    if not 0 < eps < 1:
        raise DomainError("need 0 < eps < 1")
    a_eps = float(rate(eps))
    if a_eps <= 0 or lambda_u <= 0:
        raise ValueError("need a(eps) > 0 and lambda_u > 0")
    if big_c <= eps:
        raise ValueError("need C > eps so that R > M")
    P = -math.log(eps) / a_eps
    N = int(math.ceil(Fraction(1) / Fraction(eps)))
    M = eps * math.exp(-lambda_u * P)
    R = big_c * math.exp(-lambda_u * P)
    # window [1/(4n+1), 1/(4n)] whose width 1/(4n(4n+1)) is nearest eps
    n_star = max(1, round((-1 + math.sqrt(1 + 4.0 / eps)) / 8.0))
    best = min((abs(1.0 / (4 * n * (4 * n + 1)) - eps), n)
               for n in range(max(1, n_star - 2), n_star + 3))[1]
    c = 1.0 / (4 * best + 1)
    d = 1.0 / (4 * best)
    params = SnakeParams(eps=eps, a_eps=a_eps, lambda_u=lambda_u, big_c=big_c,
                         P=P, N=N, M=M, R=R, n=best, c=c, d=d, ell=d - c)
    return params, SnakeMap(params)


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

def quadratic_map(a=4.0):
    if not 0 < a <= 4:
        raise ValueError("quadratic parameter must be in (0, 4]")
    af = Fraction(a).limit_denominator(1 << 30)
    return PolynomialMap(polyalg.Polynomial([0, af, -af]), name=f"quadratic:{a:g}")


def tent_map():
    return PiecewiseAffineMap([0.0, 0.5, 1.0], [0.0, 1.0, 0.0], name="tent")


def identity_map():
    return PolynomialMap([0, 1], name="identity")


_RATES = {
    "invsqrtlog": lambda e: 1.0 / math.sqrt(abs(math.log(e))),
    "invlog": lambda e: 1.0 / abs(math.log(e)),
}


def get_rate(spec):
    """Rate function by name: invsqrtlog, invlog, or pow:alpha."""
    if spec in _RATES:
        return _RATES[spec]
    m = re.fullmatch(r"pow:([0-9.eE+-]+)", spec)
    if m:
        alpha = float(m.group(1))
        return lambda e: e ** alpha
    raise KeyError(f"unknown rate spec {spec!r}")


def get_map(spec):
    """Map registry: tent | identity | quadratic:a | poly:[...] | snake:..."""
    if spec == "tent":
        return tent_map()
    if spec == "identity":
        return identity_map()
    if spec.startswith("quadratic:"):
        return quadratic_map(float(spec.split(":", 1)[1]))
    if spec.startswith("poly:"):
        body = spec[5:].strip()
        if not (body.startswith("[") and body.endswith("]")):
            raise KeyError(f"bad poly spec {spec!r}")
        coeffs = [Fraction(tok.strip()).limit_denominator(1 << 40)
                  for tok in body[1:-1].split(",") if tok.strip()]
        return PolynomialMap(coeffs, name=spec)
    if spec.startswith("snake:"):
        kv = dict(part.split("=", 1) for part in spec[6:].split(","))
        rate = get_rate(kv.get("rate", "invsqrtlog"))
        eps = float(kv["eps"])
        lam = float(kv.get("lambda", "1.0"))
        big_c = float(kv.get("C", "1.0"))
        _, m = build_snake(rate, eps, lam, big_c)
        return m
    raise KeyError(f"unknown map spec {spec!r}")
