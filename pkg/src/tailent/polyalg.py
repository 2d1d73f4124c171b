"""Exact univariate polynomial arithmetic and the constructive one-dimensional
reparametrization of polynomial preimages of the unit cube.

The reparametrizer follows a three-step pipeline:

1. subdivide [0,1] at the zeros of P_j, P_j - 1, P_i' +/- P_j', P_j' -/+ 1 and
   keep the components mapped into [0,1] by every P_j; each kept component
   receives an affine chart (when max_j |P_j'| <= 1 there) or the inverse
   branch of the dominating polynomial (when >= 1),
2. subdivide each chart domain so the derivatives of order 2..r+1 of every
   P_j composed with the chart keep a constant sign,
3. compose with the endpoint-flattening polynomial Q_r and split its domain
   into n3 = c*r^4 + 1 equal pieces, doubling c until the sampled C^r norms
   drop below 1 + tolerance.

Root isolation is exact: primitive integer coefficients, Descartes/VCA
sign-variation bisection on the square-free part, dyadic refinement to 1e-13,
floats only at the very end.  Norm certificates are sampled (4096 points per
chart group) and reported as "sampled", never as proved bounds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .combinatorics import BellTable
from .errors import PrecisionError, ResourceError

__all__ = [
    "Polynomial", "isolate_roots", "q_polynomial", "q_derivative_factorization",
    "Atlas", "Chart", "reparametrize_1d", "verify_atlas", "serialize_atlas",
]

_ZERO = Fraction(0)
_ONE = Fraction(1)


# ---------------------------------------------------------------------------
# exact polynomials
# ---------------------------------------------------------------------------

class Polynomial:
    """Univariate polynomial with exact rational coefficients (ascending)."""

    __slots__ = ("coeffs", "_fcoeffs")

    def __init__(self, coeffs):
        cs = [Fraction(c) for c in coeffs]
        while cs and cs[-1] == 0:
            cs.pop()
        self.coeffs = tuple(cs)
        self._fcoeffs = None

    # -- basic structure ----------------------------------------------------
    @property
    def degree(self):
        return len(self.coeffs) - 1  # -1 for the zero polynomial

    def is_zero(self):
        return not self.coeffs

    def __eq__(self, other):
        return isinstance(other, Polynomial) and self.coeffs == other.coeffs

    def __hash__(self):
        return hash(self.coeffs)

    def __repr__(self):
        return f"Polynomial({list(self.coeffs)!r})"

    # -- arithmetic ----------------------------------------------------------
    def __add__(self, other):
        other = other if isinstance(other, Polynomial) else Polynomial([other])
        n = max(len(self.coeffs), len(other.coeffs))
        a = list(self.coeffs) + [_ZERO] * (n - len(self.coeffs))
        b = list(other.coeffs) + [_ZERO] * (n - len(other.coeffs))
        return Polynomial([x + y for x, y in zip(a, b)])

    def __neg__(self):
        return Polynomial([-c for c in self.coeffs])

    def __sub__(self, other):
        other = other if isinstance(other, Polynomial) else Polynomial([other])
        return self + (-other)

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial([c * Fraction(other) for c in self.coeffs])
        if self.is_zero() or other.is_zero():
            return Polynomial([])
        out = [_ZERO] * (len(self.coeffs) + len(other.coeffs) - 1)
        for i, a in enumerate(self.coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other.coeffs):
                out[i + j] += a * b
        return Polynomial(out)

    __rmul__ = __mul__

    def diff(self, order=1):
        cs = self.coeffs
        for _ in range(order):
            cs = tuple(i * c for i, c in enumerate(cs))[1:]
        return Polynomial(cs)

    def compose_affine(self, a, b):
        """p(a + b*X) exactly."""
        a, b = Fraction(a), Fraction(b)
        out = Polynomial([])
        lin = Polynomial([a, b])
        for c in reversed(self.coeffs):
            out = out * lin + Polynomial([c])
        return out

    def compose(self, other):
        out = Polynomial([])
        for c in reversed(self.coeffs):
            out = out * other + Polynomial([c])
        return out

    # -- evaluation ----------------------------------------------------------
    def eval_exact(self, x):
        x = Fraction(x)
        acc = _ZERO
        for c in reversed(self.coeffs):
            acc = acc * x + c
        return acc

    def float_coeffs(self):
        if self._fcoeffs is None:
            self._fcoeffs = np.array([float(c) for c in self.coeffs], dtype=float)
        return self._fcoeffs

    def __call__(self, x):
        """Float evaluation, scalar or numpy array."""
        cs = self.float_coeffs()
        if cs.size == 0:
            return np.zeros_like(np.asarray(x, dtype=float)) if np.ndim(x) else 0.0
        acc = np.zeros_like(np.asarray(x, dtype=float)) + cs[-1] if np.ndim(x) else cs[-1]
        for c in cs[-2::-1]:
            acc = acc * x + c
        return acc


# ---------------------------------------------------------------------------
# exact root isolation (Descartes / VCA over integers)
# ---------------------------------------------------------------------------

def _int_coeffs(p: Polynomial):
    """Primitive integer coefficient list (ascending), sign preserved."""
    if p.is_zero():
        return []
    denom = 1
    for c in p.coeffs:
        denom = denom * c.denominator // math.gcd(denom, c.denominator)
    ints = [int(c * denom) for c in p.coeffs]
    g = 0
    for v in ints:
        g = math.gcd(g, v)
    return [v // g for v in ints]


def _sign_variations(cs):
    v, prev = 0, 0
    for c in cs:
        if c == 0:
            continue
        s = 1 if c > 0 else -1
        if prev and s != prev:
            v += 1
        prev = s
    return v


def _taylor_shift_1(cs):
    """Coefficients of p(x+1) from those of p(x), in place Pascal style."""
    cs = list(cs)
    n = len(cs)
    for k in range(n - 1):
        for j in range(n - 2, k - 1, -1):
            cs[j] += cs[j + 1]
    return cs


def _descartes_01(cs):
    """Sign variations bounding the number of roots of p in (0, 1)."""
    rev = list(reversed(cs))  # p(1/(1+x)) * (1+x)^d has these in y = x+1
    return _sign_variations(_taylor_shift_1(rev))


def _poly_int_eval(cs, num, den_pow):
    """Sign of p(num / 2^den_pow) for integer coefficients, exactly."""
    two = 1 << den_pow
    acc = 0
    scale = 1
    for c in reversed(cs):
        acc = acc * num + c * scale
        scale *= two
    return (acc > 0) - (acc < 0)


def _int_poly_squarefree(cs):
    """Square-free part of an integer polynomial via primitive PRS gcd."""
    def content(v):
        g = 0
        for c in v:
            g = math.gcd(g, c)
        return g or 1

    def primitive(v):
        g = content(v)
        return [c // g for c in v]

    def pdiv_rem(a, b):
        # pseudo-remainder of a by b
        a = list(a)
        db, lb = len(b) - 1, b[-1]
        while len(a) - 1 >= db and any(a):
            if a[-1] == 0:
                a.pop()
                continue
            shift = len(a) - 1 - db
            la = a[-1]
            a = [c * lb for c in a]
            for i, bc in enumerate(b):
                a[shift + i] -= la * bc
            while a and a[-1] == 0:
                a.pop()
        return a

    d = [i * c for i, c in enumerate(cs)][1:]
    a, b = primitive(cs), primitive(d)
    while b and any(b):
        r = pdiv_rem(a, b)
        if not r or not any(r):
            break
        a, b = b, primitive(r)
    else:
        return list(cs)  # gcd with derivative is a constant
    g = b if (b and any(b)) else a
    if len(g) <= 1:
        return list(cs)
    # exact division cs / g over the rationals
    q = _poly_div_exact(cs, g)
    return primitive(q)


def _poly_div_exact(a, b):
    """Exact quotient of integer polynomials (a divisible by b up to content)."""
    pa = [Fraction(c) for c in a]
    out = [Fraction(0)] * (len(a) - len(b) + 1)
    while len(pa) >= len(b) and any(pa):
        if pa[-1] == 0:
            pa.pop()
            continue
        shift = len(pa) - len(b)
        f = pa[-1] / b[-1]
        out[shift] = f
        for i, bc in enumerate(b):
            pa[shift + i] -= f * bc
        while pa and pa[-1] == 0:
            pa.pop()
    denom = 1
    for c in out:
        denom = denom * c.denominator // math.gcd(denom, c.denominator)
    return [int(c * denom) for c in out]


def _synthetic_div_at_1(cs):
    """Exact quotient of p by (x - 1) when p(1) = 0, ascending coefficients."""
    n = len(cs) - 1
    q = [0] * n
    q[n - 1] = cs[n]
    for i in range(n - 1, 0, -1):
        q[i - 1] = cs[i] + q[i]
    return q


def _vca_isolate(cs, max_depth=80):
    """Isolating dyadic intervals for the roots of p in (0, 1).

    Returns a list of (lo_num, hi_num, depth) with the interval
    (lo_num/2^depth, hi_num/2^depth), each containing exactly one root,
    plus a list of exact dyadic roots (num, depth).
    """
    exact, intervals = [], []
    stack = [(list(cs), 0, 0)]  # poly on (a, a+1)/2^depth in local coords
    while stack:
        p, a, depth = stack.pop()
        v = _descartes_01(p)
        if v == 0:
            continue
        if v == 1:
            intervals.append((a, a + 1, depth))
            continue
        if depth >= max_depth:
            raise PrecisionError(
                "root cluster not separated at depth "
                f"{max_depth}; offending polynomial of degree {len(cs) - 1}")
        n = len(p) - 1
        # p_L(x) = 2^n p(x/2), p_R(x) = p_L(x+1)
        pl = [c << (n - i) for i, c in enumerate(p)]
        if sum(pl) == 0:  # p_L(1) = 2^n p(1/2) = 0: exact dyadic root
            exact.append((2 * a + 1, depth + 1))
            pl = _synthetic_div_at_1(pl)
        pr = _taylor_shift_1(pl)
        stack.append((pl, 2 * a, depth + 1))
        stack.append((pr, 2 * a + 1, depth + 1))
    return intervals, exact


def _refine_bisect(cs, lo_num, hi_num, depth, tol):
    """Shrink an isolating dyadic interval below tol by exact sign bisection."""
    s_lo = _poly_int_eval(cs, lo_num, depth)
    s_hi = _poly_int_eval(cs, hi_num, depth)
    if s_lo == 0:
        return lo_num / (1 << depth)
    if s_hi == 0:
        return hi_num / (1 << depth)
    if s_lo == s_hi:
        # single root strictly inside with equal endpoint signs cannot happen
        # for a square-free isolating interval
        raise PrecisionError("isolating interval lost its sign change")
    while (hi_num - lo_num) / (1 << depth) > tol:
        lo_num, hi_num, depth = 2 * lo_num, 2 * hi_num, depth + 1
        mid = (lo_num + hi_num) // 2
        s_mid = _poly_int_eval(cs, mid, depth)
        if s_mid == 0:
            return mid / (1 << depth)
        if s_mid == s_lo:
            lo_num = mid
        else:
            hi_num = mid
    return (lo_num + hi_num) / 2 / (1 << depth)


def isolate_roots(p: Polynomial, lo=0, hi=1, tol=1e-13):
    """Distinct real roots of p in [lo, hi], refined to width tol.

    Exact sign-variation bisection on the square-free part over the
    rationals; the returned floats are dyadic approximations.
    """
    if p.is_zero():
        return []
    lo_f, hi_f = Fraction(lo), Fraction(hi)
    if hi_f <= lo_f:
        return []
    if p.degree == 0:
        return []
    # map [lo, hi] to [0, 1]
    q = p.compose_affine(lo_f, hi_f - lo_f)
    cs = _int_coeffs(q)
    roots = []
    while cs and cs[0] == 0:          # deflate roots at 0
        if 0.0 not in roots:
            roots.append(0.0)
        cs = cs[1:]
    while len(cs) > 1 and sum(cs) == 0:  # deflate roots at 1
        if 1.0 not in roots:
            roots.append(1.0)
        cs = _synthetic_div_at_1(cs)
    if len(cs) <= 1:
        width = float(hi_f - lo_f)
        return sorted(float(lo_f) + r * width for r in roots)
    try:
        intervals, exact = _vca_isolate(cs)
    except PrecisionError:
        sq = _int_poly_squarefree(cs)
        intervals, exact = _vca_isolate(sq)
        cs = sq
    for num, depth in exact:
        roots.append(num / (1 << depth))
    for lo_num, hi_num, depth in intervals:
        roots.append(_refine_bisect(cs, lo_num, hi_num, depth, tol))
    width = float(hi_f - lo_f)
    base = float(lo_f)
    out = sorted(base + r * width for r in roots)
    dedup = []
    for r in out:
        if not dedup or r - dedup[-1] > tol:
            dedup.append(r)
    return dedup


# ---------------------------------------------------------------------------
# Q_r and the derivative cofactor family
# ---------------------------------------------------------------------------

@lru_cache(maxsize=64)
def q_polynomial(r):
    """The degree 2r-1 polynomial with Q(0)=0, Q(1)=1 flat to order r-1.

    Q_r' = b_r X^{r-1} (1-X)^{r-1} with b_r = (2r-1)!/((r-1)!)^2; returns
    (Q_r, b_r) with exact rational coefficients.
    """
    r = int(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    if r > 25:
        raise ResourceError("q_polynomial capped at r = 25")
    b_r = math.factorial(2 * r - 1) // math.factorial(r - 1) ** 2
    coeffs = [_ZERO] * (2 * r)
    for j in range(r):
        c = Fraction(b_r * math.comb(r - 1, j) * (-1) ** j, r + j)
        coeffs[r + j] = c
    return Polynomial(coeffs), b_r


@lru_cache(maxsize=512)
def q_derivative_factorization(r, i):
    """Cofactor polynomial R_i with R_0 = 1, R_{i+1} = (r-i) S' R_i + S R_i'.

    S(X) = X(1-X).  Degree of R_i is i.
    """
    r, i = int(r), int(i)
    if not 0 <= i <= r - 1:
        raise ValueError("need 0 <= i <= r-1")
    if i == 0:
        return Polynomial([1])
    prev = q_derivative_factorization(r, i - 1)
    s = Polynomial([0, 1, -1])
    s_prime = Polynomial([1, -2])
    return (r - (i - 1)) * s_prime * prev + s * prev.diff()


# ---------------------------------------------------------------------------
# charts and atlases
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Chart:
    """A single reparametrizing map t -> phi(Q_r(t_lo + t*(t_hi - t_lo)))."""
    kind: str                # "affine" or "inverse-branch"
    inv_index: int           # index of the inverting polynomial, -1 for affine
    x_lo: Fraction           # base interval of phi in x
    x_hi: Fraction
    t_lo: Fraction           # step-3 piece of the Q_r domain
    t_hi: Fraction
    image: tuple             # (lo, hi) floats, image of the chart in x
    norm_phi: float          # sampled, group-certified bound on ||phi||_r
    norm_comp: float         # sampled max_j ||P_j o phi||_r


@dataclass
class _Group:
    """A step-2 piece: one base chart plus its step-3 subdivision count."""
    kind: str
    inv_index: int
    x_lo: Fraction
    x_hi: Fraction
    n3: int
    norm_phi: float
    norm_comp: float
    tau_images: np.ndarray = field(repr=False)  # x at step-3 boundaries


@dataclass
class Atlas:
    """Charts covering the preimage of [0,1]^m under an m-vector of polys."""
    polys: list
    r: int
    m: int
    step1_count: int
    step2_count: int
    step3_count: int
    groups: list
    sample_size: int

    @property
    def chart_count(self):
        return self.step3_count

    def charts(self):
        """Materialize charts lazily, in x order within each group."""
        for g in self.groups:
            for q in range(g.n3):
                t_lo = Fraction(q, g.n3)
                t_hi = Fraction(q + 1, g.n3)
                img = (float(g.tau_images[q]), float(g.tau_images[q + 1]))
                yield Chart(g.kind, g.inv_index, g.x_lo, g.x_hi, t_lo, t_hi,
                            img, g.norm_phi, g.norm_comp)

    def image_intervals(self):
        """(starts, ends) arrays of all chart images, sorted by start."""
        starts, ends = [], []
        for g in self.groups:
            starts.append(g.tau_images[:-1])
            ends.append(g.tau_images[1:])
        if not starts:
            return np.empty(0), np.empty(0)
        s = np.concatenate(starts)
        e = np.concatenate(ends)
        order = np.argsort(s, kind="stable")
        return s[order], e[order]

    def max_norm_phi(self):
        return max((g.norm_phi for g in self.groups), default=0.0)

    def max_norm_comp(self):
        return max((g.norm_comp for g in self.groups), default=0.0)


def _inverse_cofactors(p: Polynomial, r):
    """B_1..B_r with (P^{-1}(P(a)+q D))^{(k)} = D^k B_k(u) / P'(u)^{2k-1}."""
    out = [Polynomial([1])]
    dp, ddp = p.diff(), p.diff(2)
    for k in range(1, r):
        bk = out[-1]
        out.append(bk.diff() * dp - (2 * k - 1) * bk * ddp)
    return out


def _composition_numerators(p_j: Polynomial, p_i: Polynomial, r):
    """A_1..A_{r+1} with (P_j o phi)^{(k)} = D^k A_k(u) / P_i'(u)^{2k-1}."""
    out = [p_j.diff()]
    dp, ddp = p_i.diff(), p_i.diff(2)
    for k in range(1, r + 1):
        ak = out[-1]
        out.append(ak.diff() * dp - (2 * k - 1) * ak * ddp)
    return out


def _vector_faa(bell: BellTable, outer, inner):
    """Faa di Bruno on per-sample numpy arrays."""
    return bell.faa_di_bruno(outer, inner)


class _GroupBuilder:
    """Shared sampling machinery for one step-2 piece."""

    def __init__(self, polys, r, bell, n_samples):
        self.polys = polys
        self.r = r
        self.bell = bell
        self.n = n_samples
        self.q_poly, _ = q_polynomial(r)
        self.q_derivs = [self.q_poly.diff(k) for k in range(1, r + 1)]
        self.tau = np.linspace(0.0, 1.0, n_samples)
        self.q_vals = self.q_poly(self.tau)
        self.qd_vals = [d(self.tau) for d in self.q_derivs]
        self._inv_cof = {}
        self.p_derivs = [[p.diff(k) for k in range(1, r + 1)] for p in polys]

    def inverse_cofactors(self, i):
        if i not in self._inv_cof:
            self._inv_cof[i] = _inverse_cofactors(self.polys[i], self.r)
        return self._inv_cof[i]

    def u_of_q(self, i, a, b, qv):
        """Invert P_i on [a, b] at P_i(a) + qv*(P_i(b)-P_i(a)) by bisection."""
        p = self.polys[i]
        pa, pb = p.eval_exact(a), p.eval_exact(b)
        target = float(pa) + qv * (float(pb) - float(pa))
        lo = np.full_like(qv, float(a))
        hi = np.full_like(qv, float(b))
        increasing = pb > pa
        for _ in range(60):
            mid = 0.5 * (lo + hi)
            v = p(mid)
            go_right = (v < target) if increasing else (v > target)
            lo = np.where(go_right, mid, lo)
            hi = np.where(go_right, hi, mid)
        return 0.5 * (lo + hi)

    def chain_derivatives(self, kind, inv_index, a, b):
        """Derivative samples of phi o Q_r and of every P_j o phi o Q_r.

        Returns (phi_chain, comp_chains) as lists of arrays, orders 1..r.
        """
        r = self.r
        if kind == "affine":
            width = float(b - a)
            u = float(a) + self.q_vals * width
            phi_chain = [width * d for d in self.qd_vals]
        else:
            i = inv_index
            u = self.u_of_q(i, a, b, self.q_vals)
            p_i = self.polys[i]
            dpi = p_i.diff()(u)
            delta = float(p_i.eval_exact(b) - p_i.eval_exact(a))
            cof = self.inverse_cofactors(i)
            phi_q = []
            for k in range(1, r + 1):
                phi_q.append(delta ** k * cof[k - 1](u) / dpi ** (2 * k - 1))
            phi_chain = _vector_faa(self.bell, phi_q, self.qd_vals)
        comp_chains = []
        for j in range(len(self.polys)):
            outer = [d(u) for d in self.p_derivs[j]]
            comp_chains.append(_vector_faa(self.bell, outer, phi_chain))
        return phi_chain, comp_chains, u


def _choose_n3(r, maxima, tol=1e-6, c_cap=1 << 20):
    """Smallest n3 from {1, c*r^4+1 : c doubling} with len^k * D_k <= 1+tol."""
    def ok(n3):
        return all(max_k / float(n3) ** k <= 1.0 + tol
                   for k, max_k in maxima)

    if ok(1):
        return 1
    c = 1
    while c <= c_cap:
        n3 = c * r ** 4 + 1
        if ok(n3):
            return n3
        c *= 2
    raise PrecisionError("step-3 subdivision did not certify the norms")


def reparametrize_1d(polys, r, *, n_samples=4096, tol=1e-6, bell=None):
    """Atlas of C^r-bounded charts covering the preimage of [0,1]^m.

    polys: list of Polynomial (degree <= r each); r: smoothness order.
    """
    polys = [p if isinstance(p, Polynomial) else Polynomial(p) for p in polys]
    r = int(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    for p in polys:
        if p.degree > r:
            raise ValueError(f"degree {p.degree} exceeds r = {r}")
    m = len(polys)
    if m < 1:
        raise ValueError("need at least one polynomial")
    bell = bell or BellTable(max(r, 1))

    # ---- step 1: boundary roots and component classification
    cuts = {0.0, 1.0}
    boundary = []
    for p in polys:
        boundary.append(p)
        boundary.append(p - Polynomial([1]))
    derivs = [p.diff() for p in polys]
    for i in range(m):
        for j in range(i + 1, m):
            boundary.append(derivs[i] - derivs[j])
            boundary.append(derivs[i] + derivs[j])
    for d in derivs:
        boundary.append(d - Polynomial([1]))
        boundary.append(d + Polynomial([1]))
    for b in boundary:
        if b.is_zero():
            continue
        cuts.update(isolate_roots(b, 0, 1))
    pts = sorted(cuts)

    kept = []  # (lo, hi, kind, inv_index) with Fraction endpoints
    for lo, hi in zip(pts[:-1], pts[1:]):
        if hi - lo <= 2e-12:
            continue
        lo_f, hi_f = Fraction(lo), Fraction(hi)
        mid = (lo_f + hi_f) / 2
        vals = [p.eval_exact(mid) for p in polys]
        if not all(0 <= v <= 1 for v in vals):
            continue
        dvals = [abs(d.eval_exact(mid)) for d in derivs]
        i_star = max(range(m), key=lambda i: (dvals[i], -i))
        if dvals[i_star] <= 1:
            kept.append((lo_f, hi_f, "affine", -1))
        else:
            kept.append((lo_f, hi_f, "inverse-branch", i_star))
    step1_count = len(kept)

    # ---- step 2: constant-sign subdivision
    sign_roots_affine = {}

    def affine_cut_roots(j):
        if j not in sign_roots_affine:
            acc = []
            for k in range(2, r + 2):
                dk = polys[j].diff(k)
                if not dk.is_zero() and dk.degree >= 1:
                    acc.extend(isolate_roots(dk, 0, 1))
                    # degree-0 derivatives have constant sign already
            sign_roots_affine[j] = acc
        return sign_roots_affine[j]

    inv_cut_cache = {}

    def inverse_cut_roots(i):
        if i not in inv_cut_cache:
            acc = []
            # identity cofactors control ||phi||, A-numerators control P_j o phi
            for kpoly in _inverse_cofactors(polys[i], r + 1)[1:]:
                if not kpoly.is_zero() and kpoly.degree >= 1:
                    acc.extend(isolate_roots(kpoly, 0, 1))
            for j in range(m):
                for apoly in _composition_numerators(polys[j], polys[i], r)[1:]:
                    if not apoly.is_zero() and apoly.degree >= 1:
                        acc.extend(isolate_roots(apoly, 0, 1))
            inv_cut_cache[i] = acc
        return inv_cut_cache[i]

    pieces = []
    for lo, hi, kind, inv in kept:
        inner = set()
        if kind == "affine":
            for j in range(m):
                inner.update(x for x in affine_cut_roots(j)
                             if float(lo) < x < float(hi))
        else:
            inner.update(x for x in inverse_cut_roots(inv)
                         if float(lo) < x < float(hi))
        bounds = [lo] + [Fraction(x) for x in sorted(inner)] + [hi]
        for a, b in zip(bounds[:-1], bounds[1:]):
            if b - a > 0:
                pieces.append((a, b, kind, inv))
    step2_count = len(pieces)

    # ---- step 3: compose with Q_r, sample norms, choose subdivision
    builder = _GroupBuilder(polys, r, bell, n_samples)
    groups = []
    step3_count = 0
    for a, b, kind, inv in pieces:
        phi_chain, comp_chains, u = builder.chain_derivatives(kind, inv, a, b)
        maxima = []
        for k in range(1, r + 1):
            dk = np.max(np.abs(phi_chain[k - 1]))
            for chain in comp_chains:
                dk = max(dk, np.max(np.abs(chain[k - 1])))
            maxima.append((k, float(dk)))
        n3 = _choose_n3(r, maxima, tol=tol)
        # certified (sampled) norms of the final charts
        lens = 1.0 / n3
        norm_phi = max(float(np.max(np.abs(phi_chain[k - 1]))) * lens ** k
                       for k in range(1, r + 1))
        norm_comp = max(float(np.max(np.abs(chain[k - 1]))) * lens ** k
                        for chain in comp_chains for k in range(1, r + 1))
        # chart image boundaries at tau = q/n3; float evaluation of Q_r can
        # wobble below its coefficient scale, so enforce monotone boundaries
        tau_b = np.linspace(0.0, 1.0, n3 + 1)
        qb = builder.q_poly(tau_b)
        if kind == "affine":
            imgs = float(a) + qb * float(b - a)
        else:
            imgs = builder.u_of_q(inv, a, b, qb)
        imgs[0], imgs[-1] = float(a), float(b)
        imgs = np.maximum.accumulate(np.clip(imgs, float(a), float(b)))
        groups.append(_Group(kind, inv, a, b, n3, norm_phi, norm_comp, imgs))
        step3_count += n3

    return Atlas(polys, r, m, step1_count, step2_count, step3_count,
                 groups, n_samples)


@dataclass
class AtlasReport:
    max_norm_comp: float
    max_norm_phi: float
    coverage_defect: int
    grid_size: int
    members: int


def verify_atlas(atlas: Atlas, grid_size=10000, *, exclude=(), slack=1e-9):
    """Check the three conclusions on a uniform grid.

    Coverage defect counts grid points inside every P_j^{-1}([0,1]) that are
    farther than `slack` from every chart image; `exclude` drops chart
    indices (negative-control hook).
    """
    xs = np.linspace(0.0, 1.0, grid_size)
    member = np.ones_like(xs, dtype=bool)
    for p in atlas.polys:
        v = p(xs)
        member &= (v >= 0.0) & (v <= 1.0)
    starts, ends = atlas.image_intervals()
    if exclude:
        keep = np.ones(len(starts), dtype=bool)
        keep[list(exclude)] = False
        starts, ends = starts[keep], ends[keep]
    pts = xs[member]
    defect = 0
    if len(starts) == 0:
        defect = int(member.sum())
    elif pts.size:
        idx = np.searchsorted(starts, pts, side="right") - 1
        covered = np.zeros(pts.shape, dtype=bool)
        valid = idx >= 0
        covered[valid] = pts[valid] <= ends[idx[valid]] + slack
        nxt = idx + 1
        has_next = nxt < len(starts)
        covered[has_next] |= (starts[nxt[has_next]] - pts[has_next]) <= slack
        defect = int((~covered).sum())
    return AtlasReport(atlas.max_norm_comp(), atlas.max_norm_phi(),
                       defect, grid_size, int(member.sum()))


def serialize_atlas(atlas: Atlas, fh):
    """One chart per line: kind tag plus exact rational parameters."""
    fh.write(f"# tailent-atlas r={atlas.r} m={atlas.m} "
             f"charts={atlas.chart_count}\n")
    for ch in atlas.charts():
        fh.write(f"{ch.kind} i={ch.inv_index} x={ch.x_lo}:{ch.x_hi} "
                 f"t={ch.t_lo}:{ch.t_hi}\n")
