"""Numerical eps-entropy and eps-tail-entropy estimators, plus evaluators
for the closed-form upper bounds and the entropy-continuity modulus.

Spanning data comes in two flavors over the same grid orbits: a closed-ball
greedy cover with rightward-pushed centers (upper bias for the minimal
spanning cardinality, optimal for intervals at n = 1) and a greedy strictly
separated family (whose open balls also cover the grid by maximality); the
cover count brackets the truth from above, the separated count at scale
2 eps from below.  Dynamical-ball membership uses the strict comparison
d(f^i y, f^i x) < eps.  Tail entropy does not use grids at all: the balls
are pulled back exactly as unions of monotone interval pieces.

Everything is deterministic: fixed grids, fixed scan orders, and reductions
(max, integer counts) that do not depend on evaluation order, so results
are bit-identical regardless of thread count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ResolutionError, ScaleError, TailentError
from .maps import IntervalMap

__all__ = [
    "EntropyEstimate", "spanning_count", "eps_entropy", "tail_entropy_estimate",
    "branch_product_bound", "bound_quasionedim", "bound_wmulti",
    "growth_rate_R", "power_bound_check", "continuity_modulus",
]

_DEFAULT_GRID_BITS = 14
_DEFAULT_N_RANGE = range(1, 25)


@dataclass
class EntropyEstimate:
    """Count data and fitted growth rate for one estimator run."""
    method: str
    map_name: str
    eps: float
    delta: float | None
    ns: list
    counts: list
    rate: float               # log(count)/n at the last fitted n
    slope: float              # least-squares slope of log counts in n
    direction: str            # "upper-bias" or "lower-bias"
    residual: float = 0.0     # delta-extrapolation residual (tail only)
    saturated: bool = False
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        assert all(c >= 1 for c in self.counts)


def _orbit_matrix(m: IntervalMap, xs, n):
    orb = np.empty((xs.size, n), dtype=float)
    v = xs.astype(float)
    for t in range(n):
        orb[:, t] = v
        if t + 1 < n:
            v = m.evaluate_array(v)
    return orb


def _greedy_net(orbits, n, eps, cap=None):
    """Greedy maximal (n, eps)-separated family of the rows of `orbits`
    (rows sorted by column 0).

    Scans rows in order; a row becomes a center when no earlier center is
    strictly within eps in the sup metric over the first n columns.  By
    maximality the centers' open eps-balls cover every row, so the count is
    also a valid spanning count.  Returns (count, capped).
    """
    n_pts = orbits.shape[0]
    first = orbits[:, 0]
    alive = np.ones(n_pts, dtype=bool)
    count = 0
    i = 0
    while True:
        while i < n_pts and not alive[i]:
            i += 1
        if i >= n_pts:
            return count, False
        count += 1
        if cap is not None and count >= cap:
            return cap, True
        c0 = first[i]
        lo = np.searchsorted(first, c0 - eps, side="left")
        hi = np.searchsorted(first, c0 + eps, side="right")
        window = orbits[lo:hi, :n]
        dist = np.max(np.abs(window - orbits[i, :n]), axis=1)
        alive[lo:hi] &= dist >= eps
        i += 1


def _greedy_cover(orbits, n, eps, cap=None):
    """Greedy (n, eps)-cover with closed balls, centers pushed rightward.

    For the first uncovered row u, the center is the row of largest first
    coordinate within [u_0, u_0 + eps] whose closed ball contains the whole
    segment of rows from u up to itself (checked through cumulative
    per-coordinate spreads); its closed ball is then removed.  For n = 1
    this is the optimal interval covering.  Returns (count, capped).
    """
    n_pts = orbits.shape[0]
    first = orbits[:, 0]
    alive = np.ones(n_pts, dtype=bool)
    count = 0
    i = 0
    while True:
        while i < n_pts and not alive[i]:
            i += 1
        if i >= n_pts:
            return count, False
        count += 1
        if cap is not None and count >= cap:
            return cap, True
        u0 = first[i]
        hi_c = np.searchsorted(first, u0 + eps, side="right")
        seg = orbits[i:hi_c, :n]
        run_max = np.maximum.accumulate(seg, axis=0)
        run_min = np.minimum.accumulate(seg, axis=0)
        feasible = np.all((run_max - seg <= eps) & (seg - run_min <= eps),
                          axis=1)
        center = i + int(np.nonzero(feasible)[0][-1])
        c0 = first[center]
        lo = np.searchsorted(first, c0 - eps, side="left")
        hi = np.searchsorted(first, c0 + eps, side="right")
        dist = np.max(np.abs(orbits[lo:hi, :n] - orbits[center, :n]), axis=1)
        alive[lo:hi] &= dist > eps
        i += 1


def _default_grid(grid_bits):
    n = 1 << grid_bits
    return np.linspace(0.0, 1.0, n + 1)


def spanning_count(m: IntervalMap, n, eps, grid=None, grid_bits=_DEFAULT_GRID_BITS,
                   cap=None):
    """(spanning, separated) counts for the grid at time n and scale eps.

    Spanning comes from the closed-ball greedy cover, separated from the
    greedy strictly-separated family; spanning <= separated.
    """
    if n < 1:
        raise DomainError("n must be >= 1")
    if eps <= 0:
        raise DomainError("eps must be positive")
    xs = _default_grid(grid_bits) if grid is None else np.asarray(grid, float)
    if eps * (xs.size - 1) < 8:
        raise ResolutionError(
            f"fewer than 8 grid points per eps={eps:g} at grid size {xs.size}")
    orbits = _orbit_matrix(m, xs, n)
    cover, _ = _greedy_cover(orbits, n, eps, cap=cap)
    net, _ = _greedy_net(orbits, n, eps, cap=cap)
    return cover, net


def _fit_counts(ns, counts, clean_upto=None):
    """Least-squares slope of log counts over the last half of the clean
    prefix; rate = log(count)/n at the last clean index."""
    if clean_upto is not None:
        ns = ns[:clean_upto]
        counts = counts[:clean_upto]
    if not ns:
        return 0.0, 0.0
    logs = np.log(np.maximum(counts, 1))
    k = len(ns)
    lo = k // 2 if k >= 4 else 0
    xs = np.asarray(ns[lo:], float)
    ys = logs[lo:]
    if xs.size < 2 or np.allclose(ys, ys[0]):
        slope = 0.0
    else:
        slope = float(np.polyfit(xs, ys, 1)[0])
    rate = float(logs[-1] / ns[-1])
    return max(slope, 0.0), rate


def _count_series(m, eps, n_range, grid_bits, cap, greedy):
    """Counts per n; stops once the grid starves (count above cap, by
    default one sixteenth of the grid, i.e. under ~16 points per ball)."""
    xs = _default_grid(grid_bits)
    if eps * (xs.size - 1) < 8:
        raise ResolutionError(
            f"fewer than 8 grid points per eps={eps:g} at grid size {xs.size}")
    if cap is None:
        cap = max(64, xs.size // 16)
    ns = list(n_range)
    orbits = _orbit_matrix(m, xs, max(ns))
    counts = []
    clean_upto = None
    for j, n in enumerate(ns):
        if clean_upto is not None:
            counts.append(counts[-1])
            continue
        c, capped = greedy(orbits, n, eps, cap=cap)
        counts.append(c)
        if capped or c >= cap:
            clean_upto = j
    return ns, counts, clean_upto


def eps_entropy(m: IntervalMap, eps, n_range=_DEFAULT_N_RANGE,
                grid_bits=_DEFAULT_GRID_BITS, cap=None):
    """Growth-rate estimate of the spanning counts r_n(f, eps).

    The count series uses the greedy separated family (whose open balls
    cover the grid, so it is simultaneously an upper-biased spanning count);
    counts past the grid-starvation knee are excluded from the slope fit.
    """
    ns, counts, clean_upto = _count_series(m, eps, n_range, grid_bits, cap,
                                           _greedy_net)
    slope, rate = _fit_counts(ns, counts, clean_upto)
    return EntropyEstimate(
        method="eps-entropy", map_name=m.name, eps=eps, delta=None,
        ns=ns, counts=counts, rate=rate, slope=slope,
        direction="upper-bias", saturated=clean_upto is not None)


def _fold_cycle_centers(m: IntervalMap, eps, q_max=None, point_cap=1 << 14):
    """Near-periodic points passing within eps of a critical point.

    For each critical point c and period q, solves f^q(y) = y on the two
    monotone branches of f^q adjacent to c; such orbits refold their
    dynamical ball every ~q steps and realize the fastest branch growth,
    which generic centers never see.
    """
    from .maps import _preimages

    crit = sorted(m.critical_points)
    if not crit:
        return []
    if q_max is None:
        q_max = min(28, int(abs(math.log(eps)) / math.log(2)) + 6)
    centers = []
    base = np.asarray(crit, dtype=float)
    cur = base.copy()

    def iterate(y, q):
        v = np.array([y])
        for _ in range(q):
            v = m.evaluate_array(v)
        return float(v[0])

    for q in range(1, q_max + 1):
        pts = np.unique(np.concatenate([[0.0], cur, [1.0]]))
        for c in crit:
            j = int(np.searchsorted(pts, c))
            sides = []
            if j > 0:
                sides.append((float(pts[j - 1]), c))
            if j + 1 < pts.size:
                sides.append((c, float(pts[j + 1])))
            for lo, hi in sides:
                if hi - lo < 1e-13:
                    continue
                glo = iterate(lo, q) - lo
                ghi = iterate(hi, q) - hi
                if glo == 0.0:
                    y = lo
                elif ghi == 0.0:
                    y = hi
                elif glo * ghi < 0:
                    a, b, ga = lo, hi, glo
                    for _ in range(60):
                        mid = 0.5 * (a + b)
                        gm = iterate(mid, q) - mid
                        if ga * gm <= 0:
                            b = mid
                        else:
                            a, ga = mid, gm
                    y = 0.5 * (a + b)
                else:
                    continue
                if abs(y - c) < 0.999 * eps:
                    centers.append(y)
        if q < q_max:
            pre = _preimages(m, cur)
            cur = np.unique(np.concatenate([base, pre]))
            if cur.size > point_cap:
                break
    return centers


def _tail_centers(m: IntervalMap, n_centers, eps=None):
    xs = list(np.linspace(0.0, 1.0, n_centers + 1)[1:-1])
    try:
        xs.extend(m.critical_points)
        branches, _, _ = m.monotone_partition()
        xs.extend(0.5 * (a + b) for a, b in branches[:16])
        if eps is not None:
            xs.extend(_fold_cycle_centers(m, eps))
    except TailentError:
        pass
    return sorted(set(float(min(max(x, 0.0), 1.0)) for x in xs))


def _ball_piece_lengths(m: IntervalMap, x, eps, ns, stride=1, piece_cap=1 << 14):
    """Monotone-piece decomposition of the dynamical balls B_n(f^stride, x, eps).

    The ball is tracked exactly as a union of intervals in image space: at
    every (macro) time the pieces are intersected with the eps-window around
    the center orbit, then split at the critical points of f and mapped
    monotonically.  For each n in ns, returns the array of per-piece
    length-maxima max_{t<n} |f^(t*stride)(J)| (inherited maxima of the
    ancestors, an upper surrogate for subdivided pieces).

    Returns (lengths_per_n, clean_upto): clean_upto indexes the first n at
    which the piece budget was exhausted (None if never).
    """
    crit = np.asarray(m.critical_points, dtype=float)
    n_micro = max(ns) * stride
    center = _orbit_matrix(m, np.array([x]), n_micro + 1)[0]
    lo = np.array([0.0])
    hi = np.array([1.0])
    lmax = np.array([0.0])
    out = []
    clean_upto = None
    macro = 0
    for t in range(n_micro):
        if t % stride == 0:
            wlo, whi = center[t] - eps, center[t] + eps
            lo = np.maximum(lo, wlo)
            hi = np.minimum(hi, whi)
            keep = hi - lo > 0
            lo, hi, lmax = lo[keep], hi[keep], lmax[keep]
            if lo.size == 0:
                # the ball always contains the center orbit; reseed with a
                # degenerate piece when float widths collapse to zero
                lo = np.array([center[t]])
                hi = np.array([center[t]])
                lmax = np.array([0.0])
            lmax = np.maximum(lmax, hi - lo)
            macro += 1
            if macro in ns:
                out.append(lmax.copy())
                if macro == max(ns):
                    break
        # split at the critical points, then map each monotone piece
        for c in crit:
            cut = (lo < c) & (hi > c)
            if np.any(cut):
                lo = np.concatenate([lo, np.full(cut.sum(), c)])
                hi = np.concatenate([hi, hi[cut]])
                lmax = np.concatenate([lmax, lmax[cut]])
                hi[np.nonzero(cut)[0]] = c
        fa = m.evaluate_array(lo)
        fb = m.evaluate_array(hi)
        lo, hi = np.minimum(fa, fb), np.maximum(fa, fb)
        if lo.size > piece_cap:
            clean_upto = macro
            break
    while len(out) < len(ns):
        out.append(out[-1] if out else np.array([0.0]))
    return out, clean_upto


def tail_entropy_estimate(m: IntervalMap, eps, delta_schedule=None,
                          n_range=range(1, 29), x_centers=40, stride=1,
                          piece_cap=1 << 14):
    """Upper eps-tail entropy estimate via exact interval pullback.

    For each center x the dynamical ball B_n(f, x, eps) is maintained as a
    union of monotone pieces; the (n, delta)-covering count of a piece is
    ceil(L/(2 delta)) with L the largest coordinate image length, so the
    count of the ball is the sum over pieces.  Counts are maximized over
    centers, the slope fitted in n per delta of the schedule (eps/2^j,
    j=1..4 by default), the estimate taken at the smallest delta with the
    difference to the previous delta as residual.

    `stride` estimates the p-th iterate f^p at the same scale through the
    same machinery, so power-rule comparisons share their bias.
    """
    if delta_schedule is None:
        delta_schedule = [eps / 2 ** j for j in range(1, 5)]
    if any(d >= eps for d in delta_schedule):
        raise ScaleError("every delta must be smaller than eps")
    ns = sorted(n_range)
    centers = _tail_centers(m, x_centers, eps=eps)
    sup_counts = np.ones((len(ns), len(delta_schedule)), dtype=float)
    clean_upto = None
    for x in centers:
        lengths, cut = _ball_piece_lengths(m, x, eps, ns, stride=stride,
                                           piece_cap=piece_cap)
        if cut is not None:
            clean_upto = cut if clean_upto is None else min(clean_upto, cut)
        for i, lens in enumerate(lengths):
            if lens.size == 0:
                raise ResolutionError(
                    f"empty dynamical ball at x={x:g}, n={ns[i]}, eps={eps:g}")
            for j, d in enumerate(delta_schedule):
                c = float(np.sum(np.maximum(np.ceil(lens / (2 * d)), 1.0)))
                if c > sup_counts[i, j]:
                    sup_counts[i, j] = c
    upto = None
    if clean_upto is not None:
        upto = sum(1 for n in ns if n <= clean_upto)
    slopes = []
    for j in range(len(delta_schedule)):
        counts = [int(c) for c in sup_counts[:, j]]
        slope, _ = _fit_counts(ns, counts, upto)
        slopes.append(slope)
    est = slopes[-1]
    residual = abs(slopes[-1] - slopes[-2]) if len(slopes) >= 2 else 0.0
    counts_min = [int(c) for c in sup_counts[:, -1]]
    return EntropyEstimate(
        method="tail-entropy", map_name=m.name, eps=eps,
        delta=delta_schedule[-1], ns=ns, counts=counts_min, rate=est,
        slope=est, direction="upper-bias", residual=residual,
        saturated=clean_upto is not None,
        extra={"delta_slopes": dict(zip(delta_schedule, slopes))})


def branch_product_bound(m: IntervalMap, x, eps, n):
    """(1/n) sum_k log M_{f^k x, eps}: upper rate from branch counts."""
    if eps <= 0 or n < 1:
        raise DomainError("need eps > 0 and n >= 1")
    total = 0.0
    v = float(x)
    for _ in range(n):
        total += math.log(m.branch_count_in_ball(v, eps))
        v = m.evaluate(v)
    return total / n


def bound_quasionedim(m: IntervalMap, eps):
    """log+ ||f||_l / |log eps| for a C^l l-multimodal map."""
    if not 0 < eps < 1:
        raise ScaleError("need 0 < eps < 1")
    _, _, l = m.monotone_partition()
    norm = max(m.derivative_sup(k) for k in range(1, l + 1))
    return max(math.log(norm), 0.0) / abs(math.log(eps))


def bound_wmulti(m: IntervalMap, eps):
    """log2 * log+ ||f'|| / log+(1/w(f', eps)); +inf sentinel when the
    denominator degenerates (w >= 1), never silently clipped."""
    _, length, _ = m.monotone_partition()
    if not 0 < eps < length:
        raise ScaleError(f"need 0 < eps < L(f) = {length:g}")
    w = m.modulus_of_continuity(eps)
    num = math.log(2) * max(math.log(m.derivative_sup(1)), 0.0)
    if w >= 1.0:
        return math.inf
    if w == 0.0:
        return 0.0  # constant derivative: no local branching at any scale
    return num / math.log(1.0 / w)


def growth_rate_R(m: IntervalMap, n_max=24, grid_bits=12):
    """Slope estimate of (1/n) log+ sup |(f^n)'| via chain rule on grid
    orbits, accumulated in log space."""
    xs = _default_grid(grid_bits)
    v = xs.copy()
    acc = np.zeros_like(xs)
    sups = []
    for n in range(1, n_max + 1):
        d = np.abs(m.derivative_array(v, 1))
        acc = acc + np.log(np.maximum(d, 1e-300))
        sups.append(max(float(np.max(acc)), 0.0))
        v = m.evaluate_array(v)
    ns = np.arange(1, n_max + 1, dtype=float)
    lo = n_max // 2
    slope = float(np.polyfit(ns[lo:], np.asarray(sups)[lo:], 1)[0])
    return max(slope, 0.0)


def power_bound_check(m: IntervalMap, eps, p, tolerance=0.02, **tail_kwargs):
    """Check est(f, eps) <= est(f^p, eps)/p + tolerance.

    Both estimates run through the same interval-pullback machinery (the
    iterate is handled by window striding), so their bias is shared.  The
    time range is capped by the float expansion horizon: beyond roughly
    52 + log2(eps) steps a doubling map amplifies the last bit of the
    center past the window width and periodic centers drift off cycle.
    """
    if p < 2:
        raise DomainError("p must be >= 2")
    base_kwargs = dict(tail_kwargs)
    power_kwargs = dict(tail_kwargs)
    if "n_range" not in tail_kwargs:
        horizon = max(16, min(40, int(46 + math.log2(eps))))
        # align the fit windows of f and f^p in micro time
        base_kwargs["n_range"] = range(1, horizon + 1)
        power_kwargs["n_range"] = range(1, horizon // p + 1)
    base = tail_entropy_estimate(m, eps, **base_kwargs)
    power = tail_entropy_estimate(m, eps, stride=p, **power_kwargs)
    holds = base.rate <= power.rate / p + tolerance
    return {
        "map": m.name, "eps": eps, "p": p,
        "est_f": base.rate, "est_fp": power.rate,
        "bound": power.rate / p + tolerance, "holds": bool(holds),
    }


def continuity_modulus(m: IntervalMap, eps, m0, hloc_g, p_cap=64,
                       grid_bits=_DEFAULT_GRID_BITS, n_range=_DEFAULT_N_RANGE,
                       s_hi=0.35):
    """Entropy-continuity data (p_eps, N(eps), bound, capped).

    p_eps is the least p with (1/p) log r_p(f, eps/4) - h(f, eps/4)
    <= hloc_g(eps); N(eps) inverts s -> (s/4) m0^(-p_s) by bisection on
    [eps, s_hi]; the bound is h_est(f) + 2 hloc_g(N(eps)).  When the target
    is not reached below s_hi the result is capped at s_hi (capped=True):
    the true N(eps) is larger, so the returned bound is a lower surrogate.
    """
    if m0 < 2:
        raise DomainError("m0 must be >= 2")
    # the hypothesis is monotone decay at small scales
    probe = np.geomspace(1e-6, min(eps, 0.06), 12)
    vals = [hloc_g(t) for t in probe]
    if any(a > b + 1e-12 for a, b in zip(vals, vals[1:])):
        raise DomainError("hloc_g must be nondecreasing toward 0")

    h_cache, p_cache = {}, {}

    def h_est(scale):
        if scale not in h_cache:
            h_cache[scale] = eps_entropy(m, scale, n_range=n_range,
                                         grid_bits=grid_bits).slope
        return h_cache[scale]

    def p_of(scale):
        if scale not in p_cache:
            h = h_est(scale / 4)
            target = hloc_g(scale)
            for p in range(1, p_cap + 1):
                r_p, _ = spanning_count(m, p, scale / 4, grid_bits=grid_bits)
                if math.log(r_p) / p - h <= target:
                    p_cache[scale] = p
                    break
            else:
                raise DomainError(f"p_eps exceeded cap {p_cap} at eps={scale:g}")
        return p_cache[scale]

    p_eps = p_of(eps)

    def psi(s):
        return (s / 4.0) * m0 ** (-p_of(s))

    lo, hi = eps, s_hi
    capped = psi(hi) < eps
    if not capped:
        for _ in range(25):
            mid = 0.5 * (lo + hi)
            if psi(mid) >= eps:
                hi = mid
            else:
                lo = mid
    n_eps = hi
    h_f = h_est(eps)
    return p_eps, n_eps, h_f + 2.0 * hloc_g(n_eps), capped
