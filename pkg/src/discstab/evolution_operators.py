"""The evolution map T, G = T - Id, the explicit inverse of G and norm diagnostics.

All windows are truncated at the cache horizon N: (T u)_n only uses u_{n-1}
for n <= N, so the image of u_N is dropped.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .adapted_norms import (
    SLOPE_THRESHOLD,
    AlphaContext,
    SequenceWindow,
    running_max_slope,
    window_log_alpha_norm,
)
from .dynamics import DomainError, EvolutionCache

OVERFLOW_GUARD = 1e300
DEFAULT_SEED = 42


class PreconditionError(ValueError):
    pass


def _add_rows(a: np.ndarray, sa: float, b: np.ndarray, sb: float) -> tuple[np.ndarray, float]:
    """a e^{sa} + b e^{sb} as (c, sc)."""
    if not np.any(a):
        return b.copy(), sb
    if not np.any(b):
        return a.copy(), sa
    s = max(sa, sb)
    return a * math.exp(sa - s) + b * math.exp(sb - s), s


def _check_window(cache: EvolutionCache, u: SequenceWindow):
    if u.horizon != cache.horizon or u.dimension != cache.dimension:
        raise DomainError(
            f"window shape ({u.horizon}, {u.dimension}) incompatible with cache "
            f"({cache.horizon}, {cache.dimension})")


def apply_T(cache: EvolutionCache, u: SequenceWindow) -> SequenceWindow:
    """(T u)_0 = 0, (T u)_n = A_{n-1} u_{n-1}."""
    _check_window(cache, u)
    N = cache.horizon
    out = SequenceWindow.zeros(N, cache.dimension)
    if N == 0:
        return out
    if cache.is_diagonal:
        dphi = cache.phi[1:] - cache.phi[:-1]
        top = np.max(dphi, axis=1)
        sgn = cache.sgn[1:] * cache.sgn[:-1]
        out.values[1:] = sgn * np.exp(dphi - top[:, None]) * u.values[:-1]
        out.log_scale[1:] = top + u.log_scale[:-1]
    else:
        idx = np.arange(N)
        steps = cache.products[idx + 1, idx]
        out.values[1:] = np.einsum("nij,nj->ni", steps, u.values[:-1])
        out.log_scale[1:] = u.log_scale[:-1]
    return out.normalized()


def apply_G(cache: EvolutionCache, u: SequenceWindow) -> SequenceWindow:
    """G u = T u - u."""
    tu = apply_T(cache, u)
    out = SequenceWindow.zeros(cache.horizon, cache.dimension)
    for n in range(cache.horizon + 1):
        out.values[n], out.log_scale[n] = _add_rows(
            tu.values[n], tu.log_scale[n], -u.values[n], u.log_scale[n])
    return out.normalized()


def solve_G(cache: EvolutionCache, v: SequenceWindow) -> SequenceWindow:
    """u_n = sum_{k<=n} A(n, k) v_k, so that G u = -v.

    Evaluated by the recursion u_n = A_{n-1} u_{n-1} + v_n.
    """
    _check_window(cache, v)
    if np.any(v.values[0]):
        raise PreconditionError("solve_G needs v_0 = 0")
    out = SequenceWindow.zeros(cache.horizon, cache.dimension)
    prev, sprev = out.values[0], 0.0
    for n in range(1, cache.horizon + 1):
        if np.any(prev):
            y, s = cache.apply_step(n - 1, prev)
            s += sprev
        else:
            y, s = prev, 0.0
        row, srow = _add_rows(y, s, v.values[n], v.log_scale[n])
        top = float(np.max(np.abs(row)))
        if top > 0:
            row, srow = row / top, srow + math.log(top)
        out.values[n], out.log_scale[n] = row, srow
        prev, sprev = row, srow
    return out


def residual(cache: EvolutionCache, u: SequenceWindow, v: SequenceWindow) -> float:
    """max_n |G u + v|_n relative to the largest entry of u, T u and v."""
    gu = apply_G(cache, u).dense()
    vd = v.dense()
    scale = max(np.max(np.abs(u.dense())), np.max(np.abs(apply_T(cache, u).dense())), np.max(np.abs(vd)))
    if scale == 0:
        return 0.0
    return float(np.max(np.abs(gu + vd)) / scale)


# probes


def random_windows(cache: EvolutionCache, count: int, seed: int = DEFAULT_SEED):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        vals = rng.standard_normal((cache.horizon + 1, cache.dimension))
        vals[0] = 0.0
        yield SequenceWindow(vals)


def _basis(d: int):
    return np.eye(d)


def column_window(cache: EvolutionCache, k: int, x, extra_log=None) -> SequenceWindow:
    """Window w_m = A(m, k) x e^{extra_log(m)} for m >= k, zero before."""
    N = cache.horizon
    x = np.atleast_1d(np.asarray(x, dtype=float))
    w = SequenceWindow.zeros(N, cache.dimension)
    for m in range(k, N + 1):
        y, s = cache.apply(m, k, x)
        w.values[m] = y
        w.log_scale[m] = s + (0.0 if extra_log is None else extra_log(m))
    return w.normalized()


def proof_probes(cache: EvolutionCache, alpha: float, count: int = 4):
    """Extremal input windows v (v_0 = 0) taken from the stability arguments.

    Included: the geometric ramp v_k = e^{-alpha(k-n)} A(k, n) x on (n, m],
    the polynomial ramps v_i = (i-n)^k A(i, n) x, and the differenced ramps
    a_k - a_{k-1}, b_i - b_{i-1} used for bounded orbits.
    """
    N, d = cache.horizon, cache.dimension
    starts = sorted({0, N // 4, N // 2})
    ends = sorted({N, max(1, N // 2), max(1, N // 8)})
    for n in starts:
        for x in _basis(d):
            for m in ends:
                if m <= n:
                    continue
                ks = np.arange(N + 1)
                mask = (ks > n) & (ks <= m)
                base = column_window(cache, n, x)
                geo = SequenceWindow(base.values * mask[:, None],
                                     base.log_scale - alpha * (ks - n))
                yield geo.normalized()
                for p in range(1, count):
                    with np.errstate(divide="ignore"):
                        lp = np.where(mask, p * np.log(np.maximum(ks - n, 1)), 0.0)
                    yield SequenceWindow(base.values * mask[:, None], base.log_scale + lp).normalized()
                a = np.zeros(N + 1)
                a[n + 1: m + 1] = (ks[n + 1: m + 1] - n) / (m - n) ** 2
                a[m + 1:] = 1.0 / (ks[m + 1:] - n)
                da = np.diff(a, prepend=0.0)
                da[: n + 1] = 0.0
                yield SequenceWindow(base.values * da[:, None], base.log_scale).normalized()
                for p in range(1, min(count, 3)):
                    b = np.zeros(N + 1)
                    b[n + 1: m + 1] = (ks[n + 1: m + 1] - n) ** float(p)
                    b[m + 1:] = float(m - n) ** (p + 2) / (ks[m + 1:] - n) ** 2.0
                    db = np.diff(b, prepend=0.0)
                    db[: n + 1] = 0.0
                    yield SequenceWindow(base.values * db[:, None], base.log_scale).normalized()


# norm of T


def _spike_log_norms(ctx: AlphaContext) -> np.ndarray:
    """log ||e_i||_{n, alpha} as [n, i]."""
    SM = ctx.suffix_table("col")
    N = ctx.horizon
    idx = np.arange(N + 1)
    return SM[idx, idx, :] + ctx.alpha * idx[:, None]


def T_power_norm(ctx: AlphaContext, k: int, probes: int = 0, seed: int = DEFAULT_SEED) -> float:
    """Probe estimate (a lower bound) of ||T^k|| on the windowed c00(alpha)."""
    N = ctx.horizon
    if k > N:
        return 0.0
    SM = ctx.suffix_table("col")
    idx = np.arange(N + 1 - k)
    base = _spike_log_norms(ctx)[idx]
    img = SM[idx + k, idx, :] + ctx.alpha * (idx + k)[:, None]
    with np.errstate(invalid="ignore"):
        ratios = np.where(np.isfinite(base), img - base, -np.inf)
    best = float(np.max(ratios)) if ratios.size else -math.inf
    for u in random_windows(ctx.cache, probes, seed):
        w = u
        for _ in range(k):
            w = apply_T(ctx.cache, w)
        den = window_log_alpha_norm(ctx, u)
        if np.isfinite(den):
            best = max(best, window_log_alpha_norm(ctx, w) - den)
    return math.exp(best) if np.isfinite(best) else 0.0


def T_norm(ctx: AlphaContext, probes: int = 16, seed: int = DEFAULT_SEED) -> float:
    """Best ratio ||T u||_alpha / ||u||_alpha over spikes and random windows."""
    if probes < 1:
        raise DomainError("probes must be >= 1")
    return T_power_norm(ctx, 1, probes, seed)


def spectral_radius_estimate(ctx: AlphaContext, k_max: int = 16, probes: int = 0,
                             seed: int = DEFAULT_SEED) -> tuple[float, list[float]]:
    """min over k <= k_max of ||T^k||^{1/k}; also returns the running-min sequence.

    The value is heuristic: probe norms are lower bounds of the operator norms.
    """
    if k_max < 1:
        raise DomainError("k_max must be >= 1")
    seq, best = [], math.inf
    for k in range(1, min(k_max, ctx.horizon) + 1):
        nk = T_power_norm(ctx, k, probes, seed)
        best = min(best, nk ** (1.0 / k))
        seq.append(best)
    return best, seq


# inverse of G


@dataclass
class InverseNormBounds:
    alpha: float
    lower: float
    upper: float
    horizon: int
    row_sums: np.ndarray
    row_sum_slope: float
    upper_half: float
    exact: bool

    @property
    def finite(self) -> bool:
        return math.isfinite(self.upper)

    def as_record(self) -> dict:
        return {"alpha": self.alpha, "lower": self.lower, "upper": self.upper,
                "horizon": self.horizon, "row_sum_slope": self.row_sum_slope,
                "upper_half_horizon": self.upper_half, "exact_row_sums": self.exact}


def _log_row_bounds(ctx: AlphaContext) -> np.ndarray:
    """log rho(n, k) as [n, k]: norm of x -> A(., k) x from ||.||_{k,alpha} into the n-slot."""
    N, a = ctx.horizon, ctx.alpha
    idx = np.arange(N + 1)
    cache = ctx.cache
    if cache.is_diagonal and cache.vector_norm == "sup":
        SM = ctx.suffix_table("col")[:, :, : cache.phi.shape[1]]
        reach = SM + a * idx[:, None, None]
        unit = SM[idx, idx, :] + a * idx[:, None]
        lr = np.max(reach - unit[None, :, :], axis=2)
    else:
        # ||x|| <= ||x||_{k,alpha}
        lr = ctx.suffix_table("norm") + a * idx[:, None]
    lower = np.tril(np.ones((N + 1, N + 1), dtype=bool))
    lr = np.where(lower, lr, -np.inf)
    lr[:, 0] = -np.inf
    return lr


def _logsumexp_rows(L: np.ndarray) -> np.ndarray:
    top = np.max(L, axis=1)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        return safe + np.log(np.sum(np.exp(L - safe[:, None]), axis=1))


def _ratio(ctx: AlphaContext, num: SequenceWindow, den: SequenceWindow) -> float:
    d = window_log_alpha_norm(ctx, den)
    if not np.isfinite(d):
        return -math.inf
    return window_log_alpha_norm(ctx, num) - d


def inverse_norm_bounds(ctx: AlphaContext, probes: int = 16, seed: int = DEFAULT_SEED) -> InverseNormBounds:
    """Two-sided bounds on ||G^{-1}|| over the window.

    upper: max_n sum_{k=1}^n rho(n, k) (exact in dimension one / diagonal-sup
    families, a product-of-norms estimate otherwise); reported as infinite when
    it overflows or the running max of the row sums keeps growing across the top
    half of the window.
    lower: best ratio ||solve_G(v)||_alpha / ||v||_alpha over probes.
    """
    cache = ctx.cache
    N = ctx.horizon
    lr = _log_row_bounds(ctx)
    log_rows = _logsumexp_rows(lr)
    with np.errstate(over="ignore"):
        rows = np.exp(log_rows)
    rows[0] = 0.0
    half = N // 2
    slope = running_max_slope(rows) if N >= 2 else 0.0
    top = float(np.max(rows))
    upper_half = float(np.max(rows[: half + 1]))
    growing = slope > SLOPE_THRESHOLD
    upper = math.inf if (top > OVERFLOW_GUARD or not math.isfinite(top) or growing) else top

    best = -math.inf
    # spikes: solve_G(spike_k x) is the column A(., k) x
    SM = ctx.suffix_table("col")
    idx = np.arange(N + 1)
    col = SM + ctx.alpha * idx[:, None, None]
    col = np.where((idx[:, None] >= idx[None, :])[:, :, None], col, -np.inf)
    col_norm = np.max(col, axis=0)
    base = _spike_log_norms(ctx)
    with np.errstate(invalid="ignore"):
        sp = np.where(np.isfinite(base), col_norm - base, -np.inf)[1:]
    if sp.size:
        best = float(np.max(sp))

    def consider(v):
        nonlocal best
        if not np.any(v.values):
            return
        best = max(best, _ratio(ctx, solve_G(cache, v), v))

    # aligned probes for the rows with the largest sums (exact in dimension one)
    for n in np.argsort(-log_rows, kind="stable")[:3]:
        if n == 0:
            continue
        v = SequenceWindow.zeros(N, cache.dimension)
        for k in range(1, n + 1):
            if not np.isfinite(lr[n, k]):
                continue
            y, s = cache.apply(n, k, np.ones(cache.dimension))
            sign = np.sign(y) if cache.is_diagonal else np.ones(cache.dimension)
            v.values[k] = np.where(sign == 0, 1.0, sign)
            unit = base[k]
            v.log_scale[k] = -float(np.max(unit)) if np.all(np.isfinite(unit)) else 0.0
        consider(v)
    for v in proof_probes(cache, ctx.alpha):
        consider(v)
    for v in random_windows(cache, probes, seed):
        consider(v)
    lower = math.exp(best) if np.isfinite(best) else 0.0
    if cache.is_diagonal and cache.vector_norm == "sup" and math.isfinite(upper):
        # both sides evaluate the same quantity; keep rounding from inverting them
        upper = max(upper, lower)
    exact = cache.is_diagonal and cache.vector_norm == "sup" and cache.phi.shape[1] == 1
    return InverseNormBounds(ctx.alpha, lower, upper, N, rows, slope, upper_half, exact)


@dataclass
class GapEstimate:
    theta_hat: float
    witness: SequenceWindow
    point_spectrum_evidence: bool


def sigma_ap_gap(ctx: AlphaContext, probes: int = 16, seed: int = DEFAULT_SEED) -> GapEstimate:
    """max over probe windows u of ||u||_alpha / ||G u||_alpha (a lower bound on the gap constant)."""
    if probes < 1:
        raise DomainError("probes must be >= 1")
    cache = ctx.cache
    N = ctx.horizon
    best, witness, kernel = -math.inf, None, False

    def consider(u):
        nonlocal best, witness, kernel
        nu = window_log_alpha_norm(ctx, u)
        if not np.isfinite(nu):
            return
        gu = apply_G(cache, u)
        ng = window_log_alpha_norm(ctx, gu)
        if not np.isfinite(ng) or ng - nu < -700:
            kernel, witness, best = True, u, math.inf
            return
        if nu - ng > best:
            best, witness = nu - ng, u

    inputs = list(proof_probes(cache, ctx.alpha))
    for k in np.unique(np.linspace(1, N, min(N, 32)).astype(int)) if N >= 1 else []:
        for x in _basis(cache.dimension):
            inputs.append(SequenceWindow.spike(N, k, x))
    tail = SequenceWindow.zeros(N, cache.dimension)
    tail.values[1:] = 1.0
    inputs.append(tail)
    inputs.extend(random_windows(cache, probes, seed))
    for v in inputs:
        consider(solve_G(cache, v))
        if kernel:
            break
    theta = math.exp(best) if np.isfinite(best) and best < 709 else math.inf
    return GapEstimate(theta, witness, kernel)
