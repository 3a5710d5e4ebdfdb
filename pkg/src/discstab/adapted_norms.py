"""Adapted norms ||x||_{n,alpha}, growth tables M_n(alpha) and window diagnostics.

Every supremum over m >= n is taken over the finite window m in [n, N].  A
growth table records, per start index n, whether the part of the supremum
beyond N is provably dominated (``certified``) or merely assumed
(``heuristic``).
"""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .dynamics import DomainError, EvolutionCache, _log_vector_norm, _safe_log

SLOPE_THRESHOLD = 1e-3
EPS_TAIL = 1e-8
CHUNK_ELEMENTS = 2_000_000


@dataclass
class SequenceWindow:
    """A finite sequence u_0..u_N in R^d, row n equal to values[n] * exp(log_scale[n])."""

    values: np.ndarray
    log_scale: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        if v.ndim != 2 or v.shape[0] < 1:
            raise DomainError("window values must be an (N+1, d) array")
        ls = np.zeros(v.shape[0]) if self.log_scale is None else np.asarray(self.log_scale, dtype=float)
        if ls.shape != (v.shape[0],):
            raise DomainError("log_scale must have one entry per index")
        if not (np.all(np.isfinite(v)) and np.all(np.isfinite(ls))):
            raise DomainError("window entries must be finite")
        self.values, self.log_scale = v, ls

    @property
    def horizon(self) -> int:
        return self.values.shape[0] - 1

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    @classmethod
    def zeros(cls, horizon: int, d: int = 1) -> "SequenceWindow":
        return cls(np.zeros((horizon + 1, d)))

    @classmethod
    def spike(cls, horizon: int, n: int, x, log_scale: float = 0.0) -> "SequenceWindow":
        x = np.atleast_1d(np.asarray(x, dtype=float))
        w = cls.zeros(horizon, x.shape[0])
        w.values[n] = x
        w.log_scale[n] = log_scale
        return w

    def dense(self) -> np.ndarray:
        """Plain (N+1, d) array; may overflow or underflow for extreme scales."""
        return self.values * np.exp(self.log_scale)[:, None]

    def row_log_abs(self) -> np.ndarray:
        return _safe_log(self.values) + self.log_scale[:, None]

    def nonzero_rows(self) -> np.ndarray:
        return np.flatnonzero(np.any(self.values != 0, axis=1))

    def normalized(self) -> "SequenceWindow":
        """Same sequence with every nonzero row rescaled to unit max-entry."""
        top = np.max(np.abs(self.values), axis=1)
        safe = np.where(top > 0, top, 1.0)
        return SequenceWindow(self.values / safe[:, None], self.log_scale + np.log(safe))


def _check_vector(cache: EvolutionCache, x) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if x.shape != (cache.dimension,):
        raise DomainError(f"vector has shape {x.shape}, expected ({cache.dimension},)")
    return x


def suffix_max(a: np.ndarray, axis: int = 0) -> np.ndarray:
    """out[i] = max(a[i:]) along ``axis``."""
    a = np.moveaxis(a, axis, 0)
    out = np.maximum.accumulate(a[::-1], axis=0)[::-1]
    return np.moveaxis(out, 0, axis)


def fit_slope(y: np.ndarray, x: np.ndarray | None = None) -> float:
    """Least-squares slope of y against x; -inf entries are lifted to the smallest finite value."""
    y = np.asarray(y, dtype=float)
    if x is None:
        x = np.arange(len(y), dtype=float)
    if len(y) < 2:
        return 0.0
    finite = np.isfinite(y)
    if not finite.any():
        return 0.0
    y = np.where(finite, y, y[finite].min())
    xc = x - x.mean()
    return float(np.dot(xc, y - y.mean()) / np.dot(xc, xc))


def running_max_slope(y: np.ndarray) -> float:
    """Slope of the running maximum of y over the top half of its index range."""
    env = np.maximum.accumulate(np.asarray(y, dtype=float))
    half = len(env) // 2
    return fit_slope(env[half:], np.arange(half, len(env), dtype=float))


class AlphaContext:
    """A candidate exponent together with its finite-horizon growth table."""

    def __init__(self, alpha: float, cache: EvolutionCache, log_M: np.ndarray,
                 tail_status: list[str], margin_exponent: float | None = None):
        self.alpha = float(alpha)
        self.cache = cache
        self.log_M = log_M
        self.tail_status = tail_status
        self.margin_exponent = margin_exponent
        self._suffix: dict = {}

    @property
    def horizon(self) -> int:
        return self.cache.horizon

    @property
    def M_table(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_M)

    def suffix_table(self, which: str = "norm") -> np.ndarray:
        """SM[i, n(, j)] = max_{m >= i} (log||A(m, n)(e_j)|| - alpha m).

        ``sup_{m>=i} e^{-alpha(m-i)} ||A(m,n)..||`` is then ``SM[i, n] + alpha i``.
        """
        if which not in self._suffix:
            tab = self.cache.log_norm_table() if which == "norm" else self.cache.log_col_norm_table()
            ms = np.arange(self.horizon + 1, dtype=float)
            shape = (-1,) + (1,) * (tab.ndim - 1)
            self._suffix[which] = suffix_max(tab - self.alpha * ms.reshape(shape), axis=0)
        return self._suffix[which]


def _log_growth(cache: EvolutionCache, alpha: float) -> np.ndarray:
    N = cache.horizon
    ns = np.arange(N + 1, dtype=float)
    if cache.is_diagonal:
        S = suffix_max(cache.phi - alpha * ns[:, None], axis=0)
        return np.max(S - cache.phi, axis=1) + alpha * ns
    tab = cache.log_norm_table() - alpha * ns[:, None]
    S = suffix_max(tab, axis=0)
    return np.diagonal(S) + alpha * ns


def growth_table(cache: EvolutionCache, alpha: float, margin_exponent: float | None = None,
                 assume_margin: bool = False) -> AlphaContext:
    """M_n(alpha) = max_{m in [n, N]} e^{-alpha(m-n)} ||A(m, n)||.

    With ``margin_exponent`` (< alpha) the tail m > N is checked against a bound
    for the smaller exponent: a closed-form one when the family supplies it,
    or the window's own M_n(margin) when ``assume_margin`` is set.
    """
    if margin_exponent is not None and margin_exponent >= alpha:
        raise DomainError("margin exponent must be smaller than alpha")
    log_M = _log_growth(cache, alpha)
    status = ["heuristic"] * (cache.horizon + 1)
    if margin_exponent is not None:
        bound = cache.family.admissible_log_bound(margin_exponent, cache.horizon, cache.vector_norm)
        if bound is None and assume_margin:
            bound = _log_growth(cache, margin_exponent)
        if bound is not None:
            n = np.arange(cache.horizon + 1)
            tail = bound + (margin_exponent - alpha) * (cache.horizon + 1 - n)
            status = ["certified" if ok else "heuristic" for ok in tail <= log_M + 1e-12]
    return AlphaContext(alpha, cache, log_M, status, margin_exponent)


class AdaptedNorm(NamedTuple):
    value: float
    log_value: float
    certified: bool


def adapted_norm(ctx: AlphaContext, n: int, x, log_scale: float = 0.0) -> AdaptedNorm:
    """max_{m in [n, N]} e^{-alpha(m-n)} ||A(m, n) x||, evaluated in log-domain."""
    cache = ctx.cache
    x = _check_vector(cache, x)
    if not 0 <= n <= cache.horizon:
        raise DomainError(f"index {n} outside [0, {cache.horizon}]")
    if not np.any(x):
        return AdaptedNorm(0.0, -math.inf, ctx.tail_status[n] == "certified")
    ms = np.arange(n, cache.horizon + 1)
    row = cache.log_apply_row(n, x, log_scale) - ctx.alpha * (ms - n)
    lv = float(np.max(row))
    with np.errstate(over="ignore"):
        val = math.exp(lv) if lv < 709.78 else math.inf
    return AdaptedNorm(val, lv, ctx.tail_status[n] == "certified")


def window_log_norms(ctx: AlphaContext, u: SequenceWindow) -> np.ndarray:
    """log ||u_n||_{n,alpha} for every n (-inf on zero rows)."""
    cache = ctx.cache
    N = cache.horizon
    if u.horizon != N:
        raise DomainError(f"window horizon {u.horizon} differs from cache horizon {N}")
    if u.dimension != cache.dimension:
        raise DomainError("window dimension differs from family dimension")
    out = np.full(N + 1, -np.inf)
    rows = u.nonzero_rows()
    if len(rows) == 0:
        return out
    ms = np.arange(N + 1)
    logs = u.row_log_abs()
    block = max(1, CHUNK_ELEMENTS // ((N + 1) * cache.dimension ** 2))
    for start in range(0, len(rows), block):
        ns = rows[start:start + block]
        if cache.is_diagonal:
            L = (cache.phi[:, None, :] - cache.phi[ns][None, :, :]) + logs[ns][None, :, :]
            ln = _log_vector_norm(L, cache.vector_norm)
        else:
            y = np.einsum("mbij,bj->mbi", cache.products[:, ns], u.values[ns])
            nrm = np.max(np.abs(y), axis=2) if cache.vector_norm == "sup" else np.linalg.norm(y, axis=2)
            ln = _safe_log(nrm) + u.log_scale[ns][None, :]
        ln = ln - ctx.alpha * (ms[:, None] - ns[None, :])
        ln = np.where(ms[:, None] >= ns[None, :], ln, -np.inf)
        out[ns] = np.max(ln, axis=0)
    return out


def window_log_alpha_norm(ctx: AlphaContext, u: SequenceWindow) -> float:
    return float(np.max(window_log_norms(ctx, u)))


def window_alpha_norm(ctx: AlphaContext, u: SequenceWindow) -> float:
    """||u||_alpha = max_n ||u_n||_{n,alpha}."""
    lv = window_log_alpha_norm(ctx, u)
    return math.exp(lv) if lv < 709.78 else math.inf


def growth_profile(ctx: AlphaContext, n: int = 0) -> np.ndarray:
    """log(e^{-alpha(m-n)} ||A(m, n)||) for m = n..N."""
    ms = np.arange(n, ctx.horizon + 1)
    return ctx.cache.log_norm_row(n) - ctx.alpha * (ms - n)


def _orbit_envelope(ctx: AlphaContext) -> np.ndarray:
    """For each m, max over early start indices n <= N/4 of the weighted log-norm."""
    N = ctx.horizon
    env = np.full(N + 1, -np.inf)
    for n in range(0, N // 4 + 1):
        env[n:] = np.maximum(env[n:], growth_profile(ctx, n))
    return env


@dataclass
class ScanRecord:
    alpha: float
    verdict: str
    uniform: bool
    admissible: bool
    trend: str
    sup_M: float
    log_sup_M: float
    slope: float
    orbit_slope: float
    tail_status: dict = field(default_factory=dict)
    evidence: str = "finite-horizon"

    def as_record(self) -> dict:
        return {
            "alpha": self.alpha, "verdict": self.verdict, "uniform": self.uniform,
            "admissible": self.admissible, "trend": self.trend, "sup_M": self.sup_M,
            "log_sup_M": self.log_sup_M, "slope": self.slope, "orbit_slope": self.orbit_slope,
            "tail_status": dict(sorted(self.tail_status.items())), "evidence": self.evidence,
        }


def scan_context(ctx: AlphaContext) -> ScanRecord:
    slope = running_max_slope(ctx.log_M)
    orbit_slope = running_max_slope(_orbit_envelope(ctx))
    admissible = orbit_slope <= SLOPE_THRESHOLD
    uniform = admissible and slope <= SLOPE_THRESHOLD
    if not admissible:
        verdict = "not-admissible"
    else:
        verdict = "uniform-admissible" if uniform else "nonuniform-admissible"
    log_sup = float(np.max(ctx.log_M))
    return ScanRecord(
        alpha=ctx.alpha, verdict=verdict, uniform=uniform, admissible=admissible,
        trend="bounded" if uniform else "growing",
        sup_M=math.exp(log_sup) if log_sup < 709.78 else math.inf, log_sup_M=log_sup,
        slope=slope, orbit_slope=orbit_slope, tail_status=dict(Counter(ctx.tail_status)),
    )


def admissible_scan(cache: EvolutionCache, alpha_grid, margin: float | None = None) -> list[ScanRecord]:
    """Per-alpha finite-window verdicts.

    ``slope`` is the fitted growth of the running max of log M_n over the top
    half of the window (nonuniformity), ``orbit_slope`` the same for the
    weighted orbit envelope along m (failure of admissibility).
    """
    if len(alpha_grid) == 0:
        raise DomainError("alpha grid is empty")
    out = []
    for a in alpha_grid:
        m_exp = a - margin if margin is not None else None
        out.append(scan_context(growth_table(cache, a, m_exp)))
    return out


def is_uniformly_bounded(ctx: AlphaContext) -> tuple[bool, float]:
    rec = scan_context(ctx)
    return rec.uniform, rec.sup_M


def membership_c00alpha(ctx: AlphaContext, u: SequenceWindow, eps_tail: float = EPS_TAIL) -> str:
    """'yes', 'no' or 'inconclusive' for membership of u in c00(alpha), from window quarters."""
    if np.any(u.values[0] != 0):
        return "no"
    logs = window_log_norms(ctx, u)
    N = u.horizon
    q3 = logs[N // 2: (3 * N) // 4]
    q4 = logs[(3 * N) // 4:]
    q3max = float(np.max(q3)) if len(q3) else -math.inf
    q4max = float(np.max(q4)) if len(q4) else -math.inf
    if q4max < math.log(eps_tail) and q4max <= q3max:
        return "yes"
    if q4max > q3max:
        return "no"
    return "inconclusive"
