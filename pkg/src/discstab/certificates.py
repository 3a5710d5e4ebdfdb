"""Decay certificates built from bounds on the inverse of G, and their verification.

A :class:`StabilityCertificate` encodes the claim

    ||A(m, n)|| <= prefactor * M_n * exp(-nu (m - n)),   n <= m <= N,

with nu = 1 / (2 c) and prefactor = 2 [c (e^alpha - 1) + 1], where c is an
upper bound on ||G^{-1}||.  A :class:`BoundedOrbitCertificate` encodes the
analogous claim for one orbit, driven by a gap constant theta with
||u|| <= theta ||G u||.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .adapted_norms import (
    SLOPE_THRESHOLD,
    AlphaContext,
    SequenceWindow,
    adapted_norm,
    running_max_slope,
    window_log_norms,
)
from .dynamics import DomainError, EvolutionCache, vector_norm
from .evolution_operators import (
    DEFAULT_SEED,
    InverseNormBounds,
    PreconditionError,
    column_window,
    sigma_ap_gap,
)

DEFAULT_DELTA = 0.5
DEFAULT_K_MAX = 12
ORBIT_K_MAX = 5
SOUNDNESS_TOL = 1e-9


class NotCertifiable(RuntimeError):
    """No finite bound on the inverse is available on this window."""


class HorizonTooSmall(RuntimeError):
    """A quantity needs indices beyond the window to be decided."""


@dataclass
class StabilityCertificate:
    alpha: float
    c_alpha: float
    nu: float
    prefactor: float
    log_M: list
    provenance: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return asdict(self)

    @classmethod
    def from_record(cls, rec: dict) -> "StabilityCertificate":
        return cls(float(rec["alpha"]), float(rec["c_alpha"]), float(rec["nu"]),
                   float(rec["prefactor"]), [float(v) for v in rec["log_M"]],
                   dict(rec.get("provenance", {})))


def certify_stability(ctx: AlphaContext, bounds: InverseNormBounds) -> StabilityCertificate:
    if not bounds.finite:
        raise NotCertifiable("no certificate: invertibility evidence absent on this window")
    if ctx.alpha < 0:
        raise PreconditionError(
            "certificates are built for alpha >= 0; a negative admissible exponent "
            "is already a decay bound with constants M_n")
    c = float(bounds.upper)
    return StabilityCertificate(
        alpha=ctx.alpha,
        c_alpha=c,
        nu=1.0 / (2.0 * c),
        prefactor=2.0 * (c * math.expm1(ctx.alpha) + 1.0),
        log_M=[float(v) for v in ctx.log_M],
        provenance={
            "construction": "generator-inverse",
            "horizon": ctx.horizon,
            "c_alpha_bound": "exact-row-sum" if bounds.exact else "product-of-norms",
            "family": ctx.cache.family.kind,
            "vector_norm": ctx.cache.vector_norm,
        },
    )


def _pairs(N: int, strict: bool):
    m = np.arange(N + 1)[:, None]
    n = np.arange(N + 1)[None, :]
    gap = (m - n).astype(float)
    return gap, (gap > 0) if strict else (gap >= 0)


def verify_certificate(cert: StabilityCertificate, cache: EvolutionCache) -> tuple[float, tuple[int, int]]:
    """max over n <= m <= N of ||A(m, n)|| / (prefactor M_n e^{-nu(m-n)})."""
    N = min(cache.horizon, len(cert.log_M) - 1)
    logA = cache.truncate(N).log_norm_table() if N < cache.horizon else cache.log_norm_table()
    gap, mask = _pairs(N, strict=False)
    logM = np.asarray(cert.log_M[: N + 1])
    r = logA - math.log(cert.prefactor) - logM[None, :] + cert.nu * gap
    r = np.where(mask, r, -np.inf)
    m, n = np.unravel_index(int(np.argmax(r)), r.shape)
    return math.exp(float(r[m, n])), (int(m), int(n))


def verify_step_chain(ctx: AlphaContext, bounds: InverseNormBounds, k_max: int = DEFAULT_K_MAX) -> list[float]:
    """Per k, max over m > n of ||A(m, n)|| / (C c^k k! / (m-n)^k M_n), C = c (e^alpha - 1) + 1.

    Entry 0 is the plain bound ||A(m, n)|| <= C M_n (also checked at m = n).
    """
    if not bounds.finite:
        raise NotCertifiable("step chain needs a finite bound on the inverse")
    c = float(bounds.upper)
    C = c * math.expm1(ctx.alpha) + 1.0
    if C <= 0:
        raise PreconditionError("chain constant is not positive for this alpha")
    N = ctx.horizon
    logA = ctx.cache.log_norm_table()
    gap, strict = _pairs(N, strict=True)
    with np.errstate(divide="ignore"):
        lgap = np.log(np.where(strict, gap, 1.0))
    base = logA - math.log(C) - ctx.log_M[None, :]
    out = []
    for k in range(k_max + 1):
        r = base - k * math.log(c) - math.lgamma(k + 1) + k * lgap
        mask = _pairs(N, strict=False)[1] if k == 0 else strict
        r = np.where(mask, r, -np.inf)
        out.append(math.exp(float(np.max(r))) if np.any(mask) else 0.0)
    return out


@dataclass
class BoundedOrbitCertificate:
    n: int
    x0: list
    K: float
    m0: int
    theta: float
    L: float
    delta: float
    nu: float
    N_n: float
    M_n: float
    alpha: float
    provenance: dict = field(default_factory=dict)

    def as_record(self) -> dict:
        return asdict(self)


def default_theta(ctx: AlphaContext, bounds: InverseNormBounds | None,
                  probes: int = 16, seed: int = DEFAULT_SEED) -> tuple[float, str]:
    """Upper bound on ||G^{-1}|| when available, else the probed gap (heuristic)."""
    if bounds is not None and bounds.finite:
        return float(bounds.upper), "inverse-upper-bound"
    return sigma_ap_gap(ctx, probes, seed).theta_hat, "heuristic-gap-probe"


def certify_bounded_orbit(ctx: AlphaContext, n: int, x0, theta: float,
                          delta: float = DEFAULT_DELTA, theta_source: str = "user") -> BoundedOrbitCertificate:
    if not theta > 0 or not math.isfinite(theta):
        raise PreconditionError("theta must be positive and finite")
    if not 0 < delta < 1:
        raise PreconditionError("delta must lie in (0, 1)")
    cache = ctx.cache
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if x0.shape != (cache.dimension,):
        raise DomainError("x0 dimension mismatch")
    if np.any(x0):
        row = cache.log_apply_row(n, x0)
        i = int(np.argmax(row))
        if not np.isfinite(row[i]) or row[i] > 709:
            raise PreconditionError("orbit is not bounded on the window")
        K, m0 = math.exp(float(row[i])), n + i
    else:
        K, m0 = 0.0, n
    L = math.exp(ctx.alpha * theta)
    M_n = math.exp(float(ctx.log_M[n]))
    return BoundedOrbitCertificate(
        n=n, x0=[float(v) for v in x0], K=K, m0=m0, theta=float(theta), L=L,
        delta=float(delta), nu=delta / theta, N_n=theta * L * M_n / (1.0 - delta),
        M_n=M_n, alpha=ctx.alpha,
        provenance={"construction": "approximate-gap", "theta_source": theta_source,
                    "horizon": ctx.horizon},
    )


def verify_bounded_orbit(cert: BoundedOrbitCertificate, cache: EvolutionCache,
                         k_max: int = ORBIT_K_MAX) -> dict:
    """Max LHS/RHS of each orbit inequality over m in (n, N] (m in [n, N] for the exponential one)."""
    n = cert.n
    x0 = np.asarray(cert.x0, dtype=float)
    xn = vector_norm(x0, cache.vector_norm)
    out = {"sup_decay": 0.0, "growth_decay": 0.0,
           "factorial": [0.0] * (k_max + 1), "exponential": 0.0,
           "peak_offset": float(cert.m0 - n), "peak_within_theta": cert.m0 - n <= cert.theta + SOUNDNESS_TOL}
    if xn == 0:
        return out
    row = cache.log_apply_row(n, x0)
    gaps = np.arange(0, cache.horizon + 1 - n, dtype=float)
    lx = math.log(xn)
    Ntil = cert.theta * cert.L * cert.M_n
    with np.errstate(divide="ignore"):
        lg = np.log(gaps[1:])
    tail = row[1:]
    if tail.size:
        out["sup_decay"] = math.exp(float(np.max(tail + lg - math.log(cert.theta * cert.K))))
        out["growth_decay"] = math.exp(float(np.max(tail + lg - math.log(Ntil) - lx)))
        out["factorial"] = [
            math.exp(float(np.max(tail + k * lg - math.lgamma(k + 1) - k * math.log(cert.theta)
                                  - math.log(Ntil) - lx)))
            for k in range(k_max + 1)
        ]
    out["exponential"] = math.exp(float(np.max(row + cert.nu * gaps - math.log(cert.N_n) - lx)))
    return out


def summation_check(theta: float, delta: float, gaps, k_min: int = 20) -> float:
    """min over gaps g of [e^{-(delta/theta) g} / (1-delta)] / [min_k k! theta^k / g^k].

    k ranges over 0..max(k_min, ceil(g/theta) + 1) so the minimizing index is
    always included.  Values >= 1 mean the exponential bound dominates the best
    factorial bound.
    """
    worst = math.inf
    for g in gaps:
        lhs = -math.log1p(-delta) - delta / theta * g
        if g <= 0:
            rhs = 0.0
        else:
            ks = np.arange(max(k_min, math.ceil(g / theta) + 1) + 1)
            lg = np.array([math.lgamma(k + 1) for k in ks])
            rhs = float(np.min(lg + ks * (math.log(theta) - math.log(g))))
        worst = min(worst, lhs - rhs)
    return math.exp(min(worst, 700.0))


def theta_sequence(ctx: AlphaContext, beta: float, n: int, x) -> SequenceWindow:
    """theta_k = e^{-beta(k-n)} A(k, n) x for k > n, zero for k <= n."""
    if not beta < 0:
        raise PreconditionError("beta must be negative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if not np.any(x):
        raise PreconditionError("x must be nonzero")
    w = column_window(ctx.cache, n, x, extra_log=lambda k: -beta * (k - n))
    w.values[: n + 1] = 0.0
    w.log_scale[: n + 1] = 0.0
    return w


@dataclass
class FirstPeak:
    p: int
    log_peak: float
    below_bracket: bool


def first_peak(ctx: AlphaContext, beta: float, n: int, x) -> FirstPeak:
    """Smallest index maximizing ||theta_k||_{k, alpha}."""
    th = theta_sequence(ctx, beta, n, x)
    logs = window_log_norms(ctx, th)
    p = int(np.argmax(logs))
    if p >= ctx.horizon:
        raise HorizonTooSmall("inconclusive (horizon too small): peak at window edge")
    return FirstPeak(p, float(logs[p]), p < n - 1.0 / beta)


@dataclass
class EquivalenceEvidence:
    ratio_bound: float
    violations: int
    threshold: float
    per_n: np.ndarray
    slope: float

    @property
    def bounded(self) -> bool:
        return self.slope <= SLOPE_THRESHOLD


def space_equivalence_evidence(ctx_alpha: AlphaContext, ctx_beta: AlphaContext, probes: int = 256,
                               seed: int = DEFAULT_SEED) -> EquivalenceEvidence:
    """max over probes (n, x) of ||x||_{n,beta} / ||x||_{n,alpha}.

    Probes are the basis vectors at every n plus ``probes`` random pairs.
    ``violations`` counts ratios above e^{-(alpha-beta)/beta} (only for beta < 0).
    """
    if ctx_alpha.cache is not ctx_beta.cache:
        raise DomainError("both contexts must share one cache")
    cache = ctx_alpha.cache
    N, d = cache.horizon, cache.dimension
    a, b = ctx_alpha.alpha, ctx_beta.alpha
    thr = math.exp(-(a - b) / b) if b < 0 else math.inf
    rng = np.random.default_rng(seed)
    pairs = [(n, e) for n in range(N + 1) for e in np.eye(d)]
    pairs += [(int(rng.integers(0, N + 1)), rng.standard_normal(d)) for _ in range(probes)]
    per_n = np.full(N + 1, -np.inf)
    viol = 0
    for n, x in pairs:
        r = adapted_norm(ctx_beta, n, x).log_value - adapted_norm(ctx_alpha, n, x).log_value
        per_n[n] = max(per_n[n], r)
        if r > math.log(thr) + math.log1p(SOUNDNESS_TOL):
            viol += 1
    top = float(np.max(per_n))
    return EquivalenceEvidence(math.exp(top) if top < 709 else math.inf, viol, thr,
                               per_n, running_max_slope(per_n))
