"""Slow, independent reference computations used to cross-check the fast paths."""
from __future__ import annotations

import math
from fractions import Fraction
from itertools import islice
from typing import Callable, Iterable

import numpy as np
from scipy.linalg import solve_triangular

from .adapted_norms import SequenceWindow
from .dynamics import EvolutionCache, vector_norm
from .evolution_operators import PreconditionError


def faulhaber_lower_bound(n: int, p: int) -> dict:
    """Exact check of (p+1) * sum_{k=1}^n k^p >= n^{p+1} (Python ints never wrap)."""
    if n < 1 or p < 0:
        raise ValueError("need n >= 1 and p >= 0")
    lhs = sum(k ** p for k in range(1, n + 1))
    num, den = n ** (p + 1), p + 1
    return {"lhs": lhs, "rhs_num": num, "rhs_den": den, "holds": Fraction(lhs) >= Fraction(num, den)}


def _take(seq, N: int) -> np.ndarray:
    if callable(seq):
        return np.array([float(seq(k)) for k in range(N + 1)])
    return np.fromiter(islice(iter(seq), N + 1), dtype=float, count=N + 1)


def convolution_limit(a: Callable | Iterable, b: Callable | Iterable, N: int) -> np.ndarray:
    """x_n = sum_{k=0}^n a_{n-k} b_k for n = 0..N.

    ``a`` and ``b`` are callables k -> value or iterables yielding the terms.
    """
    av, bv = _take(a, N), _take(b, N)
    return np.convolve(av, bv)[: N + 1]


def brute_force_solve_G(cache: EvolutionCache, v: SequenceWindow) -> SequenceWindow:
    """Solve (T - Id) u = -v by assembling the dense block system and substituting forward."""
    vd = v.dense()
    if np.any(vd[0] != 0):
        raise PreconditionError("v_0 must vanish")
    N, d = cache.horizon, cache.dimension
    size = (N + 1) * d
    S = -np.eye(size)
    for n in range(1, N + 1):
        S[n * d:(n + 1) * d, (n - 1) * d:n * d] = cache.family.step_matrix(n - 1)
    u = solve_triangular(S, -vd.reshape(-1), lower=True)
    return SequenceWindow(u.reshape(N + 1, d))


def brute_force_sup(cache: EvolutionCache, n: int, alpha: float, x) -> float:
    """Literal loop over m in [n, N] of e^{-alpha(m-n)} ||A(m, n) x||, returned as a log value."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    best = -math.inf
    for m in range(n, cache.horizon + 1):
        if cache.is_diagonal:
            with np.errstate(divide="ignore"):
                logs = (cache.phi[m] - cache.phi[n]) + np.log(np.abs(x))
            cur = float(np.max(logs)) if cache.vector_norm == "sup" else \
                0.5 * float(np.logaddexp.reduce(2 * logs))
        else:
            nrm = vector_norm(cache.products[m, n] @ x, cache.vector_norm)
            cur = math.log(nrm) if nrm > 0 else -math.inf
        best = max(best, cur - alpha * (m - n))
    return best
