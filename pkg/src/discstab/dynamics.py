"""Operator sequences A_n on R^d and their discrete evolution families A(m, n).

Two storage layouts are used:

* matrix families keep the whole triangle of products ``A(m, n)`` as dense
  double-precision matrices, built with one batched multiplication per row;
* scalar and diagonal families keep a log-potential ``phi`` and a sign
  potential ``sgn`` so that ``A(m, n) = diag(sgn[m] * sgn[n] * exp(phi[m] - phi[n]))``.
  Products never overflow in this layout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, NamedTuple

import numpy as np

KINDS = ("matrix-list", "identity", "geometric", "diagonal", "example1", "example2")
NORMS = ("sup", "euclidean")


class DomainError(ValueError):
    """Index or dimension outside the domain of an operation."""


class ConstructionError(ValueError):
    """A family or cache could not be built from the given data."""


def ex1_a(n):
    """a_n = n / (2 + (-1)^n); works elementwise on integer arrays."""
    n = np.asarray(n)
    return n / np.where(n % 2 == 0, 3.0, 1.0)


def ex2_f(t, alpha=0.0):
    """f_alpha(t) = -2 sqrt(t) cos sqrt(t) + 2 sin sqrt(t) - (alpha + 1) t."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("f is defined for t >= 0 only")
    r = np.sqrt(t)
    out = -2.0 * r * np.cos(r) + 2.0 * np.sin(r) - t - alpha * t
    return out if out.ndim else float(out)


def _log_vector_norm(logs: np.ndarray, norm: str, axis: int = -1) -> np.ndarray:
    """Log of the vector norm given log-magnitudes of the components."""
    if norm == "sup":
        return np.max(logs, axis=axis)
    top = np.max(logs, axis=axis, keepdims=True)
    safe = np.where(np.isfinite(top), top, 0.0)
    with np.errstate(divide="ignore"):
        s = np.log(np.sum(np.exp(2.0 * (logs - safe)), axis=axis))
    return np.squeeze(safe, axis=axis) + 0.5 * s


def vector_norm(x: np.ndarray, norm: str) -> float:
    x = np.asarray(x, dtype=float)
    return float(np.max(np.abs(x))) if norm == "sup" else float(np.linalg.norm(x))


def _safe_log(x):
    with np.errstate(divide="ignore"):
        return np.log(np.abs(x))


@dataclass(frozen=True)
class OperatorFamily:
    """A sequence of d x d operators A_0, A_1, ...

    ``kind`` selects the generator.  ``data`` holds the raw parameters exactly
    as ingested (matrix lists and diagonal lists are repeated periodically).
    """

    kind: str
    dimension: int = 1
    data: Any = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConstructionError(f"unknown family kind {self.kind!r}")
        if int(self.dimension) < 1:
            raise ConstructionError("dimension must be >= 1")
        d = self.dimension
        if self.kind == "matrix-list":
            mats = np.asarray(self.data, dtype=float)
            if mats.ndim != 3 or mats.shape[0] < 1 or mats.shape[1:] != (d, d):
                raise ConstructionError(f"matrix-list needs a nonempty list of {d}x{d} matrices")
            bad = np.argwhere(~np.isfinite(mats))
            if len(bad):
                raise ConstructionError(f"non-finite entry in A_{bad[0][0]}")
            object.__setattr__(self, "_mats", mats)
        elif self.kind == "diagonal":
            diags = np.asarray(self.data, dtype=float)
            if diags.ndim == 1 and d == 1:
                diags = diags[:, None]
            if diags.ndim != 2 or diags.shape[0] < 1 or diags.shape[1] != d:
                raise ConstructionError(f"diagonal needs a nonempty list of length-{d} diagonals")
            bad = np.argwhere(~np.isfinite(diags) | (diags == 0))
            if len(bad):
                raise ConstructionError(
                    f"diagonal entry of A_{bad[0][0]} is zero or non-finite; "
                    "use matrix-list for non-invertible steps")
            object.__setattr__(self, "_diags", diags)
        elif self.kind == "geometric":
            a = self.data["a"] if isinstance(self.data, dict) else self.data
            a = float(a)
            if not math.isfinite(a) or a == 0.0:
                raise ConstructionError("geometric rate must be finite and nonzero")
            object.__setattr__(self, "_rate", a)

    @property
    def is_diagonal(self) -> bool:
        return self.kind != "matrix-list"

    def step_matrix(self, k: int) -> np.ndarray:
        """Dense A_k."""
        if self.kind == "matrix-list":
            return self._mats[k % len(self._mats)].copy()
        phi, sgn = self.potentials(k + 1)
        diag = sgn[k + 1] * sgn[k] * np.exp(phi[k + 1] - phi[k])
        return np.diag(np.broadcast_to(diag, (self.dimension,)).astype(float))

    def potentials(self, horizon: int) -> tuple[np.ndarray, np.ndarray]:
        """(phi, sgn) of shape (horizon + 1, r), r = 1 for scalar kinds."""
        if self.kind == "matrix-list":
            raise ConstructionError("matrix-list families have no log-potential")
        n = np.arange(horizon + 1)
        sgn = np.ones((horizon + 1, 1))
        if self.kind == "identity":
            phi = np.zeros((horizon + 1, 1))
        elif self.kind == "geometric":
            phi = (n * math.log(abs(self._rate)))[:, None]
            if self._rate < 0:
                sgn = np.where(n % 2 == 0, 1.0, -1.0)[:, None]
        elif self.kind == "example1":
            phi = -ex1_a(n)[:, None]
        elif self.kind == "example2":
            phi = np.asarray(ex2_f(n.astype(float)))[:, None]
        else:
            steps = self._diags[n[:-1] % len(self._diags)]
            phi = np.vstack([np.zeros((1, self.dimension)), np.cumsum(np.log(np.abs(steps)), axis=0)])
            neg = np.vstack([np.zeros((1, self.dimension)), np.cumsum(steps < 0, axis=0)])
            sgn = np.where(neg % 2 == 0, 1.0, -1.0)
        bad = np.argwhere(~np.isfinite(phi))
        if len(bad):
            raise ConstructionError(f"family {self.kind} not finite at index {bad[0][0]}")
        return phi, sgn

    def admissible_log_bound(self, beta: float, horizon: int, norm: str = "sup"):
        """Closed-form log M_n(beta) valid for all m >= n (no truncation), or None.

        Only returned when the bound is provable from the family's definition.
        """
        n = np.arange(horizon + 1)
        zero = np.zeros(horizon + 1)
        if self.kind == "identity":
            return zero if beta >= 0 else None
        if self.kind == "geometric":
            return zero if beta >= math.log(abs(self._rate)) else None
        if self.kind == "example1":
            if beta < -1.0 / 3.0:
                return None
            return np.where(n % 2 == 1, 2.0 * n / 3.0, 0.0)
        if self.kind == "example2":
            if beta >= 0:
                return zero
            if beta <= -1:
                return None
            # f_beta(t) <= 2 sqrt(t) + 2 - (beta + 1) t <= 1 / (beta + 1) + 2
            return 1.0 / (beta + 1.0) + 2.0 - np.asarray(ex2_f(n.astype(float), beta))
        if self.kind == "diagonal":
            return zero if np.max(np.log(np.abs(self._diags))) <= beta else None
        steps = [np.abs(m).sum(axis=1).max() if norm == "sup" else np.linalg.norm(m, 2)
                 for m in self._mats]
        return zero if max(steps) <= math.exp(beta) else None

    def to_dict(self) -> dict:
        data = self.data
        if isinstance(data, np.ndarray):
            data = data.tolist()
        return {"kind": self.kind, "dimension": self.dimension, "data": data}

    @classmethod
    def from_dict(cls, doc: dict) -> "OperatorFamily":
        try:
            kind = doc["kind"]
        except (KeyError, TypeError):
            raise ConstructionError("family document needs a 'kind' field") from None
        return cls(kind=kind, dimension=int(doc.get("dimension", 1)), data=doc.get("data"))


def identity_family(d: int = 1) -> OperatorFamily:
    return OperatorFamily("identity", d)


def geometric_family(a: float, d: int = 1) -> OperatorFamily:
    return OperatorFamily("geometric", d, {"a": float(a)})


def example1_family(d: int = 1) -> OperatorFamily:
    return OperatorFamily("example1", d)


def example2_family(d: int = 1) -> OperatorFamily:
    return OperatorFamily("example2", d)


def matrix_family(mats) -> OperatorFamily:
    mats = np.asarray(mats, dtype=float)
    return OperatorFamily("matrix-list", mats.shape[-1], mats.tolist())


class LogDiagonal(NamedTuple):
    """A diagonal operator stored as sign and log-magnitude per coordinate."""

    sign: np.ndarray
    log_abs: np.ndarray

    @property
    def value(self) -> np.ndarray:
        return self.sign * np.exp(self.log_abs)

    def to_matrix(self, d: int) -> np.ndarray:
        return np.diag(np.broadcast_to(self.value, (d,)).astype(float))


class EvolutionCache:
    """All products A(m, n), 0 <= n <= m <= horizon, with their norms.

    Immutable after construction.  ``op_count`` records the number of
    elementary operator evaluations spent building it.
    """

    def __init__(self, family: OperatorFamily, horizon: int, vector_norm: str = "sup"):
        if horizon < 0:
            raise DomainError("horizon must be >= 0")
        if vector_norm not in NORMS:
            raise DomainError(f"unknown vector norm {vector_norm!r}")
        self.family = family
        self.horizon = int(horizon)
        self.vector_norm = vector_norm
        self.dimension = family.dimension
        self.op_count = 0
        self._tables: dict = {}
        if family.is_diagonal:
            self.phi, self.sgn = family.potentials(self.horizon)
            self.op_count = self.horizon + 1
            self.products = None
        else:
            self._build_products()

    @property
    def is_diagonal(self) -> bool:
        return self.products is None

    def _build_products(self):
        N, d = self.horizon, self.dimension
        P = np.zeros((N + 1, N + 1, d, d))
        P[np.arange(N + 1), np.arange(N + 1)] = np.eye(d)
        for m in range(1, N + 1):
            step = self.family.step_matrix(m - 1)
            # A(m, n) = A_{m-1} A(m-1, n) for every n < m in one batched product
            P[m, :m] = np.einsum("ij,njk->nik", step, P[m - 1, :m])
            self.op_count += m
            if not np.all(np.isfinite(P[m, :m])):
                n_bad = int(np.argwhere(~np.isfinite(P[m, :m]))[0][0])
                raise ConstructionError(f"non-finite product A({m}, {n_bad})")
        self.products = P
        if self.vector_norm == "sup":
            norms = np.abs(P).sum(axis=3).max(axis=2)
        else:
            norms = np.linalg.norm(P, ord=2, axis=(2, 3))
        lower = np.tril(np.ones((N + 1, N + 1), dtype=bool))
        self._tables["log_norm"] = np.where(lower, _safe_log(norms), -np.inf)

    def _check(self, m: int, n: int):
        if not (0 <= n <= m <= self.horizon):
            raise DomainError(f"need 0 <= n <= m <= {self.horizon}, got (m, n) = ({m}, {n})")

    def truncate(self, horizon: int) -> "EvolutionCache":
        """The same cache restricted to [0, horizon]."""
        if not 0 <= horizon <= self.horizon:
            raise DomainError("truncation horizon outside cache")
        new = object.__new__(EvolutionCache)
        new.family, new.horizon, new.vector_norm = self.family, horizon, self.vector_norm
        new.dimension, new.op_count, new._tables = self.dimension, 0, {}
        if self.is_diagonal:
            new.phi, new.sgn, new.products = self.phi[: horizon + 1], self.sgn[: horizon + 1], None
        else:
            new.products = self.products[: horizon + 1, : horizon + 1]
            new._tables["log_norm"] = self._tables["log_norm"][: horizon + 1, : horizon + 1]
        return new

    # single entries

    def evolution(self, m: int, n: int):
        self._check(m, n)
        if self.is_diagonal:
            return LogDiagonal(self.sgn[m] * self.sgn[n], self.phi[m] - self.phi[n])
        return self.products[m, n].copy()

    def log_operator_norm(self, m: int, n: int) -> float:
        self._check(m, n)
        if self.is_diagonal:
            return float(np.max(self.phi[m] - self.phi[n]))
        return float(self._tables["log_norm"][m, n])

    def operator_norm(self, m: int, n: int) -> float:
        return math.exp(self.log_operator_norm(m, n))

    # rows over m in [n, N]

    def log_norm_row(self, n: int) -> np.ndarray:
        self._check(n, n)
        if self.is_diagonal:
            return np.max(self.phi[n:] - self.phi[n], axis=1)
        return self._tables["log_norm"][n:, n].copy()

    def log_apply_row(self, n: int, x, log_scale: float = 0.0) -> np.ndarray:
        """log ||A(m, n) x e^{log_scale}|| for m = n..N."""
        self._check(n, n)
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.shape[0] != self.dimension:
            raise DomainError(f"vector has dimension {x.shape[0]}, family has {self.dimension}")
        if self.is_diagonal:
            logs = (self.phi[n:] - self.phi[n]) + _safe_log(x)
            return _log_vector_norm(logs, self.vector_norm) + log_scale
        y = self.products[n:, n] @ x
        if self.vector_norm == "sup":
            nrm = np.max(np.abs(y), axis=1)
        else:
            nrm = np.linalg.norm(y, axis=1)
        return _safe_log(nrm) + log_scale

    def apply_step(self, k: int, x: np.ndarray) -> tuple[np.ndarray, float]:
        """A_k x returned as (y, s) with A_k x = y * e^s."""
        if self.is_diagonal:
            dphi = self.phi[k + 1] - self.phi[k]
            top = float(np.max(dphi))
            return self.sgn[k + 1] * self.sgn[k] * np.exp(dphi - top) * x, top
        return self.products[k + 1, k] @ x, 0.0

    def apply(self, m: int, n: int, x: np.ndarray) -> tuple[np.ndarray, float]:
        """A(m, n) x returned as (y, s) with A(m, n) x = y * e^s."""
        self._check(m, n)
        if self.is_diagonal:
            dphi = self.phi[m] - self.phi[n]
            top = float(np.max(dphi))
            return self.sgn[m] * self.sgn[n] * np.exp(dphi - top) * x, top
        return self.products[m, n] @ x, 0.0

    # full triangles, indexed [m, n] with -inf for m < n

    def log_norm_table(self) -> np.ndarray:
        if "log_norm" not in self._tables:
            diff = self.phi[:, None, :] - self.phi[None, :, :]
            tab = np.max(diff, axis=2)
            lower = np.tril(np.ones(tab.shape, dtype=bool))
            self._tables["log_norm"] = np.where(lower, tab, -np.inf)
        return self._tables["log_norm"]

    def log_col_norm_table(self) -> np.ndarray:
        """log ||A(m, n) e_i|| as an array [m, n, i]."""
        if "log_col" not in self._tables:
            N, d = self.horizon, self.dimension
            lower = np.tril(np.ones((N + 1, N + 1), dtype=bool))[:, :, None]
            if self.is_diagonal:
                diff = self.phi[:, None, :] - self.phi[None, :, :]
                tab = np.broadcast_to(diff, (N + 1, N + 1, d)).copy()
            else:
                cols = np.abs(self.products)
                if self.vector_norm == "sup":
                    tab = _safe_log(cols.max(axis=2))
                else:
                    tab = _safe_log(np.linalg.norm(self.products, axis=2))
            self._tables["log_col"] = np.where(lower, tab, -np.inf)
        return self._tables["log_col"]


def build_cache(family: OperatorFamily, horizon: int, vector_norm: str = "sup") -> EvolutionCache:
    return EvolutionCache(family, horizon, vector_norm)


def evolution(cache: EvolutionCache, m: int, n: int):
    return cache.evolution(m, n)


def operator_norm(cache: EvolutionCache, m: int, n: int) -> float:
    return cache.operator_norm(m, n)
