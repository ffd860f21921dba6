"""Recency-weighted tensor collapse and Katz scoring.

Three scoring routes share the same inputs:

* ``katz_closed``      -- ``(I - beta X)^-1 - I`` by a dense linear solve,
* ``katz_truncated``   -- the power series cut after ``lmax`` terms,
* ``katz_distributed`` -- each node solves the closed form on its k-hop
  neighbourhood only, and the two endpoint views of a pair are merged by max.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .trace_model import SnapshotTensor

log = logging.getLogger(__name__)

DEFAULT_THETA = 0.2
DEFAULT_BETA = 0.001

BETA_MARGIN = 1e-9
SCORE_FLOOR = 1e-15
# Above this node count X is kept sparse and only the truncated series is offered.
DENSE_LIMIT = 2048

POWER_ITERATIONS = 200
POWER_RTOL = 1e-10


class BetaTooLarge(ValueError):
    """``beta * rho(X)`` is too close to (or above) 1 for the series to converge."""

    def __init__(self, beta: float, rho: float, node: int | None = None):
        self.beta = beta
        self.rho = rho
        self.node = node
        where = f" in the neighbourhood of node {node}" if node is not None else ""
        super().__init__(
            f"beta={beta:g} too large{where}: spectral radius estimate {rho:.6g}, "
            f"need beta < {(1 - BETA_MARGIN) / rho if rho > 0 else float('inf'):.6g}"
        )


@dataclass(frozen=True, eq=False)
class CollapsedTensor:
    n: int
    matrix: np.ndarray | sparse.csr_matrix = field(repr=False)
    theta: float
    slice_count: int

    @property
    def is_sparse(self) -> bool:
        return sparse.issparse(self.matrix)

    def dense(self) -> np.ndarray:
        return self.matrix.toarray() if self.is_sparse else self.matrix


@dataclass(frozen=True, eq=False)
class ScoreMatrix:
    """Pairwise scores; ``provenance`` is ``centralized``, ``distributed-k<k>``,
    ``truncated-L<lmax>`` or ``svd-baseline``."""

    n: int
    matrix: np.ndarray = field(repr=False)
    provenance: str
    theta: float | None = None
    beta: float | None = None

    def pair(self, i: int, j: int) -> float:
        return float(self.matrix[i, j])


def recency_weights(T: int, theta: float) -> list[float]:
    """Weight ``(1 - theta)^(T - t)`` for slices ``t = 1..T``; the newest gets 1."""
    return [(1.0 - theta) ** (T - t) for t in range(1, T + 1)]


def collapse(tensor: SnapshotTensor, theta: float = DEFAULT_THETA) -> CollapsedTensor:
    """Sum the slices with geometric recency weights.

    Accumulation runs oldest to newest so the result matches a plain
    per-entry loop bit for bit.
    """
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    T, n = tensor.slice_count, tensor.n
    weights = recency_weights(T, theta)
    if n > DENSE_LIMIT:
        x = sparse.csr_matrix((n, n))
        for w, z in zip(weights, tensor.slices):
            x = x + w * sparse.csr_matrix(z, dtype=float)
        return CollapsedTensor(n, x.tocsr(), theta, T)
    x = np.zeros((n, n))
    for w, z in zip(weights, tensor.slices):
        x += w * z
    return CollapsedTensor(n, x, theta, T)


def _as_array(x) -> np.ndarray | sparse.spmatrix:
    return x.matrix if isinstance(x, CollapsedTensor) else x


def spectral_radius(x, iterations: int = POWER_ITERATIONS, rtol: float = POWER_RTOL) -> float:
    """Power-iteration estimate of the largest |eigenvalue| of a symmetric
    non-negative matrix, started from the all-ones vector."""
    x = _as_array(x)
    n = x.shape[0]
    if n == 0:
        return 0.0
    v = np.full(n, 1.0 / np.sqrt(n))
    rho = 0.0
    for _ in range(iterations):
        w = x @ v
        norm = float(np.linalg.norm(w))
        if norm == 0.0:
            return 0.0
        v = w / norm
        if rho > 0 and abs(norm - rho) <= rtol * norm:
            return norm
        rho = norm
    return rho


def validate_beta(x, beta: float, node: int | None = None) -> float:
    """Return the spectral-radius estimate, raising ``BetaTooLarge`` when
    ``beta * rho >= 1 - 1e-9``."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    rho = spectral_radius(x)
    if beta * rho >= 1.0 - BETA_MARGIN:
        raise BetaTooLarge(beta, rho, node)
    return rho


def _closed_form(x: np.ndarray, beta: float) -> np.ndarray:
    n = x.shape[0]
    if n == 0:
        return np.zeros((0, 0))
    # (I - bX)^-1 - I == (I - bX)^-1 bX; the right-hand form keeps small
    # entries accurate instead of subtracting from ~1.
    bx = beta * x
    try:
        s = np.linalg.solve(np.eye(n) - bx, bx)
    except np.linalg.LinAlgError as exc:
        raise BetaTooLarge(beta, spectral_radius(x)) from exc
    s = 0.5 * (s + s.T)
    s[s < SCORE_FLOOR] = 0.0
    return s


def katz_closed(x: CollapsedTensor, beta: float = DEFAULT_BETA) -> ScoreMatrix:
    if x.is_sparse:
        raise ValueError(f"closed-form Katz is limited to N <= {DENSE_LIMIT}; use katz_truncated")
    validate_beta(x.matrix, beta)
    return ScoreMatrix(x.n, _closed_form(x.matrix, beta), "centralized", x.theta, beta)


def katz_truncated(x: CollapsedTensor, beta: float = DEFAULT_BETA, lmax: int = 10) -> ScoreMatrix:
    """``sum_{l=1..lmax} beta^l X^l``. No convergence condition is needed."""
    if lmax < 1:
        raise ValueError("lmax must be >= 1")
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    m = x.matrix
    # Horner form: bX (I + bX (I + ... ))
    bx = beta * m
    if x.is_sparse:
        s = bx.copy()
        for _ in range(lmax - 1):
            s = bx + bx @ s
        s = s.toarray()
    else:
        s = bx.copy()
        for _ in range(lmax - 1):
            s = bx + bx @ s
    s = 0.5 * (s + s.T)
    return ScoreMatrix(x.n, s, f"truncated-L{lmax}", x.theta, beta)


@dataclass(frozen=True, eq=False)
class KHopView:
    """``neighbors[i]`` is the sorted array of nodes within ``k`` hops of ``i``
    (``i`` included) in the support graph of X."""

    k: int
    neighbors: tuple[np.ndarray, ...] = field(repr=False)

    def __getitem__(self, i: int) -> np.ndarray:
        return self.neighbors[i]


def khop_view(x: CollapsedTensor | np.ndarray, k: int) -> KHopView:
    if k not in (1, 2):
        raise ValueError(f"k must be 1 or 2, got {k}")
    m = _as_array(x)
    adj = sparse.csr_matrix(m > 0) if not sparse.issparse(m) else (m > 0).tocsr()
    reach = (adj + sparse.identity(adj.shape[0], format="csr", dtype=bool)).astype(bool)
    if k == 2:
        reach = (reach @ reach).astype(bool)
    reach = reach.tocsr()
    reach.sort_indices()
    neighbors = tuple(
        reach.indices[reach.indptr[i] : reach.indptr[i + 1]].astype(np.intp) for i in range(adj.shape[0])
    )
    return KHopView(k, neighbors)


def katz_distributed(x: CollapsedTensor, beta: float = DEFAULT_BETA, k: int = 2) -> ScoreMatrix:
    """Each node runs the closed form on its k-hop induced subgraph; the score
    of a pair is the larger of the two endpoint estimates."""
    if not beta > 0:
        raise ValueError(f"beta must be > 0, got {beta}")
    view = khop_view(x, k)
    m = x.dense()
    local = np.zeros_like(m)
    cache: dict[bytes, np.ndarray] = {}
    for i, idx in enumerate(view.neighbors):
        key = idx.tobytes()
        s_local = cache.get(key)
        if s_local is None:
            sub = m[np.ix_(idx, idx)]
            validate_beta(sub, beta, node=i)
            s_local = _closed_form(sub, beta)
            cache[key] = s_local
        pos = int(np.searchsorted(idx, i))
        local[i, idx] = s_local[pos]
    log.debug("distributed k=%d: %d distinct neighbourhood solves", k, len(cache))
    s = np.maximum(local, local.T)
    return ScoreMatrix(x.n, s, f"distributed-k{k}", x.theta, beta)


def score(x: CollapsedTensor, beta: float = DEFAULT_BETA, mode: str = "centralized", k: int = 2, lmax: int = 10) -> ScoreMatrix:
    """Dispatch on ``mode``: ``centralized``, ``distributed`` or ``truncated``."""
    if mode == "centralized":
        return katz_closed(x, beta)
    if mode == "distributed":
        return katz_distributed(x, beta, k)
    if mode == "truncated":
        return katz_truncated(x, beta, lmax)
    raise ValueError(f"unknown scoring mode {mode!r}")
