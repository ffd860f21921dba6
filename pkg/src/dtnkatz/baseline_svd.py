"""Behaviour-similarity baseline.

Each node is summarised by an association matrix (time granule x location,
entries = fraction of the granule spent at the location). The top right
singular vectors of that matrix, weighted by their normalised singular values,
form the node's behaviour profile; two profiles are compared by the weighted
sum of absolute cosines between their vectors.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .katz import ScoreMatrix
from .trace_model import LocationVisit

DEFAULT_RANK = 3


def build_association(
    visits: Iterable[LocationVisit],
    granule: float,
    horizon: float,
    n_nodes: int,
    n_locations: int,
    origin: float = 0.0,
) -> np.ndarray:
    """Association matrices for every node, shape ``(n_nodes, G, P)``."""
    G = horizon / granule
    if not granule > 0 or abs(G - round(G)) > 1e-9:
        raise ValueError(f"granule {granule} must divide horizon {horizon}")
    G = int(round(G))
    a = np.zeros((n_nodes, G, n_locations))
    for v in visits:
        s, e = v.start - origin, v.end - origin
        if e <= 0 or s >= horizon or s == e:
            continue
        g0 = max(int(s // granule), 0)
        g1 = min(int(np.ceil(e / granule)), G)
        for g in range(g0, g1):
            lo, hi = g * granule, (g + 1) * granule
            overlap = min(e, hi) - max(s, lo)
            if overlap > 0:
                a[v.node, g, v.location] += overlap / granule
    # overlapping visits to one location must not count twice
    np.clip(a, 0.0, 1.0, out=a)
    return a


@dataclass(frozen=True, eq=False)
class BehaviorProfile:
    vectors: np.ndarray = field(repr=False)  # (r, P), rows unit-norm
    weights: np.ndarray = field(repr=False)  # (r,), sums to 1
    n_locations: int

    @property
    def rank(self) -> int:
        return len(self.weights)


def profile(a: np.ndarray, r: int = DEFAULT_RANK) -> BehaviorProfile:
    if r < 1:
        raise ValueError("r must be >= 1")
    n_loc = a.shape[1]
    if not a.any():
        return BehaviorProfile(np.zeros((0, n_loc)), np.zeros(0), n_loc)
    _, sv, vt = np.linalg.svd(a, full_matrices=False)
    tol = sv.max() * max(a.shape) * np.finfo(float).eps
    keep = min(r, int((sv > tol).sum()))
    sv, vt = sv[:keep], vt[:keep]
    return BehaviorProfile(vt, sv / sv.sum(), n_loc)


def similarity(p: BehaviorProfile, q: BehaviorProfile) -> float:
    """``sum_ab w_a^p w_b^q |v_a^p . v_b^q|``, in [0, 1]."""
    if p.n_locations != q.n_locations:
        raise ValueError(f"profile dimension mismatch: {p.n_locations} vs {q.n_locations}")
    if p.rank == 0 or q.rank == 0:
        return 0.0
    cos = np.abs(p.vectors @ q.vectors.T)
    return float(p.weights @ cos @ q.weights)


def baseline_scores(profiles: list[BehaviorProfile]) -> ScoreMatrix:
    n = len(profiles)
    s = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            s[i, j] = s[j, i] = similarity(profiles[i], profiles[j])
    return ScoreMatrix(n, s, "svd-baseline")


def baseline_from_visits(
    visits: Iterable[LocationVisit],
    granule: float,
    horizon: float,
    n_nodes: int,
    n_locations: int,
    origin: float = 0.0,
    r: int = DEFAULT_RANK,
) -> ScoreMatrix:
    assoc = build_association(visits, granule, horizon, n_nodes, n_locations, origin)
    return baseline_scores([profile(a, r) for a in assoc])
