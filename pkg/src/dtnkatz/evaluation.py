"""Evaluate a score matrix against the adjacency of period T+1.

The candidate universe is every unordered pair ``i < j`` over the registered
nodes (``regime="all"``), or only the pairs never linked during the observed
slices (``regime="new"``).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .katz import BetaTooLarge, ScoreMatrix, collapse, score
from .trace_model import SnapshotTensor

REGIMES = ("all", "new")


class NoPositives(ValueError):
    pass


class NoNegatives(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class CandidateSet:
    """Boolean mask over the strict upper triangle of an ``n x n`` matrix."""

    n: int
    regime: str
    mask: np.ndarray = field(repr=False)

    @classmethod
    def build(cls, n: int, regime: str = "all", tensor: SnapshotTensor | None = None) -> "CandidateSet":
        if regime not in REGIMES:
            raise ValueError(f"regime must be one of {REGIMES}, got {regime!r}")
        mask = np.triu(np.ones((n, n), dtype=bool), k=1)
        if regime == "new":
            if tensor is None:
                raise ValueError("the new-links regime needs the observed tensor")
            mask &= ~tensor.support()
        return cls(n, regime, mask)

    def pairs(self) -> tuple[np.ndarray, np.ndarray]:
        """Row-major (lexicographic) ``(i, j)`` index arrays."""
        return np.nonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())


def _as_matrix(scores) -> np.ndarray:
    return scores.matrix if isinstance(scores, ScoreMatrix) else np.asarray(scores)


def _gather(scores, truth, cand: CandidateSet) -> tuple[np.ndarray, np.ndarray]:
    s = _as_matrix(scores)
    t = np.asarray(truth)
    if s.shape != (cand.n, cand.n) or t.shape != (cand.n, cand.n):
        raise ValueError(f"shape mismatch: scores {s.shape}, truth {t.shape}, candidates n={cand.n}")
    i, j = cand.pairs()
    return s[i, j].astype(float), t[i, j] > 0


@dataclass(frozen=True)
class RocCurve:
    points: list[tuple[float, float]]
    auc: float


def roc_from_labels(values: np.ndarray, labels: np.ndarray) -> RocCurve:
    """ROC over grouped thresholds: pairs sharing a score enter together."""
    pos = int(labels.sum())
    neg = int(labels.size - pos)
    if pos == 0:
        raise NoPositives("no positive pairs in the candidate set")
    if neg == 0:
        raise NoNegatives("no negative pairs in the candidate set")
    order = np.argsort(-values, kind="stable")
    v, lab = values[order], labels[order]
    tp = np.cumsum(lab)
    fp = np.cumsum(~lab)
    # last index of each tie group
    ends = np.r_[np.nonzero(np.diff(v))[0], v.size - 1]
    tpr = np.r_[0.0, tp[ends] / pos]
    fpr = np.r_[0.0, fp[ends] / neg]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2.0))
    return RocCurve(list(zip(fpr.tolist(), tpr.tolist())), auc)


def roc(scores, truth, cand: CandidateSet) -> RocCurve:
    return roc_from_labels(*_gather(scores, truth, cand))


def mann_whitney_auc(values: Sequence[float], labels: Sequence[bool]) -> float:
    """P(score_pos > score_neg) + P(equal)/2 by explicit enumeration."""
    pos = [v for v, l in zip(values, labels) if l]
    neg = [v for v, l in zip(values, labels) if not l]
    wins = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return wins / (len(pos) * len(neg))


@dataclass(frozen=True)
class TopL:
    l_links: int
    hits: int
    ratio: float | None
    tie_at_cutoff: bool


def top_l_from_labels(values: np.ndarray, labels: np.ndarray) -> TopL:
    """``values``/``labels`` must be in lexicographic pair order; that order
    breaks ties at the cutoff."""
    L = int(labels.sum())
    if L == 0:
        return TopL(0, 0, None, False)
    order = np.argsort(-values, kind="stable")
    hits = int(labels[order[:L]].sum())
    tie = bool(L < values.size and values[order[L - 1]] == values[order[L]])
    return TopL(L, hits, hits / L, tie)


def top_l_ratio(scores, truth, cand: CandidateSet) -> TopL:
    return top_l_from_labels(*_gather(scores, truth, cand))


def score_cdf(scores, cand: CandidateSet) -> list[tuple[float, float]]:
    """Empirical CDF of the strictly positive candidate scores, one point per
    distinct value."""
    s = _as_matrix(scores)
    i, j = cand.pairs()
    v = np.sort(s[i, j][s[i, j] > 0])
    if v.size == 0:
        return []
    uniq = np.unique(v)
    frac = np.searchsorted(v, uniq, side="right") / v.size
    return list(zip(uniq.tolist(), frac.tolist()))


@dataclass(frozen=True)
class EvalReport:
    roc: list[tuple[float, float]]
    auc: float
    l_links: int
    top_l_hits: int
    top_l_ratio: float | None
    tie_at_cutoff: bool
    cdf: list[tuple[float, float]]
    regime: str
    candidates: int
    params: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["roc"] = [list(p) for p in self.roc]
        d["cdf"] = [list(p) for p in self.cdf]
        return d


def evaluate(scores, truth, cand: CandidateSet, params: dict | None = None) -> EvalReport:
    values, labels = _gather(scores, truth, cand)
    curve = roc_from_labels(values, labels)
    top = top_l_from_labels(values, labels)
    if params is None and isinstance(scores, ScoreMatrix):
        params = {"provenance": scores.provenance, "theta": scores.theta, "beta": scores.beta}
    return EvalReport(
        roc=curve.points,
        auc=curve.auc,
        l_links=top.l_links,
        top_l_hits=top.hits,
        top_l_ratio=top.ratio,
        tie_at_cutoff=top.tie_at_cutoff,
        cdf=score_cdf(scores, cand),
        regime=cand.regime,
        candidates=len(cand),
        params=dict(params or {}),
    )


@dataclass(frozen=True)
class SweepRow:
    theta: float
    beta: float
    auc: float | None
    top_l_ratio: float | None
    error: str | None = None


def sweep(
    tensor: SnapshotTensor,
    truth: np.ndarray,
    thetas: Sequence[float],
    betas: Sequence[float],
    mode: str = "distributed",
    regime: str = "all",
    k: int = 2,
    lmax: int = 10,
) -> list[SweepRow]:
    """Evaluate every (theta, beta) cell; scoring failures are recorded in the
    row instead of aborting the grid."""
    cand = CandidateSet.build(tensor.n, regime, tensor)
    rows = []
    for theta in thetas:
        x = collapse(tensor, theta)
        for beta in betas:
            try:
                s = score(x, beta, mode, k=k, lmax=lmax)
                values, labels = _gather(s, truth, cand)
                auc = roc_from_labels(values, labels).auc
                ratio = top_l_from_labels(values, labels).ratio
            except (BetaTooLarge, NoPositives, NoNegatives) as exc:
                rows.append(SweepRow(theta, beta, None, None, f"{type(exc).__name__}: {exc}"))
                continue
            rows.append(SweepRow(theta, beta, auc, ratio))
    return rows


@dataclass(frozen=True)
class CompareRow:
    method: str
    granule: float
    auc: float | None
    top_l_ratio: float | None


def compare_rows(
    granule: float, scored: dict[str, ScoreMatrix | np.ndarray], truth: np.ndarray, cand: CandidateSet
) -> list[CompareRow]:
    """One row per method plus a ``gap`` row (first method minus second)."""
    rows = []
    for method, s in scored.items():
        values, labels = _gather(s, truth, cand)
        auc = roc_from_labels(values, labels).auc
        rows.append(CompareRow(method, granule, auc, top_l_from_labels(values, labels).ratio))
    if len(rows) == 2:
        a, b = rows

        def diff(x, y):
            return None if x is None or y is None else x - y

        rows.append(CompareRow("gap", granule, diff(a.auc, b.auc), diff(a.top_l_ratio, b.top_l_ratio)))
    return rows

