"""End-to-end helpers shared by the CLI and the acceptance suite: window
selection, scoring by mode name, and the on-disk score / report formats."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path
from typing import IO

import numpy as np

from .evaluation import CandidateSet, EvalReport, evaluate
from .katz import DEFAULT_BETA, DEFAULT_THETA, ScoreMatrix, collapse, score
from .trace_model import ContactEvent, SnapshotTensor, WindowConfig, build_tensor, ground_truth_slice

OBSERVATION_SECONDS = 4 * 3600
SCORES_HEADER = ("i", "j", "score")


@dataclass(frozen=True)
class ScoringSpec:
    theta: float = DEFAULT_THETA
    beta: float = DEFAULT_BETA
    mode: str = "centralized"  # centralized | distributed | truncated
    k: int = 2
    lmax: int = 10

    @classmethod
    def from_mode(cls, mode: str, **kw) -> "ScoringSpec":
        """Accepts ``distributed-k1`` / ``distributed-k2`` / ``truncated-L<n>`` shorthands."""
        if mode.startswith("distributed-k"):
            kw["k"] = int(mode.removeprefix("distributed-k"))
            mode = "distributed"
        elif mode.startswith("truncated-L"):
            kw["lmax"] = int(mode.removeprefix("truncated-L"))
            mode = "truncated"
        return cls(mode=mode, **kw)

    @property
    def label(self) -> str:
        if self.mode == "distributed":
            return f"distributed-k{self.k}"
        if self.mode == "truncated":
            return f"truncated-L{self.lmax}"
        return self.mode


def default_slice_count(slice_duration: float, observation: float = OBSERVATION_SECONDS) -> int:
    """Slices needed to cover the observation period (48 for 5-minute slices over 4 h)."""
    return max(1, int(observation // slice_duration))


def trace_horizon(events: list[ContactEvent]) -> float:
    return max((e.end for e in events), default=0.0)


def score_trace(events, n: int, cfg: WindowConfig, spec: ScoringSpec) -> tuple[SnapshotTensor, ScoreMatrix]:
    tensor = build_tensor(events, cfg, n)
    x = collapse(tensor, spec.theta)
    return tensor, score(x, spec.beta, spec.mode, k=spec.k, lmax=spec.lmax)


def evaluate_trace(
    events, n: int, cfg: WindowConfig, spec: ScoringSpec, regime: str = "all"
) -> tuple[ScoreMatrix, EvalReport]:
    tensor, scores = score_trace(events, n, cfg, spec)
    truth = ground_truth_slice(events, cfg, n)
    cand = CandidateSet.build(n, regime, tensor)
    return scores, evaluate(scores, truth, cand, run_params(cfg, spec))


def run_params(cfg: WindowConfig, spec: ScoringSpec) -> dict:
    return {
        "theta": spec.theta,
        "beta": spec.beta,
        "mode": spec.label,
        "k": spec.k if spec.mode == "distributed" else None,
        "lmax": spec.lmax if spec.mode == "truncated" else None,
        "slice_count": cfg.slice_count,
        "slice_duration": cfg.slice_duration,
        "origin": cfg.origin,
    }


# -- serialisation ---------------------------------------------------------------


def dump_json(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_scores(scores: ScoreMatrix | np.ndarray, stream: IO[str]) -> None:
    """``i,j,score`` rows for ``i < j``, 17 significant digits."""
    m = scores.matrix if isinstance(scores, ScoreMatrix) else scores
    stream.write(",".join(SCORES_HEADER) + "\n")
    iu, ju = np.triu_indices(m.shape[0], 1)
    for i, j, v in zip(iu.tolist(), ju.tolist(), m[iu, ju].tolist()):
        stream.write(f"{i},{j},{v:.17g}\n")


def read_scores(stream: IO[str], n: int) -> np.ndarray:
    reader = csv.reader(stream)
    header = next(reader, None)
    if tuple(header or ()) != SCORES_HEADER:
        raise ValueError(f"score file must start with {','.join(SCORES_HEADER)!r}")
    m = np.zeros((n, n))
    for lineno, row in enumerate(reader, start=2):
        if len(row) != 3:
            raise ValueError(f"expected 3 fields at line {lineno}")
        i, j, v = int(row[0]), int(row[1]), float(row[2])
        if not (0 <= i < n and 0 <= j < n) or i == j:
            raise ValueError(f"pair ({i}, {j}) out of range at line {lineno}")
        m[i, j] = m[j, i] = v
    return m


def write_points(points, header: tuple[str, str], path: Path) -> None:
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for a, b in points:
            fh.write(f"{a!r},{b!r}\n")


def write_report(report: EvalReport, outdir: Path) -> None:
    dump_json(report.to_dict(), outdir / "report.json")
    write_points(report.roc, ("false_positive_rate", "true_positive_rate"), outdir / "roc.csv")
    write_points(report.cdf, ("score", "cumulative_fraction"), outdir / "cdf.csv")


def report_schema() -> dict:
    return json.loads((Path(__file__).parent / "report_schema.json").read_text())
