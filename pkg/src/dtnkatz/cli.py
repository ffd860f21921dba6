"""Command-line entry point.

Every command writes into ``<out>/<command>-<hash>/`` where the hash covers the
command's settings and the digests of its input files, so identical runs land
in the same directory with byte-identical contents. The directory is printed on
stdout.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import logging
import sys
from pathlib import Path

from . import tvc
from .baseline_svd import DEFAULT_RANK, baseline_from_visits
from .evaluation import CandidateSet, NoNegatives, NoPositives, compare_rows, evaluate, sweep
from .ingestion import TraceFormatError, parse_contacts, parse_visits, write_contacts, write_visits
from .katz import DEFAULT_BETA, DEFAULT_THETA, BetaTooLarge, collapse, katz_distributed
from .pipeline import (
    OBSERVATION_SECONDS,
    ScoringSpec,
    default_slice_count,
    dump_json,
    read_scores,
    run_params,
    score_trace,
    trace_horizon,
    write_report,
    write_scores,
)
from .trace_model import WindowConfig, build_tensor, ground_truth_slice

log = logging.getLogger("dtnkatz")

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_BETA = 4
EXIT_EVAL = 5

DEFAULT_THETAS = [round(0.1 * i, 1) for i in range(10)]
DEFAULT_BETAS = [1e-4, 1e-3, 1e-2]
DEFAULT_GRANULES = [300.0, 600.0, 1800.0, 3600.0]

MODES = ("centralized", "distributed", "distributed-k1", "distributed-k2", "truncated")


class InputError(Exception):
    pass


class UsageError(Exception):
    pass


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _run_dir(args: argparse.Namespace, command: str, inputs: dict[str, Path | None]) -> Path:
    settings = {k: v for k, v in vars(args).items() if k not in ("out", "func", "verbose") and k not in inputs}
    settings["inputs"] = {k: (_digest(p) if p else None) for k, p in inputs.items()}
    blob = json.dumps(settings, sort_keys=True, default=str)
    run = Path(args.out) / f"{command}-{hashlib.sha256(blob.encode()).hexdigest()[:12]}"
    run.mkdir(parents=True, exist_ok=True)
    return run


def _require(path: Path | None, what: str) -> Path:
    if path is None:
        raise InputError(f"missing {what}")
    if not path.is_file():
        raise InputError(f"{what} not found: {path}")
    return path


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _load_contacts(path: Path):
    with _require(path, "contacts file").open(encoding="utf-8", newline="") as fh:
        return parse_contacts(fh)


def _window(args) -> WindowConfig:
    return WindowConfig(args.origin, args.slice, args.slices or default_slice_count(args.slice))


def _check_horizon(cfg: WindowConfig, events) -> None:
    # The file carries no explicit horizon, so the last contact end is only a
    # lower bound on coverage: warn instead of refusing.
    need = cfg.end + cfg.slice_duration
    have = trace_horizon(events)
    if have < need:
        log.warning(
            "last contact ends at %g s but evaluation uses (T+1)*D = %g s from origin %g",
            have, need - cfg.origin, cfg.origin,
        )


def _spec(args) -> ScoringSpec:
    spec = ScoringSpec.from_mode(args.mode, theta=args.theta, beta=args.beta, k=args.khop, lmax=args.lmax)
    if spec.mode == "distributed" and spec.k not in (1, 2):
        raise UsageError("--khop must be 1 or 2")
    return spec


# -- commands ----------------------------------------------------------------------------


def _tvc_params(args) -> tvc.TvcParams:
    values: dict = {}
    fields = {f.name: f for f in dataclasses.fields(tvc.TvcParams)}
    if args.config:
        for lineno, line in enumerate(_require(Path(args.config), "config file").read_text().splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            key, sep, value = line.partition("=")
            key = key.strip().replace("-", "_")
            if not sep or key not in fields or key == "community_origins":
                raise InputError(f"bad config entry {line!r} at line {lineno}")
            values[key] = value.strip()
    for name in fields:
        flag = getattr(args, name, None)
        if flag is not None:
            values[name] = flag
    typed = {}
    for name, value in values.items():
        kind = int if name in ("node_count", "community_count", "seed") else float
        try:
            typed[name] = kind(value)
        except ValueError:
            raise InputError(f"{name}: expected {kind.__name__}, got {value!r}")
    try:
        return tvc.TvcParams(**typed)
    except ValueError as exc:
        raise UsageError(f"invalid generator parameters: {exc}")


def cmd_generate(args) -> Path:
    params = _tvc_params(args)
    events, visits = tvc.generate(params)
    run = _run_dir(args, "generate", {"config": Path(args.config) if args.config else None})
    nodes, locs = tvc.node_registry(params), tvc.location_registry(params)
    with (run / "contacts.csv").open("w", newline="") as fh:
        write_contacts(events, nodes, fh)
    with (run / "visits.csv").open("w", newline="") as fh:
        write_visits(visits, nodes, locs, fh)
    dump_json(dataclasses.asdict(params), run / "params.json")
    log.info("generated %d contacts and %d visits", len(events), len(visits))
    return run


def cmd_score(args) -> Path:
    events, reg = _load_contacts(args.contacts)
    cfg = _window(args)
    spec = _spec(args)
    _, scores = score_trace(events, reg.count, cfg, spec)
    run = _run_dir(args, "score", {"contacts": args.contacts})
    with (run / "scores.csv").open("w", newline="") as fh:
        write_scores(scores, fh)
    dump_json({**run_params(cfg, spec), "nodes": list(reg.ids)}, run / "params.json")
    return run


def cmd_eval(args) -> Path:
    events, reg = _load_contacts(args.contacts)
    n = reg.count
    cfg = _window(args)
    _check_horizon(cfg, events)
    tensor = build_tensor(events, cfg, n)
    if args.scores:
        with _require(args.scores, "scores file").open() as fh:
            try:
                matrix = read_scores(fh, n)
            except ValueError as exc:
                raise InputError(f"{args.scores}: {exc}")
        params = {"scores": args.scores.name, "slice_count": cfg.slice_count, "slice_duration": cfg.slice_duration, "origin": cfg.origin}
    else:
        spec = _spec(args)
        _, sm = score_trace(events, n, cfg, spec)
        matrix, params = sm.matrix, run_params(cfg, spec)
    truth = ground_truth_slice(events, cfg, n)
    report = evaluate(matrix, truth, CandidateSet.build(n, args.regime, tensor), params)
    run = _run_dir(args, "eval", {"contacts": args.contacts, "scores": args.scores})
    write_report(report, run)
    ratio = "n/a" if report.top_l_ratio is None else f"{report.top_l_ratio:.4f}"
    log.info("auc=%.4f top-L=%d/%d (%s)", report.auc, report.top_l_hits, report.l_links, ratio)
    return run


def _fmt(x) -> str:
    return "" if x is None else repr(x)


def cmd_compare(args) -> Path:
    if args.visits is None:
        raise InputError("compare needs --visits: the SVD behaviour baseline is built from location visits")
    _require(args.visits, "visits file (required by the SVD baseline)")
    events, reg = _load_contacts(args.contacts)
    with args.visits.open(encoding="utf-8", newline="") as fh:
        visits, reg, locs = parse_visits(fh, reg)
    n = reg.count
    rows = []
    for granule in args.granules:
        T = int(round(args.horizon / granule))
        if T < 1 or abs(T * granule - args.horizon) > 1e-9:
            raise UsageError(f"granule {granule:g} does not divide horizon {args.horizon:g}")
        cfg = WindowConfig(args.origin, granule, T)
        _check_horizon(cfg, events)
        tensor = build_tensor(events, cfg, n)
        truth = ground_truth_slice(events, cfg, n)
        cand = CandidateSet.build(n, args.regime, tensor)
        katz = katz_distributed(collapse(tensor, args.theta), args.beta, args.khop)
        base = baseline_from_visits(visits, granule, args.horizon, n, locs.count, args.origin, args.rank)
        rows.extend(compare_rows(granule, {"katz": katz, "svd": base}, truth, cand))
    run = _run_dir(args, "compare", {"contacts": args.contacts, "visits": args.visits})
    with (run / "compare.csv").open("w", newline="") as fh:
        fh.write("method,granule,auc,top_l_ratio\n")
        for r in rows:
            fh.write(f"{r.method},{r.granule:g},{_fmt(r.auc)},{_fmt(r.top_l_ratio)}\n")
    return run


def cmd_sweep(args) -> Path:
    events, reg = _load_contacts(args.contacts)
    cfg = _window(args)
    _check_horizon(cfg, events)
    spec = _spec(args)
    tensor = build_tensor(events, cfg, reg.count)
    truth = ground_truth_slice(events, cfg, reg.count)
    rows = sweep(tensor, truth, args.thetas, args.betas, spec.mode, args.regime, k=spec.k, lmax=spec.lmax)
    run = _run_dir(args, "sweep", {"contacts": args.contacts})
    with (run / "sweep.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["theta", "beta", "auc", "top_l_ratio", "error"])
        for r in rows:
            w.writerow([repr(r.theta), repr(r.beta), _fmt(r.auc), _fmt(r.top_l_ratio), r.error or ""])
    return run


# -- parser ------------------------------------------------------------------------------


def _add_window(p: argparse.ArgumentParser) -> None:
    p.add_argument("--slice", type=float, default=300.0, help="slice duration D in seconds")
    p.add_argument("--slices", type=int, default=None, help=f"slice count T (default: cover {OBSERVATION_SECONDS} s)")
    p.add_argument("--origin", type=float, default=0.0, help="start of slice 1, trace seconds")


def _add_scoring(p: argparse.ArgumentParser) -> None:
    p.add_argument("--theta", type=float, default=DEFAULT_THETA)
    p.add_argument("--beta", type=float, default=DEFAULT_BETA)
    p.add_argument("--mode", choices=MODES, default="centralized")
    p.add_argument("--khop", type=int, choices=(1, 2), default=2, help="neighbourhood depth for --mode distributed")
    p.add_argument("--lmax", type=int, default=10, help="series length for --mode truncated")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dtnkatz", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, func, help):
        p = sub.add_parser(name, help=help)
        p.add_argument("--out", type=Path, default=Path("runs"), help="base output directory")
        p.set_defaults(func=func)
        return p

    g = command("generate", cmd_generate, "synthesize contacts.csv / visits.csv with the TVC mobility model")
    g.add_argument("--config", help="key=value file with TvcParams fields")
    for flag, name, kind in [
        ("--area-edge", "area_edge", float),
        ("--nodes", "node_count", int),
        ("--range", "radio_range", float),
        ("--communities", "community_count", int),
        ("--v-min", "v_min", float),
        ("--v-max", "v_max", float),
        ("--p-switch", "p_switch", float),
        ("--p-roam", "p_roam", float),
        ("--community-edge", "community_edge", float),
        ("--epoch", "epoch_duration", float),
        ("--tick", "tick", float),
        ("--duration", "duration", float),
        ("--seed", "seed", int),
    ]:
        g.add_argument(flag, dest=name, type=kind, default=None)

    s = command("score", cmd_score, "compute Katz scores from a contact trace")
    s.add_argument("--contacts", type=Path, required=True)
    _add_window(s)
    _add_scoring(s)

    e = command("eval", cmd_eval, "evaluate scores against period T+1")
    e.add_argument("--contacts", type=Path, required=True)
    e.add_argument("--scores", type=Path, default=None, help="scores.csv from 'score'; computed inline when omitted")
    e.add_argument("--regime", choices=("all", "new"), default="all")
    _add_window(e)
    _add_scoring(e)

    c = command("compare", cmd_compare, "distributed Katz vs the SVD behaviour baseline across granules")
    c.add_argument("--contacts", type=Path, required=True)
    c.add_argument("--visits", type=Path, default=None)
    c.add_argument("--granules", type=_float_list, default=DEFAULT_GRANULES)
    c.add_argument("--horizon", type=float, default=float(OBSERVATION_SECONDS))
    c.add_argument("--origin", type=float, default=0.0)
    c.add_argument("--theta", type=float, default=DEFAULT_THETA)
    c.add_argument("--beta", type=float, default=DEFAULT_BETA)
    c.add_argument("--khop", type=int, choices=(1, 2), default=2)
    c.add_argument("--rank", type=int, default=DEFAULT_RANK)
    c.add_argument("--regime", choices=("all", "new"), default="all")

    w = command("sweep", cmd_sweep, "AUC / top-L over a theta x beta grid")
    w.add_argument("--contacts", type=Path, required=True)
    w.add_argument("--thetas", type=_float_list, default=DEFAULT_THETAS)
    w.add_argument("--betas", type=_float_list, default=DEFAULT_BETAS)
    w.add_argument("--regime", choices=("all", "new"), default="all")
    _add_window(w)
    _add_scoring(w)
    w.set_defaults(mode="distributed")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        run = args.func(args)
    except UsageError as exc:
        print(f"dtnkatz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, TraceFormatError, IndexError, OverflowError) as exc:
        print(f"dtnkatz: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        if isinstance(exc, BetaTooLarge):
            print(f"dtnkatz: {exc}", file=sys.stderr)
            return EXIT_BETA
        if isinstance(exc, (NoPositives, NoNegatives)):
            print(f"dtnkatz: evaluation error: {exc}", file=sys.stderr)
            return EXIT_EVAL
        print(f"dtnkatz: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(run)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
