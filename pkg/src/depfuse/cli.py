"""Command-line front end.

Subcommands: fuse, detect, detect-temporal, detect-dissim, rank, simulate,
eval. Exit codes: 0 success, 1 input error, 2 non-convergence under
--strict. Every report embeds the effective configuration and tool
version; fixed inputs plus a fixed seed yield byte-identical reports.
"""

from __future__ import annotations

import argparse
import itertools
import json
import sys
from pathlib import Path

from . import __version__
from .dependence import (DependenceConfig, dissimilarity_score,
                         debiased_aggregate, rank_sources)
from .fusion import FusionConfig, fuse_fixpoint, naive_vote
from .model import (Dataset, InputError, Mode, parse_observations, snapshot_at,
                    to_csv)
from .report import render_figures, write_report
from .simgen import (evaluate_dependence, evaluate_fusion, generate_scenario,
                     scenario_from_dict)
from .temporal import TemporalConfig, temporal_verdict

__all__ = ["main"]


class CLIError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # unknown flags are input errors, exit 1
        raise CLIError(message)


def _add_common(p: argparse.ArgumentParser):
    p.add_argument("--mode", choices=["snapshot", "temporal"], default=None,
                   help="expected dataset mode (checked against the input)")
    p.add_argument("--format", dest="fmt", choices=["json", "text"], default="json")
    p.add_argument("--out", default=None, help="report file (default: stdout)")
    p.add_argument("--figures", default=None, metavar="DIR",
                   help="also render charts and CSV tables into DIR")
    p.add_argument("--alpha", type=float, default=0.2, help="dependence prior")
    p.add_argument("--copy-rate", type=float, default=0.8)
    p.add_argument("--tau", type=float, default=0.5, help="detection threshold")
    p.add_argument("--min-overlap", type=int, default=3)
    p.add_argument("--flip-rate", type=float, default=0.9)
    p.add_argument("--n-floor", type=int, default=2)
    p.add_argument("--a0", type=float, default=0.8, help="prior source accuracy")
    p.add_argument("--max-iterations", type=int, default=100)
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--delta", type=int, default=1, help="temporal alignment window")
    p.add_argument("--at", type=int, default=None,
                   help="snapshot a temporal input at this time first")
    p.add_argument("--strict", action="store_true",
                   help="exit 2 when the fixpoint does not converge")


def _build_parser() -> _Parser:
    p = _Parser(prog="depfuse", description=__doc__)
    p.add_argument("--version", action="version", version=f"depfuse {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    for name, help_ in [
        ("fuse", "naive voting plus the dependence-aware fixpoint"),
        ("detect", "snapshot copy detection"),
        ("detect-temporal", "update-trace copy detection"),
        ("detect-dissim", "contrarian detection over ratings"),
        ("rank", "dependence-aware source ranking"),
    ]:
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("input", help="CSV or JSON observations")
        _add_common(sp)
        if name == "rank":
            sp.add_argument("-k", type=int, default=None, help="how many sources")

    sim = sub.add_parser("simulate", help="generate a synthetic scenario")
    sim.add_argument("spec", help="scenario spec JSON")
    sim.add_argument("--seed", type=int, default=None, required=False)
    sim.add_argument("--eval", action="store_true", dest="evaluate",
                     help="run detection + fusion and score them against the plant")
    sim.add_argument("--dump-data", default=None, metavar="CSV",
                     help="also write the generated observations")
    _add_common(sim)

    ev = sub.add_parser("eval", help="metrics from existing report files")
    ev.add_argument("--detected", required=True, help="dependence report JSON")
    ev.add_argument("--planted", required=True, help="planted-truth JSON from simulate")
    _add_common(ev)
    return p


def _configs(args) -> tuple[FusionConfig, DependenceConfig, TemporalConfig]:
    dep = DependenceConfig(prior=args.alpha, copy_rate=args.copy_rate,
                           tau=args.tau, min_overlap=args.min_overlap,
                           flip_rate=args.flip_rate)
    fus = FusionConfig(a0=args.a0, n_floor=args.n_floor,
                       max_iterations=args.max_iterations,
                       tolerance=args.tolerance, dependence=dep)
    tmp = TemporalConfig(delta=args.delta, dependence=dep)
    return fus, dep, tmp


def _config_echo(args) -> dict:
    return {
        "alpha": args.alpha, "copy_rate": args.copy_rate, "tau": args.tau,
        "min_overlap": args.min_overlap, "flip_rate": args.flip_rate,
        "n_floor": args.n_floor, "a0": args.a0,
        "max_iterations": args.max_iterations, "tolerance": args.tolerance,
        "delta": args.delta,
    }


def _load_dataset(path: str, mode: str | None, at: int | None) -> Dataset:
    p = Path(path)
    if not p.exists():
        raise CLIError(f"input not found: {path}")
    fmt = "json" if p.suffix.lower() == ".json" else "csv"
    ds = parse_observations(p.read_text(encoding="utf-8"), fmt=fmt,
                            mode=Mode(mode) if mode else None)
    if at is not None:
        ds = snapshot_at(ds, at)
    return ds


def _truth_payload(truth) -> dict:
    return {
        item: {
            "chosen": t.chosen,
            "tied": t.tied,
            "posterior": {v: p for v, p in sorted(t.posterior.items())},
        }
        for item, t in sorted(truth.items())
    }


def _accuracy_payload(acc) -> dict:
    return {
        s: {"accuracy": st.accuracy, "coverage": st.coverage,
            "prior_only": st.prior_only}
        for s, st in sorted(acc.items())
    }


def _verdict_payload(verdicts) -> list:
    rows = []
    for v in verdicts:
        ev = v.evidence
        if hasattr(ev, "kt"):
            ev_payload = {"kt": ev.kt, "kf": ev.kf, "kd": ev.kd,
                          "overlap": ev.overlap}
        else:
            ev_payload = dict(ev) if isinstance(ev, dict) else {}
        rows.append({
            "pair": list(v.pair), "kind": v.kind, "posterior": v.posterior,
            "direction": v.direction, "evidence": ev_payload,
            "flagged": v.flagged,
        })
    rows.sort(key=lambda r: (-r["posterior"], r["pair"]))
    return rows


def _snapshot_input(ds: Dataset, args) -> Dataset:
    if ds.mode is Mode.TEMPORAL:
        if args.at is not None:
            return ds  # already projected by _load_dataset
        raise CLIError("temporal input: pass --at TIME or use detect-temporal")
    return ds


def _cmd_fuse(args) -> tuple[dict, bool]:
    fus, dep, _ = _configs(args)
    ds = _snapshot_input(_load_dataset(args.input, args.mode, args.at), args)
    naive = naive_vote(ds)
    result = fuse_fixpoint(ds, fus)
    report = {
        "report": "fusion",
        "items": _truth_payload(result.truth),
        "naive": _truth_payload(naive),
        "sources": _accuracy_payload(result.accuracy),
        "pairs": _verdict_payload(result.verdicts),
        "fixpoint": {"iterations": result.iterations, "converged": result.converged},
    }
    return report, result.converged


def _cmd_detect(args) -> tuple[dict, bool]:
    fus, dep, _ = _configs(args)
    ds = _snapshot_input(_load_dataset(args.input, args.mode, args.at), args)
    result = fuse_fixpoint(ds, fus)
    report = {
        "report": "dependence",
        "pairs": _verdict_payload(result.verdicts),
        "sources": _accuracy_payload(result.accuracy),
        "fixpoint": {"iterations": result.iterations, "converged": result.converged},
    }
    return report, result.converged


def _cmd_detect_temporal(args) -> tuple[dict, bool]:
    fus, dep, tmp = _configs(args)
    ds = _load_dataset(args.input, args.mode or "temporal", None)
    if ds.mode is not Mode.TEMPORAL:
        raise CLIError("detect-temporal requires temporal input (time column)")
    from .model import latest_snapshot
    snap_result = fuse_fixpoint(latest_snapshot(ds), fus)
    rows = []
    for s1, s2 in itertools.combinations(ds.sources, 2):
        v = temporal_verdict(ds, s1, s2, tmp, fus, snapshot_result=snap_result)
        rows.append({
            "pair": list(v.pair), "posterior": v.posterior,
            "direction": v.direction, "lag": v.lag,
            "classification": v.classification,
            "channels": dict(sorted(v.channels.items())),
            "flagged": v.classification in ("Copier", "LazyCopier"),
        })
    rows.sort(key=lambda r: (-r["posterior"], r["pair"]))
    return {"report": "temporal-dependence", "pairs": rows}, True


def _cmd_detect_dissim(args) -> tuple[dict, bool]:
    _, dep, _ = _configs(args)
    ds = _snapshot_input(_load_dataset(args.input, args.mode, args.at), args)
    verdicts = [dissimilarity_score(ds, r1, r2, dep)
                for r1, r2 in itertools.combinations(ds.sources, 2)]
    consensus = debiased_aggregate(ds, verdicts)
    return {
        "report": "dissimilarity",
        "pairs": _verdict_payload(verdicts),
        "consensus": consensus,
    }, True


def _cmd_rank(args) -> tuple[dict, bool]:
    fus, dep, _ = _configs(args)
    ds = _snapshot_input(_load_dataset(args.input, args.mode, args.at), args)
    result = fuse_fixpoint(ds, fus)
    profiles = {s: (st.accuracy, float(st.coverage))
                for s, st in result.accuracy.items()}
    k = args.k if args.k is not None else len(profiles)
    ranked = rank_sources(profiles, result.verdicts, max(k, 1))
    return {
        "report": "ranking",
        "ranking": [{"source": s, "score": sc} for s, sc in ranked],
        "sources": _accuracy_payload(result.accuracy),
    }, result.converged


def _cmd_simulate(args) -> tuple[dict, bool]:
    fus, dep, tmp = _configs(args)
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise CLIError(f"spec not found: {args.spec}")
    try:
        payload = json.loads(spec_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CLIError(f"bad scenario spec: {e}")
    if args.seed is not None:
        payload["seed"] = args.seed
    if "seed" not in payload:
        raise CLIError("simulate needs a seed: pass --seed or put one in the spec")
    try:
        spec = scenario_from_dict(payload)
    except (TypeError, ValueError) as e:
        raise CLIError(f"bad scenario spec: {e}")
    dataset, planted = generate_scenario(spec)
    if args.dump_data:
        Path(args.dump_data).write_text(to_csv(dataset), encoding="utf-8")
    report: dict = {
        "report": "simulation",
        "scenario": {"hash": spec.digest(), "seed": spec.seed,
                     "items": spec.items, "sources": len(spec.sources),
                     "mode": spec.mode},
        "planted": {
            "edges": [{"source": e.source, "target": e.target, "kind": e.kind,
                       "rate": e.rate, "lag": e.lag} for e in planted.edges],
        },
        "observations": len(dataset),
    }
    converged = True
    if args.evaluate:
        snap = dataset
        if dataset.mode is Mode.TEMPORAL:
            from .model import latest_snapshot
            snap = latest_snapshot(dataset)
        result = fuse_fixpoint(snap, fus)
        naive = naive_vote(snap)
        converged = result.converged
        report["dependence_eval"] = evaluate_dependence(
            result.verdicts, planted, snap.sources, tau=dep.tau)
        report["fusion_eval"] = evaluate_fusion(result.truth, naive, planted)
        report["pairs"] = _verdict_payload(result.verdicts)
        report["sources"] = _accuracy_payload(result.accuracy)
    return report, converged


def _cmd_eval(args) -> tuple[dict, bool]:
    det_path, plant_path = Path(args.detected), Path(args.planted)
    for p in (det_path, plant_path):
        if not p.exists():
            raise CLIError(f"input not found: {p}")
    try:
        detected = json.loads(det_path.read_text(encoding="utf-8"))
        planted_doc = json.loads(plant_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise CLIError(f"bad report JSON: {e}")

    from .simgen import PlantedEdge, PlantedTruth

    class _V:  # minimal verdict view over report rows
        def __init__(self, row):
            self.pair = tuple(row["pair"])
            self.kind = row.get("kind", "similarity")
            self.posterior = row["posterior"]
            self.direction = row.get("direction", 0.0)

    rows = detected.get("pairs", [])
    verdicts = [_V(r) for r in rows]
    edges = tuple(PlantedEdge(**e) for e in planted_doc.get("planted", planted_doc)
                  .get("edges", []))
    planted = PlantedTruth(values={}, edges=edges)
    roster = sorted({s for r in rows for s in r["pair"]})
    report = {
        "report": "evaluation",
        "dependence_eval": evaluate_dependence(verdicts, planted, roster, tau=args.tau),
    }
    return report, True


_COMMANDS = {
    "fuse": _cmd_fuse,
    "detect": _cmd_detect,
    "detect-temporal": _cmd_detect_temporal,
    "detect-dissim": _cmd_detect_dissim,
    "rank": _cmd_rank,
    "simulate": _cmd_simulate,
    "eval": _cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        report, converged = _COMMANDS[args.command](args)
    except CLIError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except InputError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    report["config"] = _config_echo(args)
    report["version"] = __version__
    payload = write_report(report, args.out, fmt=args.fmt)
    if args.out is None:
        sys.stdout.write(payload)
    if args.figures:
        render_figures(report, args.figures)
    if args.strict and not converged:
        print("warning: fixpoint did not converge", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
