"""Seeded synthetic scenarios with planted truth, plus evaluation.

Scenario rosters mix independents, copiers, contrarians, and slow
providers over a DAG of influence. Per-source randomness comes from a
substream keyed by (master seed, source index), so adding a source never
perturbs the data of existing ones.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, asdict

import numpy as np

from .dependence import DependenceVerdict
from .fusion import TruthAssignment
from .model import Dataset, Observation

__all__ = [
    "SourceSpec",
    "ScenarioSpec",
    "PlantedEdge",
    "PlantedTruth",
    "generate_scenario",
    "evaluate_dependence",
    "evaluate_fusion",
    "scenario_from_dict",
]

_TRUTH_STREAM = 10**9


@dataclass(frozen=True)
class SourceSpec:
    id: str
    role: str = "independent"   # independent | copier | contrarian | slow
    accuracy: float = 0.8
    coverage: float = 1.0
    target: str | None = None
    copy_rate: float = 0.9
    flip_rate: float = 0.9
    lag: int = 1                # time units a copier trails its target
    delay: int = 0              # time units a slow provider trails the truth

    def __post_init__(self):
        if self.role not in ("independent", "copier", "contrarian", "slow"):
            raise ValueError(f"unknown role {self.role!r}")
        if self.role in ("copier", "contrarian") and not self.target:
            raise ValueError(f"{self.id}: role {self.role} needs a target")
        if not 0.0 < self.accuracy < 1.0:
            raise ValueError(f"{self.id}: accuracy must be in (0, 1)")
        if not 0.0 <= self.coverage <= 1.0:
            raise ValueError(f"{self.id}: coverage must be in [0, 1]")


@dataclass(frozen=True)
class ScenarioSpec:
    items: int
    domain_size: int
    sources: tuple[SourceSpec, ...]
    seed: int
    mode: str = "snapshot"          # snapshot | temporal
    time_steps: int = 1
    change_prob: float = 0.0        # per item per step, temporal only
    subsample_rate: float = 0.0     # drop rate for non-final updates

    def __post_init__(self):
        if self.items < 0 or self.domain_size < 1:
            raise ValueError("need items >= 0 and domain_size >= 1")
        ids = [s.id for s in self.sources]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate source ids")
        known = set(ids)
        for s in self.sources:
            if s.target is not None and s.target not in known:
                raise ValueError(f"{s.id}: target {s.target} not in roster")
        self._check_acyclic()

    def _check_acyclic(self):
        edges = {s.id: s.target for s in self.sources if s.target}
        for start in edges:
            seen = {start}
            cur = edges.get(start)
            while cur is not None:
                if cur in seen:
                    raise ValueError(f"influence cycle through {cur}")
                seen.add(cur)
                cur = edges.get(cur)

    def digest(self) -> str:
        payload = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(payload).hexdigest()[:16]


@dataclass(frozen=True)
class PlantedEdge:
    source: str     # the dependent party (copier / contrarian)
    target: str
    kind: str       # similarity | dissimilarity
    rate: float
    lag: int = 0


@dataclass(frozen=True)
class PlantedTruth:
    values: dict                    # item -> value | item -> [(time, value), ...]
    edges: tuple[PlantedEdge, ...]

    def value_at(self, item: str, t: int | None = None) -> str:
        v = self.values[item]
        if isinstance(v, str):
            return v
        # list of (time, value); current value at time t (default: latest)
        best = v[0][1]
        for (tt, vv) in v:
            if t is None or tt <= t:
                best = vv
        return best


def scenario_from_dict(data: dict) -> ScenarioSpec:
    sources = tuple(SourceSpec(**s) for s in data.get("sources", []))
    fields = {k: v for k, v in data.items() if k != "sources"}
    return ScenarioSpec(sources=sources, **fields)


def _topological(sources: tuple[SourceSpec, ...]) -> list[SourceSpec]:
    by_id = {s.id: s for s in sources}
    order: list[SourceSpec] = []
    done: set[str] = set()

    def visit(s: SourceSpec):
        if s.id in done:
            return
        if s.target and s.target in by_id:
            visit(by_id[s.target])
        done.add(s.id)
        order.append(s)

    for s in sources:
        visit(s)
    return order


def _draw_value(rng: np.random.Generator, dom: list[str], truth: str,
                accuracy: float) -> str:
    if rng.random() < accuracy:
        return truth
    wrong = [v for v in dom if v != truth]
    if not wrong:
        return truth
    return wrong[rng.integers(len(wrong))]


def generate_scenario(spec: ScenarioSpec) -> tuple[Dataset, PlantedTruth]:
    """Deterministically realize a scenario: observations plus ground truth."""
    items = [f"i{j:04d}" for j in range(spec.items)]
    domains = {it: [f"{it}.v{k}" for k in range(spec.domain_size)] for it in items}
    truth_rng = np.random.default_rng([spec.seed, _TRUTH_STREAM])
    temporal = spec.mode == "temporal"

    truth_values: dict = {}
    for it in items:
        dom = domains[it]
        first = dom[truth_rng.integers(len(dom))]
        if not temporal:
            truth_values[it] = first
            continue
        hist = [(0, first)]
        for t in range(1, spec.time_steps):
            if truth_rng.random() < spec.change_prob:
                others = [v for v in dom if v != hist[-1][1]]
                if others:
                    hist.append((t, others[truth_rng.integers(len(others))]))
        truth_values[it] = hist

    planted_edges = tuple(
        PlantedEdge(source=s.id, target=s.target, kind=("dissimilarity" if
                    s.role == "contrarian" else "similarity"),
                    rate=(s.flip_rate if s.role == "contrarian" else s.copy_rate),
                    lag=(s.lag if s.role == "copier" else 0))
        for s in spec.sources if s.role in ("copier", "contrarian") and s.target
    )
    planted = PlantedTruth(values=truth_values, edges=planted_edges)

    index = {s.id: i for i, s in enumerate(spec.sources)}
    produced: dict[str, dict[str, list[tuple[int, str]]]] = {}
    observations: list[Observation] = []
    for src in _topological(spec.sources):
        rng = np.random.default_rng([spec.seed, index[src.id]])
        # separate stream: dropping observations must not perturb the rest
        sub_rng = np.random.default_rng([spec.seed, index[src.id], 1])
        n_cov = int(round(src.coverage * len(items)))
        cov_idx = sorted(rng.choice(len(items), size=n_cov, replace=False)) if n_cov else []
        covered = [items[j] for j in cov_idx]
        mine: dict[str, list[tuple[int, str]]] = {}
        for it in covered:
            dom = domains[it]
            if not temporal:
                truth = planted.value_at(it)
                tgt_hist = produced.get(src.target, {}).get(it) if src.target else None
                tgt_val = tgt_hist[-1][1] if tgt_hist else None
                if src.role == "copier" and tgt_val is not None and rng.random() < src.copy_rate:
                    val = tgt_val
                elif src.role == "contrarian" and tgt_val is not None and rng.random() < src.flip_rate:
                    others = [v for v in dom if v != tgt_val]
                    val = others[rng.integers(len(others))] if others else tgt_val
                else:
                    val = _draw_value(rng, dom, truth, src.accuracy)
                mine[it] = [(0, val)]
            else:
                hist = planted.values[it]
                entries: list[tuple[int, str]] = []
                if src.role == "copier":
                    tgt_hist = produced.get(src.target, {}).get(it, [])
                    for (t, v) in tgt_hist:
                        if rng.random() < src.copy_rate:
                            entries.append((t + src.lag, v))
                    if not entries:
                        t0, truth0 = hist[0]
                        entries.append((t0, _draw_value(rng, dom, truth0, src.accuracy)))
                else:
                    shift = src.delay if src.role == "slow" else 0
                    for (t, tv) in hist:
                        if src.role == "slow":
                            entries.append((t + shift, tv))
                        elif src.role == "contrarian":
                            tgt_hist = produced.get(src.target, {}).get(it, [])
                            base = None
                            for (tt, vv) in tgt_hist:
                                if tt <= t:
                                    base = vv
                            if base is not None and rng.random() < src.flip_rate:
                                others = [v for v in dom if v != base]
                                entries.append((t, others[rng.integers(len(others))]
                                                if others else base))
                            else:
                                entries.append((t, _draw_value(rng, dom, tv, src.accuracy)))
                        else:
                            entries.append((t, _draw_value(rng, dom, tv, src.accuracy)))
                # collapse duplicate times (a lagged copy can land on a change step)
                dedup: dict[int, str] = {}
                for (t, v) in sorted(entries):
                    dedup[t] = v
                entries = sorted(dedup.items())
                if spec.subsample_rate > 0 and len(entries) > 1:
                    kept = [e for e in entries[:-1]
                            if sub_rng.random() >= spec.subsample_rate]
                    kept.append(entries[-1])
                    entries = kept
                mine[it] = entries
        produced[src.id] = mine
        for it, entries in sorted(mine.items()):
            for (t, v) in entries:
                observations.append(Observation(
                    src.id, it, v, t if temporal else None, 1.0))

    # collapse no-op rewrites so temporal datasets keep clean traces
    if temporal:
        cleaned: list[Observation] = []
        grouped: dict[tuple[str, str], list[Observation]] = {}
        for o in observations:
            grouped.setdefault((o.source, o.item), []).append(o)
        for key, obs in sorted(grouped.items()):
            obs.sort(key=lambda o: o.time)  # type: ignore[arg-type, return-value]
            last = None
            for o in obs:
                if last is not None and o.value == last:
                    continue
                cleaned.append(o)
                last = o.value
        observations = cleaned
    return Dataset(observations), planted


def _pair_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)


def evaluate_dependence(verdicts: list[DependenceVerdict] | list,
                        planted: PlantedTruth, roster: list[str],
                        tau: float = 0.5, kind: str = "similarity") -> dict:
    """Precision/recall at tau, threshold-sweep AUC, direction accuracy."""
    positives = {_pair_key(e.source, e.target) for e in planted.edges if e.kind == kind}
    posteriors: dict[tuple[str, str], float] = {}
    directions: dict[tuple[str, str], float] = {}
    for v in verdicts:
        kindv = getattr(v, "kind", kind)
        if kindv != kind:
            continue
        posteriors[v.pair] = v.posterior
        directions[v.pair] = getattr(v, "direction", 0.0)
    universe = []
    for i, a in enumerate(sorted(roster)):
        for b in sorted(roster)[i + 1:]:
            universe.append(_pair_key(a, b))
    scores = {p: posteriors.get(p, 0.0) for p in universe}

    flagged = {p for p, s in scores.items() if s >= tau}
    tp = len(flagged & positives)
    precision = tp / len(flagged) if flagged else 1.0
    recall = tp / len(positives) if positives else 1.0

    pos_scores = [scores[p] for p in universe if p in positives]
    neg_scores = [scores[p] for p in universe if p not in positives]
    if pos_scores and neg_scores:
        wins = 0.0
        for ps in pos_scores:
            for ns in neg_scores:
                wins += 1.0 if ps > ns else (0.5 if ps == ns else 0.0)
        auc = wins / (len(pos_scores) * len(neg_scores))
    else:
        auc = 1.0

    # direction: planted edge (copier -> target); verdict direction > 0 means
    # pair[1] depends on pair[0]
    dir_total = dir_correct = 0
    for e in planted.edges:
        if e.kind != kind:
            continue
        p = _pair_key(e.source, e.target)
        if p not in flagged or abs(directions.get(p, 0.0)) < 1e-12:
            continue
        dir_total += 1
        copier_is_second = p[1] == e.source
        if (directions[p] > 0) == copier_is_second:
            dir_correct += 1

    sweep = []
    for thr in [i / 20 for i in range(21)]:
        f = {p for p, s in scores.items() if s >= thr}
        tp_t = len(f & positives)
        sweep.append({
            "threshold": thr,
            "precision": tp_t / len(f) if f else 1.0,
            "recall": tp_t / len(positives) if positives else 1.0,
        })
    return {
        "kind": kind,
        "positives": len(positives),
        "flagged": len(flagged),
        "true_positives": tp,
        "precision": precision,
        "recall": recall,
        "zero_flag": not flagged,
        "auc": auc,
        "direction_accuracy": (dir_correct / dir_total) if dir_total else None,
        "sweep": sweep,
    }


def evaluate_fusion(truth: TruthAssignment, naive: TruthAssignment,
                    planted: PlantedTruth, at_time: int | None = None) -> dict:
    """Fraction of items resolved to the planted value, fused vs naive."""
    items = sorted(planted.values)
    def score(assign: TruthAssignment) -> float:
        if not items:
            return 1.0
        good = 0
        for it in items:
            t = assign.get(it)
            if t is not None and not t.tied and t.chosen == planted.value_at(it, at_time):
                good += 1
        return good / len(items)
    fused_acc = score(truth)
    naive_acc = score(naive)
    return {
        "items": len(items),
        "fused_accuracy": fused_acc,
        "naive_accuracy": naive_acc,
        "improvement": fused_acc - naive_acc,
    }
