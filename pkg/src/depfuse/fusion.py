"""Truth discovery: voting, source accuracy, Bayesian posteriors, fixpoint.

The generative model behind every posterior here: each item has one true
value; an independent source with accuracy A asserts the true value with
probability A and otherwise one of the item's n false values uniformly at
random. Copied claims are handled by shrinking the exponent weight of the
copying source's vote.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .dependence import (
    DependenceConfig,
    DependenceVerdict,
    PairEvidence,
    agreement_screen,
    attach_directions,
    dependence_posterior,
    discounted_weights,
    pair_evidence,
)
from .model import Dataset, Mode, Observation

__all__ = [
    "FusionConfig",
    "ItemTruth",
    "TruthAssignment",
    "SourceStats",
    "SourceAccuracy",
    "FusionResult",
    "item_false_count",
    "naive_vote",
    "source_accuracy",
    "bayes_item_posterior",
    "fuse_fixpoint",
]

TIE_EPS = 1e-12


@dataclass(frozen=True)
class FusionConfig:
    """Knobs for accuracy estimation and the fixpoint loop."""

    a0: float = 0.8                 # prior accuracy, also used before any evidence
    acc_lo: float = 0.01            # accuracy clamp floor
    acc_hi: float = 0.99            # accuracy clamp ceiling
    n_floor: int = 2                # minimum per-item false-value count
    n_override: int | None = None   # global per-item false-value count, if set
    max_iterations: int = 100
    tolerance: float = 1e-6
    dependence: DependenceConfig = field(default_factory=DependenceConfig)

    def __post_init__(self):
        if not (0.0 < self.acc_lo < self.acc_hi < 1.0):
            raise ValueError("need 0 < acc_lo < acc_hi < 1")
        if not (self.acc_lo < self.a0 < self.acc_hi):
            raise ValueError("a0 must lie strictly inside the accuracy clamp")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


@dataclass(frozen=True)
class ItemTruth:
    chosen: str
    posterior: dict[str, float]
    tied: bool


TruthAssignment = dict[str, ItemTruth]


@dataclass(frozen=True)
class SourceStats:
    accuracy: float
    coverage: int
    prior_only: bool = False


SourceAccuracy = dict[str, SourceStats]


@dataclass(frozen=True)
class FusionResult:
    truth: TruthAssignment
    accuracy: SourceAccuracy
    verdicts: list[DependenceVerdict]
    weights: dict[tuple[str, str], float]
    iterations: int
    converged: bool


def item_false_count(dataset: Dataset, item: str, config: FusionConfig) -> int:
    """How many false values a wrong source could hit on this item."""
    if config.n_override is not None:
        return max(config.n_override, 1)
    distinct = len({o.value for o in dataset.by_item.get(item, ())})
    return max(distinct - 1, config.n_floor, 1)


def _finalize(scores: dict[str, float]) -> ItemTruth:
    """Normalize log scores into a posterior and pick the winner."""
    mx = max(scores.values())
    exp = {v: math.exp(s - mx) for v, s in scores.items()}
    z = sum(exp.values())
    post = {v: e / z for v, e in exp.items()}
    best = max(post.values())
    top = sorted(v for v, p in post.items() if best - p <= TIE_EPS)
    return ItemTruth(chosen=top[0], posterior=post, tied=len(top) > 1)


def naive_vote(dataset: Dataset) -> TruthAssignment:
    """Plurality voting: posterior proportional to prob-weighted counts."""
    if dataset.mode is not Mode.SNAPSHOT:
        raise ValueError("naive_vote requires a snapshot dataset")
    truth: TruthAssignment = {}
    for item in dataset.items:
        counts: dict[str, float] = {}
        for o in dataset.by_item[item]:
            counts[o.value] = counts.get(o.value, 0.0) + o.prob
        total = sum(counts.values())
        if total <= 0:
            # all-zero-prob claims still name candidates; fall back to uniform
            post = {v: 1.0 / len(counts) for v in counts}
        else:
            post = {v: c / total for v, c in counts.items()}
        best = max(post.values())
        top = sorted(v for v, p in post.items() if best - p <= TIE_EPS)
        truth[item] = ItemTruth(chosen=top[0], posterior=post, tied=len(top) > 1)
    return truth


def source_accuracy(dataset: Dataset, truth: TruthAssignment,
                    config: FusionConfig | None = None) -> SourceAccuracy:
    """Fraction of a source's claims matching the chosen truth, clamped.

    Tied items are excluded from both numerator and denominator; a source
    left with nothing countable keeps the prior accuracy, flagged.
    """
    config = config or FusionConfig()
    out: SourceAccuracy = {}
    for src, obs in dataset.by_source.items():
        num = den = 0.0
        for o in obs:
            t = truth.get(o.item)
            if t is None or t.tied:
                continue
            den += o.prob
            if o.value == t.chosen:
                num += o.prob
        if den == 0:
            out[src] = SourceStats(config.a0, len(obs), prior_only=True)
        else:
            acc = min(max(num / den, config.acc_lo), config.acc_hi)
            out[src] = SourceStats(acc, len(obs), prior_only=False)
    return out


def bayes_item_posterior(observations: list[Observation],
                         accuracy: SourceAccuracy,
                         weights: dict[str, float] | None,
                         n: int) -> dict[str, float]:
    """Exact per-item posterior over observed candidate values.

    score(v) = prod_{S says v} A_S^w(S) * prod_{S says u != v} ((1-A_S)/n)^w(S)

    where w(S) is the source's independence weight times its claim prob.
    Discounting a copied vote means shrinking its exponent toward zero.
    """
    if not observations:
        raise ValueError("bayes_item_posterior needs at least one observation")
    if n < 1:
        raise ValueError("false-value count n must be >= 1")
    values = sorted({o.value for o in observations})
    scores: dict[str, float] = {}
    for v in values:
        ln = 0.0
        for o in observations:
            # clamp to keep log finite for callers passing unclamped 0/1
            a = min(max(accuracy[o.source].accuracy, 1e-12), 1.0 - 1e-12)
            w = (weights.get(o.source, 1.0) if weights else 1.0) * o.prob
            ln += w * (math.log(a) if o.value == v else math.log((1.0 - a) / n))
        scores[v] = ln
    return _finalize(scores).posterior


def _truth_step(dataset: Dataset, accuracy: SourceAccuracy,
                weights: dict[tuple[str, str], float],
                config: FusionConfig) -> TruthAssignment:
    truth: TruthAssignment = {}
    for item in dataset.items:
        obs = list(dataset.by_item[item])
        n = item_false_count(dataset, item, config)
        w = {o.source: weights.get((o.source, item), 1.0) for o in obs}
        post = bayes_item_posterior(obs, accuracy, w, n)
        best = max(post.values())
        top = sorted(v for v, p in post.items() if best - p <= TIE_EPS)
        truth[item] = ItemTruth(chosen=top[0], posterior=post, tied=len(top) > 1)
    return truth


def _soft_weights(dataset: Dataset, posteriors: dict[tuple[str, str], float],
                  config: DependenceConfig) -> dict[tuple[str, str], float]:
    """Symmetric ungated discounting used inside the fixpoint loop.

    Every pair of sources sharing a value on an item discounts both by
    (1 - c * posterior); unlike the reported keep-first weights this keeps
    the loop order-free while it is still undecided who copied whom. Each
    same-value group retains at least one effective vote in total: even a
    fully copied value was provided independently at least once.
    """
    weights: dict[tuple[str, str], float] = {}
    for item in dataset.items:
        row = dataset.item_values(item)
        groups: dict[str, list[str]] = {}
        for src, o in row.items():
            groups.setdefault(o.value, []).append(src)
        for value, members in groups.items():
            ws = {}
            for src in members:
                w = 1.0
                for other in members:
                    if other != src:
                        p = posteriors.get((min(src, other), max(src, other)), 0.0)
                        w *= 1.0 - config.copy_rate * p
                ws[src] = w
            total = sum(ws.values())
            if 0 < total < 1.0:
                ws = {src: w / total for src, w in ws.items()}
            for src, w in ws.items():
                weights[(src, item)] = w
    return weights


def _pair_posteriors(dataset: Dataset, truth: TruthAssignment,
                     accuracy: SourceAccuracy, config: FusionConfig
                     ) -> tuple[dict[tuple[str, str], float],
                                dict[tuple[str, str], PairEvidence]]:
    posts: dict[tuple[str, str], float] = {}
    evid: dict[tuple[str, str], PairEvidence] = {}
    srcs = dataset.sources
    for i, s1 in enumerate(srcs):
        for s2 in srcs[i + 1:]:
            ev = pair_evidence(dataset, truth, s1, s2)
            shared = _shared_items(dataset, truth, s1, s2)
            n = _pair_n(dataset, shared, config)
            a1 = accuracy[s1].accuracy
            a2 = accuracy[s2].accuracy
            posts[(s1, s2)] = dependence_posterior(ev, a1, a2, n, config.dependence)
            evid[(s1, s2)] = ev
    return posts, evid


def _shared_items(dataset: Dataset, truth: TruthAssignment | None,
                  s1: str, s2: str) -> list[str]:
    i1 = {o.item for o in dataset.by_source.get(s1, ())}
    i2 = {o.item for o in dataset.by_source.get(s2, ())}
    shared = i1 & i2
    if truth is not None:
        shared = {it for it in shared if it in truth and not truth[it].tied}
    return sorted(shared)


def _pair_n(dataset: Dataset, shared: list[str], config: FusionConfig) -> float:
    if not shared:
        return float(max(config.n_floor, 1))
    return sum(item_false_count(dataset, it, config) for it in shared) / len(shared)


def fuse_fixpoint(dataset: Dataset, config: FusionConfig | None = None) -> FusionResult:
    """Iterate truth -> accuracy -> dependence until stable.

    Before the first truth estimate, a truth-free agreement screen seeds the
    pair posteriors so that blocs of near-identical sources cannot vote
    their own copies into the truth and then launder their accuracy. The
    loop discounts copies symmetrically; once stable, a consolidation pass
    recomputes everything with the reported keep-first weight rule so the
    emitted artifacts match the documented contracts.
    """
    config = config or FusionConfig()
    if dataset.mode is not Mode.SNAPSHOT:
        raise ValueError("fuse_fixpoint requires a snapshot dataset (see snapshot_at)")
    dep = config.dependence
    srcs = dataset.sources
    accuracy: SourceAccuracy = {
        s: SourceStats(config.a0, len(dataset.by_source[s]), prior_only=True)
        for s in srcs
    }
    if not srcs:
        return FusionResult({}, {}, [], {}, 0, True)

    posteriors: dict[tuple[str, str], float] = {}
    for i, s1 in enumerate(srcs):
        for s2 in srcs[i + 1:]:
            shared = _shared_items(dataset, None, s1, s2)
            n = _pair_n(dataset, shared, config)
            posteriors[(s1, s2)] = agreement_screen(
                dataset, s1, s2, config.a0, n, dep)
    weights = _soft_weights(dataset, posteriors, dep)

    truth: TruthAssignment = {}
    iterations = 0
    converged = False
    prev_assign: dict[str, str] | None = None
    prev_acc: dict[str, float] | None = None
    for iterations in range(1, config.max_iterations + 1):
        truth = _truth_step(dataset, accuracy, weights, config)
        accuracy = source_accuracy(dataset, truth, config)
        posteriors, _ = _pair_posteriors(dataset, truth, accuracy, config)
        weights = _soft_weights(dataset, posteriors, dep)
        assign = {it: t.chosen for it, t in truth.items()}
        accs = {s: accuracy[s].accuracy for s in srcs}
        if prev_assign == assign and prev_acc is not None:
            if max(abs(accs[s] - prev_acc[s]) for s in srcs) < config.tolerance:
                converged = True
                break
        prev_assign, prev_acc = assign, accs

    # consolidation: replay with the reported (tau-gated, keep-first) weights
    verdicts: list[DependenceVerdict] = []
    for _ in range(config.max_iterations):
        posteriors, evidence = _pair_posteriors(dataset, truth, accuracy, config)
        verdicts = [
            DependenceVerdict(pair=pair, kind="similarity", posterior=p,
                              direction=0.0, evidence=evidence[pair],
                              flagged=p >= dep.tau and evidence[pair].overlap >= dep.min_overlap)
            for pair, p in sorted(posteriors.items())
        ]
        weights = discounted_weights(dataset, verdicts, dep, accuracy)
        new_truth = _truth_step(dataset, accuracy, weights, config)
        new_accuracy = source_accuracy(dataset, new_truth, config)
        stable = (
            {i: t.chosen for i, t in new_truth.items()} == {i: t.chosen for i, t in truth.items()}
            and max(abs(new_accuracy[s].accuracy - accuracy[s].accuracy) for s in srcs)
            < config.tolerance
        )
        truth, accuracy = new_truth, new_accuracy
        if stable:
            break

    verdicts = attach_directions(dataset, truth, verdicts, dep)
    return FusionResult(
        truth=truth,
        accuracy=accuracy,
        verdicts=verdicts,
        weights=weights,
        iterations=iterations,
        converged=converged,
    )
