"""Pairwise source dependence: copy detection, discounting, contrarians.

Two dependence kinds are modeled. Similarity (copying): a copier clones a
value with probability c per shared item, which makes sharing rare false
values far more surprising under independence than under copying.
Dissimilarity (contrarianism): a rater flips another rater's choice with
probability f, which drives observed agreement far below what the two
raters' own marginal rating distributions predict.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Mapping

from .model import Dataset

if TYPE_CHECKING:  # pragma: no cover
    from .fusion import SourceAccuracy, TruthAssignment

__all__ = [
    "DependenceConfig",
    "PairEvidence",
    "PropertySplit",
    "DependenceVerdict",
    "pair_evidence",
    "dependence_posterior",
    "agreement_screen",
    "copier_direction",
    "attach_directions",
    "discounted_weights",
    "dissimilarity_score",
    "debiased_aggregate",
    "rank_sources",
]

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class DependenceConfig:
    prior: float = 0.2          # alpha: prior probability a pair is dependent
    copy_rate: float = 0.8      # c: per-item copy probability given dependence
    tau: float = 0.5            # detection threshold on the posterior
    min_overlap: int = 3        # m: shared items needed before leaving the prior
    flip_rate: float = 0.9      # f: per-item flip probability for contrarians

    def __post_init__(self):
        if not 0.0 < self.prior < 1.0:
            raise ValueError("prior must be in (0, 1)")
        if not 0.0 < self.copy_rate <= 1.0:
            raise ValueError("copy_rate must be in (0, 1]")
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must be in (0, 1)")
        if self.min_overlap < 1:
            raise ValueError("min_overlap must be >= 1")
        if not 0.0 < self.flip_rate <= 1.0:
            raise ValueError("flip_rate must be in (0, 1]")


@dataclass(frozen=True)
class PairEvidence:
    """Per-pair shared-item counts classified against the chosen truth."""

    pair: tuple[str, str]
    kt: int   # shared items, same value, value is the chosen truth
    kf: int   # shared items, same value, value is not the chosen truth
    kd: int   # shared items, differing values

    @property
    def overlap(self) -> int:
        return self.kt + self.kf + self.kd


@dataclass(frozen=True)
class PropertySplit:
    """A property function evaluated on overlap vs private claims."""

    pair: tuple[str, str]
    property_tag: str
    on_overlap: tuple[float, float]     # F per source on shared items
    on_private: tuple[float, float]     # F per source on its private items
    divergence: tuple[float, float]
    sufficient: bool


@dataclass(frozen=True)
class DependenceVerdict:
    pair: tuple[str, str]
    kind: str                       # "similarity" | "dissimilarity"
    posterior: float
    direction: float                # in [-1, 1]; > 0 means pair[1] depends on pair[0]
    evidence: object
    flagged: bool


def _canonical(s1: str, s2: str) -> tuple[str, str]:
    return (s1, s2) if s1 <= s2 else (s2, s1)


def pair_evidence(dataset: Dataset, truth: "TruthAssignment",
                  s1: str, s2: str) -> PairEvidence:
    """Count kt/kf/kd over the items both sources provide; ties skipped."""
    pair = _canonical(s1, s2)
    kt = kf = kd = 0
    v1 = {o.item: o.value for o in dataset.by_source.get(pair[0], ())}
    v2 = {o.item: o.value for o in dataset.by_source.get(pair[1], ())}
    for item in v1.keys() & v2.keys():
        t = truth.get(item)
        if t is None or t.tied:
            continue
        if v1[item] == v2[item]:
            if v1[item] == t.chosen:
                kt += 1
            else:
                kf += 1
        else:
            kd += 1
    return PairEvidence(pair=pair, kt=kt, kf=kf, kd=kd)


def _pair_model(a1: float, a2: float, n: float, copy_rate: float
                ) -> tuple[tuple[float, float, float], tuple[float, float, float]]:
    """Per-shared-item event probabilities under independence and copying.

    Independence: same-true A1*A2, same-false (1-A1)(1-A2)/n, differ rest.
    Dependence mixes copying (prob c: identical, true with max(A1, A2))
    with independent behavior (prob 1-c); symmetric in the pair.
    """
    st_i = a1 * a2
    sf_i = (1.0 - a1) * (1.0 - a2) / n
    d_i = max(1.0 - st_i - sf_i, _LOG_FLOOR)
    amax = max(a1, a2)
    c = copy_rate
    st_d = c * amax + (1.0 - c) * st_i
    sf_d = c * (1.0 - amax) + (1.0 - c) * sf_i
    d_d = max((1.0 - c) * d_i, _LOG_FLOOR)
    return (st_i, sf_i, d_i), (st_d, sf_d, d_d)


def dependence_posterior(evidence: PairEvidence, a1: float, a2: float,
                         n: float, config: DependenceConfig | None = None) -> float:
    """Posterior probability that the pair is similarity-dependent.

    Returns the prior when the overlap is below min_overlap (no evidence).
    """
    config = config or DependenceConfig()
    if evidence.overlap < config.min_overlap:
        return config.prior
    (st_i, sf_i, d_i), (st_d, sf_d, d_d) = _pair_model(a1, a2, n, config.copy_rate)
    log_ind = (evidence.kt * math.log(st_i) + evidence.kf * math.log(max(sf_i, _LOG_FLOOR))
               + evidence.kd * math.log(d_i))
    log_dep = (evidence.kt * math.log(st_d) + evidence.kf * math.log(max(sf_d, _LOG_FLOOR))
               + evidence.kd * math.log(d_d))
    return _posterior_from_loglr(log_dep - log_ind, config.prior)


def _posterior_from_loglr(loglr: float, prior: float) -> float:
    # alpha * LR / (alpha * LR + 1 - alpha), computed stably in log space
    log_odds = math.log(prior) - math.log1p(-prior) + loglr
    if log_odds > 500:
        return 1.0
    return 1.0 / (1.0 + math.exp(-log_odds))


def agreement_screen(dataset: Dataset, s1: str, s2: str, a0: float,
                     n: float, config: DependenceConfig | None = None) -> float:
    """Truth-free dependence screen from raw agreement counts alone.

    Marginalizes the pair model over whether each shared value is true:
    P(same | independent) = a0^2 + (1-a0)^2/n, P(same | dependent) mixes in
    the copy rate. Used to seed the fixpoint before any truth estimate
    exists, so that a bloc of near-identical sources starts out suspect.
    """
    config = config or DependenceConfig()
    v1 = {o.item: o.value for o in dataset.by_source.get(s1, ())}
    v2 = {o.item: o.value for o in dataset.by_source.get(s2, ())}
    shared = v1.keys() & v2.keys()
    if len(shared) < config.min_overlap:
        return config.prior
    same = sum(1 for it in shared if v1[it] == v2[it])
    diff = len(shared) - same
    s_i = a0 * a0 + (1.0 - a0) * (1.0 - a0) / n
    d_i = max(1.0 - s_i, _LOG_FLOOR)
    c = config.copy_rate
    s_d = c + (1.0 - c) * s_i
    d_d = max((1.0 - c) * d_i, _LOG_FLOOR)
    loglr = same * (math.log(s_d) - math.log(s_i)) + diff * (math.log(d_d) - math.log(d_i))
    return _posterior_from_loglr(loglr, config.prior)


def _accuracy_on(dataset: Dataset, truth: "TruthAssignment", source: str,
                 items: set[str]) -> tuple[float, int]:
    num = den = 0
    values = {o.item: o.value for o in dataset.by_source.get(source, ())}
    for item in items:
        t = truth.get(item)
        if t is None or t.tied or item not in values:
            continue
        den += 1
        if values[item] == t.chosen:
            num += 1
    return (num / den if den else 0.0), den


def copier_direction(dataset: Dataset, truth: "TruthAssignment", s1: str, s2: str,
                     config: DependenceConfig | None = None,
                     property_tag: str = "accuracy") -> tuple[PropertySplit, float]:
    """Who is the likelier copier, from the overlap/private property split.

    A source whose accuracy on the shared items diverges from its accuracy
    on its private items behaves differently where it can copy; the larger
    divergence marks the likelier copier. Positive direction means the
    second source of the canonical pair depends on the first.
    """
    config = config or DependenceConfig()
    pair = _canonical(s1, s2)
    i1 = {o.item for o in dataset.by_source.get(pair[0], ())}
    i2 = {o.item for o in dataset.by_source.get(pair[1], ())}
    overlap = i1 & i2
    only1, only2 = i1 - i2, i2 - i1
    f1_ov, n1_ov = _accuracy_on(dataset, truth, pair[0], overlap)
    f2_ov, n2_ov = _accuracy_on(dataset, truth, pair[1], overlap)
    f1_pr, n1_pr = _accuracy_on(dataset, truth, pair[0], only1)
    f2_pr, n2_pr = _accuracy_on(dataset, truth, pair[1], only2)
    m = config.min_overlap
    sufficient = min(n1_ov, n2_ov) >= m and n1_pr >= m and n2_pr >= m
    div1 = abs(f1_ov - f1_pr)
    div2 = abs(f2_ov - f2_pr)
    split = PropertySplit(
        pair=pair, property_tag=property_tag,
        on_overlap=(f1_ov, f2_ov), on_private=(f1_pr, f2_pr),
        divergence=(div1, div2), sufficient=sufficient,
    )
    if not sufficient:
        return split, 0.0
    # raw difference: each divergence lives in [0, 1], so this is already
    # normalized and does not blow up sampling noise when both are small
    return split, div2 - div1


def attach_directions(dataset: Dataset, truth: "TruthAssignment",
                      verdicts: list[DependenceVerdict],
                      config: DependenceConfig | None = None) -> list[DependenceVerdict]:
    """Fill in direction scores for flagged similarity verdicts."""
    out = []
    for v in verdicts:
        if v.kind == "similarity" and v.flagged:
            _, direction = copier_direction(dataset, truth, *v.pair, config=config)
            v = DependenceVerdict(v.pair, v.kind, v.posterior, direction,
                                  v.evidence, v.flagged)
        out.append(v)
    return out


def discounted_weights(dataset: Dataset, verdicts: list[DependenceVerdict],
                       config: DependenceConfig | None = None,
                       accuracy: "SourceAccuracy | None" = None
                       ) -> dict[tuple[str, str], float]:
    """Per-(source, item) vote weights under the flagged similarity verdicts.

    For each item and each distinct value, sources are ordered by
    descending accuracy then id; the first keeps weight 1 and every later
    source is discounted by (1 - c * posterior) per flagged predecessor
    providing the same value. A source disagreeing with its suspected
    partner on an item keeps full weight there.
    """
    config = config or DependenceConfig()
    flagged: dict[tuple[str, str], float] = {}
    for v in verdicts:
        if v.kind == "similarity" and v.flagged and v.posterior >= config.tau:
            flagged[v.pair] = v.posterior

    def rank(src: str) -> tuple:
        a = accuracy[src].accuracy if accuracy and src in accuracy else 0.0
        return (-a, src)

    weights: dict[tuple[str, str], float] = {}
    for item in dataset.items:
        row = dataset.item_values(item)
        groups: dict[str, list[str]] = {}
        for src, o in row.items():
            groups.setdefault(o.value, []).append(src)
        for _, srcs in groups.items():
            srcs.sort(key=rank)
            for i, src in enumerate(srcs):
                w = 1.0
                for prev in srcs[:i]:
                    p = flagged.get(_canonical(src, prev))
                    if p is not None:
                        w *= 1.0 - config.copy_rate * p
                weights[(src, item)] = w
    return weights


def _marginals(dataset: Dataset, source: str) -> dict[str, float]:
    counts: dict[str, float] = {}
    total = 0.0
    for o in dataset.by_source.get(source, ()):
        counts[o.value] = counts.get(o.value, 0.0) + 1.0
        total += 1.0
    return {v: c / total for v, c in counts.items()} if total else {}


def _contrarian_loglr(shared: list[tuple[str, str]], marg_b: dict[str, float],
                      flip_rate: float) -> float:
    """log L(b's ratings | b contrarian of a) - log L(| b independent).

    The flip target is drawn from b's own marginal restricted to values
    differing from a's rating, so domains with a popular consensus value do
    not read as contrarian by themselves.
    """
    ll = 0.0
    for va, vb in shared:
        ind = marg_b.get(vb, 0.0)
        if ind <= 0.0:
            continue
        if vb == va:
            dep = (1.0 - flip_rate) * ind
        else:
            denom = 1.0 - marg_b.get(va, 0.0)
            flip = marg_b.get(vb, 0.0) / denom if denom > _LOG_FLOOR else 0.0
            dep = flip_rate * flip + (1.0 - flip_rate) * ind
        ll += math.log(max(dep, _LOG_FLOOR)) - math.log(ind)
    return ll


def dissimilarity_score(dataset: Dataset, r1: str, r2: str,
                        config: DependenceConfig | None = None) -> DependenceVerdict:
    """Detect deliberate disagreement between two raters.

    Evidence is expected-minus-observed agreement, where the expectation
    comes from each rater's marginal value distribution; the posterior is a
    Bayes factor of the contrarian flip model against marginal independence.
    """
    config = config or DependenceConfig()
    pair = _canonical(r1, r2)
    v1 = {o.item: o.value for o in dataset.by_source.get(pair[0], ())}
    v2 = {o.item: o.value for o in dataset.by_source.get(pair[1], ())}
    shared_items = sorted(v1.keys() & v2.keys())
    m1, m2 = _marginals(dataset, pair[0]), _marginals(dataset, pair[1])
    domain = sorted(set(m1) | set(m2))
    expected = sum(m1.get(v, 0.0) * m2.get(v, 0.0) for v in domain)
    if len(shared_items) < config.min_overlap:
        ev = {"observed": 0.0, "expected": expected, "score": 0.0,
              "overlap": len(shared_items), "insufficient": True}
        return DependenceVerdict(pair, "dissimilarity", config.prior, 0.0, ev, False)
    observed = sum(1 for it in shared_items if v1[it] == v2[it]) / len(shared_items)
    score = expected - observed
    pairs12 = [(v1[it], v2[it]) for it in shared_items]
    pairs21 = [(v2[it], v1[it]) for it in shared_items]
    ll_12 = _contrarian_loglr(pairs12, m2, config.flip_rate)   # r2 reacts to r1
    ll_21 = _contrarian_loglr(pairs21, m1, config.flip_rate)
    b12, b21 = math.exp(min(ll_12, 500)), math.exp(min(ll_21, 500))
    posterior = _posterior_from_loglr(math.log(max((b12 + b21) / 2.0, _LOG_FLOOR)),
                                      config.prior)
    direction = (b12 - b21) / (b12 + b21) if b12 + b21 > 0 else 0.0
    ev = {"observed": observed, "expected": expected, "score": score,
          "overlap": len(shared_items), "insufficient": False}
    flagged = posterior >= config.tau and score > 0
    return DependenceVerdict(pair, "dissimilarity", posterior, direction, ev, flagged)


def debiased_aggregate(dataset: Dataset, verdicts: list[DependenceVerdict]
                       ) -> dict[str, dict[str, dict[str, float]]]:
    """Consensus per item with flagged contrarians' dissents downweighted.

    A flagged contrarian's rating is weighted (1 - posterior) on items
    where it disagrees with its counterpart; everything else keeps weight
    1. Returns {item: {"naive": {...}, "debiased": {...}}}.
    """
    contrarians: list[tuple[str, str, float]] = []
    for v in verdicts:
        if v.kind != "dissimilarity" or not v.flagged:
            continue
        # direction > 0 means pair[1] reacts to pair[0]; ties resolve to the
        # canonical second element so the output stays deterministic
        if v.direction < 0:
            contrarian, target = v.pair[0], v.pair[1]
        else:
            contrarian, target = v.pair[1], v.pair[0]
        contrarians.append((contrarian, target, v.posterior))

    out: dict[str, dict[str, dict[str, float]]] = {}
    for item in dataset.items:
        row = dataset.item_values(item)
        naive: dict[str, float] = {}
        debias: dict[str, float] = {}
        for src, o in row.items():
            w = 1.0
            for contrarian, target, p in contrarians:
                if src == contrarian and target in row and row[target].value != o.value:
                    w *= 1.0 - p
            naive[o.value] = naive.get(o.value, 0.0) + o.prob
            debias[o.value] = debias.get(o.value, 0.0) + o.prob * w
        nz = sum(naive.values()) or 1.0
        dz = sum(debias.values()) or 1.0
        out[item] = {
            "naive": {v: c / nz for v, c in sorted(naive.items())},
            "debiased": {v: c / dz for v, c in sorted(debias.items())},
        }
    return out


def rank_sources(profiles: Mapping[str, tuple[float, float]],
                 verdicts: list[DependenceVerdict], k: int) -> list[tuple[str, float]]:
    """Greedy dependence-aware source ranking.

    profiles: source -> (accuracy, coverage). Each step picks the source
    maximizing accuracy * coverage * prod over picked P of
    (1 - posterior(S, P)); deterministic tie-break by id. Returns up to k
    (source, marginal score) pairs.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    posts: dict[tuple[str, str], float] = {}
    for v in verdicts:
        if v.kind == "similarity":
            posts[v.pair] = max(posts.get(v.pair, 0.0), v.posterior)
    remaining = sorted(profiles)
    picked: list[tuple[str, float]] = []
    while remaining and len(picked) < k:
        best_src, best_score = None, -1.0
        for s in remaining:
            acc, cov = profiles[s]
            score = acc * cov
            for p, _ in picked:
                score *= 1.0 - posts.get(_canonical(s, p), 0.0)
            if score > best_score:
                best_src, best_score = s, score
        assert best_src is not None
        picked.append((best_src, best_score))
        remaining.remove(best_src)
    return picked
