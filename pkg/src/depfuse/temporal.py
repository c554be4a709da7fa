"""Dependence discovery over update traces.

Snapshot evidence alone mislabels a lazy copier: its stale values differ
from the original's current ones, which reads as independence. The trace
view fixes this with three evidence channels, combined as a sum of
log-Bayes-factors:

  snapshot    pair model on the latest snapshot, minus the items already
              explained as stale copies (those are not genuine conflicts)
  precedence  per non-initial update of the suspected copier: following
              the other source's value within the lag window is evidence
              for copying (strongly so when no third source made the same
              change nearby), moving first or publishing values the other
              never held is evidence against
  outdated    the suspected copier currently holds values the other source
              published and later overwrote; no signal when the held value
              is the currently chosen truth (outdated truth, not an error)
"""

from __future__ import annotations

import math
import statistics
from dataclasses import dataclass, field

from .dependence import DependenceConfig, pair_evidence, dependence_posterior
from .model import Dataset, Mode, latest_snapshot

__all__ = [
    "TemporalConfig",
    "UpdateTrace",
    "UpdateStats",
    "TemporalVerdict",
    "build_traces",
    "shared_update_stats",
    "outdated_copy_score",
    "temporal_verdict",
]

_LOG_FLOOR = 1e-12


@dataclass(frozen=True)
class TemporalConfig:
    delta: int = 1                    # alignment window for matched updates
    lag_cap_factor: int = 3           # copier may trail up to factor * delta
    follow_baseline: float = 0.25     # P(independent co-update of same value)
    outdated_false_baseline: float = 0.2   # P(independently holding a stale false value)
    outdated_true_baseline: float = 1.0    # a stale value that is currently true
                                           # carries no copy signal (ratio 1)
    dependence: DependenceConfig = field(default_factory=DependenceConfig)

    def __post_init__(self):
        if self.delta < 0:
            raise ValueError("delta must be >= 0")

    @property
    def lag_cap(self) -> int:
        return max(self.lag_cap_factor * self.delta, self.delta)


@dataclass(frozen=True)
class UpdateTrace:
    """Time-ordered value history of one (source, item) pair.

    Times strictly increase and consecutive values differ; each value holds
    until the next entry overwrites it.
    """

    source: str
    item: str
    entries: tuple[tuple[int, str], ...]

    @property
    def current(self) -> tuple[int, str]:
        return self.entries[-1]

    def updates(self) -> tuple[tuple[int, str], ...]:
        """Entries after the initial publication (the actual changes)."""
        return self.entries[1:]

    def overwritten(self) -> tuple[tuple[int, str], ...]:
        """Entries that a later entry replaced."""
        return self.entries[:-1]


@dataclass(frozen=True)
class UpdateStats:
    pair: tuple[str, str]
    matched: int            # same item, same new value, within delta
    first_precedes: int     # matches where pair[0] came strictly first
    second_precedes: int
    rare_matches: int       # matches no third source performed nearby


@dataclass(frozen=True)
class TemporalVerdict:
    pair: tuple[str, str]
    posterior: float
    direction: float        # > 0 means pair[1] depends on pair[0]
    lag: int | None         # median positive delay among matched updates
    classification: str     # Independent | Copier | LazyCopier | Ambiguous
    channels: dict[str, float]


def build_traces(dataset: Dataset) -> dict[tuple[str, str], UpdateTrace]:
    """One trace per (source, item); no-op updates are collapsed."""
    if dataset.mode is not Mode.TEMPORAL:
        raise ValueError("build_traces requires a temporal dataset")
    grouped: dict[tuple[str, str], list[tuple[int, str]]] = {}
    for o in dataset:
        assert o.time is not None
        grouped.setdefault((o.source, o.item), []).append((o.time, o.value))
    traces = {}
    for key, entries in sorted(grouped.items()):
        entries.sort()
        collapsed: list[tuple[int, str]] = []
        for t, v in entries:
            if collapsed and collapsed[-1][1] == v:
                continue
            collapsed.append((t, v))
        traces[key] = UpdateTrace(source=key[0], item=key[1], entries=tuple(collapsed))
    return traces


def _by_source(traces: dict[tuple[str, str], UpdateTrace], source: str
               ) -> dict[str, UpdateTrace]:
    return {item: tr for (s, item), tr in traces.items() if s == source}


def shared_update_stats(traces: dict[tuple[str, str], UpdateTrace],
                        s1: str, s2: str, delta: int) -> UpdateStats:
    """Count value-matched entries within the alignment window.

    Two entries match when they put the same value on the same item within
    delta time units; a match is rare when no third source publishes that
    value within delta of either matched time.
    """
    pair = (s1, s2)
    t1, t2 = _by_source(traces, s1), _by_source(traces, s2)
    third_sources = {s for (s, _) in traces} - {s1, s2}
    matched = first = second = rare = 0
    for item in sorted(t1.keys() & t2.keys()):
        for (ta, va) in t1[item].entries:
            for (tb, vb) in t2[item].entries:
                if va != vb or abs(ta - tb) > delta:
                    continue
                matched += 1
                if ta < tb:
                    first += 1
                elif tb < ta:
                    second += 1
                nearby = False
                for s3 in third_sources:
                    tr3 = traces.get((s3, item))
                    if tr3 is None:
                        continue
                    for (tc, vc) in tr3.entries:
                        if vc == va and (abs(tc - ta) <= delta or abs(tc - tb) <= delta):
                            nearby = True
                            break
                    if nearby:
                        break
                if not nearby:
                    rare += 1
    return UpdateStats(pair=pair, matched=matched, first_precedes=first,
                       second_precedes=second, rare_matches=rare)


def outdated_copy_score(traces: dict[tuple[str, str], UpdateTrace],
                        s1: str, s2: str) -> tuple[int, float]:
    """Count items where s2 currently holds a value s1 later abandoned.

    The match requires s2's current timestamp to fall strictly after s1
    first published the value; s1 must have overwritten it since. Returns
    (count, count / shared items).
    """
    if s1 == s2:
        return 0, 0.0
    t1, t2 = _by_source(traces, s1), _by_source(traces, s2)
    shared = sorted(t1.keys() & t2.keys())
    if not shared:
        return 0, 0.0
    count = 0
    for item in shared:
        cur_t, cur_v = t2[item].current
        for (t, v) in t1[item].overwritten():
            if v == cur_v and cur_t > t:
                count += 1
                break
    return count, count / len(shared)


def _outdated_match_items(t1: dict[str, UpdateTrace], t2: dict[str, UpdateTrace]
                          ) -> dict[str, str]:
    """item -> stale value currently held by side 2 but abandoned by side 1."""
    out = {}
    for item in t1.keys() & t2.keys():
        cur_t, cur_v = t2[item].current
        for (t, v) in t1[item].overwritten():
            if v == cur_v and cur_t > t:
                out[item] = cur_v
                break
    return out


def _alignment_loglr(traces: dict[tuple[str, str], UpdateTrace],
                     original: str, copier: str, config: TemporalConfig) -> float:
    """Log-likelihood ratio of the copier's own updates under copying.

    Considers only non-initial updates of the suspected copier on shared
    items. Simultaneous matches are neutral at this granularity.
    """
    c = config.dependence.copy_rate
    beta = config.follow_baseline
    r_follow = (c + (1.0 - c) * beta) / beta
    r_against = 1.0 - c
    t_orig, t_cop = _by_source(traces, original), _by_source(traces, copier)
    third = {s for (s, _) in traces} - {original, copier}
    ll = 0.0
    for item in sorted(t_orig.keys() & t_cop.keys()):
        orig_entries = t_orig[item].entries
        for (t, v) in t_cop[item].updates():
            earlier = [tt for (tt, vv) in orig_entries if vv == v and tt < t]
            same_time = any(tt == t for (tt, vv) in orig_entries if vv == v)
            later = [tt for (tt, vv) in orig_entries if vv == v and tt > t]
            if earlier and t - max(earlier) <= config.lag_cap:
                t0 = max(earlier)
                common = False
                for s3 in third:
                    tr3 = traces.get((s3, item))
                    if tr3 and any(vv == v and (abs(tt - t) <= config.delta
                                                or abs(tt - t0) <= config.delta)
                                   for (tt, vv) in tr3.entries):
                        common = True
                        break
                if not common:
                    ll += math.log(r_follow)
            elif same_time:
                pass
            elif later:
                ll += math.log(r_against)   # copier cannot move first
            elif not earlier:
                ll += math.log(r_against)   # novel value the original never held
            # else: stale follow beyond the lag cap, neutral
    return ll


def _outdated_loglr(t_orig: dict[str, UpdateTrace], t_cop: dict[str, UpdateTrace],
                    truth: dict[str, str], config: TemporalConfig) -> float:
    c = config.dependence.copy_rate
    ll = 0.0
    for item, stale in _outdated_match_items(t_orig, t_cop).items():
        base = (config.outdated_true_baseline if truth.get(item) == stale
                else config.outdated_false_baseline)
        ll += math.log((c + (1.0 - c) * base) / base)
    return ll


def temporal_verdict(dataset: Dataset, s1: str, s2: str,
                     config: TemporalConfig | None = None,
                     fusion_config=None, snapshot_result=None) -> TemporalVerdict:
    """Combine snapshot, precedence, and outdated-value evidence per pair.

    The posterior is direction-free (mean of the two directed Bayes
    factors); the direction score is their normalized difference, so a
    genuinely slow-but-independent source, whose updates precede the
    other's, is pushed away from the copier side. Pass `snapshot_result`
    (a FusionResult for the latest snapshot) when scoring many pairs of
    the same dataset to avoid recomputing the fixpoint.
    """
    from .fusion import FusionConfig, fuse_fixpoint

    config = config or TemporalConfig()
    dep = config.dependence
    pair = (s1, s2) if s1 <= s2 else (s2, s1)
    if dataset.mode is not Mode.TEMPORAL:
        raise ValueError("temporal_verdict requires a temporal dataset")
    traces = build_traces(dataset)
    t_a, t_b = _by_source(traces, pair[0]), _by_source(traces, pair[1])
    shared = sorted(t_a.keys() & t_b.keys())

    snap = latest_snapshot(dataset)
    fcfg = fusion_config or FusionConfig(dependence=dep)
    fused = snapshot_result if snapshot_result is not None else fuse_fixpoint(snap, fcfg)
    truth_values = {it: t.chosen for it, t in fused.truth.items() if not t.tied}

    if len(shared) < dep.min_overlap:
        return TemporalVerdict(pair, dep.prior, 0.0, None, "Ambiguous",
                               channels={"snapshot": 0.0, "precedence": 0.0,
                                         "outdated": 0.0})

    # snapshot channel, excluding items already explained as stale copies
    stale_items = set(_outdated_match_items(t_a, t_b)) | set(_outdated_match_items(t_b, t_a))
    kept = [it for it in shared if it not in stale_items]
    sub = snap.restrict_sources([pair[0], pair[1]])
    sub = Dataset([o for o in sub if o.item in kept])
    ev = pair_evidence(sub, fused.truth, pair[0], pair[1])
    if ev.overlap >= dep.min_overlap:
        from .fusion import item_false_count
        nbar = (sum(item_false_count(snap, it, fcfg) for it in kept) / len(kept)
                if kept else float(fcfg.n_floor))
        a1 = fused.accuracy[pair[0]].accuracy
        a2 = fused.accuracy[pair[1]].accuracy
        p_snap = dependence_posterior(ev, a1, a2, nbar, dep)
        # strip the prior back out to get the raw likelihood ratio
        snap_loglr = (math.log(p_snap) - math.log1p(-p_snap)
                      - math.log(dep.prior) + math.log1p(-dep.prior)) if 0 < p_snap < 1 else 0.0
    else:
        snap_loglr = 0.0

    align_ab = _alignment_loglr(traces, pair[0], pair[1], config)   # pair[1] copies pair[0]
    align_ba = _alignment_loglr(traces, pair[1], pair[0], config)
    out_ab = _outdated_loglr(t_a, t_b, truth_values, config)
    out_ba = _outdated_loglr(t_b, t_a, truth_values, config)

    log_bf_ab = snap_loglr + align_ab + out_ab
    log_bf_ba = snap_loglr + align_ba + out_ba
    bf_ab = math.exp(min(log_bf_ab, 500))
    bf_ba = math.exp(min(log_bf_ba, 500))
    mean_bf = max((bf_ab + bf_ba) / 2.0, _LOG_FLOOR)
    log_odds = math.log(dep.prior) - math.log1p(-dep.prior) + math.log(mean_bf)
    posterior = 1.0 / (1.0 + math.exp(-min(max(log_odds, -500), 500)))
    direction = (bf_ab - bf_ba) / (bf_ab + bf_ba) if bf_ab + bf_ba > 0 else 0.0

    # lag: median positive delay among value-matched entries, copier side last
    lags = []
    for item in shared:
        for (ta, va) in t_a[item].entries:
            for (tb, vb) in t_b[item].entries:
                if va == vb and abs(ta - tb) <= config.delta:
                    lags.append(tb - ta if direction >= 0 else ta - tb)
    pos = sorted(d for d in lags if d > 0)
    lag: int | None = int(statistics.median(pos)) if pos else None

    if posterior >= dep.tau:
        classification = "LazyCopier" if lag is not None and lag > 0 else "Copier"
    else:
        classification = "Independent"
    return TemporalVerdict(pair, posterior, direction, lag, classification,
                           channels={"snapshot": snap_loglr,
                                     "precedence": max(align_ab, align_ba),
                                     "outdated": max(out_ab, out_ba)})
