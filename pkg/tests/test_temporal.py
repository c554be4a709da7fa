from __future__ import annotations

import pytest

from depfuse import (
    Dataset,
    Observation,
    ScenarioSpec,
    SourceSpec,
    TemporalConfig,
    build_traces,
    generate_scenario,
    outdated_copy_score,
    shared_update_stats,
    temporal_verdict,
)
from depfuse.dependence import DependenceConfig, PairEvidence, dependence_posterior


class TestBuildTraces:
    def test_multi_entry_trace(self, history):
        traces = build_traces(history)
        assert traces[("s1", "dong")].entries == (
            (2002, "uw"), (2006, "google"), (2007, "at&t"))

    def test_single_entry(self, history):
        traces = build_traces(history)
        assert traces[("s3", "suciu")].entries == ((2003, "uw"),)
        assert traces[("s3", "dalvi")].entries == ((2003, "uw"),)

    def test_noop_updates_collapsed(self):
        ds = Dataset([Observation("a", "x", "v", 1),
                      Observation("a", "x", "v", 2),
                      Observation("a", "x", "w", 3)])
        traces = build_traces(ds)
        assert traces[("a", "x")].entries == ((1, "v"), (3, "w"))

    def test_requires_temporal(self, affiliations):
        with pytest.raises(ValueError):
            build_traces(affiliations)


class TestSharedUpdateStats:
    def test_early_independent_pair(self, history):
        traces = build_traces(history)
        stats = shared_update_stats(traces, "s1", "s2", delta=1)
        # simultaneous moves to msr/google/yahoo!/uw plus the 2001-vs-2002
        # initial uw entries, where s2 came first
        assert stats.matched >= 6
        assert stats.second_precedes >= 3
        assert stats.first_precedes == 0

    def test_disjoint_items_all_zero(self):
        ds = Dataset([Observation("a", "x", "1", 1), Observation("b", "y", "2", 1)])
        stats = shared_update_stats(build_traces(ds), "a", "b", delta=2)
        assert (stats.matched, stats.first_precedes, stats.second_precedes) == (0, 0, 0)

    def test_lagged_copier_of_changing_item(self):
        spec = ScenarioSpec(
            items=1, domain_size=12, seed=11, mode="temporal",
            time_steps=40, change_prob=0.35,
            sources=(SourceSpec("orig", accuracy=0.97),
                     SourceSpec("copy", role="copier", target="orig",
                                copy_rate=1.0, lag=1, accuracy=0.97)))
        ds, planted = generate_scenario(spec)
        traces = build_traces(ds)
        n_updates = len(traces[("orig", ds.items[0])].entries)
        assert n_updates >= 10
        stats = shared_update_stats(traces, "orig", "copy", delta=2)
        assert stats.matched >= n_updates - 1
        assert stats.first_precedes >= n_updates - 1
        assert stats.second_precedes == 0

    def test_precedence_antisymmetric(self, history):
        traces = build_traces(history)
        ab = shared_update_stats(traces, "s1", "s2", delta=1)
        ba = shared_update_stats(traces, "s2", "s1", delta=1)
        assert ab.first_precedes == ba.second_precedes
        assert ab.second_precedes == ba.first_precedes
        assert ab.matched == ba.matched


class TestOutdatedCopyScore:
    def test_lazy_copier_holds_stale_values(self, history):
        traces = build_traces(history)
        count, score = outdated_copy_score(traces, "s1", "s3")
        assert count == 4   # suciu, halevy, dalvi, dong
        assert score == pytest.approx(4 / 5)

    def test_equal_time_single_entries(self):
        ds = Dataset([Observation("a", "x", "v", 5), Observation("b", "x", "v", 5)])
        traces = build_traces(ds)
        assert outdated_copy_score(traces, "a", "b") == (0, 0.0)

    def test_self_score_zero(self, history):
        traces = build_traces(history)
        assert outdated_copy_score(traces, "s1", "s1") == (0, 0.0)

    def test_strictly_after_required(self, history):
        traces = build_traces(history)
        # s2's current suciu value (msr@2006) matches s1's overwritten
        # msr@2006, but not strictly after -> no count from that item
        count, _ = outdated_copy_score(traces, "s1", "s2")
        assert count == 0

    def test_independent_sources_static_truth(self):
        scores = []
        for seed in range(20):
            spec = ScenarioSpec(
                items=50, domain_size=5, seed=seed, mode="temporal",
                time_steps=6, change_prob=0.0,
                sources=(SourceSpec("a", accuracy=0.8),
                         SourceSpec("b", accuracy=0.8)))
            ds, _ = generate_scenario(spec)
            traces = build_traces(ds)
            _, s1 = outdated_copy_score(traces, "a", "b")
            _, s2 = outdated_copy_score(traces, "b", "a")
            scores += [s1, s2]
        assert sum(scores) / len(scores) < 0.05


class TestTemporalVerdict:
    def test_lazy_copier_detected(self, history):
        v = temporal_verdict(history, "s1", "s3")
        assert v.classification == "LazyCopier"
        assert v.direction > 0          # second of (s1, s3) depends on first
        assert v.lag == 1
        assert v.posterior >= 0.5

    def test_early_independent_source(self, history):
        v = temporal_verdict(history, "s1", "s2")
        assert v.classification == "Independent"
        assert v.posterior < 0.5

    def test_swap_flips_direction_keeps_posterior(self, history):
        v1 = temporal_verdict(history, "s1", "s3")
        v2 = temporal_verdict(history, "s3", "s1")
        assert v1.posterior == pytest.approx(v2.posterior)
        assert v1.direction == pytest.approx(v2.direction)
        assert v1.pair == v2.pair  # canonical ordering

    def test_single_shared_item_ambiguous(self):
        ds = Dataset([Observation("a", "x", "unique", 3),
                      Observation("b", "x", "unique", 3)])
        v = temporal_verdict(ds, "a", "b")
        assert v.classification == "Ambiguous"
        assert v.direction == 0.0

    def test_all_updates_at_time_zero_reduces_to_snapshot(self):
        obs = []
        vals = {"a": ["1", "1", "2", "3"], "b": ["1", "4", "2", "5"]}
        for src, vs in vals.items():
            for j, v in enumerate(vs):
                obs.append(Observation(src, f"i{j}", v, 0))
        ds = Dataset(obs)
        verdict = temporal_verdict(ds, "a", "b")
        # same data as a plain snapshot: posterior must match the snapshot
        # pair model at the fixpoint's accuracies and that pair's evidence
        from depfuse import fuse_fixpoint
        from depfuse.model import latest_snapshot
        from depfuse.dependence import pair_evidence
        from depfuse.fusion import FusionConfig, item_false_count
        snap = latest_snapshot(ds)
        result = fuse_fixpoint(snap)
        ev = pair_evidence(snap, result.truth, "a", "b")
        cfg = FusionConfig()
        shared = [it for it in snap.items]
        kept = [it for it in shared if it in result.truth]
        nbar = sum(item_false_count(snap, it, cfg) for it in kept) / len(kept)
        expected = dependence_posterior(
            ev, result.accuracy["a"].accuracy, result.accuracy["b"].accuracy,
            nbar, DependenceConfig())
        assert verdict.posterior == pytest.approx(expected, abs=1e-9)

    def test_requires_temporal(self, affiliations):
        with pytest.raises(ValueError):
            temporal_verdict(affiliations, "s1", "s2")

    def test_generated_lazy_copier_flagged_slow_provider_not(self):
        spec = ScenarioSpec(
            items=40, domain_size=6, seed=3, mode="temporal",
            time_steps=12, change_prob=0.25,
            sources=(
                SourceSpec("orig", accuracy=0.9),
                SourceSpec("other", accuracy=0.9),
                SourceSpec("lazy", role="copier", target="orig",
                           copy_rate=0.95, lag=2, accuracy=0.9),
                SourceSpec("slowpoke", role="slow", delay=2, accuracy=0.9),
            ))
        ds, _ = generate_scenario(spec)
        v_copy = temporal_verdict(ds, "orig", "lazy")
        assert v_copy.classification in ("LazyCopier", "Copier")
        assert v_copy.pair == ("lazy", "orig")
        assert v_copy.direction < 0     # first of the pair is the dependent one
        v_slow = temporal_verdict(ds, "orig", "slowpoke")
        assert v_slow.classification == "Independent"
