"""Core data model: multi-source observations, parsing, and snapshots.

A dataset is a bag of claims, each one binding a (source, item) pair to a
normalized value, optionally stamped with an integer time and a confidence
in [0, 1]. Snapshot datasets carry no times at all; temporal datasets carry
a time on every observation (lifespan semantics: a value holds until the
same source overwrites it).
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Iterator

__all__ = [
    "Mode",
    "Observation",
    "Dataset",
    "InputError",
    "normalize_value",
    "parse_observations",
    "snapshot_at",
    "latest_snapshot",
    "to_csv",
    "to_json",
]

_WS = re.compile(r"\s+")


class InputError(ValueError):
    """Malformed input data; carries a line/record number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Mode(Enum):
    SNAPSHOT = "snapshot"
    TEMPORAL = "temporal"


def normalize_value(raw: str) -> str:
    """Canonicalize a claimed value: trim, collapse whitespace, casefold.

    Idempotent. Punctuation is preserved ("AT&T" -> "at&t"). Raises
    InputError if nothing is left after normalization.
    """
    out = _WS.sub(" ", raw.strip()).casefold()
    if not out:
        raise InputError(f"value {raw!r} is empty after normalization")
    return out


def _normalize_id(raw: str, what: str) -> str:
    out = raw.strip()
    if not out:
        raise InputError(f"{what} {raw!r} is empty after normalization")
    return out


@dataclass(frozen=True, order=True)
class Observation:
    """One claim: a source asserts a value for an item, maybe at a time."""

    source: str
    item: str
    value: str
    time: int | None = None
    prob: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.prob <= 1.0:
            raise InputError(f"prob {self.prob} outside [0, 1]")


class Dataset:
    """Immutable collection of observations with per-source/item indexes."""

    def __init__(self, observations: Iterable[Observation], mode: Mode | None = None):
        obs = sorted(observations)
        inferred = self._infer_mode(obs)
        if mode is not None and obs and mode != inferred:
            raise InputError(f"observations do not match declared mode {mode.value}")
        self.mode = mode if mode is not None else inferred
        self.observations: tuple[Observation, ...] = tuple(obs)
        self.by_source: dict[str, tuple[Observation, ...]] = {}
        self.by_item: dict[str, tuple[Observation, ...]] = {}
        src: dict[str, list[Observation]] = {}
        itm: dict[str, list[Observation]] = {}
        seen: set[tuple] = set()
        for o in obs:
            key = (o.source, o.item) if o.time is None else (o.source, o.item, o.time)
            if key in seen:
                raise InputError(f"duplicate observation for {key}")
            seen.add(key)
            src.setdefault(o.source, []).append(o)
            itm.setdefault(o.item, []).append(o)
        self.by_source = {s: tuple(v) for s, v in sorted(src.items())}
        self.by_item = {i: tuple(v) for i, v in sorted(itm.items())}

    @staticmethod
    def _infer_mode(obs: list[Observation]) -> Mode:
        timed = sum(1 for o in obs if o.time is not None)
        if timed == 0:
            return Mode.SNAPSHOT
        if timed == len(obs):
            return Mode.TEMPORAL
        raise InputError("mixed mode: some observations have times, some do not")

    @property
    def sources(self) -> list[str]:
        return list(self.by_source)

    @property
    def items(self) -> list[str]:
        return list(self.by_item)

    def __len__(self) -> int:
        return len(self.observations)

    def __iter__(self) -> Iterator[Observation]:
        return iter(self.observations)

    def restrict_sources(self, keep: Iterable[str]) -> "Dataset":
        keep = set(keep)
        return Dataset([o for o in self.observations if o.source in keep])

    def item_values(self, item: str) -> dict[str, Observation]:
        """Map source -> observation for one item (snapshot datasets)."""
        return {o.source: o for o in self.by_item.get(item, ())}


_HEADERS = ("source", "item", "value", "time", "prob")


def _build_observation(row: dict, line: int) -> Observation:
    try:
        source = _normalize_id(row["source"], "source")
        item = _normalize_id(row["item"], "item")
        value = normalize_value(row["value"])
    except InputError as e:
        raise InputError(str(e), line) from None
    time = None
    if row.get("time") not in (None, ""):
        try:
            time = int(row["time"])
        except ValueError:
            raise InputError(f"bad time {row['time']!r}", line) from None
    prob = 1.0
    if row.get("prob") not in (None, ""):
        try:
            prob = float(row["prob"])
        except ValueError:
            raise InputError(f"bad prob {row['prob']!r}", line) from None
        if not 0.0 <= prob <= 1.0:
            raise InputError(f"prob {prob} outside [0, 1]", line)
    return Observation(source, item, value, time, prob)


def parse_observations(text: str | bytes, fmt: str = "csv",
                       mode: Mode | None = None) -> Dataset:
    """Parse CSV (header: source,item,value[,time][,prob]) or JSON claims.

    Mode is inferred: temporal iff a time column exists and is fully
    populated. A declared `mode` acts as a check, not a coercion.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    rows: list[Observation] = []
    if fmt == "csv":
        reader = csv.reader(io.StringIO(text))
        try:
            header = next(reader)
        except StopIteration:
            raise InputError("empty input: missing header") from None
        header = [h.strip().lower() for h in header]
        unknown = [h for h in header if h not in _HEADERS]
        if unknown or not {"source", "item", "value"}.issubset(header):
            raise InputError(f"bad header {header}: want source,item,value[,time][,prob]", 1)
        for lineno, rec in enumerate(reader, start=2):
            if not rec or (len(rec) == 1 and not rec[0].strip()):
                continue
            if len(rec) != len(header):
                raise InputError(f"expected {len(header)} fields, got {len(rec)}", lineno)
            rows.append(_build_observation(dict(zip(header, rec)), lineno))
    elif fmt == "json":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise InputError(f"bad JSON: {e}") from None
        if not isinstance(data, list):
            raise InputError("JSON input must be an array of claim objects")
        for i, rec in enumerate(data):
            if not isinstance(rec, dict) or not {"source", "item", "value"}.issubset(rec):
                raise InputError("claim object needs source, item, value keys", i + 1)
            rec = {k: ("" if v is None else str(v)) for k, v in rec.items()}
            rows.append(_build_observation(rec, i + 1))
    else:
        raise InputError(f"unknown format {fmt!r}")
    return Dataset(rows, mode=mode)


def snapshot_at(dataset: Dataset, t: int) -> Dataset:
    """Project a temporal dataset onto the state it described at time t.

    Per (source, item), the entry with the greatest time <= t wins; pairs
    first published after t are absent.
    """
    if dataset.mode is not Mode.TEMPORAL:
        raise InputError("snapshot_at requires a temporal dataset")
    latest: dict[tuple[str, str], Observation] = {}
    for o in dataset:
        if o.time is None or o.time > t:
            continue
        key = (o.source, o.item)
        cur = latest.get(key)
        if cur is None or o.time > cur.time:  # type: ignore[operator]
            latest[key] = o
    return Dataset(
        [Observation(o.source, o.item, o.value, None, o.prob) for o in latest.values()]
    )


def latest_snapshot(dataset: Dataset) -> Dataset:
    """Snapshot at the greatest timestamp present (identity on snapshots)."""
    if dataset.mode is Mode.SNAPSHOT:
        return dataset
    tmax = max(o.time for o in dataset if o.time is not None)
    return snapshot_at(dataset, tmax)


def to_csv(dataset: Dataset) -> str:
    """Serialize deterministically, rows ordered by (source, item, time)."""
    buf = io.StringIO()
    temporal = dataset.mode is Mode.TEMPORAL
    any_prob = any(o.prob != 1.0 for o in dataset)
    cols = ["source", "item", "value"] + (["time"] if temporal else []) + (
        ["prob"] if any_prob else [])
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for o in sorted(dataset, key=lambda o: (o.source, o.item, o.time or 0)):
        row = [o.source, o.item, o.value]
        if temporal:
            row.append(str(o.time))
        if any_prob:
            row.append(repr(o.prob))
        w.writerow(row)
    return buf.getvalue()


def to_json(dataset: Dataset) -> str:
    recs = []
    for o in sorted(dataset, key=lambda o: (o.source, o.item, o.time or 0)):
        rec: dict = {"source": o.source, "item": o.item, "value": o.value}
        if o.time is not None:
            rec["time"] = o.time
        if o.prob != 1.0:
            rec["prob"] = o.prob
        recs.append(rec)
    return json.dumps(recs, indent=None, separators=(",", ":"), sort_keys=True)
