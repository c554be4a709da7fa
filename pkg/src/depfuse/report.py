"""Report serialization and rendering.

JSON output is canonical: keys sorted, floats printed with 9 significant
digits, no locale or hash-order dependence, so identical runs produce
byte-identical files. The figure path renders matplotlib charts next to
the main report together with a small CSV table of the plotted numbers.
"""

from __future__ import annotations

import csv
import io
from pathlib import Path

__all__ = [
    "canonical_json",
    "write_report",
    "text_summary",
    "render_figures",
]


def _fmt_float(x: float) -> str:
    if x != x or x in (float("inf"), float("-inf")):
        raise ValueError(f"non-finite float {x} in report")
    if x == int(x) and abs(x) < 1e15:
        return repr(float(x))
    return format(x, ".9g")


def _canon(obj, out: list[str]) -> None:
    if obj is None or obj is True or obj is False:
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, bool):  # pragma: no cover - captured above
        out.append("true" if obj else "false")
    elif isinstance(obj, int):
        out.append(str(obj))
    elif isinstance(obj, float):
        out.append(_fmt_float(obj))
    elif isinstance(obj, str):
        out.append(_json_str(obj))
    elif isinstance(obj, dict):
        out.append("{")
        for i, k in enumerate(sorted(obj)):
            if not isinstance(k, str):
                raise TypeError(f"non-string report key {k!r}")
            if i:
                out.append(",")
            out.append(_json_str(k))
            out.append(":")
            _canon(obj[k], out)
        out.append("}")
    elif isinstance(obj, (list, tuple)):
        out.append("[")
        for i, v in enumerate(obj):
            if i:
                out.append(",")
            _canon(v, out)
        out.append("]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__} in report")


def _json_str(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def canonical_json(report: dict) -> str:
    out: list[str] = []
    _canon(report, out)
    return "".join(out) + "\n"


def text_summary(report: dict) -> str:
    """Human-readable rendering of any report produced by the CLI."""
    lines: list[str] = []
    kind = report.get("report", "report")
    lines.append(f"# {kind}")
    if "fixpoint" in report:
        fp = report["fixpoint"]
        lines.append(f"fixpoint: iterations={fp['iterations']} converged={fp['converged']}")
    if "items" in report and isinstance(report["items"], dict):
        lines.append("items:")
        for item, t in sorted(report["items"].items()):
            mark = " (tied)" if t.get("tied") else ""
            top = max(t["posterior"].values())
            lines.append(f"  {item}: {t['chosen']}{mark} p={top:.4f}")
    if "sources" in report and isinstance(report["sources"], dict):
        lines.append("sources:")
        for src, s in sorted(report["sources"].items()):
            extra = " (prior only)" if s.get("prior_only") else ""
            lines.append(f"  {src}: accuracy={s['accuracy']:.4f} coverage={s['coverage']}{extra}")
    if "pairs" in report:
        lines.append("pairs (by posterior):")
        for p in report["pairs"]:
            flag = " *" if p.get("flagged") else ""
            extra = ""
            if "classification" in p:
                extra = f" {p['classification']}"
                if p.get("lag") is not None:
                    extra += f" lag={p['lag']}"
            lines.append(
                f"  {p['pair'][0]} ~ {p['pair'][1]}: posterior={p['posterior']:.4f}"
                f" direction={p.get('direction', 0.0):+.3f}{extra}{flag}")
    if "ranking" in report:
        lines.append("ranking:")
        for i, r in enumerate(report["ranking"], 1):
            lines.append(f"  {i}. {r['source']} score={r['score']:.4f}")
    if "consensus" in report:
        lines.append("consensus (naive -> debiased):")
        for item, c in sorted(report["consensus"].items()):
            naive = max(c["naive"], key=lambda v: (c["naive"][v], v))
            deb = max(c["debiased"], key=lambda v: (c["debiased"][v], v))
            lines.append(f"  {item}: {naive} {c['naive'][naive]:.3f} -> {deb} {c['debiased'][deb]:.3f}")
    if "dependence_eval" in report:
        ev = report["dependence_eval"]
        lines.append(
            f"dependence eval: precision={ev['precision']:.3f} recall={ev['recall']:.3f}"
            f" auc={ev['auc']:.3f}")
    if "fusion_eval" in report:
        ev = report["fusion_eval"]
        lines.append(
            f"fusion eval: naive={ev['naive_accuracy']:.4f} fused={ev['fused_accuracy']:.4f}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, path: str | Path | None, fmt: str = "json") -> str:
    payload = canonical_json(report) if fmt == "json" else text_summary(report)
    if path is not None:
        Path(path).write_text(payload, encoding="utf-8")
    return payload


def _figure_imports():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_figures(report: dict, directory: str | Path) -> list[Path]:
    """Render charts (and their CSV companions) for a report."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    plt = _figure_imports()
    written: list[Path] = []

    if "pairs" in report and report["pairs"]:
        pairs = report["pairs"]
        labels = [f"{p['pair'][0]}~{p['pair'][1]}" for p in pairs]
        posts = [p["posterior"] for p in pairs]
        tau = report.get("config", {}).get("tau")
        fig, ax = plt.subplots(figsize=(7, max(2.0, 0.3 * len(labels) + 1)))
        ypos = range(len(labels))
        colors = ["#c0392b" if p.get("flagged") else "#7f8c8d" for p in pairs]
        ax.barh(list(ypos), posts, color=colors)
        ax.set_yticks(list(ypos))
        ax.set_yticklabels(labels, fontsize=8)
        ax.invert_yaxis()
        if tau is not None:
            ax.axvline(tau, color="#2c3e50", linestyle="--", linewidth=1)
        ax.set_xlabel("dependence posterior")
        ax.set_xlim(0, 1)
        fig.tight_layout()
        path = directory / "dependence_posteriors.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
        written.append(_write_csv(
            directory / "dependence_posteriors.csv",
            ["pair", "posterior", "flagged"],
            [[lbl, _fmt_float(p["posterior"]), str(bool(p.get("flagged"))).lower()]
             for lbl, p in zip(labels, pairs)]))

    if "sources" in report and isinstance(report.get("sources"), dict) and report["sources"]:
        srcs = sorted(report["sources"])
        accs = [report["sources"][s]["accuracy"] for s in srcs]
        fig, ax = plt.subplots(figsize=(max(3.0, 0.45 * len(srcs) + 1), 3))
        ax.bar(range(len(srcs)), accs, color="#2980b9")
        ax.set_xticks(range(len(srcs)))
        ax.set_xticklabels(srcs, rotation=90, fontsize=8)
        ax.set_ylabel("estimated accuracy")
        ax.set_ylim(0, 1)
        fig.tight_layout()
        path = directory / "source_accuracy.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
        written.append(_write_csv(
            directory / "source_accuracy.csv", ["source", "accuracy"],
            [[s, _fmt_float(a)] for s, a in zip(srcs, accs)]))

    if "dependence_eval" in report and report["dependence_eval"].get("sweep"):
        sweep = report["dependence_eval"]["sweep"]
        fig, ax = plt.subplots(figsize=(4.5, 3.5))
        ax.plot([r["recall"] for r in sweep], [r["precision"] for r in sweep],
                marker="o", markersize=3, color="#27ae60")
        ax.set_xlabel("recall")
        ax.set_ylabel("precision")
        ax.set_xlim(-0.02, 1.02)
        ax.set_ylim(-0.02, 1.02)
        ax.set_title(f"threshold sweep (auc={report['dependence_eval']['auc']:.3f})")
        fig.tight_layout()
        path = directory / "detection_sweep.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
        written.append(_write_csv(
            directory / "detection_sweep.csv",
            ["threshold", "precision", "recall"],
            [[_fmt_float(r["threshold"]), _fmt_float(r["precision"]),
              _fmt_float(r["recall"])] for r in sweep]))

    if "fusion_eval" in report:
        ev = report["fusion_eval"]
        fig, ax = plt.subplots(figsize=(3.2, 3))
        ax.bar([0, 1], [ev["naive_accuracy"], ev["fused_accuracy"]],
               color=["#7f8c8d", "#27ae60"])
        ax.set_xticks([0, 1])
        ax.set_xticklabels(["naive", "fused"])
        ax.set_ylabel("item accuracy")
        ax.set_ylim(0, 1.05)
        fig.tight_layout()
        path = directory / "fusion_accuracy.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)
        written.append(_write_csv(
            directory / "fusion_accuracy.csv", ["method", "accuracy"],
            [["naive", _fmt_float(ev["naive_accuracy"])],
             ["fused", _fmt_float(ev["fused_accuracy"])]]))
    return written


def _write_csv(path: Path, header: list[str], rows: list[list[str]]) -> Path:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    path.write_text(buf.getvalue(), encoding="utf-8")
    return path
