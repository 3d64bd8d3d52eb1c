"""Serialize analyses to ``analysis.json`` and render CSV/SVG tables from it.

Every table is rendered from the JSON document alone, so ``analyze`` and
``report`` produce identical files for identical inputs.
"""

from __future__ import annotations

import csv
import json
from fractions import Fraction
from html import escape
from pathlib import Path

from .diversity import DECILES, DiversityReport
from .metrics import (
    AccuracyMatrix,
    AlignmentDelta,
    ParadigmDelta,
    ScalingReport,
    mean_relative_delta,
    paradigm_means,
)
from .relevance import RelevanceMatrix

ANALYSIS_FILE = "analysis.json"


def _num(x):
    if x is None:
        return None
    return float(x) if isinstance(x, Fraction) else x


def _cell_dict(key) -> dict:
    domain, group, paradigm, size = key
    return {"task_domain": domain.value, "expert_group": group.value, "paradigm": paradigm.value, "size": size}


def analysis_document(
    matrix: AccuracyMatrix,
    deltas: list[AlignmentDelta],
    paradigm_rows: list[ParadigmDelta],
    *,
    scaling: ScalingReport | None = None,
    diversity: DiversityReport | None = None,
    relevance: RelevanceMatrix | None = None,
    notes: list[str] | None = None,
) -> dict:
    doc = {
        "accuracy": [
            {**_cell_dict(k), "correct": s.correct, "n_instances": s.n_instances,
             "accuracy": _num(s.accuracy), "total_tokens": s.total_tokens, "mean_tokens": _num(s.mean_tokens)}
            for k, s in matrix.cells.items()
        ],
        "alignment_deltas": [
            {"paradigm": d.paradigm.value, "size": d.size, "task_domain": d.task_domain.value,
             "aligned_group": d.aligned_group.value, "aligned_acc": _num(d.aligned_acc),
             "best_alternative_group": d.best_alternative_group.value,
             "best_alternative_acc": _num(d.best_alternative_acc),
             "delta_abs": _num(d.delta_abs), "delta_rel": _num(d.delta_rel)}
            for d in deltas
        ],
        "alignment_by_reasoning_type": [
            {"paradigm": p.value, "size": s, "reasoning_type": rt.value, "mean_delta_rel": _num(v)}
            for (p, s, rt), v in sorted(mean_relative_delta(deltas).items(),
                                        key=lambda kv: (kv[0][0].value, kv[0][1], kv[0][2].value))
        ],
        "paradigm_comparison": [
            {"task_domain": r.task_domain.value, "expert_group": r.expert_group.value, "size": r.size,
             "diversity_acc": _num(r.diversity_acc), "workflow_acc": _num(r.workflow_acc),
             "delta_rel": _num(r.delta_rel)}
            for r in paradigm_rows
        ],
        "paradigm_means": {
            by: [{"key": k.value, "size": s, "mean_delta_rel": v}
                 for (k, s), v in sorted(paradigm_means(paradigm_rows, by).items(), key=lambda kv: (kv[0][0].value, kv[0][1]))]
            for by in ("task_domain", "expert_group")
        },
        "scaling": None,
        "diversity": None,
        "relevance": None,
        "notes": list(notes or []),
    }
    if scaling is not None:
        doc["scaling"] = {
            "baseline_size": scaling.baseline_size,
            "rows": [
                {"task_domain": r.task_domain.value,
                 "expert_group": r.expert_group.value if r.expert_group else "*",
                 "paradigm": r.paradigm.value, "size": r.size,
                 "perf_improvement_rel": _num(r.perf_improvement_rel),
                 "token_overhead_rel": _num(r.token_overhead_rel),
                 "pot": _num(r.pot), "note": r.note}
                for r in scaling.rows
            ],
        }
        doc["notes"].extend(scaling.notes)
    if diversity is not None:
        doc["diversity"] = {
            "skipped": diversity.skipped,
            "pairs": [
                {**_cell_dict(item.cell), "instance_id": item.instance_id,
                 "agent_a": a, "agent_b": b, "similarity": s}
                for item in diversity.instances for a, b, s in item.pairs
            ],
            "summaries": [
                {**_cell_dict(key), "aggregation": label, "count": summary.count, "mean": summary.mean,
                 "median": summary.median, "deciles": list(summary.deciles)}
                for label, table in (("pooled_pairs", diversity.pooled_pairs),
                                     ("instance_mean", diversity.instance_means))
                for key, summary in table.items()
            ],
        }
    if relevance is not None:
        doc["relevance"] = {
            "samples_per_domain": relevance.samples_per_domain,
            "columns": [c.value for c in relevance.columns],
            "rows": [
                {"task_domain": row.value,
                 "counts": [relevance.counts.get((row, col), 0) for col in relevance.columns],
                 "total": relevance.row_total(row),
                 "sampled": relevance.sampled[row], "dropped": relevance.dropped[row]}
                for row in relevance.rows
            ],
        }
    return doc


def write_json(path: Path, data) -> Path:
    path.write_text(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def _fmt(x, digits=6) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return f"{x:.{digits}f}"
    return str(x)


def _pct(x, digits=1) -> str:
    return "" if x is None else f"{100 * x:.{digits}f}"


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)
    return path


def heatmap_svg(rows: list[str], columns: list[str], values: list[list[int]], title: str = "") -> str:
    """Self-contained SVG heatmap; color scales linearly from min to max value."""
    cell, left, top = 64, 90, 60 if title else 40
    width, height = left + cell * len(columns) + 10, top + cell * len(rows) + 10
    flat = [v for row in values for v in row]
    lo, hi = (min(flat), max(flat)) if flat else (0, 0)
    light, dark = (247, 251, 255), (8, 48, 107)

    def color(v):
        t = 0.0 if hi == lo else (v - lo) / (hi - lo)
        return "#" + "".join(f"{round(a + (b - a) * t):02x}" for a, b in zip(light, dark)), t

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    if title:
        out.append(f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for j, name in enumerate(columns):
        out.append(f'<text x="{left + cell * j + cell / 2:.0f}" y="{top - 8}" text-anchor="middle">{escape(name)}</text>')
    for i, name in enumerate(rows):
        y = top + cell * i
        out.append(f'<text x="{left - 8}" y="{y + cell / 2 + 4:.0f}" text-anchor="end">{escape(name)}</text>')
        for j, v in enumerate(values[i]):
            fill, t = color(v)
            ink = "#ffffff" if t > 0.5 else "#000000"
            x = left + cell * j
            out.append(f'<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="{fill}" stroke="#ffffff"/>')
            out.append(f'<text x="{x + cell / 2:.0f}" y="{y + cell / 2 + 4:.0f}" text-anchor="middle" '
                       f'fill="{ink}">{v}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


CELL_COLUMNS = ["task_domain", "expert_group", "paradigm", "size"]


def render_tables(doc: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        _write_csv(out / "accuracy.csv", CELL_COLUMNS + ["correct", "n_instances", "accuracy", "total_tokens", "mean_tokens"],
                   ([r[c] for c in CELL_COLUMNS] + [r["correct"], r["n_instances"], _fmt(r["accuracy"]),
                                                    r["total_tokens"], _fmt(r["mean_tokens"], 2)]
                    for r in doc["accuracy"])),
        _write_csv(out / "alignment_deltas.csv",
                   ["paradigm", "size", "task_domain", "aligned_group", "aligned_acc", "best_alternative_group",
                    "best_alternative_acc", "delta_abs_pp", "delta_rel_pct", "delta_abs", "delta_rel"],
                   ([r["paradigm"], r["size"], r["task_domain"], r["aligned_group"], _fmt(r["aligned_acc"]),
                     r["best_alternative_group"], _fmt(r["best_alternative_acc"]), _pct(r["delta_abs"]),
                     _pct(r["delta_rel"]), _fmt(r["delta_abs"]), _fmt(r["delta_rel"])]
                    for r in doc["alignment_deltas"])),
        _write_csv(out / "paradigm_comparison.csv",
                   ["task_domain", "expert_group", "size", "diversity_acc", "workflow_acc", "delta_rel_pct"],
                   ([r["task_domain"], r["expert_group"], r["size"], _fmt(r["diversity_acc"]),
                     _fmt(r["workflow_acc"]), _pct(r["delta_rel"], 2)] for r in doc["paradigm_comparison"])),
    ]
    if doc.get("scaling"):
        written.append(_write_csv(
            out / "scaling.csv",
            CELL_COLUMNS + ["baseline_size", "perf_improvement_rel", "token_overhead_rel", "pot", "note"],
            ([r[c] for c in CELL_COLUMNS] + [doc["scaling"]["baseline_size"], _fmt(r["perf_improvement_rel"]),
                                             _fmt(r["token_overhead_rel"]), _fmt(r["pot"]), r["note"]]
             for r in doc["scaling"]["rows"]),
        ))
    if doc.get("diversity"):
        div = doc["diversity"]
        written.append(_write_csv(
            out / "diversity_pairs.csv",
            CELL_COLUMNS + ["instance_id", "agent_a", "agent_b", "cosine_similarity"],
            ([r[c] for c in CELL_COLUMNS] + [r["instance_id"], r["agent_a"], r["agent_b"], _fmt(r["similarity"])]
             for r in div["pairs"]),
        ))
        written.append(_write_csv(
            out / "diversity_summary.csv",
            CELL_COLUMNS + ["aggregation", "count", "mean", "median"] + [f"p{d}" for d in DECILES],
            ([r[c] for c in CELL_COLUMNS] + [r["aggregation"], r["count"], _fmt(r["mean"]), _fmt(r["median"])]
             + [_fmt(x) for x in r["deciles"]] for r in div["summaries"]),
        ))
    if doc.get("relevance"):
        rel = doc["relevance"]
        written.append(_write_csv(
            out / "relevance_counts.csv",
            ["task_domain"] + rel["columns"] + ["total", "sampled", "dropped"],
            ([r["task_domain"]] + r["counts"] + [r["total"], r["sampled"], r["dropped"]] for r in rel["rows"]),
        ))
        svg = heatmap_svg([r["task_domain"] for r in rel["rows"]], rel["columns"],
                          [r["counts"] for r in rel["rows"]], title="Expertise relevance by task domain")
        path = out / "relevance_heatmap.svg"
        path.write_text(svg, encoding="utf-8")
        written.append(path)
    return written


def summary_document(doc: dict) -> dict:
    """Headline numbers for the consolidated bundle."""
    pooled_scaling = [r for r in (doc.get("scaling") or {}).get("rows", []) if r["expert_group"] == "*"]
    return {
        "cells": len(doc["accuracy"]),
        "instances": sum(r["n_instances"] for r in doc["accuracy"]),
        "alignment_deltas": [
            {k: r[k] for k in ("paradigm", "size", "task_domain", "delta_abs", "delta_rel")}
            for r in doc["alignment_deltas"]
        ],
        "alignment_by_reasoning_type": doc["alignment_by_reasoning_type"],
        "paradigm_means": doc["paradigm_means"],
        "pot": [{k: r[k] for k in ("task_domain", "paradigm", "size", "pot", "note")} for r in pooled_scaling],
        "relevance_row_totals": (
            {r["task_domain"]: r["total"] for r in doc["relevance"]["rows"]} if doc.get("relevance") else None
        ),
        "diversity_skipped": doc["diversity"]["skipped"] if doc.get("diversity") else None,
        "notes": doc["notes"],
    }


def load_analysis(reports_dir: str | Path) -> dict:
    path = Path(reports_dir) / ANALYSIS_FILE
    if not path.exists():
        raise FileNotFoundError(f"{path} not found; run `mascollab analyze` first")
    return json.loads(path.read_text(encoding="utf-8"))


def render_bundle(reports_dir: str | Path, *, figures: bool = True) -> list[Path]:
    """Consolidate ``analysis.json`` into ``<reports_dir>/bundle``."""
    doc = load_analysis(reports_dir)
    bundle = Path(reports_dir) / "bundle"
    written = render_tables(doc, bundle)
    written.append(write_json(bundle / "summary.json", summary_document(doc)))
    if figures:
        from .figures import render_figures

        written.extend(render_figures(doc, bundle / "figures"))
    return written


__all__ = [
    "ANALYSIS_FILE",
    "analysis_document",
    "heatmap_svg",
    "load_analysis",
    "render_bundle",
    "render_tables",
    "summary_document",
    "write_json",
]
