"""Matplotlib figures for the report bundle.

Figures are drawn from the ``analysis.json`` document only. PNGs are written
without a timestamp or software tag so reruns are byte-identical.
"""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DOMAINS = ["Math", "Business", "Health", "Law"]
GROUPS = ["Math", "Finance", "Medical", "Law"]
PARADIGM_COLORS = {"diversity": "#1f77b4", "workflow": "#ff7f0e"}

STYLE = {
    "font.family": "DejaVu Sans",
    "font.size": 9,
    "axes.titlesize": 10,
    "axes.labelsize": 9,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "legend.frameon": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "svg.hashsalt": "mascollab",
}


def _save(fig, path: Path) -> Path:
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def _ordered(present, order):
    return [x for x in order if x in present] + sorted(set(present) - set(order))


def accuracy_heatmaps(doc: dict, path: Path) -> Path | None:
    slices = sorted({(r["paradigm"], r["size"]) for r in doc["accuracy"]})
    if not slices:
        return None
    fig, axes = plt.subplots(1, len(slices), figsize=(3.4 * len(slices), 3.0), squeeze=False)
    for ax, (paradigm, size) in zip(axes[0], slices):
        cells = {(r["task_domain"], r["expert_group"]): r["accuracy"]
                 for r in doc["accuracy"] if (r["paradigm"], r["size"]) == (paradigm, size)}
        rows = _ordered({d for d, _ in cells}, DOMAINS)
        cols = _ordered({g for _, g in cells}, GROUPS)
        grid = np.full((len(rows), len(cols)), np.nan)
        for (d, g), acc in cells.items():
            grid[rows.index(d), cols.index(g)] = 100 * acc
        ax.imshow(grid, cmap="Blues", aspect="auto")
        for i in range(len(rows)):
            for j in range(len(cols)):
                if not np.isnan(grid[i, j]):
                    ax.text(j, i, f"{grid[i, j]:.1f}", ha="center", va="center", fontsize=8)
        ax.set_xticks(range(len(cols)), cols)
        ax.set_yticks(range(len(rows)), rows)
        ax.set_xlabel("Expert group")
        ax.set_title(f"{paradigm}, n={size}")
    axes[0][0].set_ylabel("Task domain")
    return _save(fig, path)


def paradigm_bars(doc: dict, path: Path) -> Path | None:
    rows = doc["paradigm_means"]["task_domain"]
    if not rows:
        return None
    sizes = sorted({r["size"] for r in rows})
    domains = _ordered({r["key"] for r in rows}, DOMAINS)
    fig, ax = plt.subplots(figsize=(4.5, 2.8))
    width = 0.8 / len(sizes)
    for k, size in enumerate(sizes):
        vals = {r["key"]: 100 * r["mean_delta_rel"] for r in rows if r["size"] == size}
        x = np.arange(len(domains)) + k * width
        ax.bar(x, [vals.get(d, 0.0) for d in domains], width, label=f"n={size}")
    ax.axhline(0, color="black", linewidth=0.6)
    ax.set_xticks(np.arange(len(domains)) + width * (len(sizes) - 1) / 2, domains)
    ax.set_ylabel("Diversity vs workflow (%)")
    ax.legend()
    return _save(fig, path)


def scaling_lines(doc: dict, path: Path) -> Path | None:
    scaling = doc.get("scaling")
    if not scaling:
        return None
    pooled = [r for r in scaling["rows"] if r["expert_group"] == "*"]
    if not pooled:
        return None
    paradigms = sorted({r["paradigm"] for r in pooled})
    fig, axes = plt.subplots(1, len(paradigms), figsize=(3.6 * len(paradigms), 2.8), squeeze=False, sharey=True)
    for ax, paradigm in zip(axes[0], paradigms):
        by_domain = defaultdict(list)
        for r in pooled:
            if r["paradigm"] == paradigm and r["perf_improvement_rel"] is not None:
                by_domain[r["task_domain"]].append((r["size"], 100 * r["perf_improvement_rel"]))
        for domain in _ordered(by_domain, DOMAINS):
            points = [(scaling["baseline_size"], 0.0)] + sorted(by_domain[domain])
            ax.plot(*zip(*points), marker="o", label=domain)
        ax.set_title(paradigm)
        ax.set_xlabel("Agents")
        ax.axhline(0, color="black", linewidth=0.6)
    axes[0][0].set_ylabel(f"Accuracy change vs n={scaling['baseline_size']} (%)")
    axes[0][-1].legend()
    return _save(fig, path)


def pot_bars(doc: dict, path: Path) -> Path | None:
    scaling = doc.get("scaling")
    if not scaling:
        return None
    pooled = [r for r in scaling["rows"] if r["expert_group"] == "*" and r["pot"] is not None]
    if not pooled:
        return None
    keys = sorted({(r["paradigm"], r["size"]) for r in pooled})
    domains = _ordered({r["task_domain"] for r in pooled}, DOMAINS)
    fig, ax = plt.subplots(figsize=(5.0, 2.8))
    width = 0.8 / len(keys)
    for k, (paradigm, size) in enumerate(keys):
        vals = {r["task_domain"]: r["pot"] for r in pooled if (r["paradigm"], r["size"]) == (paradigm, size)}
        ax.bar(np.arange(len(domains)) + k * width, [vals.get(d, 0.0) for d in domains], width,
               label=f"{paradigm}, n={size}")
    ax.axhline(0, color="black", linewidth=0.6)
    ax.set_xticks(np.arange(len(domains)) + width * (len(keys) - 1) / 2, domains)
    ax.set_ylabel("PoT")
    ax.legend(fontsize=7)
    return _save(fig, path)


def diversity_boxes(doc: dict, path: Path) -> Path | None:
    div = doc.get("diversity")
    if not div or not div["pairs"]:
        return None
    groups = defaultdict(list)
    for r in div["pairs"]:
        groups[(r["task_domain"], r["paradigm"])].append(r["similarity"])
    domains = _ordered({d for d, _ in groups}, DOMAINS)
    paradigms = sorted({p for _, p in groups})
    fig, ax = plt.subplots(figsize=(4.8, 2.8))
    width = 0.8 / len(paradigms)
    for k, paradigm in enumerate(paradigms):
        data = [groups.get((d, paradigm), []) for d in domains]
        pos = [i + k * width for i, vals in enumerate(data) if vals]
        data = [vals for vals in data if vals]
        box = ax.boxplot(data, positions=pos, widths=width * 0.9, patch_artist=True, showfliers=False)
        for patch in box["boxes"]:
            patch.set_facecolor(PARADIGM_COLORS.get(paradigm, "#999999"))
        ax.plot([], [], color=PARADIGM_COLORS.get(paradigm, "#999999"), linewidth=6, label=paradigm)
    ax.set_xticks(np.arange(len(domains)) + width * (len(paradigms) - 1) / 2, domains)
    ax.set_ylabel("Pairwise cosine similarity")
    ax.legend()
    return _save(fig, path)


def relevance_heatmap(doc: dict, path: Path) -> Path | None:
    rel = doc.get("relevance")
    if not rel:
        return None
    grid = np.array([r["counts"] for r in rel["rows"]], dtype=float)
    fig, ax = plt.subplots(figsize=(3.6, 3.0))
    ax.imshow(grid, cmap="Blues", aspect="auto")
    for i in range(grid.shape[0]):
        for j in range(grid.shape[1]):
            ax.text(j, i, f"{int(grid[i, j])}", ha="center", va="center", fontsize=8)
    ax.set_xticks(range(len(rel["columns"])), rel["columns"])
    ax.set_yticks(range(len(rel["rows"])), [r["task_domain"] for r in rel["rows"]])
    ax.set_xlabel("Expertise domain")
    ax.set_ylabel("Task domain")
    return _save(fig, path)


FIGURES = {
    "accuracy.png": accuracy_heatmaps,
    "paradigm_comparison.png": paradigm_bars,
    "scaling.png": scaling_lines,
    "pot.png": pot_bars,
    "diversity.png": diversity_boxes,
    "relevance_heatmap.png": relevance_heatmap,
}


def render_figures(doc: dict, out_dir: str | Path) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    with plt.rc_context(STYLE):
        for name, draw in FIGURES.items():
            path = draw(doc, out / name)
            if path is not None:
                written.append(path)
    return written
