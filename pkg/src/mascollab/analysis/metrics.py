"""Accuracy matrices, alignment deltas, paradigm comparison and scaling trade-offs.

Accuracies are kept as exact fractions; conversion to decimals happens only
when a report is written.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from statistics import mean
from typing import Iterable, Mapping

from ..core import DEFAULT_ALIGNMENT, ExpertGroup, Paradigm, ReasoningType, TaskDomain

CellKey = tuple[TaskDomain, ExpertGroup, Paradigm, int]


class AnalysisError(ValueError):
    pass


def as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        # Through str so 0.78 means 78/100, not its binary approximation.
        return Fraction(repr(value))
    return Fraction(value)


@dataclass(frozen=True)
class CellStats:
    correct: int
    n_instances: int
    total_tokens: int = 0

    @property
    def accuracy(self) -> Fraction:
        return Fraction(self.correct, self.n_instances)

    @property
    def mean_tokens(self) -> Fraction:
        return Fraction(self.total_tokens, self.n_instances)


@dataclass(frozen=True)
class AccuracyMatrix:
    cells: Mapping[CellKey, CellStats]

    @classmethod
    def from_accuracies(cls, accuracies: Mapping[CellKey, object], tokens: Mapping[CellKey, int] | None = None,
                        n_instances: int | None = None) -> AccuracyMatrix:
        """Build a matrix from published or synthetic accuracies.

        Each accuracy becomes an exact ``correct / n`` pair; with
        ``n_instances`` unset the fraction's own denominator is used.
        """
        cells = {}
        for key, acc in accuracies.items():
            acc = as_fraction(acc)
            n = n_instances or acc.denominator
            correct = acc * n
            if correct.denominator != 1:
                raise AnalysisError(f"accuracy {acc} is not representable over {n} instances")
            total = (tokens or {}).get(key, 0) * n
            cells[key] = CellStats(int(correct), n, int(total))
        return cls(cells)

    def get(self, domain, group, paradigm, size) -> CellStats | None:
        return self.cells.get((domain, group, paradigm, size))

    def slices(self) -> list[tuple[Paradigm, int]]:
        return sorted({(k[2], k[3]) for k in self.cells}, key=lambda s: (s[0].value, s[1]))


def compute_accuracy_matrix(records: Iterable) -> AccuracyMatrix:
    """Aggregate run records per (task domain, expert group, paradigm, size).

    Failed runs count as incorrect and their partial turns still count
    toward tokens.
    """
    correct = defaultdict(int)
    total = defaultdict(int)
    tokens = defaultdict(int)
    for record in records:
        key = record.cell
        total[key] += 1
        correct[key] += bool(record.result.correct)
        tokens[key] += record.result.total_tokens
    if not total:
        raise AnalysisError("no records")
    return AccuracyMatrix({k: CellStats(correct[k], total[k], tokens[k]) for k in sorted(total, key=_cell_order)})


def _cell_order(key: CellKey):
    domain, group, paradigm, size = key
    return (list(TaskDomain).index(domain), list(ExpertGroup).index(group), paradigm.value, size)


@dataclass(frozen=True)
class AlignmentDelta:
    task_domain: TaskDomain
    paradigm: Paradigm
    size: int
    aligned_group: ExpertGroup
    aligned_acc: Fraction
    best_alternative_group: ExpertGroup
    best_alternative_acc: Fraction
    delta_abs: Fraction
    delta_rel: Fraction | None


def compute_alignment_deltas(
    matrix: AccuracyMatrix,
    alignment: Mapping[TaskDomain, ExpertGroup] = DEFAULT_ALIGNMENT,
    *,
    strict: bool = True,
) -> list[AlignmentDelta]:
    """Aligned-group accuracy against the best non-aligned group, per domain.

    Computed separately for every (paradigm, size) slice in the matrix. With
    ``strict`` false, domains lacking the aligned group or any alternative are
    skipped instead of raising.
    """
    deltas = []
    for paradigm, size in matrix.slices():
        by_domain = defaultdict(dict)
        for (domain, group, p, s), stats in matrix.cells.items():
            if (p, s) == (paradigm, size):
                by_domain[domain][group] = stats.accuracy
        for domain in TaskDomain:
            if domain not in by_domain:
                continue
            row = by_domain[domain]
            aligned = alignment.get(domain)
            alternatives = {g: a for g, a in row.items() if g is not aligned}
            if aligned not in row or not alternatives:
                if strict:
                    raise AnalysisError(
                        f"missing cells for {domain.value} ({paradigm.value}, size {size}): "
                        "need the aligned group and at least one alternative"
                    )
                continue
            # Ties resolve to the earliest group in enum order.
            best_group = max(alternatives, key=lambda g: (alternatives[g], -list(ExpertGroup).index(g)))
            best = alternatives[best_group]
            delta_abs = row[aligned] - best
            deltas.append(AlignmentDelta(
                task_domain=domain,
                paradigm=paradigm,
                size=size,
                aligned_group=aligned,
                aligned_acc=row[aligned],
                best_alternative_group=best_group,
                best_alternative_acc=best,
                delta_abs=delta_abs,
                delta_rel=delta_abs / best if best else None,
            ))
    return deltas


def mean_relative_delta(deltas: Iterable[AlignmentDelta]) -> dict[tuple[Paradigm, int, ReasoningType], Fraction]:
    """Average relative alignment gain per reasoning type (e.g. Health+Law)."""
    buckets = defaultdict(list)
    for d in deltas:
        if d.delta_rel is not None:
            buckets[(d.paradigm, d.size, d.task_domain.reasoning_type)].append(d.delta_rel)
    return {k: sum(v, Fraction(0)) / len(v) for k, v in buckets.items()}


@dataclass(frozen=True)
class ParadigmDelta:
    task_domain: TaskDomain
    expert_group: ExpertGroup
    size: int
    diversity_acc: Fraction
    workflow_acc: Fraction
    delta_rel: Fraction | None


def compute_paradigm_comparison(matrix: AccuracyMatrix) -> list[ParadigmDelta]:
    """Relative advantage of diversity-driven over structured workflow per cell."""
    rows = []
    for (domain, group, paradigm, size), stats in matrix.cells.items():
        if paradigm is not Paradigm.DIVERSITY:
            continue
        other = matrix.get(domain, group, Paradigm.WORKFLOW, size)
        if other is None:
            continue
        div, wf = stats.accuracy, other.accuracy
        rows.append(ParadigmDelta(domain, group, size, div, wf, (div - wf) / wf if wf else None))
    return rows


def paradigm_means(rows: Iterable[ParadigmDelta], by: str) -> dict:
    """Mean relative paradigm advantage keyed by ``(domain|group, size)``."""
    buckets = defaultdict(list)
    for r in rows:
        if r.delta_rel is not None:
            buckets[(getattr(r, by), r.size)].append(float(r.delta_rel))
    return {k: mean(v) for k, v in buckets.items()}


@dataclass(frozen=True)
class ScalingRow:
    task_domain: TaskDomain
    expert_group: ExpertGroup | None  # None: pooled over groups
    paradigm: Paradigm
    size: int
    perf_improvement_rel: Fraction | None
    token_overhead_rel: Fraction | None
    pot: Fraction | None
    note: str = ""


@dataclass(frozen=True)
class ScalingReport:
    baseline_size: int
    rows: tuple[ScalingRow, ...]

    @property
    def notes(self) -> list[str]:
        return [f"{r.task_domain.value}/{r.expert_group.value if r.expert_group else '*'}/"
                f"{r.paradigm.value}/{r.size}: {r.note}" for r in self.rows if r.note]


def scaling_row(domain, group, paradigm, size, base: CellStats, scaled: CellStats) -> ScalingRow:
    acc_0, acc_n = base.accuracy, scaled.accuracy
    tok_0, tok_n = base.mean_tokens, scaled.mean_tokens
    perf = (acc_n - acc_0) / acc_0 if acc_0 else None
    tokens = (tok_n - tok_0) / tok_0 if tok_0 else None
    notes = []
    if perf is None:
        notes.append("baseline accuracy is zero")
    if tokens is None:
        notes.append("baseline token count is zero")
    elif tokens == 0:
        notes.append("no token overhead")
    elif tokens < 0:
        notes.append("negative token overhead")
    pot = perf / tokens if perf is not None and tokens is not None and tokens > 0 else None
    if pot is None:
        notes.append("PoT undefined, cell skipped")
    return ScalingRow(domain, group, paradigm, size, perf, tokens, pot, "; ".join(notes))


def compute_scaling_report(matrix: AccuracyMatrix, baseline_size: int = 3) -> ScalingReport:
    """Accuracy gain, token overhead and their ratio against the baseline size.

    Token overhead compares mean tokens per instance, so cells with unequal
    instance counts stay comparable. Pooled rows (``expert_group`` None)
    aggregate all groups of a (domain, paradigm, size).
    """
    rows = []
    pooled = defaultdict(lambda: [0, 0, 0])
    for (domain, group, paradigm, size), stats in matrix.cells.items():
        if size == baseline_size:
            continue
        base = matrix.get(domain, group, paradigm, baseline_size)
        if base is None:
            raise AnalysisError(
                f"missing size-{baseline_size} baseline for {domain.value}/{group.value}/{paradigm.value}"
            )
        rows.append(scaling_row(domain, group, paradigm, size, base, stats))
        for key, cell in (((domain, paradigm, baseline_size, group), base), ((domain, paradigm, size, group), stats)):
            acc = pooled[key]
            acc[0], acc[1], acc[2] = cell.correct, cell.n_instances, cell.total_tokens
    merged = defaultdict(lambda: [0, 0, 0])
    for (domain, paradigm, size, _group), (c, n, t) in pooled.items():
        m = merged[(domain, paradigm, size)]
        m[0] += c
        m[1] += n
        m[2] += t
    for (domain, paradigm, size), (c, n, t) in merged.items():
        if size == baseline_size:
            continue
        base = CellStats(*merged[(domain, paradigm, baseline_size)])
        rows.append(scaling_row(domain, None, paradigm, size, base, CellStats(c, n, t)))
    rows.sort(key=lambda r: (list(TaskDomain).index(r.task_domain), r.paradigm.value, r.size,
                             -1 if r.expert_group is None else list(ExpertGroup).index(r.expert_group)))
    return ScalingReport(baseline_size, tuple(rows))
