from __future__ import annotations

import re
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import make_instances
from mascollab.analysis import (
    AccuracyMatrix,
    AnalysisError,
    analysis_document,
    build_relevance_matrix,
    compute_accuracy_matrix,
    compute_alignment_deltas,
    compute_diversity,
    compute_paradigm_comparison,
    compute_scaling_report,
    cosine_similarity,
    heatmap_svg,
    mean_relative_delta,
    parse_relevance_response,
    render_relevance_prompt,
    render_tables,
    similarity_matrix,
)
from mascollab.analysis.diversity import DistributionSummary
from mascollab.analysis.report import summary_document
from mascollab.backends import BackendError, HashEmbedder, ScriptedBackend
from mascollab.core import (
    AgentTurn,
    CollaborationResult,
    ExpertGroup,
    Paradigm,
    ReasoningType,
    TaskDomain,
)
from mascollab.harness import RunRecord

D, W = Paradigm.DIVERSITY, Paradigm.WORKFLOW


def record(iid, correct, group=ExpertGroup.MATH, domain=TaskDomain.MATH, paradigm=D, size=3, tokens=10,
           error=None, outputs=None):
    outputs = outputs or [f"{iid} out {k}" for k in range(size)]
    turns = tuple(AgentTurn(k + 1, f"R{k}", text, 0, tokens, 0) for k, text in enumerate(outputs))
    result = CollaborationResult(iid, "fp", turns, 0 if correct else 1, correct, 0, error)
    return RunRecord("plan", f"{group.value}{paradigm.value}{size}", iid, domain, group, paradigm, size, result)


# -- accuracy ---------------------------------------------------------------------------------------


def test_accuracy_is_exact_fraction():
    records = [record(f"q{k}", k < 78) for k in range(100)]
    stats = compute_accuracy_matrix(records).get(TaskDomain.MATH, ExpertGroup.MATH, D, 3)
    assert stats.accuracy == Fraction(78, 100)
    assert stats.total_tokens == 100 * 3 * 10


def test_failed_instance_counts_incorrect():
    records = [record(f"q{k}", True) for k in range(9)] + [record("q9", False, error="agent 1 (R0): boom")]
    assert compute_accuracy_matrix(records).get(TaskDomain.MATH, ExpertGroup.MATH, D, 3).accuracy == Fraction(9, 10)


def test_empty_log_rejected():
    with pytest.raises(AnalysisError, match="no records"):
        compute_accuracy_matrix([])


def test_from_accuracies_rejects_unrepresentable():
    with pytest.raises(AnalysisError):
        AccuracyMatrix.from_accuracies({(TaskDomain.MATH, ExpertGroup.MATH, D, 3): Fraction(1, 3)}, n_instances=10)


# -- alignment deltas --------------------------------------------------------------------------------


def matrix_from_rows(rows: dict, paradigm=D, size=3) -> AccuracyMatrix:
    return AccuracyMatrix.from_accuracies({
        (domain, group, paradigm, size): Fraction(acc) for domain, accs in rows.items()
        for group, acc in zip(ExpertGroup, accs)
    })


def test_published_examples():
    law, business = compute_alignment_deltas(matrix_from_rows({
        TaskDomain.LAW: ("0.183", "0.192", "0.185", "0.208"),
        TaskDomain.BUSINESS: ("0.654", "0.643", "0.624", "0.624"),
    }))[::-1]
    assert law.best_alternative_group is ExpertGroup.FINANCE
    assert round(float(law.delta_abs) * 100, 1) == 1.6 and round(float(law.delta_rel) * 100, 1) == 8.3
    assert business.aligned_group is ExpertGroup.FINANCE and business.best_alternative_group is ExpertGroup.MATH
    assert round(float(business.delta_abs) * 100, 1) == -1.1 and round(float(business.delta_rel) * 100, 1) == -1.7


def test_equal_accuracy_gives_zero():
    (d,) = compute_alignment_deltas(matrix_from_rows({TaskDomain.HEALTH: ("0.5",) * 4}))
    assert d.delta_abs == 0 and d.delta_rel == 0


def test_missing_cells():
    matrix = AccuracyMatrix.from_accuracies({(TaskDomain.LAW, ExpertGroup.MATH, D, 3): Fraction(1, 2)})
    with pytest.raises(AnalysisError, match="missing cells"):
        compute_alignment_deltas(matrix)
    assert compute_alignment_deltas(matrix, strict=False) == []


def test_deltas_per_slice():
    rows = {TaskDomain.MATH: ("0.8", "0.7", "0.6", "0.5")}
    cells = {**matrix_from_rows(rows).cells, **matrix_from_rows(rows, W, 6).cells}
    deltas = compute_alignment_deltas(AccuracyMatrix(cells))
    assert {(d.paradigm, d.size) for d in deltas} == {(D, 3), (W, 6)}


def test_mean_relative_delta_by_reasoning_type():
    deltas = compute_alignment_deltas(matrix_from_rows({
        TaskDomain.HEALTH: ("0.289", "0.268", "0.304", "0.261"),
        TaskDomain.LAW: ("0.183", "0.192", "0.185", "0.208"),
    }))
    mean = mean_relative_delta(deltas)[(D, 3, ReasoningType.CONTEXTUAL)]
    assert mean == (deltas[0].delta_rel + deltas[1].delta_rel) / 2
    assert abs(float(mean) * 100 - 6.75) <= 0.05


accs = st.fractions(min_value=Fraction(1, 100), max_value=1, max_denominator=100)


@given(row=st.lists(accs, min_size=4, max_size=4), scale=st.fractions(min_value=Fraction(1, 10), max_value=1,
                                                                     max_denominator=20))
def test_alignment_scale_invariance_and_sign(row, scale):
    base = compute_alignment_deltas(matrix_from_rows({TaskDomain.MATH: row}))[0]
    scaled = compute_alignment_deltas(matrix_from_rows({TaskDomain.MATH: [a * scale for a in row]}))[0]
    assert (base.delta_abs > 0) == (base.delta_rel > 0) and (base.delta_abs < 0) == (base.delta_rel < 0)
    assert np.sign(float(base.delta_abs)) == np.sign(float(scaled.delta_abs))
    assert base.best_alternative_group is scaled.best_alternative_group
    assert base.best_alternative_acc == max(row[1:])


# -- paradigm comparison and scaling -------------------------------------------------------------------


def test_paradigm_comparison():
    cells = {
        (TaskDomain.MATH, ExpertGroup.MATH, D, 3): Fraction(3, 5),
        (TaskDomain.MATH, ExpertGroup.MATH, W, 3): Fraction(1, 2),
        (TaskDomain.LAW, ExpertGroup.MATH, D, 3): Fraction(1, 2),
    }
    (row,) = compute_paradigm_comparison(AccuracyMatrix.from_accuracies(cells))
    assert row.delta_rel == Fraction(1, 5)


def test_scaling_requires_baseline():
    matrix = AccuracyMatrix.from_accuracies({(TaskDomain.MATH, ExpertGroup.MATH, D, 6): Fraction(1, 2)})
    with pytest.raises(AnalysisError, match="baseline"):
        compute_scaling_report(matrix)


def test_scaling_pooled_rows():
    acc = {(TaskDomain.MATH, g, D, s): Fraction(a) for g, s, a in [
        (ExpertGroup.MATH, 3, "0.5"), (ExpertGroup.MATH, 6, "0.6"),
        (ExpertGroup.LAW, 3, "0.3"), (ExpertGroup.LAW, 6, "0.3"),
    ]}
    tokens = {k: (100 if k[3] == 3 else 200) for k in acc}
    report = compute_scaling_report(AccuracyMatrix.from_accuracies(acc, tokens, n_instances=10))
    pooled = [r for r in report.rows if r.expert_group is None]
    assert len(pooled) == 1
    assert pooled[0].perf_improvement_rel == Fraction(1, 8)  # 0.45 vs 0.40
    assert pooled[0].token_overhead_rel == 1
    assert pooled[0].pot == Fraction(1, 8)


# -- diversity ---------------------------------------------------------------------------------------------


def test_cosine_zero_vector():
    with pytest.raises(ValueError):
        cosine_similarity((0.0, 0.0), (1.0, 0.0))


@given(st.lists(st.lists(st.floats(-10, 10), min_size=3, max_size=3).filter(lambda v: np.linalg.norm(v) > 1e-3),
                min_size=2, max_size=10))
def test_similarity_matrix_properties(vectors):
    m = similarity_matrix(vectors)
    assert np.array_equal(m, m.T)
    assert np.all(np.diag(m) == 1.0)
    assert np.all((m >= -1) & (m <= 1))


def test_diversity_skips_failed_and_single_turn():
    records = [record("a", True), record("b", True, error="agent 2 (R1): x"), record("c", True, size=1)]
    report = compute_diversity(records, HashEmbedder(16))
    assert report.skipped == 2
    assert len(report.instances) == 1


def test_identical_outputs_fully_similar():
    report = compute_diversity([record("a", True, outputs=["same"] * 3)], HashEmbedder(16))
    assert all(abs(s - 1.0) < 1e-12 for _, _, s in report.instances[0].pairs)


def test_both_aggregations_reported():
    records = [record(f"q{k}", True, size=6) for k in range(4)]
    report = compute_diversity(records, HashEmbedder(16))
    key = (TaskDomain.MATH, ExpertGroup.MATH, D, 6)
    assert report.pooled_pairs[key].count == 4 * 15
    assert report.instance_means[key].count == 4
    assert abs(report.pooled_pairs[key].mean - report.instance_means[key].mean) < 1e-12


def test_distribution_summary():
    s = DistributionSummary.of(list(range(11)))
    assert (s.count, s.mean, s.median) == (11, 5.0, 5.0)
    assert s.deciles == tuple(float(d) for d in range(1, 10))


def test_diversity_is_pure():
    records = [record(f"q{k}", True) for k in range(3)]
    assert compute_diversity(records, HashEmbedder(8)) == compute_diversity(records, HashEmbedder(8))


# -- relevance -------------------------------------------------------------------------------------------------


@pytest.mark.parametrize("text, expected", [
    ("['Math', 'Law']", [TaskDomain.MATH, TaskDomain.LAW]),
    ("['Med', 'Fina']", [TaskDomain.HEALTH, TaskDomain.BUSINESS]),
    ('Sure: ["business", "Health", "legal"]', [TaskDomain.BUSINESS, TaskDomain.HEALTH, TaskDomain.LAW]),
    ("<think>maybe ['Law']</think>['Law', 'Mathematics']", [TaskDomain.LAW, TaskDomain.MATH]),
    ("['Math']", None),
    ("['Math', 'Law', 'Health', 'Business']", None),
    ("['Math', 'Mathematics']", None),
    ("['Math', 'Physics']", None),
    ("Math and Law", None),
    ("[Math, Law]", None),
])
def test_parse_relevance(text, expected):
    assert parse_relevance_response(text) == expected


def test_relevance_prompt_contains_problem():
    inst = make_instances({"Law": 1})[0]
    prompt = render_relevance_prompt(inst)
    assert inst.question in prompt and "A. " in prompt and "2-3 domains" in prompt


def test_relevance_example_counts():
    instances = make_instances({"Math": 2})
    backend = ScriptedBackend({("math-000", 0): "['Math', 'Health']", ("math-001", 0): "['Math', 'Law']"})
    m = build_relevance_matrix(instances, backend, 2)
    assert [m.counts[(TaskDomain.MATH, c)] for c in TaskDomain] == [2, 0, 1, 1]
    assert m.row_bounds(TaskDomain.MATH) == (4, 6)


def test_relevance_invalid_retried_then_dropped():
    instances = make_instances({"Law": 3})
    backend = ScriptedBackend({
        ("law-000", 0): ["['Law']", "['Law', 'Business']"],
        ("law-001", 0): "['Law']",
        ("law-002", 0): "['Law', 'Health', 'Math']",
    })
    m = build_relevance_matrix(instances, backend, 3)
    assert m.dropped[TaskDomain.LAW] == 1 and m.sampled[TaskDomain.LAW] == 3
    assert m.row_total(TaskDomain.LAW) == 5
    lo, hi = m.row_bounds(TaskDomain.LAW)
    assert lo <= m.row_total(TaskDomain.LAW) <= hi
    assert len(backend.calls) == 5


def test_relevance_all_invalid():
    with pytest.raises(AnalysisError):
        build_relevance_matrix(make_instances({"Law": 2}), ScriptedBackend(default="no idea"), 2)


def test_relevance_backend_failure_propagates():
    with pytest.raises(BackendError):
        build_relevance_matrix(make_instances({"Law": 1}), ScriptedBackend(default={"error": "transport"}), 1)


def test_relevance_rejects_bad_n():
    with pytest.raises(ValueError):
        build_relevance_matrix(make_instances({"Law": 1}), ScriptedBackend(default="x"), 0)


# -- reports ----------------------------------------------------------------------------------------------------


def test_heatmap_scales_min_to_max():
    svg = heatmap_svg(["Math", "Law"], ["a", "b"], [[2, 5], [8, 2]], title="T & t")
    fills = re.findall(r'<rect x="\d+" y="\d+" width="64" height="64" fill="(#[0-9a-f]{6})"', svg)
    assert fills == ["#f7fbff", "#8096b5", "#08306b", "#f7fbff"]
    assert "T &amp; t" in svg and svg.startswith("<svg")


def test_heatmap_constant_values():
    svg = heatmap_svg(["r"], ["c"], [[3]])
    assert 'fill="#f7fbff"' in svg


def test_tables_and_summary(tmp_path):
    records = [record(f"q{k}", k % 2 == 0, group=g) for k in range(4) for g in ExpertGroup]
    matrix = compute_accuracy_matrix(records)
    doc = analysis_document(matrix, compute_alignment_deltas(matrix), compute_paradigm_comparison(matrix),
                            diversity=compute_diversity(records, HashEmbedder(8)))
    names = {p.name for p in render_tables(doc, tmp_path)}
    assert names == {"accuracy.csv", "alignment_deltas.csv", "paradigm_comparison.csv",
                     "diversity_pairs.csv", "diversity_summary.csv"}
    accuracy = (tmp_path / "accuracy.csv").read_text().splitlines()
    assert accuracy[0].startswith("task_domain,expert_group,paradigm,size,correct")
    assert accuracy[1] == "Math,Math,diversity,3,2,4,0.500000,120,30.00"
    deltas = (tmp_path / "alignment_deltas.csv").read_text().splitlines()
    assert deltas[1].split(",")[7:9] == ["0.0", "0.0"]
    summary = summary_document(doc)
    assert summary["cells"] == 4 and summary["instances"] == 16
