from .diversity import (
    DiversityReport,
    DistributionSummary,
    InstanceDiversity,
    compute_diversity,
    cosine_similarity,
    similarity_matrix,
)
from .metrics import (
    AccuracyMatrix,
    AlignmentDelta,
    AnalysisError,
    CellStats,
    ParadigmDelta,
    ScalingReport,
    ScalingRow,
    compute_accuracy_matrix,
    compute_alignment_deltas,
    compute_paradigm_comparison,
    compute_scaling_report,
    mean_relative_delta,
)
from .relevance import (
    RelevanceMatrix,
    build_relevance_matrix,
    parse_relevance_response,
    render_relevance_prompt,
)
from .report import analysis_document, heatmap_svg, render_bundle, render_tables

__all__ = [
    "AccuracyMatrix",
    "AlignmentDelta",
    "AnalysisError",
    "CellStats",
    "DistributionSummary",
    "DiversityReport",
    "InstanceDiversity",
    "ParadigmDelta",
    "RelevanceMatrix",
    "ScalingReport",
    "ScalingRow",
    "analysis_document",
    "build_relevance_matrix",
    "compute_accuracy_matrix",
    "compute_alignment_deltas",
    "compute_diversity",
    "compute_paradigm_comparison",
    "compute_scaling_report",
    "cosine_similarity",
    "heatmap_svg",
    "mean_relative_delta",
    "parse_relevance_response",
    "render_bundle",
    "render_relevance_prompt",
    "render_tables",
    "similarity_matrix",
]
