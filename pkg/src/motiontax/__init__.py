"""motiontax: manipulation-motion codes, functional-unit graph statistics,
and Gaussian-mixture divergence analysis of force recordings."""

from .taxonomy import (
    MotionCode,
    MotionLexicon,
    CodeDistanceWeights,
    parse_code,
    render_code,
    validate,
    enumerate_legal_codes,
    code_distance,
    lookup,
    consolidate,
    load_lexicon,
)
from .foon import (
    FoonGraph,
    FunctionalUnit,
    ObjectNode,
    MotionNode,
    FrequencyReport,
    parse_foon,
    node_counts,
    motion_frequency,
    top_k_coverage,
    annotate_motions,
)
from .ftdata import (
    ForceTrial,
    SampleMatrix,
    load_trials,
    pool_samples,
    standardize,
    synth_generate,
)
from .gmm import (
    GaussianComponent,
    GaussianMixture,
    EmConfig,
    FitReport,
    fit_em,
    log_pdf,
    gauss_kl,
    variational_kl,
    mc_kl,
    symmetric_divergence,
    sample_mixture,
    load_mixture,
    save_mixture,
)
from .analysis import (
    DivergenceMatrix,
    ConsistencyReport,
    divergence_matrix,
    cluster_consistency,
    rank_correlation,
    export_matrix_csv,
    import_matrix_csv,
    export_heatmap,
)

__version__ = "0.1.0"
