"""Bias metrics and debiasing kernels for language-model outputs.

The engine is framework-independent: model outputs arrive as NDJSON
interchange records (embeddings, pseudo-loglikelihood scores, masked-slot
probabilities, generated completions, attention weights) and every metric
and loss kernel is a pure function over them.
"""

__version__ = "0.1.0"

from .debias_ops import (
    BiasSubspace,
    CounterfactualLexicon,
    cda_augment,
    fit_bias_subspace,
    project_out,
    select_unfrozen,
)
from .embed_metrics import (
    WeatInputs,
    WeatResult,
    association_score,
    group_embeddings,
    weat,
    weat_effect_size,
    weat_permutation_pvalue,
)
from .gentext_metrics import DemLexicon, dem_rep, honest, normalize_and_distance, stereo_assoc, tokenize
from .interchange import (
    AttentionRecord,
    Catalog,
    CompletionRecord,
    EmbeddingRecord,
    MaskedSlotRecord,
    PLLRecord,
    iter_records,
    list_datasets,
    load_catalog,
    load_dataset,
    parse_records,
    write_records,
)
from .prob_metrics import aul, cbs, cps, lpbs, pll_bias_rate

__all__ = [
    "__version__",
    "AttentionRecord",
    "BiasSubspace",
    "Catalog",
    "CompletionRecord",
    "CounterfactualLexicon",
    "DemLexicon",
    "EmbeddingRecord",
    "MaskedSlotRecord",
    "PLLRecord",
    "WeatInputs",
    "WeatResult",
    "association_score",
    "aul",
    "cbs",
    "cda_augment",
    "cps",
    "dem_rep",
    "fit_bias_subspace",
    "group_embeddings",
    "honest",
    "iter_records",
    "list_datasets",
    "load_catalog",
    "load_dataset",
    "lpbs",
    "normalize_and_distance",
    "parse_records",
    "pll_bias_rate",
    "project_out",
    "select_unfrozen",
    "stereo_assoc",
    "tokenize",
    "weat",
    "weat_effect_size",
    "weat_permutation_pvalue",
    "write_records",
]
