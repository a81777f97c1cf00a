"""Exact masked-language-modeling references for weighted CFG languages."""

__version__ = "0.1.0"

from .analysis import (
    MetricsReport,
    ModelFit,
    ModelMetrics,
    conditional_entropy,
    model_divergence,
    perplexity,
    sweep,
    task_divergence,
    write_sweep_csv,
)
from .datagen import Chi2Report, CorpusSpec, CorpusStats, chi2_fitness, emit_vocab, sample_corpus
from .enumeration import (
    CoverageError,
    KBestResult,
    SentenceTable,
    UnsupportedGrammarError,
    WeightedSentence,
    enumerate_to_coverage,
    kbest,
    sentence_probability,
)
from .grammar import (
    Grammar,
    GrammarError,
    Rule,
    Symbol,
    Violation,
    load_bundled,
    parse_external_grammar,
    parse_grammar,
    serialize_grammar,
    validate,
    vocabulary,
)
from .oracle import (
    ConditionalTable,
    ManifestRecord,
    MissingInstancesError,
    OrderedInstance,
    UnorderedClass,
    build_ordered,
    class_of,
    erase_order,
    export_eval_set,
    lookup_reference,
    read_manifest,
    read_predictions,
    read_reference_table,
    write_predictions,
    write_reference_table,
)

__all__ = [name for name in dir() if not name.startswith("_")]
