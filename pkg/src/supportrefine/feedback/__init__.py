"""Multifaceted helpfulness feedback: facets, judges, prompts and annotation."""
from .annotate import AnnotationResult, FeedbackCache, annotate_candidates, read_feedback, write_feedback
from .coherence import CoherenceExample, synthesize_coherence_data, write_coherence_data
from .facets import (FACET_CLASSES, FACETS, HELPFUL, UNHELPFUL, UNHELPFUL_CLASS, AggregationError, Facet,
                     FacetVerdict, FeedbackRecord, aggregate)
from .judges import (AnnotationError, Judge, JudgeConfig, RemoteJudge, RuleOracleJudge, classify_facet,
                     make_judge)
from .prompts import PROMPT_VERSIONS, UnknownPromptVersion, UnparseableOutput, build_prompt, parse_class
