"""Grammar-aware coverage-guided greybox fuzzer."""

__version__ = "0.1.0"

from .campaign import (
    CampaignConfig,
    CampaignError,
    CampaignSummary,
    bundled_seed_dir,
    distill_corpus,
    load_seed_dir,
    run_campaign,
    strip_comments,
)
from .grammar import (
    GrammarError,
    GrammarSpec,
    Rule,
    TokenDef,
    bundled_grammar,
    load_grammar,
    load_grammar_file,
)
from .harness import ExecResult, TargetSpec, execute
from .mutate import (
    Dictionary,
    MutationBatch,
    RandomSource,
    deterministic_stages,
    dictionary_batches,
    extract_auto_tokens,
    havoc,
    splice_inputs,
    tree_mutate,
)
from .parser import (
    ParseError,
    ParseTree,
    SubtreeRef,
    enumerate_subtrees,
    excise,
    parse,
    serialize,
    splice,
)
from .trim import TrimOutcome, builtin_trim, tree_trim

# gramfuzz.report is imported on demand: it drags in matplotlib, which the
# fuzzing loop never needs

__all__ = [
    "CampaignConfig",
    "CampaignError",
    "CampaignSummary",
    "Dictionary",
    "ExecResult",
    "GrammarError",
    "GrammarSpec",
    "MutationBatch",
    "ParseError",
    "ParseTree",
    "RandomSource",
    "Rule",
    "SubtreeRef",
    "TargetSpec",
    "TokenDef",
    "TrimOutcome",
    "builtin_trim",
    "bundled_grammar",
    "bundled_seed_dir",
    "deterministic_stages",
    "dictionary_batches",
    "distill_corpus",
    "enumerate_subtrees",
    "excise",
    "execute",
    "extract_auto_tokens",
    "havoc",
    "load_grammar",
    "load_grammar_file",
    "load_seed_dir",
    "parse",
    "run_campaign",
    "serialize",
    "splice",
    "splice_inputs",
    "strip_comments",
    "tree_mutate",
    "tree_trim",
]
