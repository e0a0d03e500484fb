"""Guided decoding: steer autoregressive sampling through guide phrases by
fusing masked-model scores and boosting phrase tokens into the top-K set."""

from .align import AlignmentMap, build_alignment, load_vocabulary, project_scores
from .decoder import (
    BoostRecord,
    CandidateScore,
    DecodingError,
    GenerationResult,
    GuidedDecoder,
    StepDiagnostics,
    StepProposal,
    boost_guide_token,
    detect_phrase_trigger,
    fuse_scores,
    headroom,
    kth_largest,
    lambda_at_step,
    ranked_ids,
    relative_position,
    top_k_distribution,
    top_k_sample,
)
from .metrics import (
    MeasureStats,
    PhraseOutcome,
    RunMeasures,
    aggregate,
    measure_run,
    perplexity,
    repetition,
    success_rate,
)
from .models import (
    AutoregressiveModel,
    MaskedModel,
    ScorerModel,
    log_prob_score,
    log_softmax,
    masked_log_prob_score,
    sequence_log_prob,
)
from .oracle import oracle_advance, oracle_step_distribution
from .tokenization import ByteLevelBPETokenizer, Tokenizer, WordTokenizer
from .toy import TableARModel, TableMLMModel, load_toy_pair
from .types import (
    DecodingConfig,
    GenerationState,
    GuidePhrase,
    Storyline,
    Strategy,
    Vocabulary,
    default_normalizer,
    normalize_word,
)

__version__ = "0.1.0"
