"""The guided decoding loop.

Per step: score the next token with the autoregressive model, add the
masked model's view of the same position (left context plus the pending
guide phrase as right context), lift the phrase's first token toward the
top-K candidate set with a linearly growing shift, sample from the top-K
softmax, and, once the first token (or its normalized word form) occurs,
splice in the rest of the phrase.

Scores are log-probabilities end to end; tie-breaking is everywhere by
ascending token id so traces are platform-stable. Sampling consumes exactly
one RNG draw per sampled token.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .align import AlignmentMap, build_alignment, project_scores
from .models import (
    AutoregressiveModel,
    MaskedModel,
    log_prob_score,
    masked_log_prob_score,
)
from .tokenization import complete_words, encode_tolerant
from .types import (
    DecodingConfig,
    GenerationState,
    GuidePhrase,
    Storyline,
    Strategy,
    WordNormalizer,
    default_normalizer,
    normalize_word,
)

__all__ = [
    "fuse_scores",
    "lambda_at_step",
    "relative_position",
    "headroom",
    "ranked_ids",
    "kth_largest",
    "boost_guide_token",
    "top_k_distribution",
    "top_k_sample",
    "detect_phrase_trigger",
    "CandidateScore",
    "BoostRecord",
    "StepDiagnostics",
    "StepProposal",
    "GenerationResult",
    "DecodingError",
    "GuidedDecoder",
]


def _as_scores(values, name: str = "scores") -> np.ndarray:
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    return arr


def fuse_scores(ar: np.ndarray, mlm_projected: np.ndarray) -> np.ndarray:
    """Elementwise sum of the autoregressive and projected masked scores."""
    ar = _as_scores(ar)
    mlm_projected = _as_scores(mlm_projected)
    if ar.shape != mlm_projected.shape:
        raise ValueError("score/vocabulary size mismatch")
    fused = ar + mlm_projected
    if not np.isfinite(fused).all():
        raise ValueError("non-finite fused scores")
    return fused


def lambda_at_step(lambda0: float, step: int, last_insertion_step: int) -> float:
    """Boost strength at ``step``: lambda0 * (steps since the last insertion)."""
    if lambda0 < 0:
        raise ValueError("lambda0 must be >= 0")
    if last_insertion_step < 0:
        raise ValueError("last_insertion_step must be >= 0")
    if step <= last_insertion_step:
        raise ValueError("step before last insertion")
    return lambda0 * (step - last_insertion_step)


def relative_position(score_w1: float, score_min: float, score_max: float) -> float:
    """Where the guide token sits in the score range, scaled to [0, 1].

    A flat score vector (max == min) is treated as position 1.0.
    """
    if not score_min <= score_w1 <= score_max:
        raise ValueError("guide-token score outside [min, max]")
    if score_max == score_min:
        return 1.0
    return (score_w1 - score_min) / (score_max - score_min)


def headroom(score_max: float, score_k: float) -> float:
    """Gap between the best score and the last top-K score."""
    if score_k > score_max:
        raise ValueError("kth score exceeds max score")
    return score_max - score_k


def ranked_ids(scores: np.ndarray) -> np.ndarray:
    """All token ids ordered by descending score, ties by ascending id."""
    scores = _as_scores(scores)
    return np.lexsort((np.arange(scores.size), -scores))


def kth_largest(scores: np.ndarray, k: int) -> float:
    """The k-th largest score (k clamped to the vector length)."""
    scores = _as_scores(scores)
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, scores.size)
    return float(np.partition(scores, scores.size - k)[scores.size - k])


def boost_guide_token(
    fused: np.ndarray, first_token_id: int, k: int, lambda_i: float
) -> np.ndarray:
    """Overwrite the guide token's fused score with s_K + lambda*alpha*delta.

    alpha is the token's relative position in the full score range, delta
    the gap between the best and the k-th score; the result places the
    token at or above the top-K boundary.
    """
    fused = _as_scores(fused)
    if not 0 <= first_token_id < fused.size:
        raise ValueError(f"unknown token id {first_token_id}")
    if k < 1:
        raise ValueError("k must be >= 1")
    s_min = float(fused.min())
    s_max = float(fused.max())
    s_k = kth_largest(fused, k)
    alpha = relative_position(float(fused[first_token_id]), s_min, s_max)
    delta = headroom(s_max, s_k)
    out = fused.copy()
    out[first_token_id] = s_k + lambda_i * alpha * delta
    return out


def top_k_distribution(
    scores: np.ndarray, k: int, temperature: float = 1.0
) -> tuple[np.ndarray, np.ndarray]:
    """Candidate ids (best first, ties by id) and their softmax probabilities."""
    scores = _as_scores(scores)
    if k < 1:
        raise ValueError("k must be >= 1")
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    candidates = ranked_ids(scores)[: min(k, scores.size)]
    logits = scores[candidates] / temperature
    if np.isnan(logits).any() or logits.max() == -np.inf:
        raise ValueError("degenerate distribution")
    weights = np.exp(logits - logits.max())
    return candidates, weights / weights.sum()


def top_k_sample(
    scores: np.ndarray, k: int, temperature: float, rng: np.random.Generator
) -> int:
    """One token id drawn from the top-K softmax; consumes one RNG draw."""
    candidates, probs = top_k_distribution(scores, k, temperature)
    cdf = np.cumsum(probs)
    cdf[-1] = 1.0
    return int(candidates[int(np.searchsorted(cdf, rng.random(), side="right"))])


def detect_phrase_trigger(
    chosen_id: int,
    current_word: str | None,
    pending: GuidePhrase,
    normalizer: WordNormalizer = default_normalizer,
) -> bool:
    """Did the pending phrase just start occurring in the text?

    True when the sampled token is exactly the phrase's first token, or when
    a just-completed word normalizes to the phrase's first word.
    """
    if chosen_id == pending.first_token_id:
        return True
    if current_word:
        return normalize_word(current_word, normalizer) == pending.normalized_first_word
    return False


@dataclass(frozen=True)
class CandidateScore:
    token_id: int
    token: str
    ar_score: float
    mlm_score: float
    fused_score: float


@dataclass(frozen=True)
class BoostRecord:
    token_id: int
    pre_boost: float
    post_boost: float
    lambda_i: float
    alpha: float
    delta: float
    applied: bool  # False when the natural fused score already won


@dataclass(frozen=True)
class StepDiagnostics:
    step: int
    chosen_id: int
    forced: bool
    top_candidates: tuple[CandidateScore, ...] = ()
    boosted: BoostRecord | None = None

    def to_json(self) -> dict:
        record: dict = {
            "step": self.step,
            "chosen_id": self.chosen_id,
            "forced": self.forced,
            "top_candidates": [
                {
                    "token_id": c.token_id,
                    "token": c.token,
                    "ar_score": c.ar_score,
                    "mlm_score": c.mlm_score,
                    "fused_score": c.fused_score,
                }
                for c in self.top_candidates
            ],
            "boosted": None,
        }
        if self.boosted is not None:
            b = self.boosted
            record["boosted"] = {
                "token_id": b.token_id,
                "pre_boost": b.pre_boost,
                "post_boost": b.post_boost,
                "lambda": b.lambda_i,
                "alpha": b.alpha,
                "delta": b.delta,
                "applied": b.applied,
            }
        return record


@dataclass(frozen=True)
class StepProposal:
    """Everything computed for one step before sampling."""

    step: int
    candidate_ids: np.ndarray
    probabilities: np.ndarray
    ar_scores: np.ndarray
    mlm_projected: np.ndarray | None
    final_scores: np.ndarray
    boosted: BoostRecord | None
    pending_index: int | None


@dataclass
class GenerationResult:
    prompt_text: str
    text: str
    prompt_ids: tuple[int, ...]
    generated_ids: tuple[int, ...]
    insertion_log: tuple[tuple[int, int], ...]
    finish_reason: str  # "budget" | "eos"
    phrases_total: int
    phrases_inserted: int
    steps: tuple[StepDiagnostics, ...] | None = None

    @property
    def unmet_phrases(self) -> int:
        return self.phrases_total - self.phrases_inserted


class DecodingError(RuntimeError):
    """Backend or state failure during decoding, tagged with the step index."""

    def __init__(self, step: int, message: str, partial: GenerationResult | None = None):
        super().__init__(f"step {step}: {message}")
        self.step = step
        self.partial = partial


class GuidedDecoder:
    """One configured decoding pipeline over an AR backend, an optional
    masked backend, and a storyline of guide phrases."""

    def __init__(
        self,
        ar_model: AutoregressiveModel,
        mlm_model: MaskedModel | None = None,
        storyline: Storyline | None = None,
        config: DecodingConfig | None = None,
        alignment: AlignmentMap | None = None,
        normalizer: WordNormalizer = default_normalizer,
    ):
        self.ar = ar_model
        self.mlm = mlm_model
        self.storyline = storyline if storyline is not None else Storyline()
        self.config = config if config is not None else DecodingConfig()
        self.normalizer = normalizer
        if self.config.strategy is not Strategy.AR_ONLY and len(self.storyline) > 0:
            if mlm_model is None:
                raise ValueError(f"strategy {self.config.strategy.value!r} needs a masked model")
        if alignment is None and mlm_model is not None:
            alignment = build_alignment(ar_model.vocabulary, mlm_model.vocabulary)
        self.alignment = alignment

    # -- per-step pipeline -------------------------------------------------

    def _pending(self, state: GenerationState) -> GuidePhrase | None:
        if state.phrase_index < len(self.storyline):
            return self.storyline[state.phrase_index]
        return None

    def _masked_projected(self, state: GenerationState, pending: GuidePhrase) -> np.ndarray:
        # The masked model sees the text in its own tokenization: left
        # context re-encoded from the AR-side text, right context the
        # pending phrase, one mask in between.
        assert self.mlm is not None and self.alignment is not None
        left_text = self.ar.tokenizer.decode(state.context_ids)
        left_ids = encode_tolerant(self.mlm.tokenizer, left_text)
        right_ids = encode_tolerant(self.mlm.tokenizer, pending.surface)
        mlm_scores = masked_log_prob_score(self.mlm, left_ids, right_ids)
        return project_scores(
            mlm_scores,
            self.alignment,
            fill=self.config.unshared_fill,
            renormalize=self.config.renormalize_shared,
        )

    def propose(self, state: GenerationState) -> StepProposal:
        """Compute the sampling distribution for the next step."""
        cfg = self.config
        if state.step >= cfg.max_new_tokens:
            raise DecodingError(state.step, "token budget exhausted")
        step = state.step + 1
        pending = self._pending(state)
        try:
            ar_scores = log_prob_score(self.ar, state.context_ids)
            mlm_projected = None
            if cfg.strategy is not Strategy.AR_ONLY and pending is not None:
                mlm_projected = self._masked_projected(state, pending)
                final = fuse_scores(ar_scores, mlm_projected)
            else:
                final = ar_scores
            boosted = None
            if cfg.strategy is Strategy.FUSION_BOOST and pending is not None:
                lam = lambda_at_step(cfg.lambda0, step, state.last_insertion_step)
                w1 = pending.first_token_id
                natural = float(final[w1])
                formula = float(boost_guide_token(final, w1, cfg.k, lam)[w1])
                # Never demote a naturally strong guide token.
                post = max(natural, formula)
                s_min, s_max = float(final.min()), float(final.max())
                boosted = BoostRecord(
                    token_id=w1,
                    pre_boost=natural,
                    post_boost=post,
                    lambda_i=lam,
                    alpha=relative_position(natural, s_min, s_max),
                    delta=headroom(s_max, kth_largest(final, cfg.k)),
                    applied=formula > natural,
                )
                final = final.copy()
                final[w1] = post
            candidates, probs = top_k_distribution(final, cfg.k, cfg.temperature)
        except DecodingError:
            raise
        except Exception as exc:
            raise DecodingError(step, str(exc)) from exc
        return StepProposal(
            step=step,
            candidate_ids=candidates,
            probabilities=probs,
            ar_scores=ar_scores,
            mlm_projected=mlm_projected,
            final_scores=final,
            boosted=boosted,
            pending_index=state.phrase_index if pending is not None else None,
        )

    def _completed_words(self, state_before: GenerationState, chosen_id: int) -> list[str]:
        if self.ar.tokenizer.word_per_token:
            return [self.ar.vocabulary.token(chosen_id)]
        before = self.ar.tokenizer.decode(state_before.generated_ids)
        after = self.ar.tokenizer.decode(list(state_before.generated_ids) + [chosen_id])
        return complete_words(after)[len(complete_words(before)):]

    def _continuation_ids(self, pending: GuidePhrase, exact_token: bool) -> list[int]:
        if exact_token:
            return list(pending.token_ids[1:])
        rest = pending.words[1:]
        if not rest:
            return []
        text = " ".join(rest)
        if not self.ar.tokenizer.word_per_token:
            text = " " + text
        return list(self.ar.tokenizer.encode(text))

    def advance(
        self, state: GenerationState, chosen_id: int, proposal: StepProposal
    ) -> tuple[GenerationState, list[StepDiagnostics]]:
        """Append the sampled token, run trigger detection, splice on trigger.

        Returns a new state; the input state is left untouched. Trigger
        detection runs only on sampled tokens, never on spliced ones, and
        only for the guided strategies: the plain-AR baseline is bare
        sampling with no insertion machinery.
        """
        cfg = self.config
        diagnostics = [self._sampled_diagnostics(proposal, chosen_id)]
        pending = self._pending(state) if cfg.strategy is not Strategy.AR_ONLY else None
        completed = self._completed_words(state, chosen_id) if pending is not None else []

        new = state.clone()
        new.generated_ids.append(chosen_id)

        if self.ar.eos_id is not None and chosen_id == self.ar.eos_id:
            return new, diagnostics

        if pending is None:
            return new, diagnostics

        exact = chosen_id == pending.first_token_id
        word_hit = not exact and any(
            detect_phrase_trigger(chosen_id, w, pending, self.normalizer) for w in completed
        )
        if not (exact or word_hit):
            return new, diagnostics

        splice = self._continuation_ids(pending, exact_token=exact)
        room = cfg.max_new_tokens - len(new.generated_ids)
        for tid in splice[:room]:
            new.generated_ids.append(tid)
            diagnostics.append(StepDiagnostics(step=new.step, chosen_id=tid, forced=True))
        if len(splice) <= room:
            # Fully inserted: log it, restart the shift schedule, move on.
            new.insertion_log.append((new.phrase_index, new.step))
            new.last_insertion_step = new.step
            new.phrase_index += 1
        return new, diagnostics

    def step(
        self, state: GenerationState, rng: np.random.Generator
    ) -> tuple[GenerationState, list[StepDiagnostics]]:
        proposal = self.propose(state)
        cdf = np.cumsum(proposal.probabilities)
        cdf[-1] = 1.0
        chosen = int(proposal.candidate_ids[int(np.searchsorted(cdf, rng.random(), side="right"))])
        return self.advance(state, chosen, proposal)

    def _sampled_diagnostics(self, proposal: StepProposal, chosen_id: int) -> StepDiagnostics:
        mlm = proposal.mlm_projected
        candidates = tuple(
            CandidateScore(
                token_id=int(tid),
                token=self.ar.vocabulary.token(int(tid)),
                ar_score=float(proposal.ar_scores[tid]),
                mlm_score=float(mlm[tid]) if mlm is not None else 0.0,
                fused_score=float(proposal.final_scores[tid]),
            )
            for tid in proposal.candidate_ids
        )
        return StepDiagnostics(
            step=proposal.step,
            chosen_id=int(chosen_id),
            forced=False,
            top_candidates=candidates,
            boosted=proposal.boosted,
        )

    # -- full generation ---------------------------------------------------

    def generate(self, prompt: str, rng: np.random.Generator | None = None) -> GenerationResult:
        """Run the loop until the token budget or an end-of-text token.

        With a fixed seed the result is byte-identical across runs.
        """
        prompt_ids = tuple(self.ar.tokenizer.encode(prompt))
        if not prompt_ids:
            raise ValueError("prompt tokenizes to nothing")
        if rng is None:
            rng = np.random.default_rng(self.config.seed)
        state = GenerationState(prompt_ids=prompt_ids)
        trace: list[StepDiagnostics] = []
        finish = "budget"
        while state.step < self.config.max_new_tokens:
            try:
                state, diags = self.step(state, rng)
            except DecodingError as err:
                err.partial = self._result(prompt, state, "error", trace)
                raise
            trace.extend(diags)
            if self.ar.eos_id is not None and state.generated_ids[-1] == self.ar.eos_id:
                finish = "eos"
                break
        return self._result(prompt, state, finish, trace)

    def _result(
        self,
        prompt: str,
        state: GenerationState,
        finish: str,
        trace: list[StepDiagnostics],
    ) -> GenerationResult:
        visible = [t for t in state.generated_ids if t != self.ar.eos_id]
        return GenerationResult(
            prompt_text=prompt,
            text=self.ar.tokenizer.decode(visible),
            prompt_ids=tuple(state.prompt_ids),
            generated_ids=tuple(state.generated_ids),
            insertion_log=tuple(state.insertion_log),
            finish_reason=finish,
            phrases_total=len(self.storyline),
            phrases_inserted=state.phrase_index,
            steps=tuple(trace) if self.config.trace else None,
        )
