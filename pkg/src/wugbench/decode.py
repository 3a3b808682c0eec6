"""Decoding: greedy, beam search, ancestral sampling, forced scoring.

All functions drive a model through its ``encode``/``decode_step``
interface only, so they work for every architecture and for the table
models used in tests.  Symbol sequences in hypotheses never include the
start id; the end id is consumed (its probability counts toward the
score) but not stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import BOS, EOS
from .ndiff import no_grad
from .ndiff.tensor import ContractError


@dataclass(frozen=True)
class Hypothesis:
    """A (possibly unfinished) decoded sequence with its raw log-probability."""

    symbols: tuple[int, ...]
    logprob: float
    state: object
    finished: bool


@dataclass(frozen=True)
class ForcedScore:
    """Score of one forced target sequence.

    ``normalized_prob`` is the geometric mean per-factor probability,
    exp(raw / (k+1)) for k characters plus the end-of-sequence factor,
    so word length does not dominate comparisons between candidates.
    """

    raw_logprob: float
    normalized_prob: float
    step_logprobs: tuple[float, ...]


def default_max_len(src_ids: Sequence[int]) -> int:
    """Decode length cap: inflected forms are near source length."""
    return len(src_ids) + 10


def _log(p: float) -> float:
    return math.log(p) if p > 0.0 else -math.inf


def greedy_decode(model, src_ids, max_len: int | None = None) -> Hypothesis:
    """Follow the argmax at every step (ties break to the lowest id)."""
    if max_len is None:
        max_len = default_max_len(src_ids)
    if max_len < 1:
        raise ContractError(f"greedy_decode: max_len must be >= 1, got {max_len}")
    with no_grad():
        state = model.encode(src_ids)
        symbols: list[int] = []
        logprob = 0.0
        prev = BOS
        for _ in range(max_len):
            probs, state = model.decode_step(state, prev)
            sym = int(np.argmax(probs))
            logprob += _log(float(probs[sym]))
            if sym == EOS:
                return Hypothesis(tuple(symbols), logprob, state, True)
            symbols.append(sym)
            prev = sym
    return Hypothesis(tuple(symbols), logprob, state, False)


def sample_decode(model, src_ids, rng: np.random.Generator,
                  max_len: int | None = None) -> Hypothesis:
    """Draw one sequence from the model distribution."""
    if max_len is None:
        max_len = default_max_len(src_ids)
    with no_grad():
        state = model.encode(src_ids)
        symbols: list[int] = []
        logprob = 0.0
        prev = BOS
        for _ in range(max_len):
            probs, state = model.decode_step(state, prev)
            probs = probs / probs.sum()
            sym = int(rng.choice(len(probs), p=probs))
            logprob += _log(float(probs[sym]))
            if sym == EOS:
                return Hypothesis(tuple(symbols), logprob, state, True)
            symbols.append(sym)
            prev = sym
    return Hypothesis(tuple(symbols), logprob, state, False)


def beam_search(model, src_ids, width: int, max_len: int | None = None) -> list[Hypothesis]:
    """Beam search over raw log-probability.

    Each step expands every live hypothesis over the whole vocabulary and
    keeps the ``width`` best continuations; continuations ending in the end
    id retire to a finished pool and give up their slot.  Ranking and all
    tie-breaks are by (-logprob, symbols), so results are deterministic.
    Returns finished hypotheses best-first, or the best unfinished ones
    (flagged) if nothing finished within ``max_len`` steps.
    """
    if width < 1:
        raise ContractError(f"beam_search: width must be >= 1, got {width}")
    if max_len is None:
        max_len = default_max_len(src_ids)
    if max_len < 1:
        raise ContractError(f"beam_search: max_len must be >= 1, got {max_len}")

    with no_grad():
        live = [Hypothesis((), 0.0, model.encode(src_ids), False)]
        finished: list[Hypothesis] = []
        for _ in range(max_len):
            if not live:
                break
            candidates: list[tuple[float, tuple[int, ...], object]] = []
            for hyp in live:
                prev = hyp.symbols[-1] if hyp.symbols else BOS
                probs, state = model.decode_step(hyp.state, prev)
                with np.errstate(divide="ignore"):
                    logs = np.log(probs)
                for sym in range(len(probs)):
                    candidates.append(
                        (hyp.logprob + float(logs[sym]), hyp.symbols + (sym,), state)
                    )
            candidates.sort(key=lambda cand: (-cand[0], cand[1]))
            live = []
            for logprob, symbols, state in candidates[:width]:
                if symbols[-1] == EOS:
                    finished.append(Hypothesis(symbols[:-1], logprob, state, True))
                else:
                    live.append(Hypothesis(symbols, logprob, state, False))

    pool = finished if finished else live
    pool = sorted(pool, key=lambda h: (-h.logprob, h.symbols))
    return pool[:width]


def chained_logprobs(model, src_ids, tgt_ids) -> np.ndarray:
    """Per-step log-probabilities of a forced target via repeated decode_step."""
    with no_grad():
        state = model.encode(src_ids)
        out = np.zeros(len(tgt_ids))
        prev = BOS
        for t, sym in enumerate(tgt_ids):
            probs, state = model.decode_step(state, prev)
            out[t] = _log(float(probs[sym]))
            prev = sym
    return out


def force_score(model, src_ids, tgt_ids) -> ForcedScore:
    """Score a given target sequence (which must end with the end id).

    Uses the model's one-pass scorer when it has one; otherwise chains
    ``decode_step``.  Both routes give the same result up to rounding.
    """
    tgt_ids = list(tgt_ids)
    if not tgt_ids or tgt_ids[-1] != EOS:
        raise ContractError("force_score: target must be non-empty and end with the end id")
    if hasattr(model, "forced_logprobs"):
        with no_grad():
            steps = np.asarray(model.forced_logprobs(src_ids, tgt_ids), dtype=np.float64)
    else:
        steps = chained_logprobs(model, src_ids, tgt_ids)
    raw = float(steps.sum())
    normalized = math.exp(raw / len(tgt_ids)) if math.isfinite(raw) else 0.0
    return ForcedScore(raw, normalized, tuple(float(s) for s in steps))
