"""Shared model surface: construction, losses, parameter accounting.

Every model exposes the same duck-typed interface:

- ``params``: name -> Tensor, in a fixed creation order
- ``encode(src_ids) -> state``
- ``decode_step(state, prev_id) -> (probs ndarray [V], state)``
- ``loss(src_ids, tgt_ids, rng=None, train=True) -> scalar Tensor``

States are immutable, so search code can fork them freely.  Targets always
end with the end-of-sequence id; the decoder is fed the start id plus the
target shifted right.
"""

from __future__ import annotations

import numpy as np

from ..ndiff import Tensor, gather, log_softmax, mul, sum_
from .config import ModelConfig


def sequence_nll(logits: Tensor, tgt_ids) -> Tensor:
    """Negative log-likelihood of a target sequence, summed over steps.

    logits is [T, V]; tgt_ids has length T and ends with the end id.
    """
    logp = gather(log_softmax(logits, axis=-1), tgt_ids)
    return mul(sum_(logp), Tensor(-1.0))


def build_model(config: ModelConfig, rng: np.random.Generator):
    """Instantiate the architecture named by config.arch.

    Parameters are drawn from ``rng`` in a fixed order, so equal (config,
    rng state) pairs produce bit-identical models.
    """
    # local imports: both submodules use sequence_nll from here
    if config.arch == "transformer":
        from .transformer import TransformerSeq2Seq
        return TransformerSeq2Seq(config, rng)
    from .lstm import LSTMSeq2Seq
    return LSTMSeq2Seq(config, rng)


def count_parameters(model) -> int:
    return sum(p.size for p in model.params.values())
