"""Transformer encoder-decoder with pre-layer-norm blocks.

Sinusoidal positions, scaled embeddings, multi-head attention, and a
final layer norm on both stacks.  Decoding recomputes the decoder over
the generated prefix each step; prefixes here are short (inflected
words), so the quadratic cost is irrelevant and the code stays simple.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..corpus import BOS
from ..ndiff import (
    Tensor,
    affine,
    add,
    dropout,
    embedding_lookup,
    layer_norm,
    mul,
    parameter,
    relu,
    reshape,
    scaled_dot_product,
    transpose,
)
from ..ndiff.tensor import ContractError
from .config import ModelConfig
from .model import sequence_nll

NEG_INF = -1e9  # additive mask value; underflows to exactly 0 after softmax


def positional_encoding(length: int, dim: int) -> np.ndarray:
    """Sinusoidal position table [length, dim]."""
    pos = np.arange(length)[:, None]
    i = np.arange(dim // 2)[None, :]
    angle = pos / np.power(10000.0, 2.0 * i / dim)
    table = np.zeros((length, dim))
    table[:, 0::2] = np.sin(angle)
    table[:, 1::2] = np.cos(angle)
    return table


def causal_mask(length: int) -> np.ndarray:
    """[length, length] additive mask hiding positions after the query's."""
    return np.triu(np.full((length, length), NEG_INF), k=1)


@dataclass(frozen=True)
class TransformerState:
    """Encoder memory plus every decoder input fed so far (starts empty;
    the first fed id is the start symbol)."""

    memory: Tensor
    prefix: tuple[int, ...]


class TransformerSeq2Seq:
    def __init__(self, config: ModelConfig, rng: np.random.Generator):
        if config.arch != "transformer":
            raise ValueError(f"config.arch is {config.arch!r}, not 'transformer'")
        self.config = config
        self.params: dict[str, Tensor] = {}
        V, D = config.vocab_size, config.d_model

        def p(name: str, data) -> Tensor:
            t = parameter(data)
            self.params[name] = t
            return t

        def linear(name: str, out_dim: int, in_dim: int) -> None:
            p(f"{name}.w", rng.normal(0.0, in_dim ** -0.5, size=(out_dim, in_dim)))
            p(f"{name}.b", np.zeros(out_dim))

        def mha(name: str) -> None:
            for part in ("q", "k", "v", "o"):
                linear(f"{name}.{part}", D, D)

        def ln(name: str) -> None:
            p(f"{name}.g", np.ones(D))
            p(f"{name}.b", np.zeros(D))

        def ffn(name: str) -> None:
            linear(f"{name}.1", config.ffn_dim, D)
            linear(f"{name}.2", D, config.ffn_dim)

        p("emb.src", rng.normal(0.0, D ** -0.5, size=(V, D)))
        p("emb.tgt", rng.normal(0.0, D ** -0.5, size=(V, D)))
        for l in range(config.enc_blocks):
            ln(f"enc.{l}.ln1")
            mha(f"enc.{l}.self")
            ln(f"enc.{l}.ln2")
            ffn(f"enc.{l}.ffn")
        ln("enc.final_ln")
        for l in range(config.dec_blocks):
            ln(f"dec.{l}.ln1")
            mha(f"dec.{l}.self")
            ln(f"dec.{l}.ln2")
            mha(f"dec.{l}.cross")
            ln(f"dec.{l}.ln3")
            ffn(f"dec.{l}.ffn")
        ln("dec.final_ln")
        linear("out", V, D)

    # -- building blocks ----------------------------------------------------

    def _ln(self, name: str, x: Tensor) -> Tensor:
        return layer_norm(x, self.params[f"{name}.g"], self.params[f"{name}.b"])

    def _mha(self, name: str, q_in: Tensor, kv_in: Tensor, mask: np.ndarray | None) -> Tensor:
        cfg = self.config
        heads, dh = cfg.heads, cfg.d_model // cfg.heads

        def split(t: Tensor) -> Tensor:
            return transpose(reshape(t, (t.shape[0], heads, dh)), (1, 0, 2))

        q = split(affine(q_in, self.params[f"{name}.q.w"], self.params[f"{name}.q.b"]))
        k = split(affine(kv_in, self.params[f"{name}.k.w"], self.params[f"{name}.k.b"]))
        v = split(affine(kv_in, self.params[f"{name}.v.w"], self.params[f"{name}.v.b"]))
        mask_t = None if mask is None else Tensor(mask)
        o = scaled_dot_product(q, k, v, mask_t)  # [heads, Tq, dh]
        o = reshape(transpose(o, (1, 0, 2)), (q_in.shape[0], cfg.d_model))
        return affine(o, self.params[f"{name}.o.w"], self.params[f"{name}.o.b"])

    def _ffn(self, name: str, x: Tensor) -> Tensor:
        h = relu(affine(x, self.params[f"{name}.1.w"], self.params[f"{name}.1.b"]))
        return affine(h, self.params[f"{name}.2.w"], self.params[f"{name}.2.b"])

    def _embed(self, table: str, ids, train: bool, rng) -> Tensor:
        cfg = self.config
        x = mul(embedding_lookup(self.params[table], ids), Tensor(math.sqrt(cfg.d_model)))
        x = add(x, Tensor(positional_encoding(len(ids), cfg.d_model)))
        return dropout(x, cfg.dropout, train, rng)

    def _encode(self, src_ids, train: bool, rng) -> Tensor:
        if len(src_ids) == 0:
            raise ContractError("encode: empty source sequence")
        cfg = self.config
        x = self._embed("emb.src", src_ids, train, rng)
        for l in range(cfg.enc_blocks):
            a = self._mha(f"enc.{l}.self", self._ln(f"enc.{l}.ln1", x),
                          self._ln(f"enc.{l}.ln1", x), None)
            x = add(x, dropout(a, cfg.dropout, train, rng))
            f = self._ffn(f"enc.{l}.ffn", self._ln(f"enc.{l}.ln2", x))
            x = add(x, dropout(f, cfg.dropout, train, rng))
        return self._ln("enc.final_ln", x)

    def _decode(self, memory: Tensor, tgt_in, train: bool, rng) -> Tensor:
        """Decoder stack over teacher-forced inputs; returns logits [T, V]."""
        cfg = self.config
        x = self._embed("emb.tgt", tgt_in, train, rng)
        mask = causal_mask(len(tgt_in))
        for l in range(cfg.dec_blocks):
            normed = self._ln(f"dec.{l}.ln1", x)
            a = self._mha(f"dec.{l}.self", normed, normed, mask)
            x = add(x, dropout(a, cfg.dropout, train, rng))
            a = self._mha(f"dec.{l}.cross", self._ln(f"dec.{l}.ln2", x), memory, None)
            x = add(x, dropout(a, cfg.dropout, train, rng))
            f = self._ffn(f"dec.{l}.ffn", self._ln(f"dec.{l}.ln3", x))
            x = add(x, dropout(f, cfg.dropout, train, rng))
        x = self._ln("dec.final_ln", x)
        return affine(x, self.params["out.w"], self.params["out.b"])

    # -- decoding interface --------------------------------------------------

    def encode(self, src_ids) -> TransformerState:
        return TransformerState(self._encode(src_ids, train=False, rng=None), ())

    def decode_step(self, state: TransformerState, prev_id: int):
        prefix = state.prefix + (int(prev_id),)
        logits = self._decode(state.memory, prefix, False, None)
        # the row for the newest position conditions on everything before it
        z = logits.data[len(prefix) - 1]
        z = z - z.max()
        e = np.exp(z)
        return e / e.sum(), TransformerState(state.memory, prefix)

    def forced_logprobs(self, src_ids, tgt_ids) -> np.ndarray:
        """log P(tgt_t | tgt_<t, src) for every position, via one causal pass."""
        memory = self._encode(src_ids, train=False, rng=None)
        tgt_in = [BOS] + list(tgt_ids[:-1])
        logits = self._decode(memory, tgt_in, False, None).data
        shifted = logits - logits.max(axis=-1, keepdims=True)
        logp = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
        return logp[np.arange(len(tgt_ids)), np.asarray(tgt_ids, dtype=np.intp)]

    # -- training ------------------------------------------------------------

    def loss(self, src_ids, tgt_ids, rng=None, train: bool = True) -> Tensor:
        memory = self._encode(src_ids, train, rng)
        tgt_in = [BOS] + list(tgt_ids[:-1])
        logits = self._decode(memory, tgt_in, train, rng)
        return sequence_nll(logits, tgt_ids)
