"""Attention GRU decoder with semantic state initialization.

A single-layer unidirectional GRU attends over the visual feature sequence h
with additive (Bahdanau) attention: e_i = v . tanh(W s + U h_i), softmaxed
into weights whose h-average is the context. The global semantic vector S
initializes the GRU state through a learned projection, which is how word
meaning enters the decoding loop. Greedy and beam decoding share the same
step function; beams rank by total log-probability without length
normalization, ties broken by earlier EOS, then by the lexicographically
smaller token sequence, so every run is reproducible.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .data import BOS, EOS
from .errors import CoverageError, DataError, ShapeError


@dataclass
class Hypothesis:
    """A decoded sequence: character-token ids (BOS/EOS excluded), joint log-prob."""

    token_ids: tuple[int, ...]
    log_prob: float
    finished: bool


@dataclass
class _Beam:
    tokens: tuple[int, ...]
    log_prob: float
    state: torch.Tensor | None
    finished: bool
    eos_step: float  # step index of EOS emission, inf while unfinished

    def key(self):
        return (-self.log_prob, self.eos_step, self.tokens)


class AttentionDecoder(nn.Module):
    def __init__(
        self,
        vocab_size: int,
        enc_dim: int,
        sem_dim: int,
        hidden: int = 512,
        attn_dim: int = 512,
        emb_dim: int = 512,
        use_attention: bool = True,
        semantic_init: bool = True,
        max_len: int = 32,
    ):
        super().__init__()
        self.vocab_size = vocab_size
        self.hidden = hidden
        self.use_attention = use_attention
        self.semantic_init = semantic_init
        self.max_len = max_len
        self.embedding = nn.Embedding(vocab_size, emb_dim)
        self.init_proj = nn.Linear(sem_dim, hidden)
        self.attn_state = nn.Linear(hidden, attn_dim)
        self.attn_enc = nn.Linear(enc_dim, attn_dim)
        self.attn_score = nn.Linear(attn_dim, 1, bias=False)
        self.cell = nn.GRUCell(emb_dim + enc_dim, hidden)
        self.out = nn.Linear(hidden + enc_dim, vocab_size)

    def init_state(self, semantics: torch.Tensor) -> torch.Tensor:
        """(B, sem_dim) -> (B, hidden): tanh-squashed learned projection of S.

        With semantic initialization ablated the decoder starts from zeros.
        """
        if semantics.ndim != 2 or semantics.shape[1] != self.init_proj.in_features:
            raise ShapeError(
                f"expected (B, {self.init_proj.in_features}) semantics, got {tuple(semantics.shape)}"
            )
        if not self.semantic_init:
            return semantics.new_zeros(semantics.shape[0], self.hidden)
        return torch.tanh(self.init_proj(semantics))

    def attend(self, state: torch.Tensor, features: torch.Tensor):
        """Additive attention scores over L positions -> (context (B,C), weights (B,L))."""
        if not self.use_attention:
            # ablation: mean context, i.e. uniform weights
            length = features.shape[1]
            weights = features.new_full((features.shape[0], length), 1.0 / length)
            return features.mean(dim=1), weights
        scores = self.attn_score(
            torch.tanh(self.attn_state(state).unsqueeze(1) + self.attn_enc(features))
        ).squeeze(-1)
        weights = F.softmax(scores, dim=-1)
        context = torch.bmm(weights.unsqueeze(1), features).squeeze(1)
        return context, weights

    def step(self, state: torch.Tensor, prev_ids: torch.Tensor, features: torch.Tensor):
        """One decode step: returns (logits (B,V), new_state (B,hidden), weights (B,L))."""
        if prev_ids.min() < 0 or prev_ids.max() >= self.vocab_size:
            raise CoverageError(
                f"token id out of vocabulary [0, {self.vocab_size}): {prev_ids.tolist()}"
            )
        context, weights = self.attend(state, features)
        gru_in = torch.cat([self.embedding(prev_ids), context], dim=-1)
        new_state = self.cell(gru_in, state)
        logits = self.out(torch.cat([new_state, context], dim=-1))
        return logits, new_state, weights

    def teacher_forced(
        self, features: torch.Tensor, semantics: torch.Tensor, targets: torch.Tensor
    ) -> torch.Tensor:
        """Per-step logits (B, T, V); step t conditions on the gold token t-1 (BOS at t=0)."""
        if targets.ndim != 2 or targets.shape[1] == 0:
            raise DataError(f"targets must be (B, T>=1), got {tuple(targets.shape)}")
        state = self.init_state(semantics)
        prev = targets.new_full((targets.shape[0],), BOS)
        steps = []
        for t in range(targets.shape[1]):
            logits, state, _ = self.step(state, prev, features)
            steps.append(logits)
            prev = targets[:, t]
        return torch.stack(steps, dim=1)

    @torch.no_grad()
    def greedy(self, features: torch.Tensor, semantics: torch.Tensor, max_len: int | None = None) -> Hypothesis:
        """Argmax decoding of a single sample: features (L, C), semantics (sem_dim,)."""
        max_len = max_len or self.max_len
        feats = features.unsqueeze(0)
        state = self.init_state(semantics.unsqueeze(0))
        prev = features.new_full((1,), BOS, dtype=torch.long)
        tokens: list[int] = []
        log_prob = 0.0
        finished = False
        for _ in range(max_len):
            logits, state, _ = self.step(state, prev, feats)
            log_probs = F.log_softmax(logits[0], dim=-1)
            token = int(torch.argmax(log_probs).item())
            log_prob += float(log_probs[token].item())
            if token == EOS:
                finished = True
                break
            tokens.append(token)
            prev = prev.new_full((1,), token)
        return Hypothesis(token_ids=tuple(tokens), log_prob=log_prob, finished=finished)

    @torch.no_grad()
    def beam_search(
        self,
        features: torch.Tensor,
        semantics: torch.Tensor,
        width: int = 5,
        max_len: int | None = None,
    ) -> list[Hypothesis]:
        """Beam decoding of a single sample; returns hypotheses best-first.

        features (L, C), semantics (sem_dim,). Hypotheses end at EOS (the EOS
        emission probability is part of the score) or at max_len.
        """
        if width < 1:
            raise ShapeError(f"beam width must be >= 1, got {width}")
        max_len = max_len or self.max_len
        feats = features.unsqueeze(0)
        state = self.init_state(semantics.unsqueeze(0))
        beams = [_Beam(tokens=(), log_prob=0.0, state=state, finished=False, eos_step=math.inf)]
        keep = min(width, self.vocab_size)
        for step_idx in range(max_len):
            live = [b for b in beams if not b.finished]
            if not live:
                break
            candidates = [b for b in beams if b.finished]
            states = torch.cat([b.state for b in live], dim=0)
            prev = torch.tensor(
                [b.tokens[-1] if b.tokens else BOS for b in live],
                dtype=torch.long,
                device=features.device,
            )
            logits, new_states, _ = self.step(states, prev, feats.expand(len(live), -1, -1))
            log_probs = F.log_softmax(logits, dim=-1)
            top_lp, top_ids = torch.topk(log_probs, keep, dim=-1)
            for i, beam in enumerate(live):
                for lp, token in zip(top_lp[i].tolist(), top_ids[i].tolist()):
                    total = beam.log_prob + lp
                    if token == EOS:
                        candidates.append(
                            _Beam(beam.tokens, total, None, True, eos_step=step_idx)
                        )
                    else:
                        candidates.append(
                            _Beam(
                                beam.tokens + (token,),
                                total,
                                new_states[i : i + 1],
                                False,
                                math.inf,
                            )
                        )
            candidates.sort(key=_Beam.key)
            beams = candidates[:width]
        beams.sort(key=_Beam.key)
        return [
            Hypothesis(token_ids=b.tokens, log_prob=b.log_prob, finished=b.finished)
            for b in beams[:width]
        ]
