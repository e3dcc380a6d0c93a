"""Global semantic vector predicted from the flattened feature sequence.

The full L x C feature sequence is flattened row-major into a single vector X
of size K = L*C and pushed through two linear maps with a ReLU between them:
S = W2 relu(W1 X + b1) + b2. During training S is pulled toward the word
embedding E of the transcription by the cosine embedding loss 1 - cos(S, E).
"""

from __future__ import annotations

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import DegenerateInputError, ShapeError

ZERO_NORM_EPS = 1e-12


class SemanticHead(nn.Module):
    """Two linear functions with a ReLU: (B, L, C) -> (B, embed_dim)."""

    def __init__(self, seq_len: int, feature_dim: int, hidden: int = 512, embed_dim: int = 300):
        super().__init__()
        self.seq_len = seq_len
        self.feature_dim = feature_dim
        self.embed_dim = embed_dim
        self.fc1 = nn.Linear(seq_len * feature_dim, hidden)
        self.fc2 = nn.Linear(hidden, embed_dim)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        if features.ndim != 3 or tuple(features.shape[1:]) != (self.seq_len, self.feature_dim):
            raise ShapeError(
                f"semantic head expects (B, {self.seq_len}, {self.feature_dim}), "
                f"got {tuple(features.shape)}"
            )
        x = features.flatten(1)  # row-major over (L, C); checkpoints rely on this order
        return self.fc2(F.relu(self.fc1(x)))


def predict_semantics(features: torch.Tensor, head: SemanticHead) -> torch.Tensor:
    """Predict S for a single L x C feature sequence."""
    if features.ndim != 2:
        raise ShapeError(f"expected an (L, C) feature sequence, got {tuple(features.shape)}")
    return head(features.unsqueeze(0))[0]


def cosine_embedding_loss(predicted: torch.Tensor, embedding: torch.Tensor) -> torch.Tensor:
    """1 - cos(S, E), elementwise over a batch; scalar for 1-D inputs.

    Range [0, 2]. Zero-norm inputs indicate an untrained or corrupt vector and
    raise instead of being silently regularized away.
    """
    if predicted.shape != embedding.shape:
        raise ShapeError(
            f"semantic/embedding shapes differ: {tuple(predicted.shape)} vs {tuple(embedding.shape)}"
        )
    squeeze = predicted.ndim == 1
    s = predicted.unsqueeze(0) if squeeze else predicted
    e = embedding.unsqueeze(0) if squeeze else embedding
    s_norm = s.norm(dim=-1)
    e_norm = e.norm(dim=-1)
    if (s_norm < ZERO_NORM_EPS).any() or (e_norm < ZERO_NORM_EPS).any():
        raise DegenerateInputError("cosine embedding loss of a zero-norm vector is undefined")
    loss = 1.0 - (s * e).sum(-1) / (s_norm * e_norm)
    return loss[0] if squeeze else loss
