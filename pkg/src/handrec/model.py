"""Full recognizer: rectifier -> encoder -> semantic head + attention decoder."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import torch
import torch.nn as nn

from .decoder import AttentionDecoder, Hypothesis
from .encoder import EncoderConfig, VisualEncoder
from .errors import ConfigError, ShapeError
from .rectify import Rectifier
from .semantic import SemanticHead


@dataclass(frozen=True)
class ModelConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    num_control_points: int = 20
    loc_input_size: tuple[int, int] = (32, 128)
    loc_channels: tuple[int, ...] = (16, 32, 64, 128)
    loc_fc_hidden: int = 256
    semantic_hidden: int = 512
    embed_dim: int = 300
    decoder_hidden: int = 512
    attn_dim: int = 512
    token_emb_dim: int = 512
    max_len: int = 32
    use_rectifier: bool = True
    use_attention: bool = True
    semantic_init: bool = True

    @property
    def input_size(self) -> tuple[int, int]:
        return self.encoder.input_size

    @staticmethod
    def paper(embed_dim: int = 300) -> "ModelConfig":
        return ModelConfig(embed_dim=embed_dim)

    @staticmethod
    def toy(embed_dim: int = 32, input_size: tuple[int, int] = (32, 64)) -> "ModelConfig":
        """CPU-scale configuration used by tests and desk experiments."""
        return ModelConfig(
            encoder=EncoderConfig.toy(input_size=input_size),
            num_control_points=12,
            loc_input_size=(16, 64),
            loc_channels=(8, 16, 32),
            loc_fc_hidden=64,
            semantic_hidden=64,
            embed_dim=embed_dim,
            decoder_hidden=64,
            attn_dim=64,
            token_emb_dim=32,
            max_len=24,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @staticmethod
    def from_dict(data: dict) -> "ModelConfig":
        def tup(x):
            return tuple(tup(v) if isinstance(v, list) else v for v in x)

        enc_raw = dict(data["encoder"])
        for key, value in enc_raw.items():
            if isinstance(value, list):
                enc_raw[key] = tup(value)
        rest = {k: v for k, v in data.items() if k != "encoder"}
        for key, value in rest.items():
            if isinstance(value, list):
                rest[key] = tup(value)
        return ModelConfig(encoder=EncoderConfig(**enc_raw), **rest)


class Recognizer(nn.Module):
    """End-to-end word recognizer over a fixed charset."""

    def __init__(self, config: ModelConfig, vocab_size: int):
        super().__init__()
        if vocab_size < 5:
            raise ConfigError(f"vocab size {vocab_size} leaves no room for characters")
        self.config = config
        self.vocab_size = vocab_size
        self.rectifier = (
            Rectifier(
                num_points=config.num_control_points,
                output_size=config.input_size,
                loc_input_size=config.loc_input_size,
                loc_channels=config.loc_channels,
                loc_fc_hidden=config.loc_fc_hidden,
            )
            if config.use_rectifier
            else None
        )
        self.encoder = VisualEncoder(config.encoder)
        self.semantic_head = SemanticHead(
            seq_len=config.encoder.seq_len,
            feature_dim=config.encoder.feature_dim,
            hidden=config.semantic_hidden,
            embed_dim=config.embed_dim,
        )
        self.decoder = AttentionDecoder(
            vocab_size=vocab_size,
            enc_dim=config.encoder.feature_dim,
            sem_dim=config.embed_dim,
            hidden=config.decoder_hidden,
            attn_dim=config.attn_dim,
            emb_dim=config.token_emb_dim,
            use_attention=config.use_attention,
            semantic_init=config.semantic_init,
            max_len=config.max_len,
        )

    def forward_features(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 1, H, W) -> feature sequence (B, L, C), rectifying first.

        Inputs must already be preprocessed to the configured size; the
        rectifier resamples to the same frame, so the check happens here.
        """
        expected = self.config.input_size
        if images.ndim != 4 or images.shape[1] != 1 or tuple(images.shape[2:]) != expected:
            raise ShapeError(
                f"recognizer expects (B, 1, {expected[0]}, {expected[1]}), got {tuple(images.shape)}"
            )
        if self.rectifier is not None:
            images = self.rectifier(images)
        return self.encoder(images)

    def forward(self, images: torch.Tensor, targets: torch.Tensor):
        """Teacher-forced pass: returns (step logits (B, T, V), semantics (B, D))."""
        features = self.forward_features(images)
        semantics = self.semantic_head(features)
        logits = self.decoder.teacher_forced(features, semantics, targets)
        return logits, semantics

    @torch.no_grad()
    def predict_semantics(self, images: torch.Tensor) -> torch.Tensor:
        return self.semantic_head(self.forward_features(images))

    @torch.no_grad()
    def recognize(
        self, images: torch.Tensor, beam_width: int = 5, max_len: int | None = None
    ) -> list[Hypothesis]:
        """Decode a batch; beam_width 1 uses the greedy path."""
        features = self.forward_features(images)
        semantics = self.semantic_head(features)
        results = []
        for i in range(images.shape[0]):
            if beam_width == 1:
                results.append(self.decoder.greedy(features[i], semantics[i], max_len))
            else:
                results.append(
                    self.decoder.beam_search(features[i], semantics[i], beam_width, max_len)[0]
                )
        return results
