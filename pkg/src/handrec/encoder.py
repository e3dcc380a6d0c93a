"""Visual feature extraction: residual convolutional trunk plus BiLSTM stack.

The trunk collapses the image height to 1 while keeping a horizontal
resolution of L positions; the bidirectional LSTM turns the resulting column
features into the feature sequence h = (h_1 .. h_L) of shape L x C with
C = 2 * lstm_hidden.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigError, ShapeError


@dataclass(frozen=True)
class EncoderConfig:
    """Trunk and recurrent-stack layout.

    The paper-scale default is a 45-conv-layer residual network (stem plus
    five stages of basic blocks, 2 convs each: 1 + 2*(3+4+6+6+3) = 45) that
    maps 64x256 inputs to a 64-step sequence of 512-dim features.
    """

    input_size: tuple[int, int] = (64, 256)
    stem_channels: int = 32
    stem_stride: tuple[int, int] = (2, 1)
    stage_channels: tuple[int, ...] = (32, 64, 128, 256, 512)
    stage_units: tuple[int, ...] = (3, 4, 6, 6, 3)
    stage_strides: tuple[tuple[int, int], ...] = ((2, 2), (2, 2), (2, 1), (2, 1), (2, 1))
    lstm_hidden: int = 256
    lstm_layers: int = 2

    def __post_init__(self):
        if not (len(self.stage_channels) == len(self.stage_units) == len(self.stage_strides)):
            raise ConfigError("stage_channels, stage_units and stage_strides must align")
        h, w = self.input_size
        sh = self.stem_stride[0]
        sw = self.stem_stride[1]
        for stride_h, stride_w in self.stage_strides:
            sh *= stride_h
            sw *= stride_w
        if h % sh or h // sh != 1:
            raise ConfigError(
                f"height downsampling x{sh} must collapse input height {h} to exactly 1"
            )
        if w % sw:
            raise ConfigError(f"width downsampling x{sw} does not divide input width {w}")

    @property
    def seq_len(self) -> int:
        w = self.input_size[1] // self.stem_stride[1]
        for _, stride_w in self.stage_strides:
            w //= stride_w
        return w

    @property
    def feature_dim(self) -> int:
        return 2 * self.lstm_hidden

    @property
    def conv_layers(self) -> int:
        return 1 + 2 * sum(self.stage_units)

    @staticmethod
    def toy(input_size: tuple[int, int] = (32, 64)) -> "EncoderConfig":
        """Small configuration for CPU-scale experiments and tests."""
        return EncoderConfig(
            input_size=input_size,
            stem_channels=16,
            stem_stride=(2, 1),
            stage_channels=(16, 32, 48, 64),
            stage_units=(1, 1, 1, 1),
            stage_strides=((2, 2), (2, 2), (2, 1), (2, 1)),
            lstm_hidden=32,
            lstm_layers=2,
        )


class ResidualUnit(nn.Module):
    """Basic block: two 3x3 convolutions with a projection shortcut when needed."""

    def __init__(self, cin: int, cout: int, stride: tuple[int, int]):
        super().__init__()
        self.conv1 = nn.Conv2d(cin, cout, 3, stride=stride, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(cout)
        self.conv2 = nn.Conv2d(cout, cout, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(cout)
        if cin != cout or stride != (1, 1):
            self.shortcut = nn.Sequential(
                nn.Conv2d(cin, cout, 1, stride=stride, bias=False), nn.BatchNorm2d(cout)
            )
        else:
            self.shortcut = nn.Identity()

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return F.relu(y + self.shortcut(x))


class VisualEncoder(nn.Module):
    """Image (B, 1, H, W) -> feature sequence (B, L, C)."""

    def __init__(self, config: EncoderConfig = EncoderConfig()):
        super().__init__()
        self.config = config
        self.stem = nn.Sequential(
            nn.Conv2d(1, config.stem_channels, 3, stride=config.stem_stride, padding=1, bias=False),
            nn.BatchNorm2d(config.stem_channels),
            nn.ReLU(inplace=True),
        )
        stages = []
        cin = config.stem_channels
        for cout, units, stride in zip(
            config.stage_channels, config.stage_units, config.stage_strides
        ):
            blocks = [ResidualUnit(cin, cout, tuple(stride))]
            blocks += [ResidualUnit(cout, cout, (1, 1)) for _ in range(units - 1)]
            stages.append(nn.Sequential(*blocks))
            cin = cout
        self.stages = nn.Sequential(*stages)
        self.rnn = nn.LSTM(
            input_size=config.stage_channels[-1],
            hidden_size=config.lstm_hidden,
            num_layers=config.lstm_layers,
            bidirectional=True,
            batch_first=True,
        )

    def forward(self, images: torch.Tensor) -> torch.Tensor:
        expected = self.config.input_size
        if images.ndim != 4 or images.shape[1] != 1 or tuple(images.shape[2:]) != expected:
            raise ShapeError(
                f"encoder expects (B, 1, {expected[0]}, {expected[1]}), got {tuple(images.shape)}"
            )
        x = self.stem(images)
        x = self.stages(x)  # (B, C_conv, 1, L)
        x = x.squeeze(2).transpose(1, 2)  # (B, L, C_conv)
        features, _ = self.rnn(x)  # (B, L, 2*hidden)
        return features
