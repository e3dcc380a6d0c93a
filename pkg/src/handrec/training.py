"""Joint loss and the end-to-end training loop.

The objective is the sum of a per-token cross-entropy over the decoder steps
(PAD positions excluded) and a weighted cosine embedding loss pulling the
predicted semantic vector toward the transcription's word embedding. The loop
runs mini-batch Adadelta with gradient clipping, evaluates the validation
split with greedy decoding every epoch, appends a structured metrics record,
and keeps both a rolling last checkpoint and the best-by-validation-WER one.

Reproducibility: model init is seeded, the shuffle order of epoch e derives
from (seed, e), and the augmentation of sample i in epoch e derives from
(seed, e, i), so identical configs produce identical runs.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np
import torch
import torch.nn.functional as F

from .augment import AugmentSettings, augment, load_image, normalize, resize_bilinear
from .checkpoint import save_checkpoint
from .data import (
    PAD,
    Charset,
    WordSample,
    build_charset,
    decode_tokens,
    encode_transcription,
    reference_for_metrics,
)
from .embeddings import EmbeddingTable, embed_word
from .errors import CoverageError, DataError, NumericError
from .metrics import cer, wer
from .model import ModelConfig, Recognizer
from .semantic import cosine_embedding_loss


@dataclass
class LossBreakdown:
    """Recognition and embedding terms with their weighted sum (kept as tensors)."""

    recognition: torch.Tensor  # cross-entropy over non-PAD steps
    embedding: torch.Tensor  # mean cosine embedding loss
    weight: float
    total: torch.Tensor


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 50
    batch_size: int = 64
    learning_rate: float = 1.0
    rho: float = 0.95
    eps: float = 1e-8
    embedding_loss_weight: float = 1.0  # the balance between cross-entropy and cosine terms
    grad_clip: float = 5.0
    beam_width: int = 5
    seed: int = 0
    augmentation: AugmentSettings = field(default_factory=AugmentSettings)
    early_stop_wer: float | None = None  # stop once validation WER reaches this
    save_every: int = 1  # per-epoch checkpoint files; 0 keeps only last/best
    val_every: int = 1  # validation cadence in epochs
    out_dir: str = "run"

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["augmentation"] = dataclasses.asdict(self.augmentation)
        return data


@dataclass
class TrainResult:
    charset: Charset
    history: list[dict]
    best_path: str
    last_path: str
    model: Recognizer


def total_loss(
    step_logits: torch.Tensor,
    targets: torch.Tensor,
    semantics: torch.Tensor,
    embeddings: torch.Tensor,
    weight: float,
) -> LossBreakdown:
    """L = L_r + weight * L_e over one batch; raises on non-finite values."""
    vocab = step_logits.shape[-1]
    recognition = F.cross_entropy(
        step_logits.reshape(-1, vocab), targets.reshape(-1), ignore_index=PAD
    )
    embedding = cosine_embedding_loss(semantics, embeddings).mean()
    total = recognition + weight * embedding
    if not torch.isfinite(total):
        raise NumericError(
            f"non-finite loss: recognition={recognition.item()} embedding={embedding.item()}"
        )
    return LossBreakdown(recognition=recognition, embedding=embedding, weight=weight, total=total)


def pad_targets(token_lists: list[list[int]], device=None) -> torch.Tensor:
    width = max(len(t) for t in token_lists)
    out = torch.full((len(token_lists), width), PAD, dtype=torch.long, device=device)
    for i, tokens in enumerate(token_lists):
        out[i, : len(tokens)] = torch.tensor(tokens, dtype=torch.long, device=device)
    return out


class _SampleCache:
    """Resized [0,1] float images kept in memory; decoding happens once."""

    def __init__(self, input_size: tuple[int, int]):
        self.input_size = input_size
        self._cache: dict[str, np.ndarray] = {}

    def get(self, path: str) -> np.ndarray:
        hit = self._cache.get(path)
        if hit is None:
            hit = resize_bilinear(load_image(path), *self.input_size)
            self._cache[path] = hit
        return hit


def embedding_cache(words, table: EmbeddingTable) -> dict[str, torch.Tensor]:
    """Embed each distinct word once; coverage problems surface here, before training."""
    cache = {}
    for word in words:
        if word not in cache:
            cache[word] = torch.from_numpy(np.asarray(embed_word(word, table), dtype=np.float32))
    return cache


def evaluate_split(
    model: Recognizer,
    samples: list[WordSample],
    charset: Charset,
    cache: _SampleCache,
    batch_size: int,
    beam_width: int = 1,
) -> tuple[float, float]:
    """Greedy/beam decode a split; returns (cer, wer) with UNK-normalized references."""
    was_training = model.training
    model.eval()
    pairs = []
    with torch.no_grad():
        for start in range(0, len(samples), batch_size):
            chunk = samples[start : start + batch_size]
            images = torch.from_numpy(
                np.stack([normalize(cache.get(s.image_path)) for s in chunk])
            ).unsqueeze(1)
            hypotheses = model.recognize(images, beam_width=beam_width)
            for sample, hyp in zip(chunk, hypotheses):
                reference = reference_for_metrics(sample.transcription, charset)
                pairs.append((reference, decode_tokens(hyp.token_ids, charset)))
    if was_training:
        model.train()
    return cer(pairs), wer(pairs)


def train(
    train_samples: list[WordSample],
    val_samples: list[WordSample],
    embeddings: EmbeddingTable,
    model_config: ModelConfig,
    config: TrainConfig,
    charset: Charset | None = None,
) -> TrainResult:
    """Run the full training loop; writes checkpoints and metrics.jsonl under out_dir."""
    if not train_samples:
        raise DataError("training set is empty")
    if embeddings.dimension != model_config.embed_dim:
        raise CoverageError(
            f"embedding dimension {embeddings.dimension} != model embed_dim {model_config.embed_dim}"
        )
    charset = charset or build_charset(train_samples)

    # fail on coverage problems before any epoch runs
    for sample in train_samples:
        encode_transcription(sample.transcription, charset)
    embed_cache = embedding_cache((s.transcription for s in train_samples), embeddings)

    torch.manual_seed(config.seed)
    model = Recognizer(model_config, len(charset))
    model.train()
    optimizer = torch.optim.Adadelta(
        model.parameters(), lr=config.learning_rate, rho=config.rho, eps=config.eps
    )

    os.makedirs(config.out_dir, exist_ok=True)
    metrics_path = os.path.join(config.out_dir, "metrics.jsonl")
    last_path = os.path.join(config.out_dir, "last.ckpt")
    best_path = os.path.join(config.out_dir, "best.ckpt")
    if os.path.exists(metrics_path):
        os.remove(metrics_path)

    cache = _SampleCache(model_config.input_size)
    targets_by_index = [
        encode_transcription(s.transcription, charset) for s in train_samples
    ]
    augmenting = any(
        p > 0
        for p in (
            config.augmentation.p_affine,
            config.augmentation.p_elastic,
            config.augmentation.p_brightness,
            config.augmentation.p_contrast,
        )
    )

    history: list[dict] = []
    best_wer = float("inf")
    train_config_snapshot = config.to_dict()

    for epoch in range(1, config.epochs + 1):
        epoch_start = time.time()
        order = np.random.default_rng([config.seed, epoch]).permutation(len(train_samples))
        sums = {"l_r": 0.0, "l_e": 0.0, "total": 0.0}
        seen = 0
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start : start + config.batch_size]
            arrays = []
            for i in batch_idx:
                img = cache.get(train_samples[i].image_path)
                if augmenting:
                    img = augment(img, config.augmentation, [config.seed, epoch, int(i)])
                arrays.append(normalize(img))
            images = torch.from_numpy(np.stack(arrays)).unsqueeze(1)
            targets = pad_targets([targets_by_index[i] for i in batch_idx])
            batch_embeddings = torch.stack(
                [embed_cache[train_samples[i].transcription] for i in batch_idx]
            )

            logits, semantics = model(images, targets)
            loss = total_loss(
                logits, targets, semantics, batch_embeddings, config.embedding_loss_weight
            )
            optimizer.zero_grad()
            loss.total.backward()
            if config.grad_clip > 0:
                torch.nn.utils.clip_grad_norm_(model.parameters(), config.grad_clip)
            optimizer.step()

            n = len(batch_idx)
            sums["l_r"] += loss.recognition.item() * n
            sums["l_e"] += loss.embedding.item() * n
            sums["total"] += loss.total.item() * n
            seen += n

        record = {
            "epoch": epoch,
            "l_r": sums["l_r"] / seen,
            "l_e": sums["l_e"] / seen,
            "total": sums["total"] / seen,
        }
        validate_now = val_samples and (
            epoch % max(config.val_every, 1) == 0 or epoch == config.epochs
        )
        if validate_now:
            val_cer, val_wer = evaluate_split(
                model, val_samples, charset, cache, config.batch_size
            )
            record["val_cer"] = val_cer
            record["val_wer"] = val_wer
        record["seconds"] = round(time.time() - epoch_start, 3)
        history.append(record)
        with open(metrics_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record) + "\n")

        save_checkpoint(last_path, model, charset, epoch, history, train_config_snapshot)
        if config.save_every and epoch % config.save_every == 0:
            save_checkpoint(
                os.path.join(config.out_dir, f"epoch_{epoch:03d}.ckpt"),
                model,
                charset,
                epoch,
                history,
                train_config_snapshot,
            )
        current_wer = record.get("val_wer")
        if not val_samples:
            # no selection signal: the freshest weights are the best guess
            save_checkpoint(best_path, model, charset, epoch, history, train_config_snapshot)
        elif current_wer is not None and current_wer < best_wer:
            best_wer = current_wer
            save_checkpoint(best_path, model, charset, epoch, history, train_config_snapshot)
        if (
            config.early_stop_wer is not None
            and current_wer is not None
            and current_wer <= config.early_stop_wer
        ):
            break

    return TrainResult(
        charset=charset, history=history, best_path=best_path, last_path=last_path, model=model
    )
