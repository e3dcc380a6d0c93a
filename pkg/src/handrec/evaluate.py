"""Model evaluation, the ablation harness and the semantic-similarity analysis."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np
import torch

from .augment import preprocess
from .checkpoint import Checkpoint, load_checkpoint
from .data import Charset, WordSample, decode_tokens, reference_for_metrics
from .embeddings import EmbeddingTable, embed_word
from .errors import DataError, DegenerateInputError
from .metrics import MetricReport, SampleRecord, build_report, edit_ops
from .model import ModelConfig, Recognizer
from .semantic import ZERO_NORM_EPS
from .training import TrainConfig, TrainResult, train

ABLATION_GRID = (
    # name, attention, embedding supervision, semantic decoder init
    ("baseline", False, False, False),
    ("attention", True, False, False),
    ("attention+wes", True, True, False),
    ("attention+init", True, False, True),
    ("full", True, True, True),
)


def _batched_images(samples: list[WordSample], input_size, batch_size):
    for start in range(0, len(samples), batch_size):
        chunk = samples[start : start + batch_size]
        arrays = [preprocess(s.image_path, size=input_size) for s in chunk]
        yield chunk, torch.from_numpy(np.stack(arrays)).unsqueeze(1)


def evaluate(
    checkpoint: Checkpoint,
    samples: list[WordSample],
    beam_width: int = 5,
    batch_size: int = 32,
) -> MetricReport:
    """Decode every sample with the checkpointed model and aggregate metrics."""
    if not samples:
        raise DataError("evaluation set is empty")
    if beam_width < 1:
        raise DataError(f"beam width must be >= 1, got {beam_width}")
    model = checkpoint.build_model()
    charset = checkpoint.charset
    records = []
    with torch.no_grad():
        for chunk, images in _batched_images(samples, model.config.input_size, batch_size):
            hypotheses = model.recognize(images, beam_width=beam_width)
            for sample, hyp in zip(chunk, hypotheses):
                reference = reference_for_metrics(sample.transcription, charset)
                hypothesis = decode_tokens(hyp.token_ids, charset)
                ops = edit_ops(reference, hypothesis)
                records.append(
                    SampleRecord(
                        path=sample.image_path,
                        reference=reference,
                        hypothesis=hypothesis,
                        distance=ops.distance,
                        reference_length=ops.reference_length,
                    )
                )
    return build_report(records)


def similarity_matrix(
    model: Recognizer,
    samples: list[WordSample],
    lexicon: list[str],
    table: EmbeddingTable,
    batch_size: int = 32,
) -> np.ndarray:
    """Cosine similarity between each image's predicted semantics and each lexicon word.

    Returns an (images x words) matrix with entries in [-1, 1].
    """
    if not samples or not lexicon:
        raise DataError("similarity analysis needs at least one image and one word")
    word_vectors = np.stack([embed_word(w, table) for w in lexicon]).astype(np.float64)
    word_norms = np.linalg.norm(word_vectors, axis=1)
    if (word_norms < ZERO_NORM_EPS).any():
        raise DegenerateInputError("a lexicon word embedding has zero norm")
    model.eval()
    rows = []
    with torch.no_grad():
        for _, images in _batched_images(samples, model.config.input_size, batch_size):
            semantics = model.predict_semantics(images).double().numpy()
            norms = np.linalg.norm(semantics, axis=1)
            if (norms < ZERO_NORM_EPS).any():
                raise DegenerateInputError("predicted semantic vector has zero norm")
            rows.append(semantics @ word_vectors.T / np.outer(norms, word_norms))
    return np.concatenate(rows, axis=0)


@dataclass
class AblationRow:
    variant: str
    attention: bool
    embedding_supervision: bool
    semantic_init: bool
    seed: int
    wer: float
    cer: float

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def run_ablation(
    train_samples: list[WordSample],
    val_samples: list[WordSample],
    test_samples: list[WordSample],
    embeddings: EmbeddingTable,
    model_config: ModelConfig,
    train_config: TrainConfig,
    variants=ABLATION_GRID,
    seeds=(0,),
    charset: Charset | None = None,
    progress=None,
) -> list[AblationRow]:
    """Train every (variant, seed) with shared data and report test WER/CER.

    Variant rows toggle the attention mechanism, the embedding supervision
    (loss weight zeroed) and the semantic decoder initialization.
    """
    rows = []
    for name, attention, wes, sem_init in variants:
        for seed in seeds:
            variant_model = dataclasses.replace(
                model_config, use_attention=attention, semantic_init=sem_init
            )
            variant_train = dataclasses.replace(
                train_config,
                seed=seed,
                embedding_loss_weight=train_config.embedding_loss_weight if wes else 0.0,
                out_dir=f"{train_config.out_dir}/{name.replace('+', '_')}_seed{seed}",
            )
            if progress:
                progress(f"training variant={name} seed={seed}")
            result: TrainResult = train(
                train_samples, val_samples, embeddings, variant_model, variant_train,
                charset=charset,
            )
            report = evaluate(
                load_checkpoint(result.best_path),
                test_samples,
                beam_width=train_config.beam_width,
            )
            rows.append(
                AblationRow(
                    variant=name,
                    attention=attention,
                    embedding_supervision=wes,
                    semantic_init=sem_init,
                    seed=seed,
                    wer=report.wer,
                    cer=report.cer,
                )
            )
    return rows


def mean_wer_by_variant(rows: list[AblationRow]) -> dict[str, float]:
    sums: dict[str, list[float]] = {}
    for row in rows:
        sums.setdefault(row.variant, []).append(row.wer)
    return {name: sum(v) / len(v) for name, v in sums.items()}
