"""Checkpoint archive: one zip holding binary parameter blobs plus plain-text metadata.

Layout (documented contract):
  meta.json   UTF-8 JSON: format_version, charset characters, embedding
              dimension, model config, training config snapshot, epoch,
              per-epoch metrics history
  params.pt   torch-serialized state_dict of the full recognizer
"""

from __future__ import annotations

import io
import json
import zipfile
from dataclasses import dataclass, field

import torch

from .data import Charset
from .errors import DataError
from .model import ModelConfig, Recognizer

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    model_config: ModelConfig
    charset: Charset
    state_dict: dict
    epoch: int = 0
    history: list[dict] = field(default_factory=list)
    train_config: dict | None = None

    @property
    def embed_dim(self) -> int:
        return self.model_config.embed_dim

    def build_model(self) -> Recognizer:
        model = Recognizer(self.model_config, len(self.charset))
        model.load_state_dict(self.state_dict)
        model.eval()
        return model


def save_checkpoint(path: str, model: Recognizer, charset: Charset, epoch: int,
                    history: list[dict] | None = None, train_config: dict | None = None) -> None:
    meta = {
        "format_version": FORMAT_VERSION,
        "charset": charset.characters,
        "embed_dim": model.config.embed_dim,
        "model_config": model.config.to_dict(),
        "train_config": train_config,
        "epoch": epoch,
        "history": history or [],
    }
    buffer = io.BytesIO()
    torch.save(model.state_dict(), buffer)
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        archive.writestr("meta.json", json.dumps(meta, ensure_ascii=False, indent=1))
        archive.writestr("params.pt", buffer.getvalue())


def load_checkpoint(path: str) -> Checkpoint:
    try:
        with zipfile.ZipFile(path) as archive:
            meta = json.loads(archive.read("meta.json").decode("utf-8"))
            params = archive.read("params.pt")
    except (OSError, zipfile.BadZipFile, KeyError) as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from None
    version = meta.get("format_version")
    if version != FORMAT_VERSION:
        raise DataError(f"{path}: unsupported checkpoint format version {version!r}")
    if not meta.get("charset"):
        raise DataError(f"{path}: checkpoint has an empty charset")
    state_dict = torch.load(io.BytesIO(params), map_location="cpu", weights_only=True)
    return Checkpoint(
        model_config=ModelConfig.from_dict(meta["model_config"]),
        charset=Charset(meta["charset"]),
        state_dict=state_dict,
        epoch=meta.get("epoch", 0),
        history=meta.get("history", []),
        train_config=meta.get("train_config"),
    )
