"""Synthetic degraded word-image generator.

Renders each lexicon word with sampled fonts and ink density, then degrades it
with Gaussian blur and vertical occlusion strips to imitate faint ink,
blurred strokes and incomplete characters. Words are split 80/10/10 into
disjoint train/val/test vocabularies, and every image gets a provenance record
(the exact degradation parameters drawn for it) so downstream experiments can
audit what they were trained and tested on.
"""

from __future__ import annotations

import json
import os
import unicodedata
from dataclasses import dataclass

import numpy as np
from fontTools.ttLib import TTFont
from PIL import Image, ImageDraw, ImageFilter, ImageFont

from .errors import ConfigError, DataError

BACKGROUND = 255


@dataclass(frozen=True)
class Degradations:
    """Sampling ranges for the per-image degradations."""

    blur_radius: tuple[float, float] = (0.0, 1.0)
    occlusion_count: tuple[int, int] = (0, 1)
    occlusion_width: tuple[int, int] = (2, 4)
    ink_alpha: tuple[float, float] = (0.7, 1.0)


@dataclass(frozen=True)
class SynthConfig:
    lexicon: tuple[str, ...]
    fonts: tuple[str, ...]
    samples_per_word: int = 5
    height: int = 64
    degradations: Degradations = Degradations()
    test_degradations: Degradations | None = None  # override for the test split
    val_degradations: Degradations | None = None  # override for the val split
    split_fractions: tuple[float, float] = (0.1, 0.1)  # val, test; rest is train
    seed: int = 0

    def __post_init__(self):
        if not self.fonts:
            raise ConfigError("at least one font is required")
        if not self.lexicon:
            raise ConfigError("lexicon is empty")
        if self.samples_per_word < 1:
            raise ConfigError("samples_per_word must be >= 1")


def load_lexicon(path: str) -> tuple[str, ...]:
    """One UTF-8 word per line; blank lines ignored, NFC-normalized, deduplicated."""
    if not os.path.exists(path):
        raise DataError(f"lexicon file not found: {path}")
    words = []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            word = unicodedata.normalize("NFC", line.strip())
            if word and word not in seen:
                seen.add(word)
                words.append(word)
    if not words:
        raise DataError(f"lexicon file is empty: {path}")
    return tuple(words)


def font_codepoints(font_path: str) -> set[int]:
    if not os.path.exists(font_path):
        raise DataError(f"font file not found: {font_path}")
    try:
        with TTFont(font_path, lazy=True) as font:
            return set(font.getBestCmap())
    except Exception as exc:
        raise DataError(f"cannot read font {font_path}: {exc}") from None


def check_coverage(lexicon, fonts) -> dict[str, list[str]]:
    """Map each word to the fonts that can render all of its characters.

    Raises listing the characters no font covers.
    """
    coverage = {path: font_codepoints(path) for path in fonts}
    eligible: dict[str, list[str]] = {}
    missing: set[str] = set()
    for word in lexicon:
        chars = set(word)
        ok = [p for p in fonts if all(ord(c) in coverage[p] for c in chars)]
        if ok:
            eligible[word] = ok
        else:
            missing.update(c for c in chars if not any(ord(c) in coverage[p] for p in fonts))
    if missing:
        raise DataError(
            "no font can render these characters: " + " ".join(sorted(missing))
        )
    return eligible


def render_word(word: str, font_path: str, height: int, ink_alpha: float) -> np.ndarray:
    """Render one word onto a white canvas; returns a uint8 grayscale array."""
    font = ImageFont.truetype(font_path, size=int(height * 0.55))
    probe = ImageDraw.Draw(Image.new("L", (8, 8), BACKGROUND))
    left, top, right, bottom = probe.textbbox((0, 0), word, font=font)
    text_w = max(1, right - left)
    text_h = max(1, bottom - top)
    margin = max(2, height // 8)
    width = text_w + 2 * margin
    canvas = Image.new("L", (width, height), BACKGROUND)
    draw = ImageDraw.Draw(canvas)
    ink = int(round(BACKGROUND * (1.0 - ink_alpha)))
    draw.text((margin - left, (height - text_h) // 2 - top), word, font=font, fill=ink)
    return np.asarray(canvas, dtype=np.uint8)


def _degrade(image: np.ndarray, rng: np.random.Generator, deg: Degradations) -> tuple[np.ndarray, dict]:
    record: dict = {}
    pil = Image.fromarray(image, mode="L")
    radius = float(rng.uniform(*deg.blur_radius))
    record["blur_radius"] = round(radius, 4)
    if radius > 1e-3:
        pil = pil.filter(ImageFilter.GaussianBlur(radius))
    out = np.asarray(pil, dtype=np.uint8).copy()
    count = int(rng.integers(deg.occlusion_count[0], deg.occlusion_count[1] + 1))
    strips = []
    for _ in range(count):
        width = int(rng.integers(deg.occlusion_width[0], deg.occlusion_width[1] + 1))
        width = min(width, out.shape[1])
        x = int(rng.integers(0, out.shape[1] - width + 1))
        out[:, x : x + width] = BACKGROUND
        strips.append({"x": x, "width": width})
    record["occlusions"] = strips
    return out, record


def split_words(words, fractions, rng: np.random.Generator) -> dict[str, list[str]]:
    """Disjoint train/val/test vocabularies (val/test get at least one word when n >= 3)."""
    order = list(words)
    rng.shuffle(order)
    n = len(order)
    n_val = int(n * fractions[0])
    n_test = int(n * fractions[1])
    if n >= 3:
        n_val = max(1, n_val)
        n_test = max(1, n_test)
    return {
        "val": order[:n_val],
        "test": order[n_val : n_val + n_test],
        "train": order[n_val + n_test :],
    }


def synthesize_dataset(config: SynthConfig, out_dir: str) -> dict[str, int]:
    """Write a load_dataset-layout dataset under out_dir; returns per-split counts."""
    lexicon = tuple(
        dict.fromkeys(unicodedata.normalize("NFC", w) for w in config.lexicon)
    )
    eligible = check_coverage(lexicon, config.fonts)
    image_dir = os.path.join(out_dir, "images")
    try:
        os.makedirs(image_dir, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create output directory {image_dir}: {exc}") from None

    rng = np.random.default_rng(config.seed)
    assignment = split_words(lexicon, config.split_fractions, rng)
    split_of = {w: s for s, ws in assignment.items() for w in ws}

    index_lines: dict[str, list[str]] = {"train": [], "val": [], "test": []}
    provenance = []
    overrides = {"test": config.test_degradations, "val": config.val_degradations}
    for word_idx, word in enumerate(lexicon):
        split = split_of[word]
        deg = overrides.get(split) or config.degradations
        for sample_idx in range(config.samples_per_word):
            sample_rng = np.random.default_rng([config.seed, word_idx, sample_idx])
            fonts = eligible[word]
            font_path = fonts[int(sample_rng.integers(0, len(fonts)))]
            alpha = float(sample_rng.uniform(*deg.ink_alpha))
            image = render_word(word, font_path, config.height, alpha)
            image, record = _degrade(image, sample_rng, deg)
            name = f"w{word_idx:05d}_s{sample_idx:02d}.png"
            Image.fromarray(image, mode="L").save(os.path.join(image_dir, name))
            rel = f"images/{name}"
            index_lines[split].append(f"{rel}\t{word}")
            provenance.append(
                {
                    "path": rel,
                    "word": word,
                    "split": split,
                    "font": os.path.basename(font_path),
                    "ink_alpha": round(alpha, 4),
                    **record,
                }
            )

    for split, lines in index_lines.items():
        with open(os.path.join(out_dir, f"{split}.txt"), "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line + "\n")
    with open(os.path.join(out_dir, "provenance.jsonl"), "w", encoding="utf-8") as fh:
        for rec in provenance:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")

    return {split: len(lines) for split, lines in index_lines.items()}


def default_fonts() -> tuple[str, ...]:
    """DejaVu fonts bundled with matplotlib; always present alongside this package."""
    import matplotlib

    ttf_dir = os.path.join(os.path.dirname(matplotlib.__file__), "mpl-data", "fonts", "ttf")
    names = ["DejaVuSans.ttf", "DejaVuSerif.ttf", "DejaVuSansMono.ttf"]
    return tuple(os.path.join(ttf_dir, n) for n in names if os.path.exists(os.path.join(ttf_dir, n)))
