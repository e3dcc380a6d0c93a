"""Shared fixtures: a tiny synthesized dataset and one overfit training run.

The overfit run backs several expensive checks (evaluation oracle, the
similarity analysis, the acceptance smoke test), so it is trained once per
session.
"""

import os

import numpy as np
import pytest

from handrec.augment import AugmentSettings
from handrec.data import load_dataset, split_samples
from handrec.embeddings import SubwordConfig, ToyCorpus, train_skipgram
from handrec.model import ModelConfig
from handrec.synth import Degradations, SynthConfig, default_fonts, synthesize_dataset
from handrec.training import TrainConfig, train

WORDS_50 = """cat dog sun moon bird fish tree rock wind rain
cloud star leaf stone river ocean mount field grass snow
frost light night morning evening spring summer autumn winter storm
thunder flame ember ash dust sand clay iron gold silver
copper glass paper cloth thread needle hammer blade wheel rope""".split()


def make_sentences(words, count=30, length=8, seed=3):
    rng = np.random.default_rng(seed)
    return [list(rng.permutation(words))[:length] for _ in range(count)]


def toy_embeddings(words, dim=32, seed=0):
    corpus = ToyCorpus(make_sentences(words), context_window=2)
    return train_skipgram(corpus, SubwordConfig(2, 4), dim=dim, epochs=3, seed=seed)


@pytest.fixture(scope="session")
def fonts():
    paths = default_fonts()
    assert paths, "bundled DejaVu fonts not found"
    return paths


@pytest.fixture(scope="session")
def small_dataset(tmp_path_factory, fonts):
    """Ten easy words, three samples each; quick to train on."""
    root = tmp_path_factory.mktemp("smallset")
    config = SynthConfig(
        lexicon=tuple(WORDS_50[:10]),
        fonts=fonts,
        samples_per_word=3,
        degradations=Degradations(blur_radius=(0.0, 0.3), occlusion_count=(0, 0)),
        seed=5,
    )
    counts = synthesize_dataset(config, str(root))
    splits = split_samples(load_dataset(str(root)))
    return {"root": str(root), "counts": counts, "splits": splits}


@pytest.fixture(scope="session")
def overfit_run(tmp_path_factory, fonts):
    """Synthesize the 50-word set and train the full toy model until it
    memorizes its training split (or 200 epochs, whichever comes first)."""
    root = tmp_path_factory.mktemp("overfit")
    data_dir = os.path.join(root, "data")
    config = SynthConfig(
        lexicon=tuple(WORDS_50),
        fonts=fonts,
        samples_per_word=2,
        degradations=Degradations(
            blur_radius=(0.0, 0.4), occlusion_count=(0, 0), ink_alpha=(0.85, 1.0)
        ),
        seed=11,
    )
    counts = synthesize_dataset(config, data_dir)
    splits = split_samples(load_dataset(data_dir))
    table = toy_embeddings(WORDS_50)
    model_config = ModelConfig.toy(embed_dim=table.dimension)
    train_config = TrainConfig(
        epochs=200,
        batch_size=16,
        seed=0,
        augmentation=AugmentSettings.disabled(),
        save_every=0,
        early_stop_wer=0.02,
        out_dir=os.path.join(root, "run"),
    )
    result = train(splits["train"], splits["train"], table, model_config, train_config)
    return {
        "data_dir": data_dir,
        "counts": counts,
        "splits": splits,
        "table": table,
        "model_config": model_config,
        "train_config": train_config,
        "result": result,
        "lexicon": list(WORDS_50),
    }
