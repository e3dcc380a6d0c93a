"""Assembled recognizer: presets, forward contracts, decode round trip."""

import pytest
import torch

from handrec.data import EOS
from handrec.errors import ConfigError, ShapeError
from handrec.model import ModelConfig, Recognizer


class TestPresets:
    def test_paper_preset_shapes(self):
        """Full-scale configuration: 64x256 input -> 64x512 features -> 300-d S."""
        torch.manual_seed(0)
        config = ModelConfig.paper()
        model = Recognizer(config, vocab_size=120)
        model.eval()
        images = torch.rand(1, 1, 64, 256) * 2 - 1
        with torch.no_grad():
            features = model.forward_features(images)
            semantics = model.semantic_head(features)
            logits, _ = model(images, torch.tensor([[4, EOS]]))
        assert features.shape == (1, 64, 512)
        assert semantics.shape == (1, 300)
        assert logits.shape == (1, 2, 120)

    def test_toy_preset_recognize_round_trip(self):
        torch.manual_seed(1)
        model = Recognizer(ModelConfig.toy(embed_dim=16), vocab_size=10)
        model.eval()
        images = torch.rand(3, 1, 32, 64) * 2 - 1
        hyps = model.recognize(images, beam_width=2)
        assert len(hyps) == 3
        for hyp in hyps:
            assert all(0 <= t < 10 for t in hyp.token_ids)

    def test_wrong_input_size_rejected(self):
        torch.manual_seed(2)
        model = Recognizer(ModelConfig.toy(embed_dim=16), vocab_size=10)
        with pytest.raises(ShapeError):
            model(torch.zeros(1, 1, 64, 256), torch.tensor([[4, EOS]]))

    def test_tiny_vocab_rejected(self):
        with pytest.raises(ConfigError):
            Recognizer(ModelConfig.toy(), vocab_size=4)

    def test_rectifier_can_be_disabled(self):
        import dataclasses

        torch.manual_seed(3)
        config = dataclasses.replace(ModelConfig.toy(embed_dim=16), use_rectifier=False)
        model = Recognizer(config, vocab_size=10)
        assert model.rectifier is None
        model.eval()
        with torch.no_grad():
            features = model.forward_features(torch.rand(1, 1, 32, 64))
        assert features.shape == (1, 16, 64)
