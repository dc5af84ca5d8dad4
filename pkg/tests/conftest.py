import numpy as np
import pytest

from adiff.model import DiffExplainer, ModelConfig
from adiff.tagger import AudioEncoder, EncoderConfig


def tiny_config(**overrides) -> ModelConfig:
    base = dict(
        dim=16,
        audio_prefix_len=2,
        text_prefix_len=3,
        proj_depth=1,
        cross_depth=1,
        decoder_depth=1,
        heads=2,
        vocab_size=258,
        encoder_dim=8,
        mapper_const_len=2,
        cross_const_len=2,
        mlp_mult=2,
        max_context=64,
    )
    base.update(overrides)
    return ModelConfig(**base)


def tiny_model(seed: int = 0, **overrides) -> DiffExplainer:
    config = tiny_config(**overrides)
    enc_cfg = EncoderConfig(mels=6, hidden=config.encoder_dim, classes=("beep", "noise"))
    encoder = AudioEncoder(enc_cfg, rng=np.random.default_rng(seed))
    return DiffExplainer(config, encoder, seed=seed)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture
def model():
    return tiny_model()


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance pass/fail lines after the run, when any ran."""
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
