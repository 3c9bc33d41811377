import numpy as np
import pytest

from msplab.core.cache import CacheService
from msplab.models import CalibrationSet, TokenWindowBatch
from msplab.schemas.model import ModelConfig, TrainHyper
from msplab.services.language_model import init_model, train_model, zero_model

SENTENCES = [
    b"the cat sat on the mat. ",
    b"a dog ran to the park. ",
    b"my sister reads a book. ",
    b"the bird sings at dawn. ",
]


def make_text(num_bytes: int, seed: int = 0) -> bytes:
    rng = np.random.default_rng(seed)
    parts = []
    size = 0
    while size < num_bytes:
        part = SENTENCES[int(rng.integers(len(SENTENCES)))]
        parts.append(part)
        size += len(part)
    return b"".join(parts)[:num_bytes]


@pytest.fixture
def tiny_config() -> ModelConfig:
    """d=4, h=8, two hidden blocks (L=4 prunable layers), k=2, M=4."""
    return ModelConfig(embed_dim=4, hidden_dim=8, num_hidden_blocks=2, window=2, group_size=4)


@pytest.fixture
def tiny_params(tiny_config):
    return init_model(tiny_config, seed=7)


@pytest.fixture
def zero_params(tiny_config):
    return zero_model(tiny_config)


@pytest.fixture(scope="session")
def corpus() -> bytes:
    return make_text(10_000)


@pytest.fixture(scope="session")
def trained_params(corpus):
    config = ModelConfig(embed_dim=4, hidden_dim=8, num_hidden_blocks=2, window=2, group_size=4)
    params, _ = train_model(init_model(config, seed=0), corpus[:4000], TrainHyper(lr=0.05, epochs=2, seed=0))
    return params


@pytest.fixture
def calib(corpus) -> CalibrationSet:
    return CalibrationSet.from_batch(TokenWindowBatch.from_tokens(corpus[:34], 2))


@pytest.fixture
def fitness_cache() -> CacheService:
    return CacheService()


@pytest.fixture(scope="session")
def converged_model(corpus):
    """Factory for k=8 models trained close to zero loss on the train region, cached per (seed, blocks)."""
    built = {}

    def build(seed: int, blocks: int = 2):
        if (seed, blocks) not in built:
            config = ModelConfig(embed_dim=4, hidden_dim=8, num_hidden_blocks=blocks, window=8, group_size=4)
            hyper = TrainHyper(lr=0.1, epochs=15, batch_size=64, seed=seed)
            built[seed, blocks], _ = train_model(init_model(config, seed=seed), corpus[:8000], hyper)
        return built[seed, blocks]

    return build


@pytest.fixture(scope="session")
def held_out_calib(corpus) -> CalibrationSet:
    """32 k=8 windows from the region after the training bytes."""
    return CalibrationSet.from_batch(TokenWindowBatch.from_tokens(corpus[8000:8040], 8))
