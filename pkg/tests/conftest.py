import numpy as np
import pytest

from objcap import synthgen, trainer


@pytest.fixture(scope="session")
def tiny_corpus():
    """Six scenes (~15 objects) plus frame store, shared across tests."""
    scenes = synthgen.generate_corpus(6, seed=77, num_frames=12)
    objects = [o for _, _, objs in scenes for o in objs]
    frames = {spec.video_id: fr for spec, fr, _ in scenes}
    return objects, frames


@pytest.fixture(scope="session")
def fast_config():
    """Small, quick config for trainer behavior tests."""
    return trainer.TrainConfig(
        epochs=3, T_s=8, feature_dim=16, embed_dim=16, hidden_dim=24,
        attn_dim=12, enh_hidden=24, batch_size=4, seed=1)


@pytest.fixture(scope="session")
def trained_tiny(tiny_corpus, fast_config):
    objects, frames = tiny_corpus
    return trainer.train(fast_config, objects, frames)
