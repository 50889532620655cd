import numpy as np
import pytest

from cova.scene import SceneConfig, generate_scene, encode_metadata


@pytest.fixture(scope="session")
def small_scene():
    """A 200-frame scene with a static object and a handful of movers."""
    cfg = SceneConfig(
        seed=3,
        num_frames=200,
        gop_length=50,
        object_spawn_rate=0.03,
        static_object_count=1,
    )
    return generate_scene(cfg)


@pytest.fixture(scope="session")
def small_stream(small_scene):
    return encode_metadata(small_scene)


@pytest.fixture(scope="session")
def busy_scene():
    """Movers with both horizontal directions inside the first half, so a
    model trained on that prefix generalizes to the later movers."""
    cfg = SceneConfig(
        seed=1,
        num_frames=200,
        gop_length=50,
        object_spawn_rate=0.04,
        static_object_count=1,
    )
    return generate_scene(cfg)


@pytest.fixture(scope="session")
def busy_stream(busy_scene):
    return encode_metadata(busy_scene)


@pytest.fixture(scope="session")
def noisy_scene():
    cfg = SceneConfig(
        seed=11,
        num_frames=120,
        gop_length=40,
        object_spawn_rate=0.03,
        static_object_count=1,
        mv_noise_sigma=0.5,
        texture_noise_rate=0.02,
    )
    return generate_scene(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(0)
