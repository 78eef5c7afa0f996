import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from omseg.events import Geometry
from omseg.synth import ObjectSpec, SceneSpec, gen_scene

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.register_profile("fast", deadline=None, max_examples=10)
settings.load_profile("default")

_CRITERIA: list[str] = []


@pytest.fixture
def criterion():
    """Record a one-line PASS/FAIL (or SKIP, for ``ok=None``) verdict."""

    def record(number, ok, detail):
        verdict = "SKIP" if ok is None else "PASS" if ok else "FAIL"
        line = f"[criterion {number}] {verdict}: {detail}"
        print(line)
        _CRITERIA.append(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _CRITERIA:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_CRITERIA):
            terminalreporter.write_line(line)


EGO_ONLY_SCENE = SceneSpec(
    geometry=Geometry(128, 128),
    duration_ms=600.0,
    bg_texture_density=0.2,
    ego_velocity=(60.0, 20.0),
    seed=7,
)

OBJECT_SCENE = SceneSpec(
    geometry=Geometry(128, 128),
    duration_ms=600.0,
    bg_texture_density=0.2,
    ego_velocity=(60.0, 20.0),
    objects=(ObjectSpec(size=(40, 40), start=(20.0, 44.0), velocity=(100.0, 20.0)),),
    seed=11,
)


@pytest.fixture(scope="session")
def ego_only_scene():
    return gen_scene(EGO_ONLY_SCENE, 40.0)


@pytest.fixture(scope="session")
def object_scene():
    return gen_scene(OBJECT_SCENE, 40.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20240521)
