import numpy as np
import pytest

from abcd.belief import Sample, initialize

# A fixed observational batch for a 2-variable system with a saturating
# X0 -> X1 dependence (values frozen so every test sees the same belief).
OBS_2D = [
    (0.277, 0.501),
    (-0.123, -0.691),
    (-0.096, -0.633),
    (-0.943, -1.614),
    (1.133, 1.626),
]

OBS_3D = [
    (0.277, 0.501, 0.944),
    (-0.123, -0.691, -1.246),
    (-0.096, -0.633, -1.120),
    (-0.943, -1.614, -1.832),
    (1.133, 1.626, 1.953),
    (0.521, 0.917, 1.406),
]


@pytest.fixture(scope="session")
def bivariate_belief():
    obs = [Sample(values=v) for v in OBS_2D]
    return initialize(obs, seed=101)


@pytest.fixture(scope="session")
def chain_belief():
    obs = [Sample(values=v) for v in OBS_3D]
    return initialize(obs, seed=202)


@pytest.fixture()
def announce(request):
    """One pass/fail line per acceptance criterion, visible despite capture."""

    def _announce(name: str, ok: bool, detail: str = "") -> None:
        line = f"ACCEPTANCE {name}: {'PASS' if ok else 'FAIL'}" + (
            f" | {detail}" if detail else ""
        )
        capman = request.config.pluginmanager.getplugin("capturemanager")
        if capman is not None:
            with capman.global_and_fixture_disabled():
                print(f"\n{line}", flush=True)
        else:
            print(line, flush=True)

    return _announce
