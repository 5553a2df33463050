import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def block_data(rng, classes=3, per_class=4, dim=24, rank=2):
    """Noiseless union of subspaces, columns sorted by class."""
    cols = []
    for _ in range(classes):
        B, _ = np.linalg.qr(rng.standard_normal((dim, rank)))
        cols.append(B @ (rng.standard_normal((rank, per_class)) + 2.0))
    return np.hstack(cols) / 4.0, np.repeat(np.arange(classes), per_class)


@pytest.fixture(scope="session")
def small_synth():
    from mmsldl.data_io import synth_multimodal
    return synth_multimodal(classes=3, per_class=8, dim=36, rank=2, seed=4)


@pytest.fixture(scope="session")
def small_model(small_synth):
    from mmsldl.config import Hyperparams
    from mmsldl.data_io import split_indices
    from mmsldl.trainer import train

    tr, ts = split_indices(small_synth.labels, 4, seed=0)
    h = Hyperparams(max_outer_alternations=2)
    model = train(small_synth.X1[:, tr], small_synth.X2[:, tr], small_synth.labels[tr], h, ["a", "b", "c"])
    return model, tr, ts


ACCEPTANCE_LINES = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line for an acceptance criterion; returns the verdict."""

    def record(num, ok, detail):
        ACCEPTANCE_LINES[num] = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        print(ACCEPTANCE_LINES[num])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for num in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[num])
