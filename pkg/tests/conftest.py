import numpy as np
import pytest

from tepclass.datamodel import EpochSet, RawRecording
from tepclass.montage import standard_channels


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_recording(rng):
    return RawRecording(
        channels=("Cz", "Fz"),
        fs_hz=5000.0,
        data=rng.standard_normal((2, 10)).astype(np.float32),
        pulse_samples=np.array([2, 7]),
    )


@pytest.fixture
def epochs_62(rng):
    data = rng.standard_normal((4, 62, 1500)).astype(np.float32)
    return EpochSet(standard_channels(), 1000.0, 500, data)


# one line per acceptance criterion, printed at the end of the session
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[n])
