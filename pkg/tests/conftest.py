import numpy as np
import pytest

from tactopath.imageproc import ImageU8


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(12345))


def random_image(rng, w=16, h=12, channels=3) -> ImageU8:
    arr = rng.integers(0, 256, size=(h, w, channels), dtype=np.uint8)
    return ImageU8.from_array(arr)


# Verdict lines recorded by the acceptance gate (tests/test_acceptance.py);
# echoed after the run so they survive pytest's fd-level output capture.
ACCEPTANCE_VERDICTS: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_VERDICTS:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_VERDICTS:
            terminalreporter.write_line(line)
