"""Shared fixtures: small phantoms and one analysed echo reused across modules."""

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from activepoly import phantom, pipeline

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def frozen_config():
    """Eight-frame phantom with segment 2 held still."""
    return phantom.PhantomConfig(frames=8, contraction_amplitude=0.4,
                                 per_segment_motion_scale=(1, 0, 1, 1, 1, 1))


@pytest.fixture(scope="session")
def frozen_echo(frozen_config):
    return phantom.generate_phantom(frozen_config, "frozen_seg2")


@pytest.fixture(scope="session")
def frozen_report(frozen_echo):
    seq, _ = frozen_echo
    return pipeline.process_echo(seq, keep_frames=True)


_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def criterion_log(request):
    """Collects one ``PASS``/``FAIL`` line per acceptance criterion."""
    return request.config.stash.setdefault(_ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
