import os
import sys

import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

from greencell.config import NetworkConfig, load_config

settings.register_profile("default", deadline=None, max_examples=50,
                          derandomize=True)
settings.load_profile("default")

CONFIG_PATH = os.path.join(os.path.dirname(__file__), "..", "configs", "baseline.json")

_acceptance_lines: list[str] = []


def record_criterion(number: int, passed: bool, detail: str) -> None:
    status = "PASS" if passed else "FAIL"
    _acceptance_lines.append(f"{status} criterion {number}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance_lines:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for line in sorted(_acceptance_lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def baseline_cfg() -> NetworkConfig:
    """The shipped calibrated config; session-scoped, it is frozen anyway."""
    return load_config(CONFIG_PATH)


@pytest.fixture(scope="session")
def small_cfg() -> NetworkConfig:
    """A cheap chain (T=3, N=4) for tests where dimensions do not matter."""
    return NetworkConfig(
        p0_static=56.0,
        delta_p=2.6,
        p_trans=6.3,
        n_channels=4,
        t_levels=3,
        lambda_b=1.0,
        lambda_u1=5.0,
        lambda_p=1.0,
        lambda_u2=1.0,
        hotspot_radius=2.0,
        alpha=4.0,
        noise_power=1e-7,
        tau=0.1,
        mu=2.0,
        omega=1.0,
        nu=40.0,
        static_drain_override=25.0,
    )
