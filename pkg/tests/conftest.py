import numpy as np
import pytest

from hybrid_cqed import DriveConfig, SystemParams, load_preset
from hybrid_cqed.model import TWO_PI

_ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    _ACCEPTANCE[number] = (passed, detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_ACCEPTANCE):
        ok, detail = _ACCEPTANCE[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def fig2():
    return load_preset("fig2")


@pytest.fixture(scope="session")
def fig2_iii(fig2):
    return fig2.resolve("iii")


def bare_cavity(delta1_hz: float = 10e6, omega_hz: float = 3.1e6):
    """Fig. 2 cavity with both couplings switched off."""
    p, d = load_preset("fig2").resolve("iii")
    p = p.replace(chi=0.0, g_qubit=0.0)
    d = d.replace(omega_drive=p.omega_cavity - TWO_PI * delta1_hz, big_omega=TWO_PI * omega_hz)
    return p, d


@pytest.fixture
def bare():
    return bare_cavity()


def random_draw(rng: np.random.Generator, base: tuple[SystemParams, DriveConfig], spread: float = 0.5):
    """Perturb couplings, rates, mass, omega_m, the two drive detunings and Omega by up to +-spread."""
    p, d = base
    u = lambda: rng.uniform(1 - spread, 1 + spread)  # noqa: E731
    delta1 = (p.omega_cavity - d.omega_drive) * u()
    delta2 = (p.omega_qubit - d.omega_drive) * u()
    p2 = p.replace(
        omega_mech=p.omega_mech * u(),
        gamma_cavity=p.gamma_cavity * u(),
        gamma_qubit=p.gamma_qubit * u(),
        gamma_mech=p.gamma_mech * u(),
        mass=p.mass * u(),
        chi=p.chi * u(),
        g_qubit=p.g_qubit * u(),
        omega_cavity=d.omega_drive + delta1,
        omega_qubit=d.omega_drive + delta2,
    )
    d2 = d.replace(big_omega=d.big_omega * u())
    return p2, d2
