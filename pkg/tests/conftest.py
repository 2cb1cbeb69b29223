from contextlib import contextmanager

import numpy as np
import pytest

from qclsense.sensing import SensingModel, sample_model


def make_model(h, J=None, t_sense=1.0):
    h = np.asarray(h, dtype=float)
    L = h.size
    J = np.zeros((L, L)) if J is None else np.asarray(J, dtype=float)
    return SensingModel(L=L, h=h, J=J, t_sense=t_sense)


def random_state(rng, L):
    psi = rng.normal(size=2**L) + 1j * rng.normal(size=2**L)
    return psi / np.linalg.norm(psi)


def random_hermitian(rng, dim):
    A = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return (A + A.conj().T) / 2


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def model3():
    return sample_model(3, 7)


ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE] = []


@pytest.fixture
def criterion(request):
    """Context manager that records one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE]

    @contextmanager
    def check(number, name):
        info = {"detail": "", "soft": ""}
        try:
            yield info
        except BaseException as exc:
            message = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
            lines.append(f"criterion {number} [{name}]: FAIL  {message[:160]}")
            raise
        else:
            line = f"criterion {number} [{name}]: PASS  {info['detail']}"
            if info["soft"]:
                line += f"  (soft deviation: {info['soft']})"
            lines.append(line)
        finally:
            with request.config.pluginmanager.get_plugin("capturemanager").global_and_fixture_disabled():
                print("\n" + lines[-1])

    return check


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
