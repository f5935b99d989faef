import numpy as np
import pytest
from hypothesis import settings, strategies as st

from measfid.core import validate_povm

settings.register_profile("ci", deadline=None, max_examples=40)
settings.load_profile("ci")


def random_unitary(rng, d):
    z = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_effects(rng, d, n=None):
    """n random PSD effects summing to the identity (n defaults to d)."""
    n = d if n is None else n
    raw = []
    for _ in range(n):
        a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        raw.append(a @ a.conj().T)
    s = sum(raw)
    w, v = np.linalg.eigh(s)
    t = (v / np.sqrt(w)) @ v.conj().T
    eff = np.array([t @ e @ t for e in raw])
    return (eff + np.conj(np.swapaxes(eff, 1, 2))) / 2


def noisy_effects(rng, d, strength):
    """(1 − s)·ideal + s·random POVM: overlaps close to 1 for small s."""
    ideal = np.array([np.diag(np.eye(d)[k]) for k in range(d)], dtype=complex)
    return (1 - strength) * ideal + strength * random_effects(rng, d)


def random_povm(rng, d, n=None):
    return validate_povm(random_effects(rng, d, n))


seeds = st.integers(0, 2**32 - 1)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion():
    """Record one PASS/FAIL line per acceptance criterion, shown in the terminal summary."""

    def record(name, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
