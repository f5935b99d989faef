import numpy as np
import pytest
from hypothesis import given, strategies as st

from conftest import seeds
from measfid.haar import (
    BlochQuadrature,
    HaarSampler,
    IntegrandError,
    NonConvergent,
    bloch_integrate,
    bloch_quad,
    bloch_states,
    mc_integrate,
    mc_values,
    sym_projector,
)


def test_sampler_reproducible_and_streams_differ():
    a = HaarSampler(3, seed=7).sample_vectors(4)
    b = HaarSampler(3, seed=7).sample_vectors(4)
    c = HaarSampler(3, seed=7, stream_id=1).sample_vectors(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


@given(seeds, st.integers(2, 6))
def test_samples_are_unit_vectors(seed, d):
    v = HaarSampler(d, seed=seed).sample_vectors(50)
    assert np.allclose(np.linalg.norm(v, axis=1), 1.0)


def test_mc_values_independent_of_threads():
    f = lambda v: np.abs(v[:, 0]) ** 2
    one = mc_values(f, 3, 5000, seed=1, chunk=1000)
    four = mc_values(f, 3, 5000, seed=1, chunk=1000, threads=4)
    assert np.array_equal(one, four)


@pytest.mark.parametrize("d", [2, 3, 5])
def test_first_moment_is_maximally_mixed(d):
    v = HaarSampler(d, seed=3).sample_vectors(200_000)
    rho = np.einsum("ni,nj->ij", v, v.conj()) / len(v)
    assert np.max(np.abs(rho - np.eye(d) / d)) < 5e-3


def test_sym_projector_properties():
    for d in (2, 3, 4):
        p = sym_projector(d)
        assert np.allclose(p @ p, p)
        assert np.trace(p).real == pytest.approx(d * (d + 1) / 2)


def test_mc_integrate_reports_error():
    res = mc_integrate(lambda v: np.abs(v[:, 0]) ** 2, HaarSampler(4, seed=2), 40_000)
    assert abs(res.mean - 0.25) < 4 * res.std_err
    assert res.n == 40_000


def test_integrand_error_carries_index():
    def bad(state):
        raise RuntimeError("boom")

    with pytest.raises(IntegrandError) as info:
        mc_values(bad, 2, 10, vectorized=False)
    assert info.value.index == 0


def test_bloch_states_poles():
    assert np.allclose(bloch_states(0.0, 0.3), [1, 0])
    assert np.allclose(bloch_states(np.pi, 0.0), [0, 1])


def test_quadrature_weights_normalized():
    _, _, w = BlochQuadrature(32, 16).grid()
    assert w.sum() == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize(
    "f,expected",
    [
        (lambda th, ph: np.cos(th / 2) ** 2, 0.5),
        (lambda th, ph: np.cos(th / 2) ** 4, 1 / 3),
        (lambda th, ph: np.cos(th / 2) ** 2 * np.sin(th / 2) ** 2, 1 / 6),
        (lambda th, ph: np.sin(th) * np.cos(ph), 0.0),
    ],
)
def test_quadrature_exact_on_polynomials(f, expected):
    # Haar moments of a qubit: E|<0|psi>|^2k = 1/(k+1)
    assert bloch_integrate(f, BlochQuadrature(32, 32)) == pytest.approx(expected, abs=1e-14)


def test_bloch_quad_doubling_estimate():
    est = bloch_quad(lambda th, ph: np.sqrt(np.cos(th / 2) ** 2 + 0.01), BlochQuadrature(64, 8))
    assert est.error < 1e-8


def test_bloch_quad_nonconvergent_raises():
    rough = lambda th, ph: (np.cos(th) > 0.3).astype(float)
    with pytest.raises(NonConvergent):
        bloch_quad(rough, BlochQuadrature(8, 8), tol=1e-12, max_levels=1)
