"""Haar-random pure states, Monte Carlo and Bloch-sphere integration."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .core import NumericalFailure, PureState


def substream(seed: int, *keys: int) -> np.random.Generator:
    """Independent generator for the sub-stream ``keys`` of ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=tuple(keys))))


def haar_vectors(rng: np.random.Generator, n: int, dim: int) -> np.ndarray:
    """``n`` Haar-uniform unit vectors as rows: normalized complex Gaussians."""
    z = rng.standard_normal((n, dim)) + 1j * rng.standard_normal((n, dim))
    return z / np.linalg.norm(z, axis=1, keepdims=True)


@dataclass
class HaarSampler:
    """Reproducible stream of Haar-random states.

    Identical ``(dim, seed, stream_id)`` triples give identical sequences.
    """

    dim: int
    seed: int = 0
    stream_id: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim < 2:
            raise ValueError("Haar sampling needs dim >= 2")
        self._rng = substream(self.seed, self.stream_id)

    def sample(self) -> PureState:
        return PureState(haar_vectors(self._rng, 1, self.dim)[0])

    def sample_vectors(self, n: int) -> np.ndarray:
        return haar_vectors(self._rng, n, self.dim)


def sample_pure(s: HaarSampler) -> PureState:
    return s.sample()


def swap_operator(d: int) -> np.ndarray:
    s = np.zeros((d * d, d * d))
    for i in range(d):
        for j in range(d):
            s[i * d + j, j * d + i] = 1.0
    return s


def sym_projector(d: int) -> np.ndarray:
    """Projector (𝟙⊗𝟙 + SWAP)/2 onto the symmetric subspace of two copies."""
    if d < 2:
        raise ValueError("d must be >= 2")
    return ((np.eye(d * d) + swap_operator(d)) / 2).astype(complex)


class MCResult(NamedTuple):
    mean: float
    std_err: float
    n: int


class IntegrandError(RuntimeError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        super().__init__(f"integrand failed at sample {index}: {cause!r}")


def mc_values(
    f: Callable,
    dim: int,
    n: int,
    seed: int = 0,
    stream_id: int = 0,
    *,
    vectorized: bool = True,
    chunk: int = 65536,
    threads: int = 1,
) -> np.ndarray:
    """Evaluate ``f`` on ``n`` Haar states.

    Chunk ``c`` always draws from sub-stream ``(stream_id, c)``, so the result
    does not depend on ``threads``. A vectorized ``f`` maps an (m, dim) array of
    amplitude rows to m values; otherwise ``f`` receives one PureState at a time.
    """
    starts = list(range(0, n, chunk))

    def run(c: int) -> np.ndarray:
        lo = starts[c]
        m = min(chunk, n - lo)
        vecs = haar_vectors(substream(seed, stream_id, c), m, dim)
        if vectorized:
            try:
                return np.asarray(f(vecs), dtype=float).reshape(m)
            except Exception as exc:
                raise IntegrandError(lo, exc) from exc
        out = np.empty(m)
        for i, v in enumerate(vecs):
            try:
                out[i] = f(PureState(v))
            except Exception as exc:
                raise IntegrandError(lo + i, exc) from exc
        return out

    if threads > 1 and len(starts) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(run, range(len(starts))))
    else:
        parts = [run(c) for c in range(len(starts))]
    return np.concatenate(parts) if parts else np.empty(0)


def mc_integrate(f: Callable, s: HaarSampler, n: int, **kw) -> MCResult:
    """Sample mean and standard error of ``f`` over ``n`` Haar-random states."""
    if n < 2:
        raise ValueError("need n >= 2 samples")
    vals = mc_values(f, s.dim, n, s.seed, s.stream_id, **kw)
    return MCResult(float(np.mean(vals)), float(np.std(vals, ddof=1) / np.sqrt(n)), n)


# -- Bloch sphere -----------------------------------------------------------


class NonConvergent(NumericalFailure):
    pass


@dataclass(frozen=True)
class BlochQuadrature:
    """Product rule for (1/4π)∫∫ f sinθ dθ dφ.

    Gauss-Legendre nodes in θ on [0, π] with sinθ folded into the weights,
    times the periodic trapezoid rule in φ.
    """

    n_theta: int = 256
    n_phi: int = 256

    def nodes(self):
        x, w = np.polynomial.legendre.leggauss(self.n_theta)
        theta = (x + 1.0) * (np.pi / 2)
        wt = w * (np.pi / 2) * np.sin(theta) / 2
        phi = 2 * np.pi * np.arange(self.n_phi) / self.n_phi
        wp = np.full(self.n_phi, 1.0 / self.n_phi)
        return theta, phi, wt, wp

    def grid(self):
        """Meshgrid arrays ``theta, phi, weights`` of shape (n_theta, n_phi)."""
        theta, phi, wt, wp = self.nodes()
        th, ph = np.meshgrid(theta, phi, indexing="ij")
        return th, ph, np.outer(wt, wp)

    def refined(self) -> "BlochQuadrature":
        return BlochQuadrature(2 * self.n_theta, 2 * self.n_phi)

    def apply(self, f: Callable) -> float:
        th, ph, w = self.grid()
        return float(np.sum(np.asarray(f(th, ph), dtype=float) * w))


def bloch_states(theta, phi) -> np.ndarray:
    """Amplitudes cos(θ/2)|0⟩ + e^{iφ} sin(θ/2)|1⟩, stacked on the last axis."""
    theta = np.asarray(theta)
    phi = np.asarray(phi)
    return np.stack([np.cos(theta / 2) + 0j, np.exp(1j * phi) * np.sin(theta / 2)], axis=-1)


class QuadEstimate(NamedTuple):
    value: float
    error: float
    quad: BlochQuadrature


def bloch_quad(f: Callable, q: BlochQuadrature | None = None, *, tol: float = 1e-8, max_levels: int = 2) -> QuadEstimate:
    """Integrate ``f(theta, phi)`` and estimate the error by node doubling.

    Doubles both node counts until consecutive values differ by less than
    ``tol``; raises :class:`NonConvergent` after ``max_levels`` doublings. The
    reported error is the last difference.
    """
    q = q or BlochQuadrature()
    prev = q.apply(f)
    for _ in range(max_levels):
        q = q.refined()
        cur = q.apply(f)
        err = abs(cur - prev)
        if err < tol:
            return QuadEstimate(cur, err, q)
        prev = cur
    raise NonConvergent(f"bloch quadrature unsettled at {q.n_theta}x{q.n_phi}: last change {err:.3e}")


def bloch_integrate(f: Callable, q: BlochQuadrature | None = None, **kw) -> float:
    return bloch_quad(f, q, **kw).value


def bloch_integrate_states(g: Callable, q: BlochQuadrature | None = None, **kw) -> QuadEstimate:
    """Like :func:`bloch_quad` but ``g`` maps an (..., 2) amplitude array to values."""
    return bloch_quad(lambda th, ph: g(bloch_states(th, ph)), q, **kw)
