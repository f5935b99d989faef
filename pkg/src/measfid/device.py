"""Simulated noisy measurement apparatus."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import DensityMatrix, DimMismatch, MeasurementModelError, Povm, PureState, as_density
from .haar import substream

PROB_TOL = 1e-9


class BadDistribution(MeasurementModelError):
    pass


class NoOutputStates(MeasurementModelError):
    pass


class InsufficientConditionedSamples(RuntimeError):
    pass


def kahan_cumsum(p: Sequence[float]) -> np.ndarray:
    out = np.empty(len(p))
    s = c = 0.0
    for i, x in enumerate(p):
        y = x - c
        t = s + y
        c = (t - s) - y
        s = t
        out[i] = s
    return out


@dataclass(frozen=True)
class OutcomeRecord:
    outcome: int
    post_state: DensityMatrix | None = None


class NoisyDevice:
    """A POVM with optional state-independent output states ρ_k.

    The device owns its generator; use :meth:`spawn` for an independent copy
    on another sub-stream. ``shots`` counts every application of the noisy
    measurement.
    """

    def __init__(self, povm: Povm, output_states=None, seed: int = 0, stream_id: int = 0):
        self.povm = povm
        if output_states is not None:
            output_states = tuple(s if isinstance(s, DensityMatrix) else DensityMatrix(s) for s in output_states)
            if len(output_states) != povm.n_outcomes:
                raise DimMismatch("need one output state per outcome")
            if any(s.dim != povm.dim for s in output_states):
                raise DimMismatch("output state dimension differs from POVM")
        self.output_states = output_states
        self.seed = seed
        self.stream_id = stream_id
        self.rng = substream(seed, stream_id)
        self.shots = 0

    @property
    def dim(self) -> int:
        return self.povm.dim

    def spawn(self, stream_id: int) -> "NoisyDevice":
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.stream_id = stream_id
        new.rng = substream(self.seed, stream_id)
        new.shots = 0
        return new

    # -- model ------------------------------------------------------------

    def probabilities(self, state) -> np.ndarray:
        """tr(E_k σ) with rounding noise up to 1e-9 clipped and renormalized."""
        rho = as_density(state)
        if rho.shape[0] != self.dim:
            raise DimMismatch("input state dimension differs from device")
        p = self.povm.probabilities(rho)
        if p.min() < -PROB_TOL or abs(p.sum() - 1.0) > PROB_TOL:
            raise BadDistribution(f"outcome probabilities {p.tolist()} are not a distribution")
        p = np.clip(p, 0.0, None)
        return p / math.fsum(p)

    def output_state(self, k: int, state=None) -> np.ndarray:
        """ρ_k after outcome ``k``; ``state`` is ignored by this state-independent model."""
        if self.output_states is None:
            raise NoOutputStates("device has no output states configured")
        return self.output_states[k].matrix

    def output_matrices(self) -> np.ndarray:
        if self.output_states is None:
            raise NoOutputStates("device has no output states configured")
        return np.stack([s.matrix for s in self.output_states])

    def repeat_probability(self, k: int, state=None) -> float:
        """Q_k = tr(ρ_k E_k)."""
        return float(np.clip(self.probabilities(self.output_state(k, state))[k], 0.0, 1.0))

    # -- sampling ---------------------------------------------------------

    def sample(self, state, shots: int = 1) -> np.ndarray:
        """Outcome indices for ``shots`` independent measurements (inverse CDF)."""
        cdf = kahan_cumsum(self.probabilities(state))
        cdf[-1] = 1.0
        self.shots += shots
        return np.searchsorted(cdf, self.rng.random(shots), side="right")

    def count_outcome(self, state, k: int, shots: int, size: int | None = None):
        """Number of outcome-``k`` events in ``shots`` measurements, for ``size`` batches."""
        p = self.probabilities(state)[k]
        self.shots += int(np.sum(shots)) * (1 if size is None else size)
        return self.rng.binomial(shots, p, size=size)

    def outcome_counts(self, state, shots: int) -> np.ndarray:
        self.shots += shots
        return self.rng.multinomial(shots, self.probabilities(state))


def measure(dev: NoisyDevice, state) -> OutcomeRecord:
    k = int(dev.sample(state, 1)[0])
    post = None if dev.output_states is None else DensityMatrix(dev.output_state(k, state))
    return OutcomeRecord(k, post)


def measure_sequential(dev: NoisyDevice, state, repeat_on: int | None = None):
    """Measure ``state`` then re-measure the post-measurement state ρ_first.

    With ``repeat_on`` set, the second measurement happens only when the first
    outcome equals it; otherwise ``second`` is None.
    """
    if dev.output_states is None:
        raise NoOutputStates("sequential measurement needs output states")
    first = int(dev.sample(state, 1)[0])
    if repeat_on is not None and first != repeat_on:
        return first, None
    second = int(dev.sample(dev.output_state(first, state), 1)[0])
    return first, second


@dataclass(frozen=True)
class ProbeResult:
    q1: float
    q2: float
    z_score: float
    conditioned: tuple


def probe_state_dependence(
    dev_factory: Callable[[int], NoisyDevice],
    psi1: PureState,
    psi2: PureState,
    k: int,
    shots: int,
    min_conditioned: int = 100,
) -> ProbeResult:
    """Compare repeat probabilities tr(ρ_k(ψ)E_k) after inputs ψ1 and ψ2.

    ``dev_factory(i)`` returns the device used for input ``i`` (0 or 1). Each
    input is measured ``shots`` times; every outcome ``k`` is followed by a
    second measurement of the resulting state. The z score uses the pooled
    binomial variance.
    """
    qs, ms = [], []
    for i, psi in enumerate((psi1, psi2)):
        dev = dev_factory(i)
        rho_in = as_density(psi)
        m = int(dev.count_outcome(rho_in, k, shots))
        if m < min_conditioned:
            raise InsufficientConditionedSamples(f"only {m} conditioned events for input {i}")
        hits = int(dev.count_outcome(dev.output_state(k, rho_in), k, m))
        qs.append(hits / m)
        ms.append(m)
    pooled = (qs[0] * ms[0] + qs[1] * ms[1]) / (ms[0] + ms[1])
    var = pooled * (1 - pooled) * (1 / ms[0] + 1 / ms[1])
    diff = qs[0] - qs[1]
    if var == 0.0:
        z = 0.0 if diff == 0 else math.copysign(math.inf, diff)
    else:
        z = diff / math.sqrt(var)
    return ProbeResult(qs[0], qs[1], z, tuple(ms))
