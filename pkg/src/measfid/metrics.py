"""Average measurement fidelity and its closed-form lower bounds."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Sequence

import numpy as np

from .core import DimMismatch, NumericalFailure, OutOfRange, Povm, Rank1Pvm, fidelity_batch, overlaps
from .haar import BlochQuadrature, bloch_quad, bloch_states, mc_values

if TYPE_CHECKING:
    from .device import NoisyDevice


@dataclass(frozen=True)
class Quadrature:
    """Bloch-sphere quadrature integrator (d = 2 only)."""

    quad: BlochQuadrature = BlochQuadrature()
    tol: float = 1e-6
    max_levels: int = 2


@dataclass(frozen=True)
class MonteCarlo:
    n: int = 1_000_000
    seed: int = 0
    stream_id: int = 0
    threads: int = 1


def default_integrator(dim: int):
    return Quadrature() if dim == 2 else MonteCarlo()


@dataclass(frozen=True)
class FidelityResult:
    value: float
    method: str  # "quadrature" | "monte_carlo" | "closed_form"
    std_err: float = 0.0
    quad_error: float = 0.0
    details: dict = field(default_factory=dict, compare=False)

    @property
    def uncertainty(self) -> float:
        """One-sigma MC error or the quadrature doubling difference."""
        return max(self.std_err, self.quad_error)


@dataclass(frozen=True)
class MeasurementError:
    value: float
    method: str
    std_err: float = 0.0


def avg_error(f):
    """Average measurement error 1 − F̄ (float in, float out)."""
    if isinstance(f, FidelityResult):
        return MeasurementError(1.0 - f.value, f.method, f.std_err)
    return 1.0 - float(f)


def _integrate(g, dim: int, integrator):
    """Integrate a vectorized functional of amplitude rows; returns (mean, std_err, quad_err)."""
    if isinstance(integrator, Quadrature):
        if dim != 2:
            raise DimMismatch("Bloch quadrature only covers d = 2")
        est = bloch_quad(lambda th, ph: g(bloch_states(th, ph)), integrator.quad,
                         tol=integrator.tol, max_levels=integrator.max_levels)
        return est.value, 0.0, est.error
    if isinstance(integrator, MonteCarlo):
        vals = mc_values(lambda v: g(v), dim, integrator.n, integrator.seed, integrator.stream_id,
                         threads=integrator.threads)
        return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(vals.size)), 0.0
    raise TypeError(f"unknown integrator {integrator!r}")


def _probs(pvm: Rank1Pvm, povm: Povm, v: np.ndarray):
    """Ideal p_k and noisy r_k for amplitude rows ``v`` (..., d) → (..., d) each."""
    p = np.abs(v @ pvm.basis.conj()) ** 2
    r = np.einsum("...i,kij,...j->...k", v.conj(), povm.effects, v).real
    return p, np.clip(r, 0.0, None)


def infidelity(p, r):
    """1 − (Σ√(p_k r_k))² for normalized p and r along the last axis.

    Uses Σ√(p r) = 1 − H with H = ½Σ(√p − √r)², so the small quantity is
    computed directly and an ideal device gives exactly 0.
    """
    h = 0.5 * np.sum((np.sqrt(p) - np.sqrt(r)) ** 2, axis=-1)
    return h * (2.0 - h)


def _check_pair(pvm: Rank1Pvm, povm: Povm):
    if povm.dim != pvm.dim or povm.n_outcomes != pvm.dim:
        raise DimMismatch("POVM must have d outcomes on the PVM's d-dimensional space")


def avg_fidelity_probs(pvm: Rank1Pvm, povm: Povm, integrator=None) -> FidelityResult:
    """Haar average of (Σ_k √(p_k r_k))², the probabilities-only fidelity.

    The component Σ_k ∫ p_k r_k is checked against its exact value
    (Σu_k + d)/(d(d+1)); a mismatch beyond integrator error raises
    :class:`NumericalFailure`.
    """
    _check_pair(pvm, povm)
    d = pvm.dim
    integrator = integrator or default_integrator(d)

    def infid(v):
        return infidelity(*_probs(pvm, povm, v))

    def first(v):
        p, r = _probs(pvm, povm, v)
        return np.sum(p * r, axis=-1)

    loss, se, qe = _integrate(infid, d, integrator)
    value = 1.0 - loss
    f1, se1, qe1 = _integrate(first, d, integrator)
    exact1 = (overlaps(pvm, povm).sum() + d) / (d * (d + 1))
    if abs(f1 - exact1) > 4 * se1 + 10 * qe1 + 1e-9:
        raise NumericalFailure(f"first-sum check failed: integrated {f1!r}, exact {exact1!r}")
    method = "quadrature" if isinstance(integrator, Quadrature) else "monte_carlo"
    return FidelityResult(float(np.clip(value, 0.0, 1.0)), method, se, qe,
                          {"first_sum": f1, "first_sum_exact": exact1, "first_sum_std_err": se1})


def avg_fidelity_states(pvm: Rank1Pvm, device: "NoisyDevice", integrator=None) -> FidelityResult:
    """Haar average of F(Σ r_k ρ_k, Σ p_k Π_k) with state-independent outputs ρ_k."""
    povm = device.povm
    _check_pair(pvm, povm)
    rho = device.output_matrices()
    d = pvm.dim
    proj = pvm.projectors
    integrator = integrator or default_integrator(d)

    def fid(v):
        shape = v.shape[:-1]
        p, r = _probs(pvm, povm, v.reshape(-1, d))
        noisy = np.einsum("nk,kij->nij", r.astype(complex), rho)
        ideal = np.einsum("nk,kij->nij", p.astype(complex), proj)
        return fidelity_batch(noisy, ideal).reshape(shape)

    value, se, qe = _integrate(fid, d, integrator)
    method = "quadrature" if isinstance(integrator, Quadrature) else "monte_carlo"
    return FidelityResult(float(np.clip(value, 0.0, 1.0)), method, se, qe)


# -- closed-form bounds -------------------------------------------------------


# overlaps computed from valid effects can overshoot [0, 1] by rounding
ROUNDING = 1e-12


def _unit_interval(name: str, x) -> np.ndarray:
    a = np.asarray(x, dtype=float).ravel()
    if a.size == 0:
        raise OutOfRange(f"{name} is empty")
    if np.any(~np.isfinite(a)) or np.any(a < -ROUNDING) or np.any(a > 1 + ROUNDING):
        raise OutOfRange(f"{name} entries must lie in [0, 1], got {a.tolist()}")
    return np.clip(a, 0.0, 1.0)


@dataclass(frozen=True)
class BoundInputs:
    u: tuple
    q: tuple | None = None

    def __post_init__(self):
        u = _unit_interval("u", self.u)
        object.__setattr__(self, "u", tuple(u.tolist()))
        if self.q is not None:
            q = _unit_interval("q", self.q)
            if q.size != u.size:
                raise DimMismatch("u and q lengths differ")
            object.__setattr__(self, "q", tuple(q.tolist()))

    @property
    def dim(self) -> int:
        return len(self.u)


def _inputs(x, q=None) -> BoundInputs:
    return x if isinstance(x, BoundInputs) else BoundInputs(tuple(np.ravel(x)), None if q is None else tuple(np.ravel(q)))


def lower_bound_probs(inputs: BoundInputs | Sequence[float]) -> float:
    """lb = (d + Σu_k + Σ_{l≠m} √(u_l u_m)) / (d(d+1))."""
    b = _inputs(inputs)
    u = np.array(b.u)
    d = u.size
    # deficit form: with e_k = 1 − √u_k and ē their mean, 1 − X̄ = ē(2 − ē);
    # keeps full relative precision in 1 − lb when every u_k is close to 1
    e = (1.0 - u) / (1.0 + np.sqrt(u))
    ebar = math.fsum(e) / d
    return float(1.0 - d * (ebar * (2.0 - ebar)) / (d + 1))


def lower_bound_probs_xbar(inputs: BoundInputs | Sequence[float]) -> float:
    """The same bound written as (1 + d·X̄)/(1 + d), X̄ = (Σ√u_l)²/d²."""
    u = np.array(_inputs(inputs).u)
    d = u.size
    xbar = np.sqrt(np.outer(u, u)).sum() / d**2
    return float((1 + d * xbar) / (1 + d))


def lower_bound_states(inputs: BoundInputs) -> float:
    """(1 + d·Z̄)/(1 + d) with Z̄ = (Σ_l √(u_l Q_l))²/d²."""
    b = inputs if isinstance(inputs, BoundInputs) else BoundInputs(*inputs)
    if b.q is None:
        raise OutOfRange("repeat probabilities q are required")
    u, q = np.array(b.u), np.array(b.q)
    d = u.size
    zbar = np.sum(np.sqrt(u * q)) ** 2 / d**2
    return float((1 + d * zbar) / (1 + d))


def upper_bound_error(lb: float) -> float:
    return 1.0 - lb


def closed_form_bound(pvm: Rank1Pvm, povm: Povm) -> FidelityResult:
    return FidelityResult(lower_bound_probs(overlaps(pvm, povm)), "closed_form")
